#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "eac/geom.hpp"
#include "eac/solid.hpp"

namespace eac::concepts {

/// Free parameter of a concept asset.
struct ParamSpec {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  std::string unit;  // "m", "rad" or "count"
  std::string description;
  bool integer = false;
  /// False for parameters with no geometric footprint (e.g. drawer travel);
  /// fitting leaves those at their default.
  bool geometric = true;

  double midpoint() const { return integer ? std::round(0.5 * (lower + upper)) : 0.5 * (lower + upper); }
};

/// Descriptor of a surface patch a gripper may act on, in the asset's
/// canonical frame.
struct AffordanceRegion {
  std::string region_id;
  std::string kind;  // "grasp" or "push"
  std::string description;
  Vec3 approach_axis = Vec3::UnitY();  // direction of gripper travel when approaching
  double approach_half_angle = 0.0;    // admissible cone around approach_axis (rad)
  double extent = 0.0;                 // characteristic length or angle of the patch
  std::function<bool(const Vec3&)> contains;  // membership test for surface points
};

class ShapeKernel;

struct ConceptAsset {
  std::string asset_id;
  std::vector<std::string> category_tags;
  std::string synopsis;
  std::vector<ParamSpec> params;
  std::vector<std::string> affordance_annotations;  // region ids exposed by the kernel
  std::shared_ptr<const ShapeKernel> kernel;         // null for metadata-only records

  bool has_tag(const std::string& tag) const;
  int param_index(const std::string& name) const;  // -1 when absent
  const ParamSpec& param(const std::string& name) const;
  /// Throws std::invalid_argument when the record violates its invariants.
  void validate() const;
};

using AssetPtr = std::shared_ptr<const ConceptAsset>;

/// Geometry generator behind an asset: builds the analytic solid and
/// affordance regions for a parameter vector ordered like ConceptAsset::params.
class ShapeKernel {
 public:
  virtual ~ShapeKernel() = default;
  virtual SolidPtr build(const std::vector<double>& values) const = 0;
  virtual std::vector<AffordanceRegion> regions(const std::vector<double>& values) const = 0;
};

/// A concept asset with every parameter bound and validated.
class AssetInstance {
 public:
  /// Throws eac::RangeError when a value is missing or outside [lower, upper].
  AssetInstance(AssetPtr asset, const std::map<std::string, double>& values);
  AssetInstance(AssetPtr asset, std::vector<double> values);

  const ConceptAsset& asset() const { return *asset_; }
  const AssetPtr& asset_ptr() const { return asset_; }
  const std::string& asset_id() const { return asset_->asset_id; }
  const std::vector<double>& values() const { return values_; }
  double value(const std::string& name) const;
  std::map<std::string, double> bound() const;
  const Solid& solid() const { return *solid_; }
  const SolidPtr& solid_ptr() const { return solid_; }

 private:
  void check_and_build();

  AssetPtr asset_;
  std::vector<double> values_;
  SolidPtr solid_;
};

const std::vector<AssetPtr>& builtin_library();
AssetPtr find_asset(const std::vector<AssetPtr>& library, const std::string& asset_id);
/// Builtin asset by id; throws eac::NotFoundError listing the valid ids.
AssetPtr builtin_asset(const std::string& asset_id);

std::vector<AssetPtr> prune(const std::vector<AssetPtr>& library, const std::string& category);

PointCloud sample_surface(const AssetInstance& inst, std::size_t n, std::uint64_t seed);
/// Same as sample_surface but keeps outward normals.
std::vector<SurfaceSample> sample_surface_with_normals(const AssetInstance& inst, std::size_t n,
                                                       std::uint64_t seed);
double constraint(const AssetInstance& inst, const Vec3& p);
std::vector<AffordanceRegion> affordance_regions(const AssetInstance& inst);
/// Surface samples belonging to a region (rejection from the area-uniform sampler).
std::vector<Vec3> sample_region(const AssetInstance& inst, const AffordanceRegion& region,
                                std::size_t n, std::uint64_t seed);

/// Asset registry text format: one `[asset <id>]` block per record.
void write_registry(std::ostream& os, const std::vector<AssetPtr>& library);
/// Parses a registry; records whose id matches a builtin asset reuse its
/// geometry kernel (parameter names must match), others are metadata-only.
std::vector<AssetPtr> read_registry(std::istream& is);

/// ASCII PLY with x y z and an optional int `label` property.
void write_ply(std::ostream& os, const PointCloud& cloud);
PointCloud read_ply(std::istream& is);
void write_ply_file(const std::string& path, const PointCloud& cloud);
PointCloud read_ply_file(const std::string& path);

}  // namespace eac::concepts
