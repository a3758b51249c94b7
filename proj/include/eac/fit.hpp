#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "eac/concepts.hpp"
#include "eac/geom.hpp"

namespace eac::fit {

struct FitConfig {
  int grid_per_param = 3;          // coarse grid values per geometric parameter
  int refine_iterations = 60;      // Levenberg-Marquardt iterations per start
  int screen_iterations = 25;      // short refinement of every orientation on the scoring subset
  int polish_iterations = 20;      // final refinement of the winner on the full working set
  int starts = 4;                  // screened starts refined on the refinement subset
  double tolerance = 1e-9;         // stop once an accepted step moves less than this (m)
  double inlier_threshold = 0.002; // |distance| counted as inlier (m)
  double max_residual = 0.003;     // RMS above this reports "no fit" (m)
  std::size_t max_points = 6000;    // working set for the final polish
  std::size_t refine_points = 600;  // subsample for refining the starts
  std::size_t score_points = 128;   // coarse-search subsample
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on non-positive settings.
  void validate() const;
};

struct FitResult {
  std::string asset_id;
  std::vector<double> params;  // ordered like the asset's parameter list
  Transform3 pose;             // canonical asset frame -> cloud frame
  double residual = 0.0;       // RMS point-to-surface distance over the whole cloud (m)
  double inlier_fraction = 0.0;
  bool fitted = false;         // false: residual above the configured threshold
  std::string diagnostics;
  std::vector<double> history;  // objective after each accepted step of the final refinement

  std::map<std::string, double> bound(const concepts::ConceptAsset& asset) const;
  concepts::AssetInstance instance(const concepts::AssetPtr& asset) const;
};

/// RMS of the asset's signed distance over the cloud pulled back by `pose`.
double rms_residual(const concepts::AssetInstance& inst, const Transform3& pose, const PointCloud& cloud);

/// Joint structural-parameter and pose estimate from a (partial) cloud.
/// Throws eac::PreconditionError for clouds with fewer than 50 points.
FitResult fit_structural(const concepts::AssetPtr& asset, const PointCloud& cloud, const FitConfig& cfg = {});

/// Resolves the mirror ambiguity of shapes that look the same after a half
/// turn about their local x axis (a knob is such a cylinder). Handle-like
/// assets mount at their local origin, so when the turned pose explains the
/// cloud as well and puts the origin closer to `surroundings` (observed
/// points of neighbouring parts), the turned pose is returned.
FitResult resolve_facing(const concepts::AssetPtr& asset, const FitResult& fit, const PointCloud& cloud,
                         const std::vector<Vec3>& surroundings);

/// World pose of a part whose pose was fitted in the object's frame.
Transform3 recover_pose(const Transform3& known_object_pose, const Transform3& fitted_local);

struct OracleGrid {
  std::vector<std::vector<double>> values;  // candidate values per asset parameter
  std::vector<Transform3> poses;
};

/// Evenly spaced grid over each parameter range (`per_param` values; fixed at
/// the midpoint for non-geometric parameters).
std::vector<std::vector<double>> uniform_grid(const concepts::ConceptAsset& asset, int per_param);

/// Exhaustive minimum of the RMS residual over the grid; no refinement.
/// Throws eac::PreconditionError when the grid is empty.
FitResult brute_force_oracle(const concepts::AssetPtr& asset, const PointCloud& cloud, const OracleGrid& grid);

nlohmann::json to_json(const FitResult& r, const concepts::ConceptAsset& asset);

}  // namespace eac::fit
