#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "eac/concepts.hpp"
#include "eac/expr.hpp"
#include "eac/geom.hpp"

namespace eac::blueprint {

enum class JointKind { revolute, prismatic };

std::string to_string(JointKind kind);
JointKind joint_kind_from_string(const std::string& text);

/// Motion of a child part relative to its parent, expressed in the parent frame.
struct JointSpec {
  std::string joint_id;
  JointKind kind = JointKind::revolute;
  Vec3 anchor = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  double q_min = 0.0;
  double q_max = 1.0;
  int opening_sign = 1;  // +1: increasing q opens, -1: decreasing q opens

  /// Throws std::invalid_argument on a non-unit axis, empty range or bad sign.
  void validate() const;
  double range() const { return q_max - q_min; }
  double closed_value() const { return opening_sign > 0 ? q_min : q_max; }
  double open_value() const { return opening_sign > 0 ? q_max : q_min; }
  bool contains(double q) const { return q >= q_min && q <= q_max; }
  /// Rigid motion of the child for joint value q (identity at q = 0).
  Transform3 motion(double q) const;
};

/// Resolved part of a structural instance.
struct PartNode {
  std::string part_id;
  std::string name;  // natural-language name ("door", "handle")
  concepts::AssetInstance asset;
  Transform3 mount;    // pose in the parent frame
  std::string parent;  // empty for the root
  std::optional<JointSpec> joint;
};

using ExprVec3 = std::array<Expr, 3>;

/// Part description inside a blueprint file: asset parameters, mount and joint
/// limits are expressions over the blueprint's free parameters.
struct PartTemplate {
  struct Joint {
    std::string joint_id;
    JointKind kind = JointKind::revolute;
    ExprVec3 anchor;
    Vec3 axis = Vec3::UnitZ();
    Expr q_min, q_max;
    int opening_sign = 1;
  };

  std::string part_id;
  std::string name;
  std::string asset_id;
  std::string parent;
  std::vector<std::pair<std::string, Expr>> params;  // asset parameter -> expression
  ExprVec3 mount_xyz;
  ExprVec3 mount_rpy;
  std::optional<Joint> joint;
};

struct StructuralBlueprint {
  std::string blueprint_id;
  std::string category;     // evaluation category, e.g. "microwave"
  std::string object_name;  // name used in instructions and scene graphs
  std::string synopsis;
  std::vector<concepts::ParamSpec> free_params;
  std::vector<PartTemplate> parts;  // parents precede children
  std::string target_part;          // part the gripper acts on
  std::string target_query;         // library tag used to prune candidate concepts for it

  /// Structural checks: single root, known parents, acyclic, unique ids, known
  /// assets, every free parameter referenced. Throws std::invalid_argument.
  void validate() const;
  const PartTemplate& part(const std::string& part_id) const;
};

using BlueprintPtr = std::shared_ptr<const StructuralBlueprint>;

/// Blueprint bound to parameters, a world pose and joint values. Value type:
/// joint updates return a new instance.
class StructuralInstance {
 public:
  const StructuralBlueprint& blueprint() const { return *bp_; }
  const BlueprintPtr& blueprint_ptr() const { return bp_; }
  const std::map<std::string, double>& params() const { return params_; }
  const Transform3& pose() const { return pose_; }
  const std::map<std::string, double>& joint_state() const { return joint_state_; }
  const std::vector<PartNode>& parts() const { return parts_; }

  const PartNode& part(const std::string& part_id) const;
  int part_index(const std::string& part_id) const;  // -1 when absent
  const JointSpec& joint(const std::string& joint_id) const;
  /// Part that owns the joint.
  const PartNode& joint_part(const std::string& joint_id) const;
  double q(const std::string& joint_id) const;

  /// Nearest joint on the path from the part to the root; throws NotFoundError if rigid.
  std::string driving_joint(const std::string& part_id) const;
  /// True when `part_id` is `ancestor` or lies in its subtree.
  bool in_subtree(const std::string& part_id, const std::string& ancestor) const;

  StructuralInstance with_joint(const std::string& joint_id, double q) const;
  StructuralInstance with_pose(const Transform3& pose) const;

 private:
  friend StructuralInstance instantiate(BlueprintPtr, const std::map<std::string, double>&, const Transform3&,
                                        const std::map<std::string, double>&);
  StructuralInstance() = default;

  BlueprintPtr bp_;
  std::map<std::string, double> params_;
  Transform3 pose_;
  std::map<std::string, double> joint_state_;
  std::vector<PartNode> parts_;
};

/// Binds free parameters (all required, range-checked) and joint values
/// (missing joints start closed). Throws eac::RangeError naming the offender.
StructuralInstance instantiate(BlueprintPtr bp, const std::map<std::string, double>& params,
                               const Transform3& pose, const std::map<std::string, double>& joint_state = {});

Transform3 part_pose(const StructuralInstance& inst, const std::string& part_id);
/// World pose of the frame the joint is expressed in (the parent's pose).
Transform3 joint_parent_pose(const StructuralInstance& inst, const std::string& joint_id);

struct WorldAxis {
  Vec3 anchor;
  Vec3 axis;
};
WorldAxis world_joint_axis(const StructuralInstance& inst, const std::string& joint_id);

/// Signed distance to the union of all parts in world coordinates.
double world_sdf(const StructuralInstance& inst, const Vec3& x);

/// Uniform random free parameters (integers rounded).
std::map<std::string, double> random_params(const StructuralBlueprint& bp, std::uint64_t seed);
std::map<std::string, double> midpoint_params(const StructuralBlueprint& bp);

// --- rendering -------------------------------------------------------------

/// `n` surface samples per part, mapped by the part poses and labeled with the
/// part index.
PointCloud render(const StructuralInstance& inst, std::size_t n, std::uint64_t seed);

struct PartialView {
  Vec3 camera;
  double noise_sigma = 0.0;  // Gaussian noise added to visible points (m)
};

/// Single-viewpoint render: keeps samples whose normal faces the camera and
/// whose line of sight is not blocked by any part.
PointCloud render_partial(const StructuralInstance& inst, std::size_t n, std::uint64_t seed,
                          const PartialView& view);

/// Single-viewpoint render of one asset instance placed at `pose` (labels empty).
PointCloud render_asset_partial(const concepts::AssetInstance& inst, const Transform3& pose, std::size_t n,
                                std::uint64_t seed, const PartialView& view);

/// True when the straight segment from `p` to `camera` stays outside every part.
bool line_of_sight(const StructuralInstance& inst, const Vec3& p, const Vec3& camera);

// --- files ---------------------------------------------------------------

inline constexpr const char* kBlueprintSchema = "eac.blueprint/1";

nlohmann::json to_json(const StructuralBlueprint& bp);
/// Throws eac::ParseError on schema violations.
BlueprintPtr blueprint_from_json(const nlohmann::json& j);
BlueprintPtr read_blueprint_file(const std::string& path);

const std::vector<BlueprintPtr>& builtin_blueprints();
/// Throws eac::NotFoundError listing the valid ids.
BlueprintPtr builtin_blueprint(const std::string& blueprint_id);

}  // namespace eac::blueprint
