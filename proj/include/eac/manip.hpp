#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "eac/blueprint.hpp"
#include "eac/concepts.hpp"
#include "eac/geom.hpp"

namespace eac::manip {

// Parallel-jaw gripper. Frame origin at the midpoint between the fingertips,
// approach along +x, fingers closing along y.
inline constexpr double kFingerClearance = 0.005;  // added to the grasped section (m)
inline constexpr double kMaxOpening = 0.08;
inline constexpr double kFingerLength = 0.05;
inline constexpr double kPushWidth = 0.01;  // finger gap while pushing

/// Aligns the gripper with a part whose grasp approach is local +y:
/// gripper x -> y, y -> z, z -> x.
Rotation3 canonical_alignment();

/// Palm center, finger bases and fingertips in the gripper frame.
std::vector<Vec3> gripper_proxy(double width);

enum class ManipType { pull, push, rotate, slide };
std::string to_string(ManipType t);
ManipType manip_type_from_string(const std::string& s);

struct GraspPose {
  Transform3 pose;
  double width = 0.0;

  /// Throws eac::RangeError unless width is in (0, kMaxOpening].
  void validate() const;
  Vec3 contact() const { return pose.translation(); }
  Vec3 approach() const { return pose.rotation().matrix().col(0); }
  Vec3 closing() const { return pose.rotation().matrix().col(1); }
};

enum class ContactMode { grasp, push };

/// One-parameter set of gripper poses on an asset, bound to an instance.
struct GraspFamily {
  std::string family_id;
  std::string asset_id;
  std::string region_id;
  std::string synopsis;
  std::string param_name;  // e.g. "theta" (rad) or "s" (m)
  std::string formula;     // generator as a product of primitives
  ContactMode mode = ContactMode::grasp;
  double lower = 0.0;
  double upper = 0.0;
  double preferred = 0.0;  // value tried first by planners

  bool contains(double v) const { return v >= lower - 1e-12 && v <= upper + 1e-12; }
};

std::vector<GraspFamily> grasp_families(const concepts::AssetInstance& inst);
/// Throws eac::NotFoundError listing the families of the asset.
GraspFamily grasp_family(const concepts::AssetInstance& inst, const std::string& family_id);

/// Gripper pose in the part frame for family value `value`, applied to the
/// canonical pose `canonical` (identity by default). Throws eac::RangeError
/// reporting the family range when `value` is outside it.
GraspPose grasp_pose(const concepts::AssetInstance& inst, const GraspFamily& family, double value,
                     const Transform3& canonical = Transform3());

/// n poses with values uniform over the family range.
std::vector<GraspPose> sample_grasps(const concepts::AssetInstance& inst, const GraspFamily& family,
                                     std::size_t n, std::uint64_t seed);

/// n evenly spaced family values ordered by distance to the preferred one.
std::vector<double> ordered_values(const GraspFamily& family, std::size_t n);

/// Poses equivalent to `grasp` under the gripper's finger swap and the
/// part's rotational symmetry; the first entry is `grasp.pose` itself.
std::vector<Transform3> grasp_orbit(const concepts::AssetInstance& inst, const GraspFamily& family,
                                    const GraspPose& grasp);

struct ForceRule {
  std::string rule_id;
  ManipType type = ManipType::pull;
  std::vector<blueprint::JointKind> joint_kinds;
  std::string synopsis;
  std::string formula;

  bool applies_to(blueprint::JointKind kind) const;
};

const std::vector<ForceRule>& force_rules();
/// Throws eac::NotFoundError listing the rule ids.
const ForceRule& force_rule(const std::string& rule_id);

/// Joint re-expressed in another frame: `to_target` maps the joint's frame
/// into the target frame.
blueprint::JointSpec express_joint(const blueprint::JointSpec& joint, const Transform3& to_target);
/// Driving joint of the part, expressed in the part's own frame.
blueprint::JointSpec joint_in_part_frame(const blueprint::StructuralInstance& inst, const std::string& part_id);

/// Unit force direction in the joint's frame. Throws eac::PreconditionError
/// when the rule does not apply to the joint kind or the contact lies on
/// the hinge line.
Vec3 force_direction(const blueprint::JointSpec& joint, const ForceRule& rule, const GraspPose& grasp);
/// Same, with the part's driving joint taken from the instance (part frame).
Vec3 force_direction(const blueprint::StructuralInstance& inst, const std::string& part_id, const ForceRule& rule,
                     const GraspPose& grasp);

struct Strategy {
  enum class Kind { family, rule };
  Kind kind = Kind::family;
  std::string id;
  std::string synopsis;
  ContactMode mode = ContactMode::grasp;  // families only
};

/// Grasp families of the part's asset followed by the force rules that fit
/// its driving joint. Throws eac::NotFoundError for an unknown part.
std::vector<Strategy> list_strategies(const blueprint::StructuralInstance& inst, const std::string& part_id);

/// Chosen family value and force rule for one part, with the resulting
/// grasp and force in the part frame.
struct ManipulationBlueprint {
  std::string part_id;
  std::string asset_id;
  std::string family_id;
  double family_value = 0.0;
  std::string rule_id;
  GraspPose grasp;
  Vec3 force = Vec3::Zero();
  blueprint::JointSpec joint;  // driving joint in the part frame
};

/// Validates family value and rule against the asset and joint.
ManipulationBlueprint make_blueprint(const std::string& part_id, const concepts::AssetInstance& asset,
                                     const blueprint::JointSpec& joint_in_part, const std::string& family_id,
                                     double family_value, const std::string& rule_id);

nlohmann::json to_json(const ManipulationBlueprint& mb);
nlohmann::json to_json(const Transform3& t);

}  // namespace eac::manip
