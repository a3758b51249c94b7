#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "eac/blueprint.hpp"
#include "eac/concepts.hpp"
#include "eac/geom.hpp"
#include "eac/manip.hpp"

namespace eac::exec {

/// World-frame constraint: negative inside the obstacle.
struct Obstacle {
  std::string name;
  std::function<double(const Vec3&)> sdf;
};

/// Asset placed at `pose`: x is inside iff the local constraint at
/// invert(pose) x is negative.
Obstacle asset_obstacle(const std::string& name, const concepts::AssetInstance& asset, const Transform3& pose);
/// Observed points inflated by `radius`. Exact distance within 5 cm of the
/// points, a lower bound (bounding box) beyond.
Obstacle cloud_obstacle(const std::string& name, std::vector<Vec3> points, double radius);

struct WorldPlan {
  std::string part_id;
  const manip::ForceRule* rule = nullptr;
  manip::GraspPose grasp;                  // world frame
  Vec3 force = Vec3::Zero();               // unit, world frame
  blueprint::JointSpec joint;              // driving joint estimate, world frame
  std::vector<Obstacle> constraints;       // the target part, world frame
  double approach_offset = 0.08;           // pre-grasp distance behind the grasp (m)

  /// Force direction re-evaluated for a gripper at `gripper` (world).
  Vec3 force_at(const Transform3& gripper) const;
};

/// Maps a part-frame blueprint into the world with the part pose `part_pose`.
/// When `current` is given the grasp orientation is replaced by the
/// symmetric equivalent closest to it.
WorldPlan to_world(const manip::ManipulationBlueprint& mb, const concepts::AssetInstance& part,
                   const Transform3& part_pose, const Rotation3* current = nullptr);

enum class Phase { approach, grasp, interact };
std::string to_string(Phase p);

struct Waypoint {
  Transform3 pose;
  double width = 0.0;
  Phase phase = Phase::approach;
};

struct PlanConfig {
  double step = 0.01;                   // max translation between waypoints (m)
  double rot_step = 5.0 * kPi / 180.0;  // max rotation between waypoints (rad)
  double approach_margin = 0.02;        // extra finger opening while approaching (m)
  double interact_angle = kPi / 6.0;    // planned joint travel for revolute joints (rad)
  double interact_distance = 0.1;       // planned joint travel for prismatic joints (m)
  int close_steps = 3;                  // waypoints used to close the fingers

  /// Throws eac::PreconditionError on non-positive settings.
  void validate() const;
};

struct Trajectory {
  std::vector<Waypoint> waypoints;

  /// Throws eac::PreconditionError when phases are out of order or a step
  /// exceeds the bounds.
  void validate(const PlanConfig& cfg) const;
  std::vector<Waypoint> phase(Phase p) const;
};

/// Approach, grasp and interaction waypoints for `plan`, collision-checked
/// against the plan constraints and `scene` with the gripper proxy.
/// Throws eac::PlanningError naming the blocking obstacle.
Trajectory plan_motion(const WorldPlan& plan, const std::vector<Obstacle>& scene, const PlanConfig& cfg = {});

/// First obstacle hit by the gripper proxy at `pose` with finger gap
/// `width`, or an empty string.
std::string first_collision(const Transform3& pose, double width, const std::vector<const Obstacle*>& obstacles);

/// One line per waypoint: phase x y z roll pitch yaw width.
void write_trajectory(std::ostream& os, const Trajectory& t);

}  // namespace eac::exec
