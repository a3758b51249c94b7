#include "eac/executor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "eac/errors.hpp"

namespace eac::exec {

using manip::GraspPose;

Obstacle asset_obstacle(const std::string& name, const concepts::AssetInstance& asset, const Transform3& pose) {
  const Transform3 inv = invert(pose);
  return {name, [asset, inv](const Vec3& x) { return concepts::constraint(asset, apply_point(inv, x)); }};
}

Obstacle cloud_obstacle(const std::string& name, std::vector<Vec3> points, double radius) {
  if (points.empty()) throw PreconditionError("cloud obstacle '" + name + "' has no points");
  Vec3 lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return {name, [pts = std::move(points), radius, lo, hi](const Vec3& x) {
            // cheap reject against the inflated bounding box
            const Vec3 out = (lo - x).cwiseMax(x - hi).cwiseMax(Vec3::Zero());
            if (out.norm() > radius + 0.05) return out.norm() - radius;
            double best = std::numeric_limits<double>::infinity();
            for (const auto& p : pts) best = std::min(best, (p - x).squaredNorm());
            return std::sqrt(best) - radius;
          }};
}

Vec3 WorldPlan::force_at(const Transform3& gripper) const {
  return manip::force_direction(joint, *rule, GraspPose{gripper, grasp.width});
}

WorldPlan to_world(const manip::ManipulationBlueprint& mb, const concepts::AssetInstance& part,
                   const Transform3& part_pose, const Rotation3* current) {
  WorldPlan plan;
  plan.part_id = mb.part_id;
  plan.rule = &manip::force_rule(mb.rule_id);
  plan.grasp = GraspPose{part_pose * mb.grasp.pose, mb.grasp.width};
  plan.force = apply_dir(part_pose, mb.force);
  plan.joint = manip::express_joint(mb.joint, part_pose);
  plan.constraints.push_back(asset_obstacle(mb.part_id, part, part_pose));
  if (current != nullptr) {
    const auto family = manip::grasp_family(part, mb.family_id);
    const auto orbit = manip::grasp_orbit(part, family, mb.grasp);
    std::vector<Rotation3> rots;
    for (const auto& o : orbit) rots.push_back((part_pose * o).rotation());
    const std::size_t k = minimal_rotation_index(rots, *current);
    plan.grasp.pose = part_pose * orbit[k];
    plan.force = plan.force_at(plan.grasp.pose);
  }
  return plan;
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::approach: return "approach";
    case Phase::grasp: return "grasp";
    case Phase::interact: return "interact";
  }
  return "approach";
}

void PlanConfig::validate() const {
  if (!(step > 0) || !(rot_step > 0) || approach_margin < 0 || !(interact_angle > 0) || !(interact_distance > 0) ||
      close_steps < 1)
    throw PreconditionError("plan config: steps, travel and close_steps must be positive");
}

void Trajectory::validate(const PlanConfig& cfg) const {
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const auto& a = waypoints[i - 1];
    const auto& b = waypoints[i];
    if (static_cast<int>(b.phase) < static_cast<int>(a.phase))
      throw PreconditionError("waypoint " + std::to_string(i) + ": phase " + to_string(b.phase) + " after " +
                              to_string(a.phase));
    if ((b.pose.translation() - a.pose.translation()).norm() > cfg.step + 1e-9)
      throw PreconditionError("waypoint " + std::to_string(i) + ": translation step above bound");
    if (a.pose.rotation().angle_to(b.pose.rotation()) > cfg.rot_step + 1e-9)
      throw PreconditionError("waypoint " + std::to_string(i) + ": rotation step above bound");
  }
}

std::vector<Waypoint> Trajectory::phase(Phase p) const {
  std::vector<Waypoint> out;
  for (const auto& w : waypoints)
    if (w.phase == p) out.push_back(w);
  return out;
}

std::string first_collision(const Transform3& pose, double width, const std::vector<const Obstacle*>& obstacles) {
  const auto proxy = manip::gripper_proxy(width);
  for (const auto* o : obstacles)
    for (const auto& q : proxy)
      if (o->sdf(apply_point(pose, q)) < 0.0) return o->name;
  return {};
}

Trajectory plan_motion(const WorldPlan& plan, const std::vector<Obstacle>& scene, const PlanConfig& cfg) {
  cfg.validate();
  if (plan.rule == nullptr) throw PreconditionError("world plan has no force rule");
  std::vector<const Obstacle*> all;
  for (const auto& o : plan.constraints) all.push_back(&o);
  for (const auto& o : scene) all.push_back(&o);

  Trajectory traj;
  const Transform3& grasp = plan.grasp.pose;
  const double open = std::min(plan.grasp.width + cfg.approach_margin, manip::kMaxOpening);
  const Vec3 approach = plan.grasp.approach();

  // approach: straight segment ending at the grasp pose
  const int n = std::max(1, static_cast<int>(std::ceil(plan.approach_offset / cfg.step - 1e-9)));
  for (int i = 0; i <= n; ++i) {
    const double back = plan.approach_offset * (1.0 - static_cast<double>(i) / n);
    const Transform3 pose(grasp.rotation(), grasp.translation() - back * approach);
    const std::string hit = first_collision(pose, open, all);
    if (!hit.empty())
      throw PlanningError(i == n ? "grasp pose collides with '" + hit + "'"
                                 : "approach path blocked by '" + hit + "'",
                          hit);
    traj.waypoints.push_back({pose, open, Phase::approach});
  }

  // grasp: close the fingers in place
  for (int i = 1; i <= cfg.close_steps; ++i) {
    const double w = open + (plan.grasp.width - open) * i / cfg.close_steps;
    traj.waypoints.push_back({grasp, w, Phase::grasp});
  }
  const std::string hit = first_collision(grasp, plan.grasp.width, all);
  if (!hit.empty()) throw PlanningError("closed fingers collide with '" + hit + "'", hit);

  // interact: follow the estimated joint, re-evaluating the force each step
  const auto& j = plan.joint;
  Transform3 pose = grasp;
  if (j.kind == blueprint::JointKind::revolute) {
    const Vec3 rel = grasp.translation() - j.anchor;
    const double radius = (rel - j.axis * rel.dot(j.axis)).norm();
    const double dq = std::min(cfg.rot_step, cfg.step / std::max(radius, 1e-9));
    const int m = static_cast<int>(std::ceil(cfg.interact_angle / dq - 1e-9));
    for (int i = 0; i < m; ++i) {
      const Vec3 f = plan.force_at(pose);
      const Vec3 r = pose.translation() - j.anchor;
      const double s = r.cross(f).dot(j.axis) >= 0.0 ? 1.0 : -1.0;
      pose = j.motion(s * cfg.interact_angle / m) * pose;
      traj.waypoints.push_back({pose, plan.grasp.width, Phase::interact});
    }
  } else {
    const int m = static_cast<int>(std::ceil(cfg.interact_distance / cfg.step - 1e-9));
    for (int i = 0; i < m; ++i) {
      const Vec3 f = plan.force_at(pose);
      pose = Transform3(pose.rotation(), pose.translation() + f * (cfg.interact_distance / m));
      traj.waypoints.push_back({pose, plan.grasp.width, Phase::interact});
    }
  }
  return traj;
}

void write_trajectory(std::ostream& os, const Trajectory& t) {
  char line[256];
  for (const auto& w : t.waypoints) {
    const Vec3 x = w.pose.translation(), r = w.pose.rotation().rpy();
    std::snprintf(line, sizeof line, "%s %.6f %.6f %.6f %.6f %.6f %.6f %.6f\n", to_string(w.phase).c_str(), x.x(),
                  x.y(), x.z(), r.x(), r.y(), r.z(), w.width);
    os << line;
  }
}

}  // namespace eac::exec
