#include "eac/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <thread>

#include "eac/errors.hpp"

namespace eac::sim {

using blueprint::JointKind;
using blueprint::StructuralInstance;
using manip::ContactMode;
using manip::GraspPose;

namespace {

constexpr double kGraspSlack = 0.005;

bool region_hit(const std::vector<concepts::AffordanceRegion>& regions, const std::string& kind, const Vec3& p) {
  for (const auto& r : regions)
    if (r.kind == kind && r.contains(p)) return true;
  return false;
}

// Closing segment between the fingertips, swept laterally by up to the slack,
// passes through the part inside one of its grasp regions.
bool pinches(const concepts::AssetInstance& asset, const Transform3& local, double width) {
  const auto regions = concepts::affordance_regions(asset);
  const double hw = 0.5 * width;
  if (concepts::constraint(asset, apply_point(local, Vec3(0, hw, 0))) <= 0.0) return false;
  if (concepts::constraint(asset, apply_point(local, Vec3(0, -hw, 0))) <= 0.0) return false;
  constexpr int kLateral = 2, kAlong = 20;
  for (int a = -kLateral; a <= kLateral; ++a)
    for (int b = -kLateral; b <= kLateral; ++b)
      for (int i = 0; i <= kAlong; ++i) {
        const Vec3 q(kGraspSlack * a / kLateral, -hw + width * i / kAlong, kGraspSlack * b / kLateral);
        const Vec3 p = apply_point(local, q);
        if (concepts::constraint(asset, p) < 0.0 && region_hit(regions, "grasp", p)) return true;
      }
  return false;
}

bool touches(const concepts::AssetInstance& asset, const Transform3& local, double width) {
  const auto regions = concepts::affordance_regions(asset);
  for (const Vec3& q : {Vec3(0, 0.5 * width, 0), Vec3(0, -0.5 * width, 0), Vec3(0, 0, 0)}) {
    const Vec3 p = apply_point(local, q);
    const double c = concepts::constraint(asset, p);
    if (c >= -1e-9 && c <= kGraspSlack && region_hit(regions, "push", p)) return true;
  }
  return false;
}

Vec3 outward_normal(const concepts::AssetInstance& asset, const Transform3& pose, const Vec3& world) {
  const Transform3 inv = invert(pose);
  const Vec3 p = apply_point(inv, world);
  constexpr double h = 1e-5;
  Vec3 g;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e[k] = h;
    g[k] = concepts::constraint(asset, p + e) - concepts::constraint(asset, p - e);
  }
  return apply_dir(pose, g.normalized());
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

SimScene::SimScene(StructuralInstance obj) : object(std::move(obj)) { gripper.pose = gripper_home(); }

Transform3 gripper_home() {
  Mat3 m;
  m.col(0) = -Vec3::UnitZ();
  m.col(1) = Vec3::UnitY();
  m.col(2) = Vec3::UnitX();
  return Transform3(Rotation3(m), Vec3(0, 0, 1));
}

std::string gripper_collision(const SimScene& scene, const Transform3& pose, double width, const std::string& ignore) {
  const auto proxy = manip::gripper_proxy(width);
  for (const auto& part : scene.object.parts()) {
    if (!ignore.empty() && scene.object.in_subtree(part.part_id, ignore)) continue;
    const Transform3 local = invert(blueprint::part_pose(scene.object, part.part_id)) * pose;
    for (const auto& q : proxy)
      if (concepts::constraint(part.asset, apply_point(local, q)) < 0.0) return part.part_id;
  }
  return {};
}

SimScene try_grasp(const SimScene& scene, const GraspPose& g, ContactMode mode) {
  SimScene out = scene;
  out.gripper.pose = g.pose;
  out.gripper.width = g.width;
  out.gripper.attached.clear();
  for (const auto& part : scene.object.parts()) {
    const Transform3 pose = blueprint::part_pose(scene.object, part.part_id);
    const Transform3 local = invert(pose) * g.pose;
    const bool ok = mode == ContactMode::grasp ? pinches(part.asset, local, g.width)
                                               : touches(part.asset, local, g.width);
    if (ok) {
      out.gripper.attached = part.part_id;
      out.gripper.mode = mode;
      out.gripper.offset = local;
      break;
    }
  }
  return out;
}

SimScene release(const SimScene& scene) {
  SimScene out = scene;
  out.gripper.attached.clear();
  out.gripper.width = manip::kMaxOpening;
  return out;
}

SimScene step_interact(const SimScene& scene, const Vec3& d, const StepConfig& cfg) {
  if (!scene.attached()) throw PreconditionError("step_interact: gripper is not attached");
  if (d.norm() == 0.0) return scene;
  const std::string& part_id = scene.gripper.attached;
  std::string jid;
  try {
    jid = scene.object.driving_joint(part_id);
  } catch (const NotFoundError&) {
    return scene;  // rigid part: nothing gives way
  }
  SimScene out = scene;
  const Vec3 p = scene.gripper.pose.translation();
  if (scene.gripper.mode == ContactMode::push) {
    const auto& part = scene.object.part(part_id);
    const Vec3 n = outward_normal(part.asset, blueprint::part_pose(scene.object, part_id), p);
    if (d.dot(n) >= 0.0) {
      out.gripper.attached.clear();
      out.gripper.pose = Transform3(scene.gripper.pose.rotation(), p + d);
      return out;
    }
  }
  const auto& j = scene.object.joint(jid);
  const auto wa = blueprint::world_joint_axis(scene.object, jid);
  double dq = 0.0;
  if (j.kind == JointKind::revolute) {
    const Vec3 rel = p - wa.anchor;
    const Vec3 r = rel - wa.axis * rel.dot(wa.axis);
    if (r.squaredNorm() > 1e-18) dq = cfg.gain * r.cross(d).dot(wa.axis) / r.squaredNorm();
    dq = std::clamp(dq, -cfg.revolute_cap, cfg.revolute_cap);
  } else {
    dq = std::clamp(cfg.gain * d.dot(wa.axis), -cfg.prismatic_cap, cfg.prismatic_cap);
  }
  const double q = std::clamp(scene.object.q(jid) + dq, j.q_min, j.q_max);
  out.object = scene.object.with_joint(jid, q);
  out.gripper.pose = blueprint::part_pose(out.object, part_id) * scene.gripper.offset;
  return out;
}

// --- episodes ---------------------------------------------------------------

std::string to_string(Task t) { return t == Task::pull ? "pull" : "push"; }

Task task_from_string(const std::string& s) {
  if (s == "pull") return Task::pull;
  if (s == "push") return Task::push;
  throw ParseError("unknown task '" + s + "' (pull, push)");
}

std::string to_string(Failure f) {
  switch (f) {
    case Failure::none: return "none";
    case Failure::no_grasp: return "no-grasp";
    case Failure::no_motion: return "no-motion";
    case Failure::wrong_direction: return "wrong-direction";
    case Failure::collision: return "collision";
    case Failure::plan_fail: return "plan-fail";
  }
  return "none";
}

void EpisodeConfig::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(p_closed) || !unit(max_open_fraction)) throw PreconditionError("episode: probabilities must lie in [0, 1]");
  if (!(success_fraction > 0.0) || !(step_length > 0.0)) throw PreconditionError("episode: thresholds must be positive");
  if (max_steps < 0 || grasp_candidates < 1 || render_points == 0)
    throw PreconditionError("episode: max_steps >= 0, grasp_candidates >= 1, render_points >= 1");
  fit.validate();
  plan.validate();
}

SimSession::SimSession(blueprint::BlueprintPtr bp, Task task, const EpisodeConfig& cfg)
    : bp_(std::move(bp)),
      task_(task),
      cfg_(cfg),
      scene_(blueprint::instantiate(bp_, blueprint::random_params(*bp_, splitmix64(cfg.seed)), Transform3())) {
  cfg_.validate();
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x5a5a5a5aULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  joint_id_ = scene_.object.driving_joint(bp_->target_part);
  const auto& j = scene_.object.joint(joint_id_);
  double fraction = 0.0;
  if (task_ == Task::pull) {
    const bool closed = unit(rng) < cfg_.p_closed;
    const double u = unit(rng);
    fraction = closed ? 0.0 : u * cfg_.max_open_fraction;
  } else {
    fraction = 0.3 + 0.6 * unit(rng);
  }
  q0_ = j.closed_value() + j.opening_sign * fraction * j.range();
  scene_.object = scene_.object.with_joint(joint_id_, q0_);
  trajectory_.push_back(q0_);

  observe(rng);
}

SimSession::SimSession(StructuralInstance object, Task task, const EpisodeConfig& cfg)
    : bp_(object.blueprint_ptr()), task_(task), cfg_(cfg), scene_(std::move(object)) {
  cfg_.validate();
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x5a5a5a5aULL));
  joint_id_ = scene_.object.driving_joint(bp_->target_part);
  q0_ = scene_.object.q(joint_id_);
  trajectory_.push_back(q0_);
  observe(rng);
}

void SimSession::observe(std::mt19937_64& rng) {
  if (cfg_.ground_truth) return;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int target = scene_.object.part_index(bp_->target_part);
  for (int attempt = 0; attempt < 50; ++attempt) {
    const double az = 2.0 * kPi * unit(rng);
    const double el = (30.0 + 30.0 * unit(rng)) * kPi / 180.0;
    camera_ = apply_point(scene_.object.pose(),
                          2.0 * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)));
    cloud_ = blueprint::render_partial(scene_.object, cfg_.render_points, splitmix64(cfg_.seed + attempt + 1),
                                       {camera_, cfg_.noise_sigma});
    const auto n = std::count(cloud_.labels.begin(), cloud_.labels.end(), target);
    if (static_cast<std::size_t>(n) >= cfg_.min_target_points) break;
  }
}

void SimSession::set_observation(PointCloud cloud) {
  if (!cloud.has_labels() || cloud.labels.size() != cloud.size())
    throw PreconditionError("observation needs one part label per point");
  const int parts = static_cast<int>(scene_.object.parts().size());
  for (int l : cloud.labels)
    if (l < 0 || l >= parts) throw PreconditionError("observation label " + std::to_string(l) + " is not a part index");
  cloud_ = std::move(cloud);
}

PointCloud SimSession::part_cloud(const std::string& part_id) const {
  const int idx = scene_.object.part_index(part_id);
  if (idx < 0) throw NotFoundError("no part '" + part_id + "' in '" + bp_->blueprint_id + "'");
  if (cloud_.empty()) return {};
  return cloud_.select(idx);
}

fit::FitResult SimSession::fit_part(const std::string& part_id, const concepts::AssetPtr& asset) const {
  const Transform3 object_pose = scene_.object.pose();
  const PointCloud local = transform_cloud(invert(object_pose), part_cloud(part_id));
  try {
    fit::FitResult r = fit::fit_structural(asset, local, cfg_.fit);
    r.pose = fit::recover_pose(object_pose, r.pose);
    std::vector<Vec3> around;
    const int idx = scene_.object.part_index(part_id);
    for (std::size_t i = 0; i < cloud_.size(); ++i)
      if (cloud_.labels[i] != idx) around.push_back(cloud_.points[i]);
    return fit::resolve_facing(asset, r, part_cloud(part_id), around);
  } catch (const PreconditionError& e) {
    fit::FitResult r;
    r.asset_id = asset->asset_id;
    r.residual = std::numeric_limits<double>::infinity();
    r.diagnostics = e.what();
    return r;
  }
}

fit::FitResult SimSession::true_part(const std::string& part_id) const {
  const auto& part = scene_.object.part(part_id);
  fit::FitResult r;
  r.asset_id = part.asset.asset_id();
  r.params = part.asset.values();
  r.pose = blueprint::part_pose(scene_.object, part_id);
  r.fitted = true;
  r.inlier_fraction = 1.0;
  return r;
}

blueprint::JointSpec SimSession::estimated_joint(const std::string& part_id) const {
  // builtin structures place the driving joint independently of their free
  // parameters, so the category blueprint at its midpoint locates it
  const auto nominal = blueprint::instantiate(bp_, blueprint::midpoint_params(*bp_), scene_.object.pose());
  const std::string jid = nominal.driving_joint(part_id);
  const auto wa = blueprint::world_joint_axis(nominal, jid);
  blueprint::JointSpec j = nominal.joint(jid);
  j.anchor = wa.anchor;
  j.axis = wa.axis;
  return j;
}

ActionResult SimSession::grasp(const std::string& part_id, const fit::FitResult& part, const std::string& rule_id,
                               const std::vector<std::string>& family_ids) {
  auto fail = [this](Failure f, std::string detail) {
    failure_ = f;
    detail_ = detail;
    return ActionResult{false, f, std::move(detail)};
  };
  concept_ = part.asset_id;
  if (!part.fitted) return fail(Failure::plan_fail, "no usable fit for '" + part_id + "': " + part.diagnostics);
  const auto asset = part.instance(concepts::builtin_asset(part.asset_id));
  const auto& rule = manip::force_rule(rule_id);
  const auto joint_world = estimated_joint(part_id);
  if (!rule.applies_to(joint_world.kind))
    return fail(Failure::plan_fail, "rule '" + rule_id + "' does not fit a " + blueprint::to_string(joint_world.kind) +
                                        " joint");
  const auto joint_local = manip::express_joint(joint_world, invert(part.pose));

  std::vector<exec::Obstacle> scene_obstacles;
  for (const auto& p : scene_.object.parts()) {
    if (scene_.object.in_subtree(p.part_id, part_id)) continue;
    if (cfg_.ground_truth) {
      scene_obstacles.push_back(exec::asset_obstacle(p.part_id, p.asset, blueprint::part_pose(scene_.object, p.part_id)));
    } else {
      const auto pts = part_cloud(p.part_id);
      if (!pts.empty()) scene_obstacles.push_back(exec::cloud_obstacle(p.part_id, pts.points, cfg_.obstacle_radius));
    }
  }

  const Rotation3 current = scene_.gripper.pose.rotation();
  std::optional<exec::WorldPlan> chosen;
  std::optional<exec::Trajectory> traj;
  ContactMode mode = ContactMode::grasp;
  std::string last = "no grasp family for '" + part.asset_id + "'";
  for (const auto& fam : manip::grasp_families(asset)) {
    if (!family_ids.empty() && std::find(family_ids.begin(), family_ids.end(), fam.family_id) == family_ids.end())
      continue;
    if (fam.mode == ContactMode::push && rule.type != manip::ManipType::push) continue;
    for (double v : manip::ordered_values(fam, static_cast<std::size_t>(cfg_.grasp_candidates))) {
      try {
        const auto mb = manip::make_blueprint(part_id, asset, joint_local, fam.family_id, v, rule_id);
        auto plan = exec::to_world(mb, asset, part.pose, &current);
        traj = exec::plan_motion(plan, scene_obstacles, cfg_.plan);
        chosen = std::move(plan);
        mode = fam.mode;
        break;
      } catch (const PlanningError& e) {
        last = e.what();
      } catch (const PreconditionError& e) {
        last = e.what();
      }
    }
    if (chosen) break;
  }
  if (!chosen) return fail(Failure::plan_fail, last);

  for (const auto& w : traj->waypoints) {
    if (w.phase == exec::Phase::interact) break;
    const std::string ignore = w.phase == exec::Phase::grasp ? part_id : std::string();
    const std::string hit = gripper_collision(scene_, w.pose, w.width, ignore);
    if (!hit.empty()) return fail(Failure::collision, exec::to_string(w.phase) + " hits '" + hit + "'");
  }
  scene_ = try_grasp(scene_, chosen->grasp, mode);
  if (scene_.gripper.attached != part_id) {
    const std::string other = scene_.gripper.attached;
    scene_ = release(scene_);
    return fail(Failure::no_grasp, other.empty() ? "fingers closed on nothing" : "grasped '" + other + "' instead");
  }
  plan_ = std::move(chosen);
  traj_ = std::move(traj);
  return {true, Failure::none, {}};
}

ActionResult SimSession::interact() {
  auto fail = [this](Failure f, std::string detail) {
    failure_ = f;
    detail_ = detail;
    return ActionResult{false, f, std::move(detail)};
  };
  if (!scene_.attached() || !plan_) return fail(Failure::no_grasp, "nothing grasped");
  const std::string part = scene_.gripper.attached;
  while (!goal_reached() && steps_ < cfg_.max_steps) {
    const Vec3 f = plan_->force_at(scene_.gripper.pose);
    scene_ = step_interact(scene_, f * cfg_.step_length, cfg_.step);
    ++steps_;
    trajectory_.push_back(scene_.object.q(joint_id_));
    if (!scene_.attached()) return fail(Failure::no_motion, "contact lost");
    const std::string hit = gripper_collision(scene_, scene_.gripper.pose, scene_.gripper.width, part);
    if (!hit.empty()) return fail(Failure::collision, "interaction hits '" + hit + "'");
  }
  if (goal_reached()) return {true, Failure::none, {}};
  const double progress = opened_fraction() * (task_ == Task::pull ? 1.0 : -1.0);
  if (progress < -0.02) return fail(Failure::wrong_direction, "joint moved away from the goal");
  return fail(Failure::no_motion, "goal not reached in " + std::to_string(steps_) + " steps");
}

bool SimSession::grasped(const std::string& part_id) const { return scene_.gripper.attached == part_id; }

double SimSession::opened_fraction() const {
  const auto& j = scene_.object.joint(joint_id_);
  return (scene_.object.q(joint_id_) - q0_) * j.opening_sign / j.range();
}

bool SimSession::goal_reached() const {
  const double f = opened_fraction();
  return task_ == Task::pull ? f >= cfg_.success_fraction - 1e-12 : f <= -cfg_.success_fraction + 1e-12;
}

EpisodeResult SimSession::result() const {
  EpisodeResult r;
  r.blueprint_id = bp_->blueprint_id;
  r.category = bp_->category;
  r.task = task_;
  r.success = goal_reached();
  r.failure = r.success ? Failure::none : (failure_ == Failure::none ? Failure::no_motion : failure_);
  r.detail = r.success ? std::string() : detail_;
  r.concept_id = concept_;
  r.joint_trajectory = trajectory_;
  r.steps = steps_;
  return r;
}

std::string rule_for(Task task, JointKind kind) {
  if (kind == JointKind::revolute) return task == Task::pull ? "pull_revolute" : "push_revolute";
  return task == Task::pull ? "pull_prismatic" : "push_prismatic";
}

EpisodeResult run_episode(const blueprint::BlueprintPtr& bp, Task task, const EpisodeConfig& cfg,
                          const PipelineHooks& hooks) {
  SimSession s(bp, task, cfg);
  const std::string& part = s.target_part();
  fit::FitResult chosen;
  if (cfg.ground_truth) {
    chosen = s.true_part(part);
  } else {
    std::vector<fit::FitResult> fits;
    for (const auto& a : concepts::prune(concepts::builtin_library(), bp->target_query))
      fits.push_back(s.fit_part(part, a));
    if (fits.empty()) throw NotFoundError("no concept matches '" + bp->target_query + "'");
    std::size_t idx = 0;
    if (hooks.choose_concept) {
      idx = hooks.choose_concept(fits);
    } else {
      for (std::size_t i = 1; i < fits.size(); ++i)
        if (fits[i].fitted > fits[idx].fitted ||
            (fits[i].fitted == fits[idx].fitted && fits[i].residual < fits[idx].residual))
          idx = i;
    }
    chosen = fits.at(idx);
  }
  const auto kind = s.scene().object.joint(s.target_joint()).kind;
  if (s.grasp(part, chosen, rule_for(task, kind)).ok) s.interact();
  return s.result();
}

std::uint64_t episode_seed(std::uint64_t seed, std::size_t item, std::size_t episode) {
  return splitmix64(splitmix64(seed) ^ splitmix64((static_cast<std::uint64_t>(item) << 32) + episode));
}

EvaluationReport evaluate(const std::vector<SuiteItem>& suite, int episodes, std::uint64_t seed,
                          const EpisodeConfig& base, const EpisodeRunner& runner, int threads) {
  if (episodes < 1) throw PreconditionError("evaluate: episodes must be >= 1");
  if (suite.empty()) throw PreconditionError("evaluate: empty suite");
  const std::size_t per = static_cast<std::size_t>(episodes);
  const std::size_t total = suite.size() * per;
  std::vector<EpisodeResult> results(total);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      const std::size_t item = k / per, ep = k % per;
      EpisodeConfig cfg = base;
      cfg.seed = episode_seed(seed, item, ep);
      results[k] = runner ? runner(suite[item], cfg) : run_episode(suite[item].blueprint, suite[item].task, cfg);
    }
  };
  const int n = std::max(1, threads);
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  EvaluationReport report;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    CategoryRow row;
    row.category = suite[i].blueprint->category;
    row.task = suite[i].task;
    row.episodes = episodes;
    std::map<std::string, int> fails;
    double steps = 0.0;
    for (std::size_t e = 0; e < per; ++e) {
      const auto& r = results[i * per + e];
      row.successes += r.success ? 1 : 0;
      steps += r.steps;
      if (!r.success) ++fails[to_string(r.failure)];
    }
    row.rate = static_cast<double>(row.successes) / episodes;
    row.mean_steps = steps / episodes;
    row.failures.assign(fails.begin(), fails.end());
    report.rows.push_back(row);
    report.average += row.rate;
  }
  report.average /= static_cast<double>(report.rows.size());
  return report;
}

void write_table(std::ostream& os, const EvaluationReport& report) {
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-5s %8s %9s %6s %6s  %s\n", "category", "task", "episodes", "successes",
                "rate", "steps", "failures");
  os << line;
  for (const auto& r : report.rows) {
    std::string fails;
    for (const auto& [reason, count] : r.failures) fails += (fails.empty() ? "" : " ") + reason + ":" + std::to_string(count);
    std::snprintf(line, sizeof line, "%-12s %-5s %8d %9d %6.3f %6.1f  %s\n", r.category.c_str(),
                  to_string(r.task).c_str(), r.episodes, r.successes, r.rate, r.mean_steps,
                  fails.empty() ? "-" : fails.c_str());
    os << line;
  }
  std::snprintf(line, sizeof line, "%-12s %-5s %8s %9s %6.3f\n", "average", "", "", "", report.average);
  os << line;
}

nlohmann::json to_json(const EvaluationReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json fails = nlohmann::json::object();
    for (const auto& [reason, count] : r.failures) fails[reason] = count;
    rows.push_back({{"category", r.category},
                    {"task", to_string(r.task)},
                    {"episodes", r.episodes},
                    {"successes", r.successes},
                    {"rate", r.rate},
                    {"mean_steps", r.mean_steps},
                    {"failures", fails}});
  }
  return {{"rows", rows}, {"average", report.average}};
}

nlohmann::json to_json(const EpisodeResult& r) {
  nlohmann::json j{{"blueprint", r.blueprint_id},
                   {"category", r.category},
                   {"task", to_string(r.task)},
                   {"success", r.success},
                   {"failure", to_string(r.failure)},
                   {"concept", r.concept_id},
                   {"steps", r.steps},
                   {"joint_trajectory", r.joint_trajectory}};
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

}  // namespace eac::sim
