#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "eac/errors.hpp"
#include "eac/sim.hpp"

using namespace eac;
using namespace eac::sim;
using blueprint::StructuralInstance;

namespace {

StructuralInstance microwave(double q = 0.0) {
  const auto bp = blueprint::builtin_blueprint("microwave");
  return blueprint::instantiate(bp, blueprint::midpoint_params(*bp), Transform3()).with_joint("hinge", q);
}

manip::GraspPose world_grasp(const StructuralInstance& inst, double value = 0.0) {
  const auto& part = inst.part("handle");
  auto g = manip::grasp_pose(part.asset, manip::grasp_family(part.asset, "curve_pull"), value);
  g.pose = blueprint::part_pose(inst, "handle") * g.pose;
  return g;
}

SimScene attached_scene(double q = 0.0) {
  const auto inst = microwave(q);
  auto s = try_grasp(SimScene(inst), world_grasp(inst));
  EXPECT_EQ(s.gripper.attached, "handle");
  return s;
}

Vec3 world_force(const StructuralInstance& inst, const std::string& rule, double value = 0.0) {
  const auto& part = inst.part("handle");
  const auto g = manip::grasp_pose(part.asset, manip::grasp_family(part.asset, "curve_pull"), value);
  return apply_dir(blueprint::part_pose(inst, "handle"), manip::force_direction(inst, "handle", manip::force_rule(rule), g));
}

double pose_gap(const Transform3& a, const Transform3& b) { return (a.matrix() - b.matrix()).norm(); }

}  // namespace

TEST(TryGrasp, SampledCurveGraspsAttach) {
  const auto inst = microwave();
  const auto& part = inst.part("handle");
  const auto fam = manip::grasp_family(part.asset, "curve_pull");
  const Transform3 P = blueprint::part_pose(inst, "handle");
  for (auto g : manip::sample_grasps(part.asset, fam, 25, 3)) {
    g.pose = P * g.pose;
    const auto s = try_grasp(SimScene(inst), g);
    EXPECT_EQ(s.gripper.attached, "handle");
    EXPECT_LT(pose_gap(s.gripper.pose, g.pose), 1e-15);
    EXPECT_LT(pose_gap(P * s.gripper.offset, g.pose), 1e-12);
  }
}

TEST(TryGrasp, FarFromSurfaceStaysFree) {
  const auto inst = microwave();
  auto g = world_grasp(inst);
  g.pose = translate(-0.1 * g.approach()) * g.pose;
  EXPECT_FALSE(try_grasp(SimScene(inst), g).attached());
}

TEST(TryGrasp, WidthBelowTubeDiameterStaysFree) {
  const auto inst = microwave();
  auto g = world_grasp(inst);
  g.width = inst.part("handle").asset.value("r_t");  // half the tube diameter
  EXPECT_FALSE(try_grasp(SimScene(inst), g).attached());
}

TEST(TryGrasp, ReleaseFreesAndOpens) {
  const auto s = release(attached_scene());
  EXPECT_FALSE(s.attached());
  EXPECT_DOUBLE_EQ(s.gripper.width, manip::kMaxOpening);
}

TEST(StepInteract, PullTangentOpensTheDoor) {
  const auto s = attached_scene();
  const Vec3 f = world_force(s.object, "pull_revolute");
  const auto next = step_interact(s, 0.01 * f);
  EXPECT_GT(next.object.q("hinge"), 0.0);
  // small step: the joint turns by arc length over radius
  const auto wa = blueprint::world_joint_axis(s.object, "hinge");
  const Vec3 rel = s.gripper.pose.translation() - wa.anchor;
  const double radius = (rel - wa.axis * rel.dot(wa.axis)).norm();
  EXPECT_NEAR(next.object.q("hinge"), 0.01 / radius, 1e-12);
}

TEST(StepInteract, DisplacementAlongHingeDoesNothing) {
  const auto s = attached_scene(0.4);
  const auto wa = blueprint::world_joint_axis(s.object, "hinge");
  const auto next = step_interact(s, 0.02 * wa.axis);
  EXPECT_NEAR(next.object.q("hinge"), 0.4, 1e-12);
}

TEST(StepInteract, PushTangentClosesTheDoor) {
  const auto s = attached_scene(0.8);
  const auto next = step_interact(s, 0.01 * world_force(s.object, "push_revolute"));
  EXPECT_LT(next.object.q("hinge"), 0.8);
}

TEST(StepInteract, StepIsCapped) {
  const auto s = attached_scene();
  StepConfig cfg;
  const auto next = step_interact(s, 1.0 * world_force(s.object, "pull_revolute"), cfg);
  EXPECT_NEAR(next.object.q("hinge"), cfg.revolute_cap, 1e-12);
}

TEST(StepInteract, ZeroDisplacementChangesNothing) {
  const auto s = attached_scene(0.3);
  const auto next = step_interact(s, Vec3::Zero());
  EXPECT_EQ(next.object.q("hinge"), 0.3);
  EXPECT_EQ(next.gripper.pose.matrix(), s.gripper.pose.matrix());
  EXPECT_EQ(next.gripper.attached, "handle");
}

TEST(StepInteract, FreeGripperThrows) {
  EXPECT_THROW(step_interact(SimScene(microwave()), Vec3(0.01, 0, 0)), PreconditionError);
}

TEST(StepInteract, RandomWalkKeepsRangeAndRigidAttachment) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 0.02);
  for (const auto& bp : blueprint::builtin_blueprints()) {
    const auto inst = blueprint::instantiate(bp, blueprint::midpoint_params(*bp), Transform3(Rotation3::rz(0.7), Vec3(0.3, -0.2, 0.1)));
    const std::string jid = inst.driving_joint(bp->target_part);
    const auto& j = inst.joint(jid);
    SimScene s(inst);
    s.gripper.attached = bp->target_part;
    s.gripper.offset = translate(0.01, 0.02, 0.0);
    s.gripper.pose = blueprint::part_pose(inst, bp->target_part) * s.gripper.offset;
    for (int k = 0; k < 200; ++k) {
      s = step_interact(s, Vec3(n(rng), n(rng), n(rng)));
      const double q = s.object.q(jid);
      ASSERT_GE(q, j.q_min) << bp->blueprint_id;
      ASSERT_LE(q, j.q_max) << bp->blueprint_id;
      ASSERT_LT(pose_gap(s.gripper.pose, blueprint::part_pose(s.object, bp->target_part) * s.gripper.offset), 1e-9);
    }
  }
}

TEST(StepInteract, PrismaticFollowsAxisProjection) {
  const auto bp = blueprint::builtin_blueprint("drawer");
  const auto inst = blueprint::instantiate(bp, blueprint::midpoint_params(*bp), Transform3());
  const std::string jid = inst.driving_joint("handle");
  const auto wa = blueprint::world_joint_axis(inst, jid);
  SimScene s(inst);
  s.gripper.attached = "handle";
  s.gripper.pose = blueprint::part_pose(inst, "handle");
  const Vec3 side = wa.axis.unitOrthogonal();
  const auto next = step_interact(s, 0.004 * wa.axis + 0.05 * side);
  EXPECT_NEAR(next.object.q(jid) - inst.q(jid), 0.004, 1e-12);
}

TEST(EpisodeConfig, RejectsBadSettings) {
  EpisodeConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.p_closed = 1.5;
  EXPECT_THROW(cfg.validate(), PreconditionError);
  cfg = {};
  cfg.success_fraction = 0.0;
  EXPECT_THROW(cfg.validate(), PreconditionError);
  cfg = {};
  cfg.max_steps = -1;
  EXPECT_THROW(cfg.validate(), PreconditionError);
}

TEST(SimSession, InitialStateFollowsTheProtocol) {
  const auto bp = blueprint::builtin_blueprint("cabinet");
  int closed = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    EpisodeConfig cfg;
    cfg.seed = seed;
    cfg.ground_truth = true;
    SimSession s(bp, Task::pull, cfg);
    const auto& j = s.scene().object.joint(s.target_joint());
    const double q = s.scene().object.q(s.target_joint());
    const double fraction = (q - j.closed_value()) * j.opening_sign / j.range();
    EXPECT_GE(fraction, 0.0);
    EXPECT_LE(fraction, cfg.max_open_fraction + 1e-12);
    closed += fraction == 0.0 ? 1 : 0;
  }
  EXPECT_GT(closed, 70);
  EXPECT_LT(closed, 130);
}

TEST(SimSession, CameraOnUpperBand) {
  const auto bp = blueprint::builtin_blueprint("drawer");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EpisodeConfig cfg;
    cfg.seed = seed;
    SimSession s(bp, Task::pull, cfg);
    const Vec3 c = s.camera();
    EXPECT_NEAR(c.norm(), 2.0, 1e-9);
    const double el = std::asin(c.z() / c.norm()) * 180.0 / kPi;
    EXPECT_GE(el, 30.0 - 1e-9);
    EXPECT_LE(el, 60.0 + 1e-9);
    EXPECT_FALSE(s.part_cloud("handle").empty());
  }
}

TEST(SimSession, SameSeedSameObservation) {
  const auto bp = blueprint::builtin_blueprint("faucet");
  EpisodeConfig cfg;
  cfg.seed = 9;
  SimSession a(bp, Task::pull, cfg), b(bp, Task::pull, cfg);
  ASSERT_EQ(a.observation().size(), b.observation().size());
  for (std::size_t i = 0; i < a.observation().size(); ++i)
    EXPECT_EQ(a.observation().points[i], b.observation().points[i]);
}

TEST(RunEpisode, GroundTruthMicrowaveOpens) {
  EpisodeConfig cfg;
  cfg.ground_truth = true;
  cfg.p_closed = 1.0;
  cfg.seed = 4;
  const auto r = run_episode(blueprint::builtin_blueprint("microwave"), Task::pull, cfg);
  EXPECT_TRUE(r.success) << r.detail;
  EXPECT_EQ(r.failure, Failure::none);
  ASSERT_GE(r.joint_trajectory.size(), 2u);
  const auto& j = blueprint::builtin_blueprint("microwave")->part("door").joint;
  ASSERT_TRUE(j.has_value());
  EXPECT_GE(std::abs(r.joint_trajectory.back() - r.joint_trajectory.front()), 0.1 * 1.9 - 1e-12);
}

TEST(RunEpisode, ZeroStepBudgetIsNoMotion) {
  EpisodeConfig cfg;
  cfg.ground_truth = true;
  cfg.max_steps = 0;
  const auto r = run_episode(blueprint::builtin_blueprint("microwave"), Task::pull, cfg);
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.failure, Failure::no_motion);
  EXPECT_EQ(r.steps, 0);
}

TEST(RunEpisode, MismatchedConceptNeverSucceeds) {
  const auto bp = blueprint::builtin_blueprint("knob_door");
  const auto bar = concepts::builtin_asset("bar_handle");
  const std::set<Failure> expected{Failure::no_grasp, Failure::wrong_direction, Failure::collision, Failure::plan_fail};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EpisodeConfig cfg;
    cfg.seed = seed;
    SimSession s(bp, Task::pull, cfg);
    if (s.grasp("knob", s.fit_part("knob", bar), "pull_revolute").ok) s.interact();
    const auto r = s.result();
    EXPECT_FALSE(r.success);
    EXPECT_TRUE(expected.count(r.failure)) << to_string(r.failure);
    EXPECT_EQ(r.concept_id, "bar_handle");
  }
}

TEST(RunEpisode, PushClosesAnOpenDrawer) {
  EpisodeConfig cfg;
  cfg.ground_truth = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const auto r = run_episode(blueprint::builtin_blueprint("drawer"), Task::push, cfg);
    EXPECT_TRUE(r.success) << r.detail;
    EXPECT_LT(r.joint_trajectory.back(), r.joint_trajectory.front());
  }
}

TEST(Evaluate, GroundTruthPullAlwaysSucceeds) {
  std::vector<SuiteItem> suite;
  for (const auto& bp : blueprint::builtin_blueprints()) suite.push_back({bp, Task::pull});
  EpisodeConfig cfg;
  cfg.ground_truth = true;
  const auto report = evaluate(suite, 10, 3, cfg);
  ASSERT_EQ(report.rows.size(), suite.size());
  for (const auto& row : report.rows) EXPECT_DOUBLE_EQ(row.rate, 1.0) << row.category;
  EXPECT_DOUBLE_EQ(report.average, 1.0);
}

TEST(Evaluate, ResultsInvariants) {
  std::vector<SuiteItem> suite{{blueprint::builtin_blueprint("lever"), Task::pull},
                               {blueprint::builtin_blueprint("drawer"), Task::push}};
  std::vector<EpisodeResult> seen;
  const auto runner = [&](const SuiteItem& item, const EpisodeConfig& cfg) {
    auto r = run_episode(item.blueprint, item.task, cfg);
    seen.push_back(r);
    return r;
  };
  evaluate(suite, 4, 11, EpisodeConfig{}, runner);
  ASSERT_EQ(seen.size(), 8u);
  for (const auto& r : seen) {
    EXPECT_EQ(r.success, r.failure == Failure::none);
    EXPECT_EQ(r.success, r.detail.empty());
    EXPECT_EQ(r.joint_trajectory.size(), static_cast<std::size_t>(r.steps) + 1);
  }
}

TEST(Evaluate, DeterministicAcrossRunsAndThreads) {
  std::vector<SuiteItem> suite{{blueprint::builtin_blueprint("cabinet"), Task::pull},
                               {blueprint::builtin_blueprint("knob_door"), Task::pull}};
  auto render = [&](int threads) {
    std::ostringstream os;
    const auto rep = evaluate(suite, 3, 21, EpisodeConfig{}, {}, threads);
    write_table(os, rep);
    return os.str() + to_json(rep).dump();
  };
  const std::string once = render(1);
  EXPECT_EQ(once, render(1));
  EXPECT_EQ(once, render(2));
}

TEST(Evaluate, SingleEpisodeAndBadCounts) {
  std::vector<SuiteItem> suite{{blueprint::builtin_blueprint("faucet"), Task::pull}};
  const auto rep = evaluate(suite, 1, 5, EpisodeConfig{});
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_TRUE(rep.rows[0].rate == 0.0 || rep.rows[0].rate == 1.0);
  EXPECT_THROW(evaluate(suite, 0, 5, EpisodeConfig{}), PreconditionError);
  EXPECT_THROW(evaluate({}, 1, 5, EpisodeConfig{}), PreconditionError);
}

TEST(Evaluate, TableHasOneRowPerItemPlusAverage) {
  std::vector<SuiteItem> suite;
  for (const auto& bp : blueprint::builtin_blueprints()) suite.push_back({bp, Task::pull});
  EpisodeConfig cfg;
  cfg.ground_truth = true;
  std::ostringstream os;
  write_table(os, evaluate(suite, 1, 1, cfg));
  std::istringstream is(os.str());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), suite.size() + 2);
  EXPECT_EQ(lines.front().substr(0, 8), "category");
  EXPECT_EQ(lines.back().substr(0, 7), "average");
}
