#include <chrono>
#include <cmath>

#include <gtest/gtest.h>

#include "eac/errors.hpp"
#include "eac/fit.hpp"
#include "fit_cases.hpp"

using namespace eac;
using namespace eac::fit;
using eac::cases::make_fit_case;

namespace {

std::vector<Transform3> poses_around(const Transform3& pose) {
  std::vector<Transform3> out{pose};
  for (int a = 0; a < 3; ++a)
    for (double s : {-0.001, 0.001}) out.push_back(Transform3(pose.rotation(), pose.translation() + s * Vec3::Unit(a)));
  return out;
}

}  // namespace

TEST(Fit, CurveHandleFromFullCloud) {
  const auto asset = concepts::builtin_asset("curve_handle");
  const std::vector<double> truth{0.04, kPi / 2, 0.006};
  const Transform3 pose(rot_rpy(0.3, -0.7, 1.1), Vec3(0.2, -0.4, 0.9));
  const auto cloud = transform_cloud(pose, concepts::sample_surface({asset, truth}, 2048, 5));
  const auto r = fit_structural(asset, cloud);
  EXPECT_TRUE(r.fitted);
  EXPECT_LE(r.residual, 1e-4);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.params[std::size_t(i)], truth[std::size_t(i)], 0.02 * truth[std::size_t(i)]);
}

TEST(Fit, CurveHandleFromNoisyHalfView) {
  const auto asset = concepts::builtin_asset("curve_handle");
  const std::vector<double> truth{0.04, kPi / 2, 0.006};
  const Transform3 pose(rot_rpy(0.3, -0.7, 1.1), Vec3(0.2, -0.4, 0.9));
  // looking at the handle from the side it is grasped from
  const Vec3 camera = apply_point(pose, Vec3(0.4, -1.8, 0.6));
  const auto cloud = blueprint::render_asset_partial({asset, truth}, pose, 8192, 5, {camera, 0.0005});
  const auto r = fit_structural(asset, cloud);
  EXPECT_TRUE(r.fitted);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.params[std::size_t(i)], truth[std::size_t(i)], 0.05 * truth[std::size_t(i)]);
}

TEST(Fit, EveryAssetTypeFromFullClouds) {
  for (const auto& id : cases::fit_asset_ids()) {
    for (int k = 0; k < 3; ++k) {
      const auto c = make_fit_case(id, k);
      const auto r = fit_structural(c.asset, cases::full_cloud(c, k));
      EXPECT_LE(cases::relative_error(*c.asset, r.params, c.truth), 0.02) << id << " " << k;
      EXPECT_LE(r.residual, 1e-4) << id << " " << k;
    }
  }
}

TEST(Fit, TooFewPoints) {
  const auto asset = concepts::builtin_asset("knob");
  const auto cloud = concepts::sample_surface({asset, {0.02, 0.02, 6}}, 10, 1);
  EXPECT_THROW(fit_structural(asset, cloud), PreconditionError);
}

TEST(Fit, ConfigValidation) {
  FitConfig cfg;
  cfg.starts = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = FitConfig{};
  cfg.tolerance = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_NO_THROW(FitConfig{}.validate());
}

TEST(Fit, WrongConceptReportsNoFit) {
  const auto box = concepts::builtin_asset("box");
  const auto cloud = concepts::sample_surface({box, {0.3, 0.2, 0.25}}, 1024, 3);
  const auto r = fit_structural(concepts::builtin_asset("curve_handle"), cloud);
  EXPECT_FALSE(r.fitted);
  EXPECT_GT(r.residual, FitConfig{}.max_residual);
  EXPECT_NE(r.diagnostics.find("no fit"), std::string::npos);
}

TEST(Fit, ParamsStayInRangeAndHistoryNeverIncreases) {
  for (const auto& id : cases::fit_asset_ids()) {
    const auto c = make_fit_case(id, 4);
    const auto r = fit_structural(c.asset, cases::half_view_cloud(c, 4));
    for (std::size_t i = 0; i < r.params.size(); ++i) {
      EXPECT_GE(r.params[i], c.asset->params[i].lower) << id;
      EXPECT_LE(r.params[i], c.asset->params[i].upper) << id;
    }
    ASSERT_FALSE(r.history.empty());
    for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i], r.history[i - 1]) << id;
    EXPECT_GE(r.inlier_fraction, 0.0);
    EXPECT_LE(r.inlier_fraction, 1.0);
  }
}

TEST(Fit, DeterministicForSeed) {
  const auto c = make_fit_case("bar_handle", 2);
  const auto cloud = cases::half_view_cloud(c, 2);
  const auto a = fit_structural(c.asset, cloud);
  const auto b = fit_structural(c.asset, cloud);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.pose.matrix(), b.pose.matrix());
  EXPECT_EQ(a.residual, b.residual);
}

TEST(Fit, RefitOfFittedInstanceIsStable) {
  for (const auto& id : {"ring_handle", "lever"}) {
    const auto c = make_fit_case(id, 6);
    const auto first = fit_structural(c.asset, cases::half_view_cloud(c, 6));
    const auto resampled =
        transform_cloud(first.pose, concepts::sample_surface(first.instance(c.asset), 2048, 99));
    const auto second = fit_structural(c.asset, resampled);
    for (std::size_t i = 0; i < first.params.size(); ++i)
      if (c.asset->params[i].geometric) EXPECT_NEAR(second.params[i], first.params[i], 1e-6) << id;
  }
}

TEST(Fit, RoundTripPose) {
  // the lever has no rotational symmetry, so its pose is unique
  const auto c = make_fit_case("lever", 1);
  const Transform3 object(rot_rpy(0.1, 0.2, -0.4), Vec3(1.0, 0.5, 0.2));
  const auto cloud = transform_cloud(invert(object), cases::full_cloud(c, 1));
  const auto r = fit_structural(c.asset, cloud);
  const Transform3 world = recover_pose(object, r.pose);
  EXPECT_LT((world.translation() - c.pose.translation()).norm(), 0.001);
  EXPECT_LT(world.rotation().angle_to(c.pose.rotation()), kPi / 180);
}

TEST(Fit, RecoverPoseComposes) {
  const Transform3 local(rot_rpy(0.2, 0.0, 0.5), Vec3(0.1, 0.2, 0.3));
  EXPECT_TRUE(recover_pose(Transform3(), local).matrix().isApprox(local.matrix(), 1e-15));
  const Transform3 shifted = recover_pose(translate(1, 0, 0), local);
  EXPECT_TRUE(shifted.rotation().matrix().isApprox(local.rotation().matrix(), 1e-15));
  EXPECT_TRUE(shifted.translation().isApprox(local.translation() + Vec3(1, 0, 0), 1e-15));
}

TEST(Fit, RmsResidualMatchesDirectSum) {
  const auto asset = concepts::builtin_asset("box");
  const concepts::AssetInstance inst(asset, {0.2, 0.2, 0.2});
  PointCloud cloud;
  cloud.points = {Vec3(0.2, 0, 0), Vec3(0, 0, 0), Vec3(0, 0.1, 0)};  // distances 0.1, -0.1, 0
  EXPECT_NEAR(rms_residual(inst, Transform3(), cloud), std::sqrt(0.02 / 3.0), 1e-12);
  EXPECT_THROW(rms_residual(inst, Transform3(), PointCloud{}), PreconditionError);
}

TEST(Oracle, SingleCellGridReturnsThatCell) {
  const auto asset = concepts::builtin_asset("knob");
  const std::vector<double> v{0.02, 0.03, 4};
  const auto cloud = concepts::sample_surface({asset, v}, 512, 2);
  OracleGrid grid{{{0.025}, {0.02}, {4}}, {translate(0.001, 0, 0)}};
  const auto r = brute_force_oracle(asset, cloud, grid);
  EXPECT_EQ(r.params, (std::vector<double>{0.025, 0.02, 4}));
  EXPECT_NEAR(r.residual, rms_residual({asset, {0.025, 0.02, 4}}, translate(0.001, 0, 0), cloud), 1e-15);
}

TEST(Oracle, EmptyGridRejected) {
  const auto asset = concepts::builtin_asset("knob");
  const auto cloud = concepts::sample_surface({asset, {0.02, 0.03, 4}}, 128, 2);
  EXPECT_THROW(brute_force_oracle(asset, cloud, {{{0.02}, {}, {4}}, {Transform3()}}), PreconditionError);
  EXPECT_THROW(brute_force_oracle(asset, cloud, {{{0.02}, {0.03}, {4}}, {}}), PreconditionError);
}

TEST(Oracle, UniformGridIncludesEndpoints) {
  const auto asset = concepts::builtin_asset("knob");
  const auto g = uniform_grid(*asset, 5);
  ASSERT_EQ(g.size(), 3u);
  EXPECT_DOUBLE_EQ(g[0].front(), 0.015);
  EXPECT_DOUBLE_EQ(g[0].back(), 0.035);
  EXPECT_EQ(g[0].size(), 5u);
  EXPECT_EQ(g[2].size(), 1u);  // symmetry order is not geometric
}

TEST(Oracle, GridWithTruthNeverBeatsFit) {
  const auto c = make_fit_case("bar_handle", 3);
  const auto cloud = cases::full_cloud(c, 3);
  auto values = uniform_grid(*c.asset, 4);
  for (std::size_t i = 0; i < values.size(); ++i) values[i].push_back(c.truth[i]);
  const auto oracle = brute_force_oracle(c.asset, cloud, {values, poses_around(c.pose)});
  const auto fitted = fit_structural(c.asset, cloud);
  EXPECT_LE(oracle.residual, fitted.residual + 1e-9);
  EXPECT_EQ(oracle.params, c.truth);
}

TEST(Oracle, AgreesWithFitWithinOneCell) {
  constexpr int kPerParam = 9;
  for (int k = 0; k < 6; ++k) {
    const auto& id = cases::fit_asset_ids()[std::size_t(k)];
    const auto c = make_fit_case(id, k);
    const auto cloud = cases::full_cloud(c, k);
    const auto oracle = brute_force_oracle(c.asset, cloud, {uniform_grid(*c.asset, kPerParam), poses_around(c.pose)});
    const auto fitted = fit_structural(c.asset, cloud);
    bool agree = false;
    for (const auto& e : cases::equivalent_params(*c.asset, fitted.params)) {
      bool all = true;
      for (std::size_t i = 0; i < e.size(); ++i) {
        const auto& p = c.asset->params[i];
        if (p.geometric) all = all && std::abs(e[i] - oracle.params[i]) <= (p.upper - p.lower) / (kPerParam - 1);
      }
      agree = agree || all;
    }
    EXPECT_TRUE(agree) << id;
  }
}

TEST(Fit, JsonReport) {
  const auto c = make_fit_case("knob", 0);
  const auto r = fit_structural(c.asset, cases::full_cloud(c, 0));
  const auto j = to_json(r, *c.asset);
  EXPECT_EQ(j["asset"], "knob");
  EXPECT_TRUE(j["params"].contains("radius"));
  EXPECT_EQ(j["pose"]["xyz"].size(), 3u);
  EXPECT_TRUE(j["fitted"].get<bool>()) << j.dump();
}

TEST(Fit, ResolveFacingTurnsTowardTheMount) {
  const auto c = make_fit_case("knob", 2);
  const concepts::AssetInstance inst(c.asset, c.truth);
  const auto cloud = cases::full_cloud(c, 2);
  const std::vector<Vec3> mount{c.pose.translation()};

  FitResult right;
  right.asset_id = "knob";
  right.params = c.truth;
  right.pose = c.pose;
  right.fitted = true;
  right.residual = rms_residual(inst, c.pose, cloud);
  EXPECT_EQ(resolve_facing(c.asset, right, cloud, mount).pose.matrix(), c.pose.matrix());

  Vec3 lo = Vec3::Constant(1e9), hi = -lo;
  for (const auto& p : concepts::sample_surface(inst, 512, 0).points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 center = 0.5 * (lo + hi);
  FitResult mirrored = right;
  mirrored.pose = c.pose * translate(center) * rotate(Rotation3::rx(kPi)) * translate(-center);
  mirrored.residual = rms_residual(inst, mirrored.pose, cloud);
  const auto fixed = resolve_facing(c.asset, mirrored, cloud, mount);
  EXPECT_LT((fixed.pose.matrix() - c.pose.matrix()).norm(), 1e-12);
  EXPECT_LE(fixed.residual, mirrored.residual);

  // surroundings already at the fitted origin
  const std::vector<Vec3> far{apply_point(mirrored.pose, Vec3::Zero())};
  EXPECT_EQ(resolve_facing(c.asset, mirrored, cloud, far).pose.matrix(), mirrored.pose.matrix());
  EXPECT_EQ(resolve_facing(c.asset, mirrored, cloud, {}).pose.matrix(), mirrored.pose.matrix());
}
