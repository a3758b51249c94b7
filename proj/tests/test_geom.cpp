#include <random>

#include <gtest/gtest.h>

#include "eac/expr.hpp"
#include "eac/geom.hpp"

using namespace eac;

namespace {

Rotation3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return Rotation3(q.toRotationMatrix());
}

Transform3 random_transform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  return Transform3(random_rotation(rng), Vec3(u(rng), u(rng), u(rng)));
}

}  // namespace

TEST(Rotation, RpyMatchesAngleAxisProduct) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng), b = u(rng) / 2, c = u(rng);
    const Mat3 oracle = (Eigen::AngleAxisd(c, Vec3::UnitZ()) * Eigen::AngleAxisd(b, Vec3::UnitY()) *
                         Eigen::AngleAxisd(a, Vec3::UnitX()))
                            .toRotationMatrix();
    EXPECT_LT((rot_rpy(a, b, c).matrix() - oracle).norm(), 1e-12);
    const Vec3 back = rot_rpy(a, b, c).rpy();
    EXPECT_LT((rot_rpy(back.x(), back.y(), back.z()).matrix() - oracle).norm(), 1e-9);
  }
}

TEST(Rotation, GripperFrameConvention) {
  const Rotation3 r = rot_rpy(kPi / 2, 0, kPi / 2);
  EXPECT_LT((r * Vec3::UnitX() - Vec3::UnitY()).norm(), 1e-15);
  EXPECT_LT((r * Vec3::UnitY() - Vec3::UnitZ()).norm(), 1e-15);
  EXPECT_LT((r * Vec3::UnitZ() - Vec3::UnitX()).norm(), 1e-15);
}

TEST(Rotation, ProjectsSmallDriftAndRejectsGarbage) {
  Mat3 m = Rotation3::rz(0.3).matrix();
  m(0, 1) += 1e-6;
  EXPECT_TRUE(Rotation3(m).is_valid());
  EXPECT_THROW(Rotation3(Mat3::Identity() * 2.0), std::invalid_argument);
  EXPECT_THROW(Rotation3(Mat3(Eigen::Vector3d(1, 1, -1).asDiagonal())), std::invalid_argument);
}

TEST(Rotation, AngleToMatchesAngleAxis) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const Rotation3 a = random_rotation(rng), b = random_rotation(rng);
    const double oracle = Eigen::AngleAxisd(a.matrix().transpose() * b.matrix()).angle();
    EXPECT_NEAR(a.angle_to(b), oracle, 1e-9);
  }
  EXPECT_NEAR(Rotation3::rx(kPi).angle_to(Rotation3()), kPi, 1e-12);
}

TEST(Rotation, ExpMatchesAngleAxis) {
  const Vec3 w(0.3, -1.2, 0.5);
  const Mat3 oracle = Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix();
  EXPECT_LT((exp_so3(w).matrix() - oracle).norm(), 1e-12);
  EXPECT_LT((exp_so3(Vec3::Zero()).matrix() - Mat3::Identity()).norm(), 1e-15);
}

TEST(Transform, GroupLaws) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Transform3 a = random_transform(rng), b = random_transform(rng), c = random_transform(rng);
    EXPECT_LT((((a * b) * c).matrix() - (a * (b * c)).matrix()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(((a * invert(a)).matrix() - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    const Vec3 p(u(rng), u(rng), u(rng));
    EXPECT_LT((apply_point(a, p) - (a.matrix() * p.homogeneous()).head<3>()).norm(), 1e-12);
    EXPECT_NEAR(apply_dir(a, p).norm(), p.norm(), 1e-12);
    EXPECT_TRUE((a * b).rotation().is_valid());
  }
}

TEST(Transform, FromMatrixRoundTrip) {
  std::mt19937_64 rng(9);
  const Transform3 a = random_transform(rng);
  EXPECT_LT((Transform3::from_matrix(a.matrix()).matrix() - a.matrix()).norm(), 1e-12);
  Mat4 bad = a.matrix();
  bad(3, 0) = 1.0;
  EXPECT_THROW(Transform3::from_matrix(bad), std::invalid_argument);
}

TEST(MinimalRotation, PicksClosestAndBreaksTiesLow) {
  std::vector<Rotation3> cands;
  for (int k = 0; k < 4; ++k) cands.push_back(Rotation3::ry(k * kPi / 2));
  EXPECT_EQ(minimal_rotation_index(cands, Rotation3::ry(1.4)), 1u);
  EXPECT_EQ(minimal_rotation_index(cands, Rotation3::ry(-1.2)), 3u);
  // equidistant from index 0 and 1
  EXPECT_EQ(minimal_rotation_index(cands, Rotation3::ry(kPi / 4)), 0u);
  EXPECT_THROW(minimal_rotation(std::span<const Rotation3>(), Rotation3()), std::invalid_argument);
}

TEST(MinimalRotation, AgreesWithExhaustiveSearch) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    std::vector<Rotation3> cands;
    for (int k = 0; k < 6; ++k) cands.push_back(random_rotation(rng));
    const Rotation3 ref = random_rotation(rng);
    std::size_t best = 0;
    double best_angle = 1e9;
    for (std::size_t k = 0; k < cands.size(); ++k) {
      const double ang = Eigen::AngleAxisd(cands[k].matrix().transpose() * ref.matrix()).angle();
      if (ang < best_angle) best_angle = ang, best = k;
    }
    EXPECT_EQ(minimal_rotation_index(cands, ref), best);
  }
}

TEST(PointCloud, LabelsAndSelection) {
  PointCloud c;
  c.points = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(3, 0, 0)};
  c.labels = {0, 1, 1};
  EXPECT_NO_THROW(c.validate());
  const PointCloud s = c.select(1);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s.centroid().x(), 2.0);
  c.labels.pop_back();
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Expr, EvaluatesArithmetic) {
  const std::map<std::string, double> vars{{"a", 2.0}, {"b", 0.5}};
  EXPECT_DOUBLE_EQ(Expr::parse("a*3 - b/2").eval(vars), 5.75);
  EXPECT_DOUBLE_EQ(Expr::parse("-a^2").eval(vars), -4.0);
  EXPECT_DOUBLE_EQ(Expr::parse("max(a, b) + min(a, b)").eval(vars), 2.5);
  EXPECT_NEAR(Expr::parse("cos(pi/3)").eval({}), 0.5, 1e-15);
  EXPECT_TRUE(Expr::parse("1.5e-2").is_constant());
  ASSERT_NE(Expr::parse(" a ").as_variable(), nullptr);
  EXPECT_EQ(*Expr::parse("a").as_variable(), "a");
  EXPECT_EQ(Expr::parse("a+b").variables().size(), 2u);
}

TEST(Expr, Errors) {
  EXPECT_THROW(Expr::parse("a +"), std::invalid_argument);
  EXPECT_THROW(Expr::parse("foo(1)"), std::invalid_argument);
  EXPECT_THROW(Expr::parse("(1"), std::invalid_argument);
  EXPECT_THROW(Expr::parse("c").eval({}), std::out_of_range);
}
