#include "eac/geom.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

namespace eac {

namespace {

// Nearest rotation in the Frobenius sense (polar factor of m).
Mat3 project_to_so3(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

double orthonormality_error(const Mat3& m) {
  const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(m.determinant() - 1.0));
}

}  // namespace

Rotation3::Rotation3(const Mat3& m) {
  if (!m.allFinite()) throw std::invalid_argument("rotation matrix has non-finite entries");
  const double err = orthonormality_error(m);
  if (err <= kRotationTol) {
    m_ = m;
    return;
  }
  if (err > 1e-3 || m.determinant() <= 0.0)
    throw std::invalid_argument("matrix is not a proper rotation");
  m_ = project_to_so3(m);
}

Rotation3 Rotation3::about_axis(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0)) throw std::invalid_argument("rotation axis must be non-zero");
  return Rotation3(Eigen::AngleAxisd(angle, axis / n).toRotationMatrix(), Unchecked{});
}

Rotation3 Rotation3::rx(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return Rotation3(m, Unchecked{});
}

Rotation3 Rotation3::ry(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return Rotation3(m, Unchecked{});
}

Rotation3 Rotation3::rz(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return Rotation3(m, Unchecked{});
}

Rotation3 Rotation3::transpose() const { return Rotation3(m_.transpose(), Unchecked{}); }

Rotation3 Rotation3::operator*(const Rotation3& o) const {
  Mat3 p = m_ * o.m_;
  if (orthonormality_error(p) > 0.5 * kRotationTol) p = project_to_so3(p);
  return Rotation3(p, Unchecked{});
}

double Rotation3::angle_to(const Rotation3& o) const {
  const Mat3 rel = m_.transpose() * o.m_;
  // atan2 form stays accurate near 0 and pi, unlike acos of the trace.
  const Vec3 axis(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (rel.trace() - 1.0));
}

Vec3 Rotation3::rpy() const {
  const double sb = std::clamp(-m_(2, 0), -1.0, 1.0);
  const double b = std::asin(sb);
  if (std::abs(sb) > 1.0 - 1e-12) {
    // Gimbal lock: only a -/+ c is defined; pin c = 0.
    const double a = std::atan2(-m_(1, 2), m_(1, 1));
    return {sb > 0 ? a : -a, b, 0.0};
  }
  return {std::atan2(m_(2, 1), m_(2, 2)), b, std::atan2(m_(1, 0), m_(0, 0))};
}

bool Rotation3::is_valid(double tol) const { return orthonormality_error(m_) <= tol; }

Transform3 Transform3::from_matrix(const Mat4& m) {
  if (std::abs(m(3, 0)) + std::abs(m(3, 1)) + std::abs(m(3, 2)) + std::abs(m(3, 3) - 1.0) > 1e-12)
    throw std::invalid_argument("homogeneous matrix bottom row must be (0,0,0,1)");
  return {Rotation3(Mat3(m.topLeftCorner<3, 3>())), Vec3(m.topRightCorner<3, 1>())};
}

Mat4 Transform3::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rot_.matrix();
  m.topRightCorner<3, 1>() = trans_;
  return m;
}

void PointCloud::validate() const {
  if (!labels.empty() && labels.size() != points.size())
    throw std::invalid_argument("point labels must cover every point");
}

PointCloud PointCloud::select(int label) const {
  validate();
  PointCloud out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) {
      out.points.push_back(points[i]);
      out.labels.push_back(label);
    }
  }
  return out;
}

Vec3 PointCloud::centroid() const {
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  return points.empty() ? c : Vec3(c / double(points.size()));
}

Rotation3 rot_rpy(double a, double b, double c) {
  return Rotation3::rz(c) * Rotation3::ry(b) * Rotation3::rx(a);
}

Transform3 translate(double x, double y, double z) { return {Rotation3(), Vec3(x, y, z)}; }

Transform3 compose(const Transform3& a, const Transform3& b) {
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

Transform3 invert(const Transform3& a) {
  const Rotation3 rt = a.rotation().transpose();
  return {rt, -(rt * a.translation())};
}

Vec3 apply_point(const Transform3& a, const Vec3& p) { return a.rotation() * p + a.translation(); }

Vec3 apply_dir(const Transform3& a, const Vec3& d) { return a.rotation() * d; }

std::size_t minimal_rotation_index(std::span<const Rotation3> candidates, const Rotation3& reference) {
  if (candidates.empty()) throw std::invalid_argument("minimal_rotation: empty candidate list");
  std::size_t best = 0;
  double best_angle = candidates[0].angle_to(reference);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double ang = candidates[i].angle_to(reference);
    if (ang < best_angle - 1e-12) {
      best = i;
      best_angle = ang;
    }
  }
  return best;
}

Rotation3 minimal_rotation(std::span<const Rotation3> candidates, const Rotation3& reference) {
  return candidates[minimal_rotation_index(candidates, reference)];
}

Rotation3 exp_so3(const Vec3& w) {
  const double angle = w.norm();
  if (angle < 1e-300) return Rotation3();
  return Rotation3::about_axis(w / angle, angle);
}

PointCloud transform_cloud(const Transform3& a, const PointCloud& cloud) {
  PointCloud out = cloud;
  for (auto& p : out.points) p = apply_point(a, p);
  return out;
}

}  // namespace eac
