#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace eac {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kPi = 3.14159265358979323846;

/// Tolerance used for orthonormality/determinant checks on rotations.
inline constexpr double kRotationTol = 1e-9;

/// Rotation matrix with orthonormal columns and unit determinant.
///
/// Construction from an arbitrary matrix re-projects onto SO(3) (polar
/// decomposition) when the input drifts more than kRotationTol; inputs far
/// from a rotation are rejected.
class Rotation3 {
 public:
  Rotation3() : m_(Mat3::Identity()) {}
  explicit Rotation3(const Mat3& m);

  static Rotation3 identity() { return Rotation3(); }
  static Rotation3 about_axis(const Vec3& axis, double angle);
  static Rotation3 rx(double a);
  static Rotation3 ry(double a);
  static Rotation3 rz(double a);

  const Mat3& matrix() const { return m_; }
  Rotation3 transpose() const;
  Rotation3 operator*(const Rotation3& o) const;
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  /// Geodesic angle in [0, pi] between this rotation and `o`.
  double angle_to(const Rotation3& o) const;

  /// Fixed-axis roll/pitch/yaw such that matrix = Rz(c) Ry(b) Rx(a).
  Vec3 rpy() const;

  bool is_valid(double tol = kRotationTol) const;

 private:
  struct Unchecked {};
  Rotation3(const Mat3& m, Unchecked) : m_(m) {}
  Mat3 m_;
};

/// Rigid transform x -> R x + t.
class Transform3 {
 public:
  Transform3() = default;
  Transform3(const Rotation3& r, const Vec3& t) : rot_(r), trans_(t) {}

  static Transform3 identity() { return {}; }
  static Transform3 from_matrix(const Mat4& m);

  const Rotation3& rotation() const { return rot_; }
  const Vec3& translation() const { return trans_; }

  Mat4 matrix() const;

 private:
  Rotation3 rot_;
  Vec3 trans_ = Vec3::Zero();
};

/// Ordered point set with optional per-point part labels.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<int> labels;  // empty, or one label per point

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_labels() const { return !labels.empty(); }

  /// Throws std::invalid_argument when labels are present but do not cover every point.
  void validate() const;

  /// Subset with the given label (requires labels).
  PointCloud select(int label) const;
  Vec3 centroid() const;
};

Rotation3 rot_rpy(double a, double b, double c);
Transform3 translate(double x, double y, double z);
inline Transform3 translate(const Vec3& t) { return translate(t.x(), t.y(), t.z()); }
Transform3 compose(const Transform3& a, const Transform3& b);
Transform3 invert(const Transform3& a);
Vec3 apply_point(const Transform3& a, const Vec3& p);
Vec3 apply_dir(const Transform3& a, const Vec3& d);

inline Transform3 operator*(const Transform3& a, const Transform3& b) { return compose(a, b); }

/// Pure rotation as a transform.
inline Transform3 rotate(const Rotation3& r) { return Transform3(r, Vec3::Zero()); }

/// Candidate closest (geodesic angle) to `reference`; ties keep the lowest index.
/// Throws std::invalid_argument for an empty candidate list.
Rotation3 minimal_rotation(std::span<const Rotation3> candidates, const Rotation3& reference);
std::size_t minimal_rotation_index(std::span<const Rotation3> candidates, const Rotation3& reference);

/// Exponential map of a rotation vector (axis * angle).
Rotation3 exp_so3(const Vec3& w);

PointCloud transform_cloud(const Transform3& a, const PointCloud& cloud);

}  // namespace eac
