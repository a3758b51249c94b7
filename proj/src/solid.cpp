#include "eac/solid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace eac {

namespace {

constexpr double kAcceptEps = 1e-12;

double uniform(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// Picks an index from cumulative weights using u in [0,1) and returns u
// rescaled into the chosen bucket, so the remaining randomness stays stratified.
std::size_t pick(const std::vector<double>& weights, double& u) {
  double total = 0.0;
  for (double w : weights) total += w;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double hi = acc + weights[i] / total;
    if (u < hi || i + 1 == weights.size()) {
      u = weights[i] > 0 ? std::clamp((u - acc) / (hi - acc), 0.0, 1.0 - 1e-16) : 0.0;
      return i;
    }
    acc = hi;
  }
  return weights.size() - 1;
}

class Box final : public Solid {
 public:
  Box(const Vec3& c, const Vec3& h) : c_(c), h_(h) {
    if ((h.array() <= 0.0).any()) throw std::invalid_argument("box half extents must be positive");
  }

  double sdf(const Vec3& p) const override {
    const Vec3 q = (p - c_).cwiseAbs() - h_;
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
  }

  double area() const override { return 8.0 * (h_.x() * h_.y() + h_.y() * h_.z() + h_.z() * h_.x()); }

  SurfaceSample sample(double u, Rng& rng) const override {
    const std::vector<double> w{h_.y() * h_.z(), h_.y() * h_.z(), h_.x() * h_.z(),
                                h_.x() * h_.z(), h_.x() * h_.y(), h_.x() * h_.y()};
    const std::size_t face = pick(w, u);
    const int axis = int(face / 2);
    const double sign = face % 2 == 0 ? 1.0 : -1.0;
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    Vec3 local;
    local[axis] = sign * h_[axis];
    local[a1] = (2.0 * u - 1.0) * h_[a1];
    local[a2] = (2.0 * uniform(rng) - 1.0) * h_[a2];
    Vec3 n = Vec3::Zero();
    n[axis] = sign;
    return {c_ + local, n};
  }

 private:
  Vec3 c_, h_;
};

class Cylinder final : public Solid {
 public:
  Cylinder(int axis, const Vec3& c, double r, double hl) : axis_(axis), c_(c), r_(r), hl_(hl) {
    if (axis < 0 || axis > 2 || r <= 0 || hl <= 0) throw std::invalid_argument("bad cylinder");
  }

  double sdf(const Vec3& p) const override {
    const Vec3 d = p - c_;
    const double along = d[axis_];
    const double radial = std::hypot(d[(axis_ + 1) % 3], d[(axis_ + 2) % 3]);
    const double qx = radial - r_, qy = std::abs(along) - hl_;
    return std::hypot(std::max(qx, 0.0), std::max(qy, 0.0)) + std::min(std::max(qx, qy), 0.0);
  }

  double area() const override { return 2.0 * kPi * r_ * (2.0 * hl_) + 2.0 * kPi * r_ * r_; }

  SurfaceSample sample(double u, Rng& rng) const override {
    const std::vector<double> w{2.0 * hl_ * r_, 0.5 * r_ * r_, 0.5 * r_ * r_};
    const std::size_t part = pick(w, u);
    const int a1 = (axis_ + 1) % 3, a2 = (axis_ + 2) % 3;
    const double phi = 2.0 * kPi * uniform(rng);
    Vec3 local = Vec3::Zero(), n = Vec3::Zero();
    if (part == 0) {
      local[axis_] = (2.0 * u - 1.0) * hl_;
      local[a1] = r_ * std::cos(phi);
      local[a2] = r_ * std::sin(phi);
      n[a1] = std::cos(phi);
      n[a2] = std::sin(phi);
    } else {
      const double sign = part == 1 ? 1.0 : -1.0;
      const double rho = r_ * std::sqrt(u);
      local[axis_] = sign * hl_;
      local[a1] = rho * std::cos(phi);
      local[a2] = rho * std::sin(phi);
      n[axis_] = sign;
    }
    return {c_ + local, n};
  }

 private:
  int axis_;
  Vec3 c_;
  double r_, hl_;
};

class Annulus final : public Solid {
 public:
  Annulus(double ri, double ro, double ht) : ri_(ri), ro_(ro), ht_(ht) {
    if (!(ri > 0 && ro > ri && ht > 0)) throw std::invalid_argument("bad annulus");
  }

  double sdf(const Vec3& p) const override {
    const double rho = std::hypot(p.x(), p.y());
    const double qx = std::abs(rho - 0.5 * (ri_ + ro_)) - 0.5 * (ro_ - ri_);
    const double qy = std::abs(p.z()) - ht_;
    return std::hypot(std::max(qx, 0.0), std::max(qy, 0.0)) + std::min(std::max(qx, qy), 0.0);
  }

  double area() const override {
    return 2.0 * kPi * (ro_ * ro_ - ri_ * ri_) + 2.0 * kPi * (ro_ + ri_) * 2.0 * ht_;
  }

  SurfaceSample sample(double u, Rng& rng) const override {
    const double face = 0.5 * (ro_ * ro_ - ri_ * ri_);
    const std::vector<double> w{face, face, ro_ * 2.0 * ht_, ri_ * 2.0 * ht_};
    const std::size_t part = pick(w, u);
    const double phi = 2.0 * kPi * uniform(rng);
    const Vec3 radial(std::cos(phi), std::sin(phi), 0.0);
    if (part < 2) {
      const double sign = part == 0 ? 1.0 : -1.0;
      const double rho = std::sqrt(ri_ * ri_ + u * (ro_ * ro_ - ri_ * ri_));
      return {rho * radial + Vec3(0, 0, sign * ht_), Vec3(0, 0, sign)};
    }
    const double z = (2.0 * u - 1.0) * ht_;
    if (part == 2) return {ro_ * radial + Vec3(0, 0, z), radial};
    return {ri_ * radial + Vec3(0, 0, z), -radial};
  }

 private:
  double ri_, ro_, ht_;
};

class TorusArc final : public Solid {
 public:
  TorusArc(double radius, double arc, double tube) : R_(radius), arc_(arc), r_(tube) {
    if (!(radius > 0 && tube > 0 && tube < radius && arc > 0 && arc < 2.0 * kPi))
      throw std::invalid_argument("bad torus arc");
    ends_[0] = center(-0.5 * arc_);
    ends_[1] = center(0.5 * arc_);
  }

  double sdf(const Vec3& p) const override {
    const double phi = std::atan2(p.x(), -p.y());
    double d;
    if (std::abs(phi) <= 0.5 * arc_) {
      d = std::hypot(std::hypot(p.x(), p.y()) - R_, p.z());
    } else {
      d = std::min((p - ends_[0]).norm(), (p - ends_[1]).norm());
    }
    return d - r_;
  }

  double area() const override { return arc_ * r_ * 2.0 * kPi * R_ + 4.0 * kPi * r_ * r_; }

  SurfaceSample sample(double u, Rng& rng) const override {
    const std::vector<double> w{arc_ * R_, r_, r_};
    const std::size_t part = pick(w, u);
    if (part == 0) {
      const double phi = (u - 0.5) * arc_;
      double psi;
      for (;;) {
        psi = 2.0 * kPi * uniform(rng);
        if (uniform(rng) * (R_ + r_) <= R_ + r_ * std::cos(psi)) break;
      }
      const Vec3 e(std::sin(phi), -std::cos(phi), 0.0);
      const Vec3 n = std::cos(psi) * e + std::sin(psi) * Vec3::UnitZ();
      return {center(phi) + r_ * n, n};
    }
    // Hemispherical cap on the outward side of the arc end.
    const double end_phi = part == 2 ? 0.5 * arc_ : -0.5 * arc_;
    const Vec3 tangent = (part == 2 ? 1.0 : -1.0) * Vec3(std::cos(end_phi), std::sin(end_phi), 0.0);
    const double z = 2.0 * u - 1.0;
    const double az = 2.0 * kPi * uniform(rng);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    Vec3 n(s * std::cos(az), s * std::sin(az), z);
    if (n.dot(tangent) < 0.0) n -= 2.0 * n.dot(tangent) * tangent;
    return {center(end_phi) + r_ * n, n};
  }

 private:
  Vec3 center(double phi) const { return R_ * Vec3(std::sin(phi), -std::cos(phi), 0.0); }

  double R_, arc_, r_;
  Vec3 ends_[2];
};

class Union final : public Solid {
 public:
  explicit Union(std::vector<SolidPtr> parts) : parts_(std::move(parts)) {
    if (parts_.empty()) throw std::invalid_argument("union of nothing");
    for (const auto& p : parts_) weights_.push_back(p->area());
  }

  double sdf(const Vec3& p) const override {
    double d = parts_[0]->sdf(p);
    for (std::size_t i = 1; i < parts_.size(); ++i) d = std::min(d, parts_[i]->sdf(p));
    return d;
  }

  double area() const override {
    double a = 0.0;
    for (double w : weights_) a += w;
    return a;
  }

  SurfaceSample sample(double u, Rng& rng) const override {
    for (int attempt = 0; attempt < 100000; ++attempt) {
      double sub = attempt == 0 ? u : uniform(rng);
      const std::size_t k = pick(weights_, sub);
      const SurfaceSample s = parts_[k]->sample(sub, rng);
      bool exposed = true;
      for (std::size_t j = 0; j < parts_.size() && exposed; ++j)
        if (j != k && parts_[j]->sdf(s.point) < -kAcceptEps) exposed = false;
      if (exposed) return s;
    }
    throw std::runtime_error("union sampling failed: no exposed surface");
  }

 private:
  std::vector<SolidPtr> parts_;
  std::vector<double> weights_;
};

class Difference final : public Solid {
 public:
  Difference(SolidPtr keep, SolidPtr cut) : keep_(std::move(keep)), cut_(std::move(cut)) {}

  double sdf(const Vec3& p) const override { return std::max(keep_->sdf(p), -cut_->sdf(p)); }

  double area() const override { return keep_->area() + cut_->area(); }

  SurfaceSample sample(double u, Rng& rng) const override {
    const std::vector<double> w{keep_->area(), cut_->area()};
    for (int attempt = 0; attempt < 100000; ++attempt) {
      double sub = attempt == 0 ? u : uniform(rng);
      if (pick(w, sub) == 0) {
        const SurfaceSample s = keep_->sample(sub, rng);
        if (cut_->sdf(s.point) >= -kAcceptEps) return s;
      } else {
        const SurfaceSample s = cut_->sample(sub, rng);
        if (keep_->sdf(s.point) <= kAcceptEps) return {s.point, -s.normal};
      }
    }
    throw std::runtime_error("difference sampling failed: empty surface");
  }

 private:
  SolidPtr keep_, cut_;
};

}  // namespace

SolidPtr make_box(const Vec3& center, const Vec3& half) { return std::make_shared<Box>(center, half); }

SolidPtr make_cylinder(int axis, const Vec3& center, double radius, double half_length) {
  return std::make_shared<Cylinder>(axis, center, radius, half_length);
}

SolidPtr make_annulus(double inner_radius, double outer_radius, double half_thickness) {
  return std::make_shared<Annulus>(inner_radius, outer_radius, half_thickness);
}

SolidPtr make_torus_arc(double radius, double arc_angle, double tube) {
  return std::make_shared<TorusArc>(radius, arc_angle, tube);
}

SolidPtr make_union(std::vector<SolidPtr> parts) { return std::make_shared<Union>(std::move(parts)); }

SolidPtr make_difference(SolidPtr keep, SolidPtr cut) {
  return std::make_shared<Difference>(std::move(keep), std::move(cut));
}

std::vector<SurfaceSample> sample_solid(const Solid& solid, std::size_t n, Rng& rng) {
  std::vector<SurfaceSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (double(i) + uniform(rng)) / double(n);
    out.push_back(solid.sample(std::min(u, 1.0 - 1e-16), rng));
  }
  return out;
}

}  // namespace eac
