#pragma once

#include <memory>
#include <random>
#include <vector>

#include "eac/geom.hpp"

namespace eac {

using Rng = std::mt19937_64;

struct SurfaceSample {
  Vec3 point;
  Vec3 normal;  // outward unit normal
};

/// Analytic solid described by a signed function (<= 0 inside or on the
/// boundary) with area-uniform boundary sampling.
class Solid {
 public:
  virtual ~Solid() = default;
  virtual double sdf(const Vec3& p) const = 0;
  virtual double area() const = 0;
  /// One boundary sample. `u` in [0,1) picks the surface stratum so that a
  /// stratified sequence of `u` spreads samples over components by area.
  virtual SurfaceSample sample(double u, Rng& rng) const = 0;
};

using SolidPtr = std::shared_ptr<const Solid>;

/// Axis-aligned box given by center and half extents.
SolidPtr make_box(const Vec3& center, const Vec3& half);
/// Capped cylinder along coordinate axis `axis` (0=x, 1=y, 2=z).
SolidPtr make_cylinder(int axis, const Vec3& center, double radius, double half_length);
/// Flat ring around the z axis, centered at the origin.
SolidPtr make_annulus(double inner_radius, double outer_radius, double half_thickness);
/// Tube of radius `tube` around the arc of radius `radius` in the x-y plane,
/// centered on -y and spanning `arc_angle`, with hemispherical end caps.
SolidPtr make_torus_arc(double radius, double arc_angle, double tube);
SolidPtr make_union(std::vector<SolidPtr> parts);
SolidPtr make_difference(SolidPtr keep, SolidPtr cut);

/// n area-uniform boundary samples, stratified over surface components.
std::vector<SurfaceSample> sample_solid(const Solid& solid, std::size_t n, Rng& rng);

}  // namespace eac
