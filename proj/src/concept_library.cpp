// Builtin geometric concept assets and their canonical frames.
//
// Frame conventions shared by the handle-like assets: the mounting surface is
// the plane y = 0 and the graspable geometry protrudes toward -y, so a gripper
// approaches along +y. Doors hinge about the z axis through the origin; the
// drawer face slides along +x.

#include <cmath>

#include "eac/concepts.hpp"

namespace eac::concepts {

namespace {

constexpr double kEps = 1e-9;

ParamSpec length(std::string name, double lo, double hi, std::string desc) {
  return {std::move(name), lo, hi, "m", std::move(desc)};
}

ParamSpec angle(std::string name, double lo, double hi, std::string desc) {
  return {std::move(name), lo, hi, "rad", std::move(desc)};
}

double polar_from_minus_y(const Vec3& p) { return std::atan2(p.x(), -p.y()); }

class CurveHandle final : public ShapeKernel {
 public:
  // values: R_o, theta_c, r_t
  SolidPtr build(const std::vector<double>& v) const override { return make_torus_arc(v[0], v[1], v[2]); }

  std::vector<AffordanceRegion> regions(const std::vector<double>& v) const override {
    const double half = 0.5 * v[1];
    return {{"grip_arc", "grasp", "tube section between the arc ends", Vec3::UnitY(), half, v[1],
             [half](const Vec3& p) { return std::abs(polar_from_minus_y(p)) <= half + kEps; }}};
  }
};

class RingHandle final : public ShapeKernel {
 public:
  // values: R_i, R_o, thickness
  SolidPtr build(const std::vector<double>& v) const override {
    return make_annulus(v[0], v[1], 0.5 * v[2]);
  }

  std::vector<AffordanceRegion> regions(const std::vector<double>& v) const override {
    constexpr double half = kPi / 3.0;
    const double mean_radius = 0.5 * (v[0] + v[1]);
    return {{"ring_rim", "grasp", "ring band facing away from the mount", Vec3::UnitY(), half,
             2.0 * half * mean_radius,
             [](const Vec3& p) { return std::abs(polar_from_minus_y(p)) <= half + kEps; }}};
  }
};

class BarHandle final : public ShapeKernel {
 public:
  // values: length, width, standoff
  SolidPtr build(const std::vector<double>& v) const override {
    const double L = v[0], w = v[1], s = v[2];
    const double hw = 0.5 * w;
    return make_union({make_box({0.0, -s, 0.0}, {0.5 * L, hw, hw}),
                       make_box({-(0.5 * L - hw), -0.5 * s, 0.0}, {hw, 0.5 * s, hw}),
                       make_box({0.5 * L - hw, -0.5 * s, 0.0}, {hw, 0.5 * s, hw})});
  }

  std::vector<AffordanceRegion> regions(const std::vector<double>& v) const override {
    const double L = v[0], w = v[1], s = v[2];
    return {{"bar_grip", "grasp", "straight grip bar between the posts", Vec3::UnitY(), 0.5, L,
             [L, w, s](const Vec3& p) {
               return p.y() <= -s + 0.5 * w + kEps && std::abs(p.x()) <= 0.5 * L + kEps;
             }}};
  }
};

class Knob final : public ShapeKernel {
 public:
  // values: radius, depth, n
  SolidPtr build(const std::vector<double>& v) const override {
    return make_cylinder(1, {0.0, -0.5 * v[1], 0.0}, v[0], 0.5 * v[1]);
  }

  std::vector<AffordanceRegion> regions(const std::vector<double>& v) const override {
    return {{"knob_rim", "grasp", "cylindrical rim and front face of the knob", Vec3::UnitY(), 0.6,
             2.0 * kPi * v[0], [](const Vec3& p) { return p.y() < -1e-6; }}};
  }
};

class Lever final : public ShapeKernel {
 public:
  // values: length, width. Hub radius = width, hub depth = 2 width; the arm
  // sits at the outer end of the hub.
  SolidPtr build(const std::vector<double>& v) const override {
    const double L = v[0], w = v[1];
    return make_union({make_cylinder(1, {0.0, -w, 0.0}, w, w),
                       make_box({0.5 * L, -1.5 * w, 0.0}, {0.5 * L, 0.5 * w, 0.5 * w})});
  }

  std::vector<AffordanceRegion> regions(const std::vector<double>& v) const override {
    const double L = v[0], w = v[1];
    return {{"lever_arm", "grasp", "lever arm outside the hub", Vec3::UnitY(), 0.5, L - w,
             [w](const Vec3& p) { return p.x() >= w + kEps; }}};
  }
};

AffordanceRegion door_edge_region(double l, double h) {
  return {"door_edge", "push", "free vertical edge of the door and the front strip next to it",
          Vec3::UnitY(), 0.6, 0.02, [l, h](const Vec3& p) {
            return p.x() >= l - kEps || (p.x() >= l - 0.02 - kEps && p.y() <= -h + kEps);
          }};
}

class SunkenDoor final : public ShapeKernel {
 public:
  // values: l, w, h, recess. Pocket: 40 mm x 100 mm, centered 50 mm in from the free edge.
  SolidPtr build(const std::vector<double>& v) const override {
    const double l = v[0], w = v[1], h = v[2], d = v[3];
    SolidPtr slab = make_box({0.5 * l, -0.5 * h, 0.0}, {0.5 * l, 0.5 * h, 0.5 * w});
    const double front = -h;
    const double out = 0.01;  // cut extends past the front face
    SolidPtr pocket = make_box({l - 0.05, front + 0.5 * (d - out), 0.0}, {0.02, 0.5 * (d + out), 0.05});
    return make_difference(slab, pocket);
  }

  std::vector<AffordanceRegion> regions(const std::vector<double>& v) const override {
    const double l = v[0], h = v[2], d = v[3];
    return {door_edge_region(l, h),
            {"pocket", "grasp", "recessed finger pocket near the free edge", Vec3::UnitY(), 0.4, 0.04,
             [l, h, d](const Vec3& p) {
               return p.x() >= l - 0.07 - kEps && p.x() <= l - 0.03 + kEps &&
                      std::abs(p.z()) <= 0.05 + kEps && p.y() > -h + kEps && p.y() <= -h + d + kEps;
             }}};
  }
};

class DoorPanel final : public ShapeKernel {
 public:
  // values: l, w, h
  SolidPtr build(const std::vector<double>& v) const override {
    return make_box({0.5 * v[0], -0.5 * v[2], 0.0}, {0.5 * v[0], 0.5 * v[2], 0.5 * v[1]});
  }

  std::vector<AffordanceRegion> regions(const std::vector<double>& v) const override {
    const double l = v[0];
    return {door_edge_region(l, v[2]),
            {"edge_pinch", "grasp", "free edge of the door, pinched across its thickness",
             -Vec3::UnitX(), 0.4, v[1], [l](const Vec3& p) { return p.x() >= l - 0.02 - kEps; }}};
  }
};

class DrawerFace final : public ShapeKernel {
 public:
  static constexpr double kThickness = 0.02;
  // values: w, h, travel
  SolidPtr build(const std::vector<double>& v) const override {
    return make_box({-0.5 * kThickness, 0.0, 0.0}, {0.5 * kThickness, 0.5 * v[0], 0.5 * v[1]});
  }

  std::vector<AffordanceRegion> regions(const std::vector<double>& v) const override {
    return {{"face", "push", "front face of the drawer", -Vec3::UnitX(), 0.5, std::min(v[0], v[1]),
             [](const Vec3& p) { return p.x() >= -kEps; }}};
  }
};

class Cuboid final : public ShapeKernel {
 public:
  // values: size_x, size_y, size_z (centered)
  SolidPtr build(const std::vector<double>& v) const override {
    return make_box(Vec3::Zero(), 0.5 * Vec3(v[0], v[1], v[2]));
  }

  std::vector<AffordanceRegion> regions(const std::vector<double>& v) const override {
    const double top = 0.5 * v[2];
    return {{"top_face", "push", "upper face of the box", -Vec3::UnitZ(), 0.5, std::min(v[0], v[1]),
             [top](const Vec3& p) { return p.z() >= top - kEps; }}};
  }
};

AssetPtr make_asset(std::string id, std::vector<std::string> tags, std::string synopsis,
                    std::vector<ParamSpec> params, std::shared_ptr<const ShapeKernel> kernel) {
  auto a = std::make_shared<ConceptAsset>();
  a->asset_id = std::move(id);
  a->category_tags = std::move(tags);
  a->synopsis = std::move(synopsis);
  a->params = std::move(params);
  a->kernel = std::move(kernel);
  std::vector<double> mid;
  for (const auto& p : a->params) mid.push_back(p.midpoint());
  for (const auto& r : a->kernel->regions(mid)) a->affordance_annotations.push_back(r.region_id);
  a->validate();
  return a;
}

std::vector<AssetPtr> build_library() {
  ParamSpec knob_n{"n", 1, 12, "count", "rotational symmetry order of the grip", true, false};
  ParamSpec drawer_travel = length("travel", 0.10, 0.45, "maximum pull-out distance of the drawer");
  drawer_travel.geometric = false;
  return {
      make_asset("curve_handle", {"handle", "curve"},
                 "curved pull handle: a round tube bent along a circular arc whose ends attach to the mount",
                 {length("R_o", 0.02, 0.15, "radius of the arc traced by the tube centerline"),
                  angle("theta_c", 0.8, 2.6, "angular extent of the arc"),
                  length("r_t", 0.004, 0.015, "radius of the tube cross-section")},
                 std::make_shared<CurveHandle>()),
      make_asset("ring_handle", {"handle", "ring"},
                 "ring pull: a flat annulus standing out from the mount, grasped on its far rim",
                 {length("R_i", 0.015, 0.04, "inner radius of the ring"),
                  length("R_o", 0.045, 0.08, "outer radius of the ring"),
                  length("thickness", 0.004, 0.015, "thickness of the ring plate")},
                 std::make_shared<RingHandle>()),
      make_asset("bar_handle", {"handle", "bar"},
                 "bar handle: a straight square bar held off the mount by two posts",
                 {length("length", 0.08, 0.30, "overall length of the bar"),
                  length("width", 0.010, 0.025, "side of the square bar and post section"),
                  length("standoff", 0.025, 0.06, "distance from the mount to the bar axis")},
                 std::make_shared<BarHandle>()),
      make_asset("knob", {"knob"}, "round knob: a short cylinder protruding from the mount",
                 {length("radius", 0.015, 0.035, "knob radius"),
                  length("depth", 0.015, 0.04, "protrusion of the knob from the mount"), knob_n},
                 std::make_shared<Knob>()),
      make_asset("lever", {"lever", "faucet"},
                 "lever handle: a cylindrical hub with a straight arm that turns about the hub axis",
                 {length("length", 0.07, 0.18, "arm length measured from the hub axis"),
                  length("width", 0.012, 0.03, "arm section side and hub radius")},
                 std::make_shared<Lever>()),
      make_asset("sunken_door", {"door"},
                 "sunken door: a flat door slab with a recessed finger pocket near its free edge",
                 {length("l", 0.25, 0.6, "door width from hinge edge to free edge"),
                  length("w", 0.2, 0.5, "door height"), length("h", 0.015, 0.04, "slab thickness"),
                  length("recess", 0.005, 0.012, "depth of the finger pocket")},
                 std::make_shared<SunkenDoor>()),
      make_asset("drawer_face", {"drawer"}, "drawer front: a flat panel that slides out along its normal",
                 {length("w", 0.2, 0.6, "face width"), length("h", 0.08, 0.3, "face height"), drawer_travel},
                 std::make_shared<DrawerFace>()),
      make_asset("door_panel", {"door", "panel"}, "hinged door panel: a flat slab rotating about one vertical edge",
                 {length("l", 0.2, 0.7, "door width from hinge edge to free edge"),
                  length("w", 0.2, 0.9, "door height"), length("h", 0.015, 0.04, "slab thickness")},
                 std::make_shared<DoorPanel>()),
      make_asset("box", {"body", "box"}, "rigid box body: the static housing other parts attach to",
                 {length("size_x", 0.01, 1.2, "extent along x"), length("size_y", 0.005, 1.2, "extent along y"),
                  length("size_z", 0.01, 1.2, "extent along z")},
                 std::make_shared<Cuboid>()),
  };
}

}  // namespace

const std::vector<AssetPtr>& builtin_library() {
  static const std::vector<AssetPtr> library = build_library();
  return library;
}

}  // namespace eac::concepts
