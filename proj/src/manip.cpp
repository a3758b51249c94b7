// Grasp families and force rules.
//
// Family poses are written in the part's canonical frame (see
// concept_library.cpp): handles protrude toward -y and are approached along
// +y, door slabs span x in [0, l] with the front face at y = -h.

#include "eac/manip.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "eac/errors.hpp"

namespace eac::manip {

using blueprint::JointKind;
using blueprint::JointSpec;
using concepts::AssetInstance;

namespace {

Transform3 frame_from_columns(const Vec3& x, const Vec3& y, const Vec3& z, const Vec3& t) {
  Mat3 m;
  m.col(0) = x;
  m.col(1) = y;
  m.col(2) = z;
  return Transform3(Rotation3(m), t);
}

struct FamilyDef {
  std::string family_id;
  std::string asset_id;
  std::string region_id;
  std::string synopsis;
  std::string param_name;
  std::string formula;
  ContactMode mode;
  // bounds and preferred value from the bound asset parameters
  std::function<std::array<double, 3>(const AssetInstance&)> range;
  std::function<GraspPose(const AssetInstance&, double)> pose;
};

std::array<double, 3> symmetric(double half) { return {-half, half, 0.0}; }

GraspPose aligned(const Transform3& placement, double width) {
  return {placement * rotate(canonical_alignment()), width};
}

const std::vector<FamilyDef>& family_defs() {
  static const std::vector<FamilyDef> defs = {
      {"curve_pull", "curve_handle", "grip_arc", "pull-type grasp on curve handle", "theta",
       "Rz(theta) * T(0, -R_o, 0) * A", ContactMode::grasp,
       [](const AssetInstance& a) { return symmetric(0.5 * a.value("theta_c")); },
       [](const AssetInstance& a, double t) {
         return aligned(rotate(Rotation3::rz(t)) * translate(0.0, -a.value("R_o"), 0.0),
                        2.0 * a.value("r_t") + kFingerClearance);
       }},
      {"ring_pull", "ring_handle", "ring_rim", "pull-type grasp on ring rim", "theta",
       "Rz(theta) * T(0, -(R_i + R_o)/2, 0) * A", ContactMode::grasp,
       [](const AssetInstance&) { return symmetric(kPi / 3.0); },
       [](const AssetInstance& a, double t) {
         const double r = 0.5 * (a.value("R_i") + a.value("R_o"));
         return aligned(rotate(Rotation3::rz(t)) * translate(0.0, -r, 0.0), a.value("thickness") + kFingerClearance);
       }},
      {"bar_pull", "bar_handle", "bar_grip", "pull-type grasp on bar handle", "s",
       "T(s, -standoff, 0) * A", ContactMode::grasp,
       [](const AssetInstance& a) {
         return symmetric(0.5 * a.value("length") - a.value("width") - 0.01);
       },
       [](const AssetInstance& a, double s) {
         return aligned(translate(s, -a.value("standoff"), 0.0), a.value("width") + kFingerClearance);
       }},
      {"knob_pinch", "knob", "knob_rim", "pinch grasp across the knob rim", "theta",
       "Ry(theta) * T(0, -depth + min(0.01, depth/2), 0) * A", ContactMode::grasp,
       [](const AssetInstance& a) { return symmetric(kPi / a.value("n")); },
       [](const AssetInstance& a, double t) {
         const double d = a.value("depth");
         return aligned(rotate(Rotation3::ry(t)) * translate(0.0, -d + std::min(0.01, 0.5 * d), 0.0),
                        2.0 * a.value("radius") + kFingerClearance);
       }},
      {"lever_pinch", "lever", "lever_arm", "pinch grasp on lever arm", "s", "T(s, -1.5 width, 0) * A",
       ContactMode::grasp,
       [](const AssetInstance& a) {
         const double lo = 1.5 * a.value("width") + 0.005, hi = a.value("length") - 0.01;
         return std::array<double, 3>{lo, hi, lo + 0.75 * (hi - lo)};
       },
       [](const AssetInstance& a, double s) {
         const double w = a.value("width");
         return aligned(translate(s, -1.5 * w, 0.0), w + kFingerClearance);
       }},
      {"edge_pinch", "door_panel", "edge_pinch", "pinch grasp on free door edge", "z",
       "T(l - 0.01, -h/2, z) * [-x, y, -z]", ContactMode::grasp,
       [](const AssetInstance& a) { return symmetric(0.5 * a.value("w") - 0.05); },
       [](const AssetInstance& a, double z) {
         const double h = a.value("h");
         return GraspPose{frame_from_columns(-Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitZ(),
                                             Vec3(a.value("l") - 0.01, -0.5 * h, z)),
                          h + kFingerClearance};
       }},
      {"door_edge_push", "door_panel", "door_edge", "push at door edge", "z", "T(l - 0.015, -h - 0.003, z) * A",
       ContactMode::push, [](const AssetInstance& a) { return symmetric(0.5 * a.value("w") - 0.05); },
       [](const AssetInstance& a, double z) {
         return aligned(translate(a.value("l") - 0.015, -a.value("h") - 0.003, z), kPushWidth);
       }},
      {"door_edge_push", "sunken_door", "door_edge", "push at door edge", "z", "T(l - 0.015, -h - 0.003, z) * A",
       ContactMode::push, [](const AssetInstance& a) { return symmetric(0.5 * a.value("w") - 0.05); },
       [](const AssetInstance& a, double z) {
         return aligned(translate(a.value("l") - 0.015, -a.value("h") - 0.003, z), kPushWidth);
       }},
      {"drawer_face_push", "drawer_face", "face", "push on drawer front", "s", "T(0.003, s, -h/4) * [-x, z, y]",
       ContactMode::push, [](const AssetInstance& a) { return symmetric(0.5 * a.value("w") - 0.03); },
       [](const AssetInstance& a, double s) {
         return GraspPose{frame_from_columns(-Vec3::UnitX(), Vec3::UnitZ(), Vec3::UnitY(),
                                             Vec3(0.003, s, -0.25 * a.value("h"))),
                          kPushWidth};
       }},
      {"box_top_push", "box", "top_face", "push down on box top", "s", "T(s, 0, size_z/2 + 0.003) * [-z, y, x]",
       ContactMode::push, [](const AssetInstance& a) { return symmetric(0.25 * a.value("size_x")); },
       [](const AssetInstance& a, double s) {
         return GraspPose{frame_from_columns(-Vec3::UnitZ(), Vec3::UnitY(), Vec3::UnitX(),
                                             Vec3(s, 0.0, 0.5 * a.value("size_z") + 0.003)),
                          kPushWidth};
       }},
  };
  return defs;
}

const FamilyDef& family_def(const std::string& asset_id, const std::string& family_id) {
  std::string known;
  for (const auto& d : family_defs()) {
    if (d.asset_id != asset_id) continue;
    if (d.family_id == family_id) return d;
    known += (known.empty() ? "" : ", ") + d.family_id;
  }
  throw NotFoundError("unknown grasp family '" + family_id + "' for asset '" + asset_id + "' (known: " +
                      (known.empty() ? "none" : known) + ")");
}

GraspFamily bind(const FamilyDef& d, const AssetInstance& inst) {
  const auto r = d.range(inst);
  GraspFamily f;
  f.family_id = d.family_id;
  f.asset_id = d.asset_id;
  f.region_id = d.region_id;
  f.synopsis = d.synopsis;
  f.param_name = d.param_name;
  f.formula = d.formula;
  f.mode = d.mode;
  f.lower = r[0];
  f.upper = r[1];
  f.preferred = r[2];
  return f;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

Rotation3 canonical_alignment() { return rot_rpy(kPi / 2.0, 0.0, kPi / 2.0); }

std::vector<Vec3> gripper_proxy(double width) {
  const double hw = 0.5 * width;
  return {{-kFingerLength, 0.0, 0.0}, {-kFingerLength, hw, 0.0}, {-kFingerLength, -hw, 0.0}, {0.0, hw, 0.0},
          {0.0, -hw, 0.0}};
}

std::string to_string(ManipType t) {
  switch (t) {
    case ManipType::pull: return "pull";
    case ManipType::push: return "push";
    case ManipType::rotate: return "rotate";
    case ManipType::slide: return "slide";
  }
  return "pull";
}

ManipType manip_type_from_string(const std::string& s) {
  if (s == "pull") return ManipType::pull;
  if (s == "push") return ManipType::push;
  if (s == "rotate") return ManipType::rotate;
  if (s == "slide") return ManipType::slide;
  throw ParseError("unknown manipulation type '" + s + "' (pull, push, rotate, slide)");
}

void GraspPose::validate() const {
  if (!(width > 0.0) || width > kMaxOpening + 1e-12)
    throw RangeError("gripper width " + fmt(width) + " outside (0, " + fmt(kMaxOpening) + "]");
}

std::vector<GraspFamily> grasp_families(const AssetInstance& inst) {
  std::vector<GraspFamily> out;
  for (const auto& d : family_defs())
    if (d.asset_id == inst.asset_id()) out.push_back(bind(d, inst));
  return out;
}

GraspFamily grasp_family(const AssetInstance& inst, const std::string& family_id) {
  return bind(family_def(inst.asset_id(), family_id), inst);
}

GraspPose grasp_pose(const AssetInstance& inst, const GraspFamily& family, double value,
                     const Transform3& canonical) {
  const FamilyDef& d = family_def(inst.asset_id(), family.family_id);
  const GraspFamily bound = bind(d, inst);
  if (!bound.contains(value))
    throw RangeError(family.family_id + ": " + family.param_name + " = " + fmt(value) + " outside [" +
                     fmt(bound.lower) + ", " + fmt(bound.upper) + "]");
  GraspPose g = d.pose(inst, value);
  g.pose = g.pose * canonical;
  g.validate();
  return g;
}

std::vector<GraspPose> sample_grasps(const AssetInstance& inst, const GraspFamily& family, std::size_t n,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(family.lower, family.upper);
  std::vector<GraspPose> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(grasp_pose(inst, family, u(rng)));
  return out;
}

std::vector<double> ordered_values(const GraspFamily& family, std::size_t n) {
  if (n == 0) return {};
  std::vector<double> v{family.preferred};
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double t = n == 2 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 2);
    v.push_back(family.lower + t * (family.upper - family.lower));
  }
  std::stable_sort(v.begin() + 1, v.end(), [&](double a, double b) {
    return std::abs(a - family.preferred) < std::abs(b - family.preferred);
  });
  return v;
}

std::vector<Transform3> grasp_orbit(const AssetInstance& inst, const GraspFamily& family, const GraspPose& grasp) {
  std::vector<Transform3> spins{Transform3()};
  if (family.asset_id == "knob") {
    const int n = static_cast<int>(std::lround(inst.value("n")));
    for (int k = 1; k < n; ++k) spins.push_back(rotate(Rotation3::ry(2.0 * kPi * k / n)));
  }
  const Transform3 swap = rotate(Rotation3::rx(kPi));
  std::vector<Transform3> out;
  for (const auto& s : spins) out.push_back(s * grasp.pose);
  for (const auto& s : spins) out.push_back(s * grasp.pose * swap);
  return out;
}

bool ForceRule::applies_to(JointKind kind) const {
  return std::find(joint_kinds.begin(), joint_kinds.end(), kind) != joint_kinds.end();
}

const std::vector<ForceRule>& force_rules() {
  static const std::vector<ForceRule> rules = {
      {"pull_revolute", ManipType::pull, {JointKind::revolute}, "pull the grasp point around the hinge",
       "normalize(axis x (p - proj_axis(p))) * opening_sign"},
      {"push_revolute", ManipType::push, {JointKind::revolute}, "push the contact point around the hinge",
       "-normalize(axis x (p - proj_axis(p))) * opening_sign"},
      {"rotate_revolute", ManipType::rotate, {JointKind::revolute}, "turn about the joint axis from the finger contact",
       "normalize(axis x (f - proj_axis(f))) * opening_sign, f = G * (0, width/2, 0)"},
      {"pull_prismatic", ManipType::pull, {JointKind::prismatic}, "pull along the slide axis", "axis * opening_sign"},
      {"push_prismatic", ManipType::push, {JointKind::prismatic}, "push along the slide axis", "-axis * opening_sign"},
      {"slide_prismatic", ManipType::slide, {JointKind::prismatic}, "slide the grasped part along its rail", "axis * opening_sign"},
  };
  return rules;
}

const ForceRule& force_rule(const std::string& rule_id) {
  std::string known;
  for (const auto& r : force_rules()) {
    if (r.rule_id == rule_id) return r;
    known += (known.empty() ? "" : ", ") + r.rule_id;
  }
  throw NotFoundError("unknown force rule '" + rule_id + "' (known: " + known + ")");
}

JointSpec express_joint(const JointSpec& joint, const Transform3& to_target) {
  JointSpec out = joint;
  out.anchor = apply_point(to_target, joint.anchor);
  out.axis = apply_dir(to_target, joint.axis).normalized();
  return out;
}

JointSpec joint_in_part_frame(const blueprint::StructuralInstance& inst, const std::string& part_id) {
  const std::string jid = inst.driving_joint(part_id);
  const Transform3 to_part = invert(blueprint::part_pose(inst, part_id)) * blueprint::joint_parent_pose(inst, jid);
  return express_joint(inst.joint(jid), to_part);
}

Vec3 force_direction(const JointSpec& joint, const ForceRule& rule, const GraspPose& grasp) {
  if (!rule.applies_to(joint.kind))
    throw PreconditionError("force rule '" + rule.rule_id + "' does not apply to a " +
                            blueprint::to_string(joint.kind) + " joint");
  const double sign = (rule.type == ManipType::push ? -1.0 : 1.0) * joint.opening_sign;
  if (joint.kind == JointKind::prismatic) return sign * joint.axis;
  const Vec3 p = rule.type == ManipType::rotate ? apply_point(grasp.pose, Vec3(0.0, 0.5 * grasp.width, 0.0))
                                                : grasp.contact();
  const Vec3 rel = p - joint.anchor;
  const Vec3 radial = rel - joint.axis * rel.dot(joint.axis);
  if (radial.norm() < 1e-9) throw PreconditionError("contact point lies on the joint axis");
  return sign * joint.axis.cross(radial).normalized();
}

Vec3 force_direction(const blueprint::StructuralInstance& inst, const std::string& part_id, const ForceRule& rule,
                     const GraspPose& grasp) {
  return force_direction(joint_in_part_frame(inst, part_id), rule, grasp);
}

std::vector<Strategy> list_strategies(const blueprint::StructuralInstance& inst, const std::string& part_id) {
  const auto& part = inst.part(part_id);
  std::vector<Strategy> out;
  for (const auto& f : grasp_families(part.asset))
    out.push_back({Strategy::Kind::family, f.family_id, f.synopsis, f.mode});
  std::string jid;
  try {
    jid = inst.driving_joint(part_id);
  } catch (const NotFoundError&) {
    return out;
  }
  const JointKind kind = inst.joint(jid).kind;
  for (const auto& r : force_rules())
    if (r.applies_to(kind)) out.push_back({Strategy::Kind::rule, r.rule_id, r.synopsis});
  return out;
}

ManipulationBlueprint make_blueprint(const std::string& part_id, const AssetInstance& asset,
                                     const JointSpec& joint_in_part, const std::string& family_id,
                                     double family_value, const std::string& rule_id) {
  const GraspFamily family = grasp_family(asset, family_id);
  const ForceRule& rule = force_rule(rule_id);
  ManipulationBlueprint mb;
  mb.part_id = part_id;
  mb.asset_id = asset.asset_id();
  mb.family_id = family_id;
  mb.family_value = family_value;
  mb.rule_id = rule_id;
  mb.grasp = grasp_pose(asset, family, family_value);
  mb.force = force_direction(joint_in_part, rule, mb.grasp);
  mb.joint = joint_in_part;
  return mb;
}

nlohmann::json to_json(const Transform3& t) {
  const Vec3 x = t.translation(), rpy = t.rotation().rpy();
  return {{"xyz", {x.x(), x.y(), x.z()}}, {"rpy", {rpy.x(), rpy.y(), rpy.z()}}};
}

nlohmann::json to_json(const ManipulationBlueprint& mb) {
  return {{"part", mb.part_id},
          {"asset", mb.asset_id},
          {"family", mb.family_id},
          {"family_value", mb.family_value},
          {"rule", mb.rule_id},
          {"grasp", {{"pose", to_json(mb.grasp.pose)}, {"width", mb.grasp.width}}},
          {"force", {mb.force.x(), mb.force.y(), mb.force.z()}},
          {"joint",
           {{"id", mb.joint.joint_id},
            {"kind", blueprint::to_string(mb.joint.kind)},
            {"anchor", {mb.joint.anchor.x(), mb.joint.anchor.y(), mb.joint.anchor.z()}},
            {"axis", {mb.joint.axis.x(), mb.joint.axis.y(), mb.joint.axis.z()}},
            {"opening_sign", mb.joint.opening_sign}}}};
}

}  // namespace eac::manip
