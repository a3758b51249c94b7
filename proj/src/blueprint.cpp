#include "eac/blueprint.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "eac/errors.hpp"

namespace eac::blueprint {

std::string to_string(JointKind kind) { return kind == JointKind::revolute ? "revolute" : "prismatic"; }

JointKind joint_kind_from_string(const std::string& text) {
  if (text == "revolute") return JointKind::revolute;
  if (text == "prismatic") return JointKind::prismatic;
  throw std::invalid_argument("unknown joint kind '" + text + "'");
}

void JointSpec::validate() const {
  if (std::abs(axis.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("joint '" + joint_id + "': axis must be a unit vector");
  if (!(q_min < q_max)) throw std::invalid_argument("joint '" + joint_id + "': q_min must be < q_max");
  if (opening_sign != 1 && opening_sign != -1)
    throw std::invalid_argument("joint '" + joint_id + "': opening_sign must be +1 or -1");
}

Transform3 JointSpec::motion(double q) const {
  if (kind == JointKind::prismatic) return translate(q * axis);
  const Rotation3 r = Rotation3::about_axis(axis, q);
  return Transform3(r, anchor - r * anchor);
}

// --- blueprint ---------------------------------------------------------------

const PartTemplate& StructuralBlueprint::part(const std::string& part_id) const {
  for (const auto& p : parts)
    if (p.part_id == part_id) return p;
  throw NotFoundError("blueprint '" + blueprint_id + "' has no part '" + part_id + "'");
}

void StructuralBlueprint::validate() const {
  auto bad = [&](const std::string& what) { throw std::invalid_argument("blueprint '" + blueprint_id + "': " + what); };
  if (blueprint_id.empty()) throw std::invalid_argument("blueprint id must be non-empty");
  if (parts.empty()) bad("no parts");
  std::set<std::string> seen, joints, free_names, used;
  for (const auto& fp : free_params) {
    if (!(fp.lower < fp.upper)) bad("free parameter '" + fp.name + "' has lower >= upper");
    if (!free_names.insert(fp.name).second) bad("duplicate free parameter '" + fp.name + "'");
  }
  auto collect = [&](const Expr& e) {
    for (const auto& v : e.variables()) {
      if (!free_names.count(v)) bad("expression '" + e.text() + "' uses unknown parameter '" + v + "'");
      used.insert(v);
    }
  };
  int roots = 0;
  for (const auto& p : parts) {
    if (p.part_id.empty()) bad("part with empty id");
    if (p.parent.empty()) {
      ++roots;
      if (p.joint) bad("root part '" + p.part_id + "' cannot carry a joint");
    } else if (!seen.count(p.parent)) {
      bad("part '" + p.part_id + "' references parent '" + p.parent + "' that is not declared before it");
    }
    if (!seen.insert(p.part_id).second) bad("duplicate part '" + p.part_id + "'");
    const auto asset = concepts::find_asset(concepts::builtin_library(), p.asset_id);
    if (!asset) bad("part '" + p.part_id + "' uses unknown asset '" + p.asset_id + "'");
    for (const auto& spec : asset->params) {
      const auto it = std::find_if(p.params.begin(), p.params.end(),
                                   [&](const auto& kv) { return kv.first == spec.name; });
      if (it == p.params.end()) bad("part '" + p.part_id + "' does not bind '" + spec.name + "'");
    }
    if (p.params.size() != asset->params.size()) bad("part '" + p.part_id + "' binds unknown asset parameters");
    for (const auto& [_, e] : p.params) collect(e);
    for (const auto& e : p.mount_xyz) collect(e);
    for (const auto& e : p.mount_rpy) collect(e);
    if (p.joint) {
      if (!joints.insert(p.joint->joint_id).second) bad("duplicate joint '" + p.joint->joint_id + "'");
      for (const auto& e : p.joint->anchor) collect(e);
      collect(p.joint->q_min);
      collect(p.joint->q_max);
    }
  }
  if (roots != 1) bad("expected exactly one root part");
  for (const auto& n : free_names)
    if (!used.count(n)) bad("free parameter '" + n + "' is not referenced by any part");
  if (!seen.count(target_part)) bad("target part '" + target_part + "' is not declared");
}

// --- instance --------------------------------------------------------------

namespace {

Vec3 eval3(const ExprVec3& e, const std::map<std::string, double>& vars) {
  return {e[0].eval(vars), e[1].eval(vars), e[2].eval(vars)};
}

std::string bounds_text(double lo, double hi) {
  std::ostringstream os;
  os << "[" << lo << ", " << hi << "]";
  return os.str();
}

}  // namespace

const PartNode& StructuralInstance::part(const std::string& part_id) const {
  const int i = part_index(part_id);
  if (i < 0) throw NotFoundError("unknown part '" + part_id + "' in '" + bp_->blueprint_id + "'");
  return parts_[std::size_t(i)];
}

int StructuralInstance::part_index(const std::string& part_id) const {
  for (std::size_t i = 0; i < parts_.size(); ++i)
    if (parts_[i].part_id == part_id) return int(i);
  return -1;
}

const PartNode& StructuralInstance::joint_part(const std::string& joint_id) const {
  for (const auto& p : parts_)
    if (p.joint && p.joint->joint_id == joint_id) return p;
  throw NotFoundError("unknown joint '" + joint_id + "' in '" + bp_->blueprint_id + "'");
}

const JointSpec& StructuralInstance::joint(const std::string& joint_id) const { return *joint_part(joint_id).joint; }

double StructuralInstance::q(const std::string& joint_id) const {
  joint(joint_id);
  return joint_state_.at(joint_id);
}

std::string StructuralInstance::driving_joint(const std::string& part_id) const {
  const PartNode* p = &part(part_id);
  while (true) {
    if (p->joint) return p->joint->joint_id;
    if (p->parent.empty()) throw NotFoundError("part '" + part_id + "' is not moved by any joint");
    p = &part(p->parent);
  }
}

bool StructuralInstance::in_subtree(const std::string& part_id, const std::string& ancestor) const {
  const PartNode* p = &part(part_id);
  while (true) {
    if (p->part_id == ancestor) return true;
    if (p->parent.empty()) return false;
    p = &part(p->parent);
  }
}

StructuralInstance StructuralInstance::with_joint(const std::string& joint_id, double value) const {
  const JointSpec& j = joint(joint_id);
  if (!j.contains(value)) {
    std::ostringstream os;
    os << "joint '" << joint_id << "' value " << value << " outside " << bounds_text(j.q_min, j.q_max);
    throw RangeError(os.str());
  }
  StructuralInstance out = *this;
  out.joint_state_[joint_id] = value;
  return out;
}

StructuralInstance StructuralInstance::with_pose(const Transform3& pose) const {
  StructuralInstance out = *this;
  out.pose_ = pose;
  return out;
}

StructuralInstance instantiate(BlueprintPtr bp, const std::map<std::string, double>& params,
                               const Transform3& pose, const std::map<std::string, double>& joint_state) {
  StructuralInstance inst;
  for (const auto& fp : bp->free_params) {
    const auto it = params.find(fp.name);
    if (it == params.end()) throw RangeError("blueprint '" + bp->blueprint_id + "': parameter '" + fp.name + "' is unbound");
    if (!(it->second >= fp.lower && it->second <= fp.upper)) {
      std::ostringstream os;
      os << "blueprint '" << bp->blueprint_id << "': parameter '" << fp.name << "' = " << it->second << " outside "
         << bounds_text(fp.lower, fp.upper);
      throw RangeError(os.str());
    }
    inst.params_[fp.name] = it->second;
  }
  for (const auto& [name, _] : params)
    if (!inst.params_.count(name))
      throw RangeError("blueprint '" + bp->blueprint_id + "' has no parameter '" + name + "'");

  const auto& vars = inst.params_;
  for (const auto& t : bp->parts) {
    std::map<std::string, double> values;
    for (const auto& [name, e] : t.params) values[name] = e.eval(vars);
    concepts::AssetInstance asset(concepts::builtin_asset(t.asset_id), values);
    const Vec3 rpy = eval3(t.mount_rpy, vars);
    Transform3 mount(rot_rpy(rpy.x(), rpy.y(), rpy.z()), eval3(t.mount_xyz, vars));
    std::optional<JointSpec> joint;
    if (t.joint) {
      JointSpec j;
      j.joint_id = t.joint->joint_id;
      j.kind = t.joint->kind;
      j.anchor = eval3(t.joint->anchor, vars);
      j.axis = t.joint->axis;
      j.q_min = t.joint->q_min.eval(vars);
      j.q_max = t.joint->q_max.eval(vars);
      j.opening_sign = t.joint->opening_sign;
      j.validate();
      joint = j;
    }
    inst.parts_.push_back({t.part_id, t.name, std::move(asset), mount, t.parent, joint});
  }

  for (const auto& [jid, _] : joint_state) {
    bool known = false;
    for (const auto& p : inst.parts_) known = known || (p.joint && p.joint->joint_id == jid);
    if (!known) throw NotFoundError("unknown joint '" + jid + "' in '" + bp->blueprint_id + "'");
  }
  inst.bp_ = std::move(bp);
  inst.pose_ = pose;
  for (const auto& p : inst.parts_) {
    if (!p.joint) continue;
    const auto it = joint_state.find(p.joint->joint_id);
    inst.joint_state_[p.joint->joint_id] = p.joint->closed_value();
    if (it != joint_state.end()) inst = inst.with_joint(p.joint->joint_id, it->second);
  }
  return inst;
}

Transform3 part_pose(const StructuralInstance& inst, const std::string& part_id) {
  const PartNode& p = inst.part(part_id);
  const Transform3 parent = p.parent.empty() ? inst.pose() : part_pose(inst, p.parent);
  if (!p.joint) return parent * p.mount;
  return parent * p.joint->motion(inst.joint_state().at(p.joint->joint_id)) * p.mount;
}

Transform3 joint_parent_pose(const StructuralInstance& inst, const std::string& joint_id) {
  const PartNode& p = inst.joint_part(joint_id);
  return p.parent.empty() ? inst.pose() : part_pose(inst, p.parent);
}

WorldAxis world_joint_axis(const StructuralInstance& inst, const std::string& joint_id) {
  const Transform3 frame = joint_parent_pose(inst, joint_id);
  const JointSpec& j = inst.joint(joint_id);
  return {apply_point(frame, j.anchor), apply_dir(frame, j.axis)};
}

double world_sdf(const StructuralInstance& inst, const Vec3& x) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& p : inst.parts())
    d = std::min(d, p.asset.solid().sdf(apply_point(invert(part_pose(inst, p.part_id)), x)));
  return d;
}

std::map<std::string, double> random_params(const StructuralBlueprint& bp, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::map<std::string, double> out;
  for (const auto& fp : bp.free_params) {
    std::uniform_real_distribution<double> u(fp.lower, fp.upper);
    double v = u(rng);
    out[fp.name] = fp.integer ? std::clamp(std::round(v), fp.lower, fp.upper) : v;
  }
  return out;
}

std::map<std::string, double> midpoint_params(const StructuralBlueprint& bp) {
  std::map<std::string, double> out;
  for (const auto& fp : bp.free_params) out[fp.name] = fp.midpoint();
  return out;
}

// --- rendering -------------------------------------------------------------

namespace {

struct WorldPart {
  const Solid* solid;
  Transform3 to_local;
};

std::vector<WorldPart> world_parts(const StructuralInstance& inst) {
  std::vector<WorldPart> out;
  for (const auto& p : inst.parts()) out.push_back({&p.asset.solid(), invert(part_pose(inst, p.part_id))});
  return out;
}

double scene_sdf(const std::vector<WorldPart>& parts, const Vec3& x) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& p : parts) d = std::min(d, p.solid->sdf(apply_point(p.to_local, x)));
  return d;
}

// Sphere tracing along the segment; the part distance functions are exact or
// lower bounds, so a step of the current distance never skips a surface.
bool visible(const std::vector<WorldPart>& parts, const Vec3& p, const Vec3& normal, const Vec3& camera) {
  constexpr double kStart = 2e-5, kHit = 1e-7;
  const Vec3 origin = p + kStart * normal;
  const Vec3 dir = (camera - origin).normalized();
  const double length = (camera - origin).norm();
  double t = 0.0;
  for (int i = 0; i < 512; ++i) {
    const double d = scene_sdf(parts, origin + t * dir);
    if (d < kHit) return false;
    t += d;
    if (t >= length) return true;
  }
  return false;
}

}  // namespace

PointCloud render(const StructuralInstance& inst, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw PreconditionError("render: n must be >= 1");
  PointCloud cloud;
  for (std::size_t i = 0; i < inst.parts().size(); ++i) {
    const auto& part = inst.parts()[i];
    const Transform3 pose = part_pose(inst, part.part_id);
    for (const auto& s : concepts::sample_surface_with_normals(part.asset, n, seed + 7919 * i)) {
      cloud.points.push_back(apply_point(pose, s.point));
      cloud.labels.push_back(int(i));
    }
  }
  return cloud;
}

bool line_of_sight(const StructuralInstance& inst, const Vec3& p, const Vec3& camera) {
  const auto parts = world_parts(inst);
  const Vec3 dir = (camera - p).normalized();
  return visible(parts, p, dir, camera);
}

PointCloud render_partial(const StructuralInstance& inst, std::size_t n, std::uint64_t seed, const PartialView& view) {
  if (n == 0) throw PreconditionError("render: n must be >= 1");
  const auto parts = world_parts(inst);
  std::mt19937_64 noise_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, 1.0);
  PointCloud cloud;
  for (std::size_t i = 0; i < inst.parts().size(); ++i) {
    const auto& part = inst.parts()[i];
    const Transform3 pose = part_pose(inst, part.part_id);
    for (const auto& s : concepts::sample_surface_with_normals(part.asset, n, seed + 7919 * i)) {
      const Vec3 p = apply_point(pose, s.point);
      const Vec3 normal = apply_dir(pose, s.normal);
      if (normal.dot(view.camera - p) <= 0.0) continue;
      if (!visible(parts, p, normal, view.camera)) continue;
      Vec3 q = p;
      if (view.noise_sigma > 0.0)
        for (int k = 0; k < 3; ++k) q[k] += view.noise_sigma * noise(noise_rng);
      cloud.points.push_back(q);
      cloud.labels.push_back(int(i));
    }
  }
  return cloud;
}

PointCloud render_asset_partial(const concepts::AssetInstance& inst, const Transform3& pose, std::size_t n,
                                std::uint64_t seed, const PartialView& view) {
  if (n == 0) throw PreconditionError("render: n must be >= 1");
  const std::vector<WorldPart> parts{{&inst.solid(), invert(pose)}};
  std::mt19937_64 noise_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, 1.0);
  PointCloud cloud;
  for (const auto& s : concepts::sample_surface_with_normals(inst, n, seed)) {
    const Vec3 p = apply_point(pose, s.point);
    const Vec3 normal = apply_dir(pose, s.normal);
    if (normal.dot(view.camera - p) <= 0.0 || !visible(parts, p, normal, view.camera)) continue;
    Vec3 q = p;
    if (view.noise_sigma > 0.0)
      for (int k = 0; k < 3; ++k) q[k] += view.noise_sigma * noise(noise_rng);
    cloud.points.push_back(q);
  }
  return cloud;
}

// --- files ---------------------------------------------------------------

namespace {

using nlohmann::json;

json expr_json(const Expr& e) {
  if (e.is_constant()) return e.eval({});
  return e.text();
}

Expr expr_from(const json& j, const std::string& where) {
  if (j.is_number()) return Expr(j.get<double>());
  if (j.is_string()) {
    try {
      return Expr::parse(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  throw ParseError(where + ": expected a number or expression string");
}

ExprVec3 expr3_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ParseError(where + ": expected 3 components");
  return {expr_from(j[0], where), expr_from(j[1], where), expr_from(j[2], where)};
}

json expr3_json(const ExprVec3& e) { return json::array({expr_json(e[0]), expr_json(e[1]), expr_json(e[2])}); }

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ParseError(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + ": bad type for '" + key + "'");
  }
}

}  // namespace

nlohmann::json to_json(const StructuralBlueprint& bp) {
  json j;
  j["schema"] = kBlueprintSchema;
  j["blueprint_id"] = bp.blueprint_id;
  j["category"] = bp.category;
  j["object_name"] = bp.object_name;
  j["synopsis"] = bp.synopsis;
  j["target_part"] = bp.target_part;
  j["target_query"] = bp.target_query;
  j["free_params"] = json::array();
  for (const auto& fp : bp.free_params) {
    json p{{"name", fp.name}, {"lower", fp.lower}, {"upper", fp.upper}, {"unit", fp.unit}};
    if (!fp.description.empty()) p["description"] = fp.description;
    if (fp.integer) p["integer"] = true;
    j["free_params"].push_back(p);
  }
  j["parts"] = json::array();
  for (const auto& t : bp.parts) {
    json p{{"part_id", t.part_id}, {"name", t.name}, {"asset", t.asset_id}};
    p["parent"] = t.parent.empty() ? json(nullptr) : json(t.parent);
    p["params"] = json::object();
    for (const auto& [name, e] : t.params) p["params"][name] = expr_json(e);
    p["mount"] = {{"xyz", expr3_json(t.mount_xyz)}, {"rpy", expr3_json(t.mount_rpy)}};
    if (t.joint) {
      const auto& jt = *t.joint;
      p["joint"] = {{"joint_id", jt.joint_id},
                    {"kind", to_string(jt.kind)},
                    {"anchor", expr3_json(jt.anchor)},
                    {"axis", {jt.axis.x(), jt.axis.y(), jt.axis.z()}},
                    {"range", {expr_json(jt.q_min), expr_json(jt.q_max)}},
                    {"opening_sign", jt.opening_sign}};
    }
    j["parts"].push_back(p);
  }
  return j;
}

BlueprintPtr blueprint_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("blueprint: expected a JSON object");
  const std::string schema = field<std::string>(j, "schema", "blueprint");
  if (schema != kBlueprintSchema) throw ParseError("blueprint: unsupported schema '" + schema + "'");
  auto bp = std::make_shared<StructuralBlueprint>();
  bp->blueprint_id = field<std::string>(j, "blueprint_id", "blueprint");
  const std::string where = "blueprint '" + bp->blueprint_id + "'";
  bp->category = j.value("category", bp->blueprint_id);
  bp->object_name = j.value("object_name", bp->category);
  bp->synopsis = j.value("synopsis", "");
  bp->target_part = field<std::string>(j, "target_part", where);
  bp->target_query = j.value("target_query", "");
  for (const auto& p : j.value("free_params", json::array())) {
    concepts::ParamSpec fp;
    fp.name = field<std::string>(p, "name", where);
    fp.lower = field<double>(p, "lower", where);
    fp.upper = field<double>(p, "upper", where);
    fp.unit = p.value("unit", "m");
    fp.description = p.value("description", "");
    fp.integer = p.value("integer", false);
    bp->free_params.push_back(fp);
  }
  if (!j.contains("parts") || !j["parts"].is_array()) throw ParseError(where + ": missing 'parts' array");
  for (const auto& p : j["parts"]) {
    PartTemplate t;
    t.part_id = field<std::string>(p, "part_id", where);
    const std::string pw = where + " part '" + t.part_id + "'";
    t.name = p.value("name", t.part_id);
    t.asset_id = field<std::string>(p, "asset", pw);
    t.parent = p.contains("parent") && !p["parent"].is_null() ? field<std::string>(p, "parent", pw) : "";
    if (!p.contains("params") || !p["params"].is_object()) throw ParseError(pw + ": missing 'params' object");
    for (const auto& [name, e] : p["params"].items()) t.params.emplace_back(name, expr_from(e, pw + " param " + name));
    const json mount = p.value("mount", json::object());
    t.mount_xyz = mount.contains("xyz") ? expr3_from(mount["xyz"], pw + " mount.xyz") : ExprVec3{};
    t.mount_rpy = mount.contains("rpy") ? expr3_from(mount["rpy"], pw + " mount.rpy") : ExprVec3{};
    if (p.contains("joint") && !p["joint"].is_null()) {
      const json& jj = p["joint"];
      PartTemplate::Joint jt;
      jt.joint_id = field<std::string>(jj, "joint_id", pw);
      try {
        jt.kind = joint_kind_from_string(field<std::string>(jj, "kind", pw));
      } catch (const std::invalid_argument& e) {
        throw ParseError(pw + ": " + e.what());
      }
      jt.anchor = jj.contains("anchor") ? expr3_from(jj["anchor"], pw + " joint.anchor") : ExprVec3{};
      const auto axis = field<std::vector<double>>(jj, "axis", pw);
      if (axis.size() != 3) throw ParseError(pw + ": joint axis needs 3 components");
      jt.axis = Vec3(axis[0], axis[1], axis[2]);
      if (!jj.contains("range") || !jj["range"].is_array() || jj["range"].size() != 2)
        throw ParseError(pw + ": joint range needs [min, max]");
      jt.q_min = expr_from(jj["range"][0], pw + " joint.range");
      jt.q_max = expr_from(jj["range"][1], pw + " joint.range");
      jt.opening_sign = jj.value("opening_sign", 1);
      t.joint = jt;
    }
    bp->parts.push_back(std::move(t));
  }
  try {
    bp->validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
  return bp;
}

BlueprintPtr read_blueprint_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw PreconditionError("cannot open " + path);
  try {
    return blueprint_from_json(json::parse(f));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace eac::blueprint
