#include "eac/io.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "eac/concepts.hpp"
#include "eac/errors.hpp"

namespace eac::io {

using nlohmann::json;

namespace {

template <class F>
auto field(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
}

Vec3 vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ParseError(where + ": expected [x, y, z]");
  return field(where, [&] { return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>()); });
}

std::map<std::string, double> number_map(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object of numbers");
  std::map<std::string, double> out;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number()) throw ParseError(where + "." + k + ": expected a number");
    out[k] = v.get<double>();
  }
  return out;
}

void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ParseError(where + ": unknown field '" + k + "'");
}

}  // namespace

json pose_to_json(const Transform3& pose) {
  const Vec3 t = pose.translation(), rpy = pose.rotation().rpy();
  return {{"xyz", {t.x(), t.y(), t.z()}}, {"rpy", {rpy.x(), rpy.y(), rpy.z()}}};
}

Transform3 pose_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("pose: expected {xyz, rpy}");
  only_keys(j, {"xyz", "rpy"}, "pose");
  const Vec3 t = j.contains("xyz") ? vec3(j["xyz"], "pose.xyz") : Vec3::Zero();
  const Vec3 r = j.contains("rpy") ? vec3(j["rpy"], "pose.rpy") : Vec3::Zero();
  return Transform3(rot_rpy(r.x(), r.y(), r.z()), t);
}

reason::SceneGraph graph_from_json(const json& j) {
  reason::SceneGraph g;
  field("graph", [&] {
    for (const auto& n : j.at("nodes"))
      g.nodes.push_back({n.at("id").get<std::string>(), n.at("name").get<std::string>(), n.value("state", "none")});
    for (const auto& e : j.value("edges", json::array()))
      g.edges.push_back({e.at("from").get<std::string>(), e.at("relation").get<std::string>(), e.at("to").get<std::string>()});
    return 0;
  });
  try {
    g.validate();
  } catch (const PreconditionError& e) {
    throw ParseError(e.what());
  }
  return g;
}

SceneFile scene_from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ParseError("scene: expected a JSON object");
  const std::string schema = j.value("schema", "");
  if (schema != kSceneSchema) throw ParseError("scene: unsupported schema '" + schema + "' (expected " + kSceneSchema + ")");
  only_keys(j, {"schema", "objects", "cloud", "graph"}, "scene");
  if (!j.contains("objects") || !j["objects"].is_array() || j["objects"].empty())
    throw ParseError("scene: 'objects' must be a non-empty array");
  SceneFile s;
  for (std::size_t i = 0; i < j["objects"].size(); ++i) {
    const auto& o = j["objects"][i];
    const std::string where = "scene.objects[" + std::to_string(i) + "]";
    if (!o.is_object()) throw ParseError(where + ": expected an object");
    only_keys(o, {"blueprint", "params", "pose", "joints"}, where);
    SceneObject obj;
    obj.blueprint_id = field(where + ".blueprint", [&] { return o.at("blueprint").get<std::string>(); });
    blueprint::builtin_blueprint(obj.blueprint_id);  // NotFoundError names the valid ids
    obj.params = number_map(o.value("params", json::object()), where + ".params");
    if (o.contains("pose")) obj.pose = pose_from_json(o["pose"]);
    obj.joints = number_map(o.value("joints", json::object()), where + ".joints");
    s.objects.push_back(std::move(obj));
  }
  if (j.contains("cloud")) {
    const auto& c = j["cloud"];
    if (c.contains("ply")) {
      std::filesystem::path p = c["ply"].get<std::string>();
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      s.cloud = concepts::read_ply_file(p.string());
    } else if (c.contains("points")) {
      PointCloud pc;
      field("scene.cloud.points", [&] {
        for (const auto& row : c["points"]) {
          if (row.size() != 4) throw ParseError("scene.cloud.points: rows are [x, y, z, label]");
          pc.points.emplace_back(row[0].get<double>(), row[1].get<double>(), row[2].get<double>());
          pc.labels.push_back(row[3].get<int>());
        }
        return 0;
      });
      s.cloud = std::move(pc);
    } else {
      throw ParseError("scene.cloud: expected 'ply' or 'points'");
    }
  }
  if (j.contains("graph")) s.graph = graph_from_json(j["graph"]);
  return s;
}

json to_json(const SceneFile& scene) {
  json objects = json::array();
  for (const auto& o : scene.objects) {
    json jo{{"blueprint", o.blueprint_id}, {"params", o.params}, {"pose", pose_to_json(o.pose)}};
    if (!o.joints.empty()) jo["joints"] = o.joints;
    objects.push_back(jo);
  }
  json j{{"schema", kSceneSchema}, {"objects", objects}};
  if (scene.cloud) {
    json pts = json::array();
    for (std::size_t i = 0; i < scene.cloud->size(); ++i) {
      const auto& p = scene.cloud->points[i];
      pts.push_back({p.x(), p.y(), p.z(), scene.cloud->has_labels() ? scene.cloud->labels[i] : 0});
    }
    j["cloud"] = {{"points", pts}};
  }
  if (scene.graph) j["graph"] = reason::to_json(*scene.graph);
  return j;
}

SceneFile read_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open scene file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("scene file '" + path + "': " + e.what());
  }
  return scene_from_json(j, std::filesystem::path(path).parent_path().string());
}

void write_scene_file(const std::string& path, const SceneFile& scene) {
  std::ofstream out(path);
  if (!out) throw PreconditionError("cannot write scene file '" + path + "'");
  out << to_json(scene).dump(2) << "\n";
}

blueprint::StructuralInstance instantiate(const SceneObject& obj) {
  return blueprint::instantiate(blueprint::builtin_blueprint(obj.blueprint_id), obj.params, obj.pose, obj.joints);
}

SceneObject random_object(const std::string& blueprint_id, std::uint64_t seed, double open_fraction) {
  const auto bp = blueprint::builtin_blueprint(blueprint_id);
  SceneObject o;
  o.blueprint_id = blueprint_id;
  o.params = blueprint::random_params(*bp, seed);
  const auto inst = blueprint::instantiate(bp, o.params, Transform3());
  const std::string jid = inst.driving_joint(bp->target_part);
  const auto& j = inst.joint(jid);
  o.joints[jid] = j.closed_value() + j.opening_sign * std::clamp(open_fraction, 0.0, 1.0) * j.range();
  return o;
}

// --- settings ---------------------------------------------------------------

namespace {

template <class T>
std::optional<T> number_from(const char* text, const char* name) {
  if (!text) return std::nullopt;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != std::string(text).size() || v < 0) throw std::invalid_argument(text);
    return static_cast<T>(v);
  } catch (const std::exception&) {
    throw ParseError(std::string(name) + ": expected a non-negative integer, got '" + text + "'");
  }
}

std::optional<std::string> text_from(const char* text) {
  if (!text) return std::nullopt;
  return std::string(text);
}

template <class T>
T pick(const std::optional<T>& a, const std::optional<T>& b, const std::optional<T>& c, T fallback) {
  if (a) return *a;
  if (b) return *b;
  if (c) return *c;
  return fallback;
}

}  // namespace

SettingsLayer settings_from_env(const std::function<const char*(const char*)>& getenv) {
  SettingsLayer l;
  l.reasoner = text_from(getenv("EAC_REASONER"));
  l.reasoner_url = text_from(getenv("EAC_REASONER_URL"));
  l.reasoner_token = text_from(getenv("EAC_REASONER_TOKEN"));
  l.seed = number_from<std::uint64_t>(getenv("EAC_SEED"), "EAC_SEED");
  l.threads = number_from<int>(getenv("EAC_THREADS"), "EAC_THREADS");
  l.episodes = number_from<int>(getenv("EAC_EPISODES"), "EAC_EPISODES");
  return l;
}

SettingsLayer settings_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("config: expected a JSON object");
  only_keys(j, {"reasoner", "reasoner_url", "reasoner_token", "seed", "threads", "episodes"}, "config");
  SettingsLayer l;
  field("config", [&] {
    if (j.contains("reasoner")) l.reasoner = j["reasoner"].get<std::string>();
    if (j.contains("reasoner_url")) l.reasoner_url = j["reasoner_url"].get<std::string>();
    if (j.contains("reasoner_token")) l.reasoner_token = j["reasoner_token"].get<std::string>();
    if (j.contains("seed")) l.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) l.threads = j["threads"].get<int>();
    if (j.contains("episodes")) l.episodes = j["episodes"].get<int>();
    return 0;
  });
  return l;
}

Settings resolve_settings(const SettingsLayer& flags, const SettingsLayer& env, const SettingsLayer& file) {
  Settings d;
  Settings s;
  s.reasoner = pick(flags.reasoner, env.reasoner, file.reasoner, d.reasoner);
  s.reasoner_url = pick(flags.reasoner_url, env.reasoner_url, file.reasoner_url, d.reasoner_url);
  s.reasoner_token = pick(flags.reasoner_token, env.reasoner_token, file.reasoner_token, d.reasoner_token);
  s.seed = pick(flags.seed, env.seed, file.seed, d.seed);
  s.threads = pick(flags.threads, env.threads, file.threads, d.threads);
  s.episodes = pick(flags.episodes, env.episodes, file.episodes, d.episodes);
  if (s.reasoner != "mock" && s.reasoner != "http")
    throw PreconditionError("reasoner must be 'mock' or 'http', got '" + s.reasoner + "'");
  if (s.threads < 1) throw PreconditionError("threads must be >= 1");
  return s;
}

}  // namespace eac::io
