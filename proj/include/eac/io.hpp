#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "eac/blueprint.hpp"
#include "eac/reason.hpp"

namespace eac::io {

inline constexpr const char* kSceneSchema = "eac.scene/1";
inline constexpr const char* kRunSchema = "eac.run/1";

struct SceneObject {
  std::string blueprint_id;
  std::map<std::string, double> params;  // every free parameter of the blueprint
  Transform3 pose;
  std::map<std::string, double> joints;  // joint id -> value; unset joints start closed
};

struct SceneFile {
  std::vector<SceneObject> objects;
  std::optional<PointCloud> cloud;                // labeled by part index of the first object
  std::optional<reason::SceneGraph> graph;
};

/// Throws eac::ParseError on an unknown schema or malformed fields and
/// eac::NotFoundError on unknown blueprints. `base_dir` resolves a relative
/// cloud PLY path.
SceneFile scene_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
nlohmann::json to_json(const SceneFile& scene);
SceneFile read_scene_file(const std::string& path);
void write_scene_file(const std::string& path, const SceneFile& scene);

/// Structural instance of a scene object. Throws eac::RangeError for missing,
/// unknown or out-of-range parameters and joint values.
blueprint::StructuralInstance instantiate(const SceneObject& obj);

/// Random scene object drawn from a builtin blueprint.
SceneObject random_object(const std::string& blueprint_id, std::uint64_t seed, double open_fraction = 0.0);

reason::SceneGraph graph_from_json(const nlohmann::json& j);
nlohmann::json pose_to_json(const Transform3& pose);
Transform3 pose_from_json(const nlohmann::json& j);

// --- settings ---------------------------------------------------------------

struct Settings {
  std::string reasoner = "mock";  // mock | http
  std::string reasoner_url;
  std::string reasoner_token;
  std::uint64_t seed = 0;
  int threads = 1;
  int episodes = 50;
};

/// Partially specified settings from one source.
struct SettingsLayer {
  std::optional<std::string> reasoner, reasoner_url, reasoner_token;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads, episodes;
};

/// Layer from EAC_REASONER, EAC_REASONER_URL, EAC_REASONER_TOKEN, EAC_SEED,
/// EAC_THREADS and EAC_EPISODES. `getenv` is injectable for tests.
SettingsLayer settings_from_env(const std::function<const char*(const char*)>& getenv);
/// Layer from a JSON config file object with the same keys in lower case
/// (reasoner, reasoner_url, ...). Throws eac::ParseError on unknown keys.
SettingsLayer settings_from_json(const nlohmann::json& j);
/// flag > env > file > default.
Settings resolve_settings(const SettingsLayer& flags, const SettingsLayer& env, const SettingsLayer& file);

}  // namespace eac::io
