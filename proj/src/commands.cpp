#include "eac/commands.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "eac/errors.hpp"
#include "eac/fit.hpp"

namespace eac::cli {

using nlohmann::json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const NotFoundError*>(&e) ||
      dynamic_cast<const RangeError*>(&e) || dynamic_cast<const PreconditionError*>(&e) ||
      dynamic_cast<const std::invalid_argument*>(&e))
    return kInput;
  return kRuntime;
}

void cmd_concepts_list(std::ostream& os) {
  char line[512];
  std::snprintf(line, sizeof line, "%-14s %-28s %s\n", "asset", "tags", "parameters");
  os << line;
  for (const auto& a : concepts::builtin_library()) {
    std::string tags, params;
    for (const auto& t : a->category_tags) tags += (tags.empty() ? "" : ",") + t;
    for (const auto& p : a->params) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s[%g,%g]", p.name.c_str(), p.lower, p.upper);
      params += (params.empty() ? "" : " ") + std::string(buf);
    }
    std::snprintf(line, sizeof line, "%-14s %-28s %s\n", a->asset_id.c_str(), tags.c_str(), params.c_str());
    os << line;
  }
}

PointCloud cmd_concepts_render(const std::string& asset_id, const std::map<std::string, double>& params, std::size_t n,
                               std::uint64_t seed) {
  if (n == 0) throw PreconditionError("render: --n must be positive");
  const concepts::AssetInstance inst(concepts::builtin_asset(asset_id), params);
  return concepts::sample_surface(inst, n, seed);
}

json cmd_fit(const PointCloud& cloud, const std::string& asset_id, bool oracle) {
  const auto asset = concepts::builtin_asset(asset_id);
  const auto r = fit::fit_structural(asset, cloud);
  json rec = fit::to_json(r, *asset);
  rec["points"] = cloud.size();
  if (!oracle) return rec;

  const int per = asset->params.size() <= 3 ? 13 : 7;
  fit::OracleGrid grid{fit::uniform_grid(*asset, per), {r.pose}};
  for (int a = 0; a < 3; ++a)
    for (double s : {-0.001, 0.001}) grid.poses.push_back(Transform3(r.pose.rotation(), r.pose.translation() + s * Vec3::Unit(a)));
  const auto o = fit::brute_force_oracle(asset, cloud, grid);
  json row = fit::to_json(o, *asset);
  json cells = json::object();
  bool agree = true;
  for (std::size_t i = 0; i < asset->params.size(); ++i) {
    const auto& p = asset->params[i];
    const double cell = p.geometric ? (p.upper - p.lower) / (per - 1) : 0.0;
    cells[p.name] = cell;
    if (p.geometric && !r.params.empty()) agree = agree && std::abs(r.params[i] - o.params[i]) <= cell + 1e-12;
  }
  row["cell"] = cells;
  row["agrees_within_one_cell"] = agree && !r.params.empty();
  rec["oracle"] = row;
  return rec;
}

io::SceneFile cmd_generate(const std::string& blueprint_id, std::uint64_t seed, double open_fraction, bool with_cloud) {
  if (open_fraction < 0.0 || open_fraction > 1.0) throw PreconditionError("generate: open fraction must lie in [0, 1]");
  io::SceneFile s;
  s.objects.push_back(io::random_object(blueprint_id, seed, open_fraction));
  if (with_cloud) {
    sim::EpisodeConfig cfg;
    cfg.seed = seed;
    sim::SimSession session(io::instantiate(s.objects.front()), sim::Task::pull, cfg);
    s.cloud = session.observation();
  }
  return s;
}

std::unique_ptr<reason::Reasoner> make_reasoner(const io::Settings& s) {
  if (s.reasoner == "mock") return std::make_unique<reason::MockReasoner>();
  reason::HttpConfig cfg;
  cfg.url = s.reasoner_url;
  cfg.token = s.reasoner_token;
  return std::make_unique<reason::HttpReasoner>(cfg);
}

namespace {

sim::Task task_of(const std::string& instruction) {
  std::string verb = instruction.substr(0, instruction.find(' '));
  for (char& c : verb) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return verb == "close" || verb == "push" ? sim::Task::push : sim::Task::pull;
}

std::size_t object_for(const io::SceneFile& scene, const std::string& instruction) {
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& name = blueprint::builtin_blueprint(scene.objects[i].blueprint_id)->object_name;
    if (instruction.find(name) != std::string::npos) return i;
  }
  return 0;
}

json waypoints(const exec::Trajectory& t) {
  json arr = json::array();
  for (const auto& w : t.waypoints) {
    json p = io::pose_to_json(w.pose);
    p["phase"] = exec::to_string(w.phase);
    p["width"] = w.width;
    arr.push_back(p);
  }
  return arr;
}

}  // namespace

json cmd_run(const RunOptions& opt) {
  if (opt.instruction.empty()) throw PreconditionError("run: empty instruction");
  if (opt.scene.objects.empty()) throw PreconditionError("run: scene has no objects");
  const std::size_t idx = object_for(opt.scene, opt.instruction);
  const auto& obj = opt.scene.objects[idx];

  sim::EpisodeConfig cfg;
  cfg.seed = opt.settings.seed;
  cfg.ground_truth = opt.ground_truth;
  sim::SimSession session(io::instantiate(obj), task_of(opt.instruction), cfg);
  if (opt.scene.cloud && idx == 0 && !opt.ground_truth) session.set_observation(*opt.scene.cloud);

  auto reasoner = make_reasoner(opt.settings);
  reason::TaskOptions topt;
  topt.graph = opt.scene.graph;
  const auto rec = reason::run_task(*reasoner, session, opt.instruction, topt);

  json config{{"seed", opt.settings.seed},
              {"reasoner", opt.settings.reasoner},
              {"instruction", opt.instruction},
              {"ground_truth", opt.ground_truth},
              {"scene", io::to_json(opt.scene)}};
  if (opt.settings.reasoner == "http") config["reasoner_url"] = opt.settings.reasoner_url;
  json out = reason::to_json(rec);
  out["schema"] = io::kRunSchema;
  out["config"] = config;
  out["object"] = obj.blueprint_id;
  out["trajectory"] = session.planned_trajectory() ? waypoints(*session.planned_trajectory()) : json::array();
  return out;
}

RunOptions run_options_from_record(const json& record) {
  if (!record.is_object() || record.value("schema", "") != io::kRunSchema)
    throw ParseError(std::string("run record: expected schema ") + io::kRunSchema);
  RunOptions o;
  try {
    const auto& c = record.at("config");
    o.instruction = c.at("instruction").get<std::string>();
    o.settings.seed = c.at("seed").get<std::uint64_t>();
    o.settings.reasoner = c.at("reasoner").get<std::string>();
    o.settings.reasoner_url = c.value("reasoner_url", "");
    o.ground_truth = c.at("ground_truth").get<bool>();
    o.scene = io::scene_from_json(c.at("scene"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("run record config: ") + e.what());
  }
  return o;
}

std::vector<sim::SuiteItem> suite_by_name(const std::string& suite, const std::string& tasks) {
  if (suite != "builtin") throw NotFoundError("unknown suite '" + suite + "' (valid: builtin)");
  std::vector<sim::Task> list;
  if (tasks == "pull" || tasks == "both") list.push_back(sim::Task::pull);
  if (tasks == "push" || tasks == "both") list.push_back(sim::Task::push);
  if (list.empty()) throw PreconditionError("tasks must be pull, push or both, got '" + tasks + "'");
  std::vector<sim::SuiteItem> out;
  for (const auto t : list)
    for (const auto& bp : blueprint::builtin_blueprints()) out.push_back({bp, t});
  return out;
}

sim::EvaluationReport cmd_evaluate(const EvaluateOptions& opt) {
  const auto suite = suite_by_name(opt.suite, opt.tasks);
  sim::EpisodeConfig base;
  sim::EpisodeRunner runner;
  if (opt.pipeline == "ground-truth") {
    base.ground_truth = true;
  } else if (opt.pipeline == "reasoned") {
    const io::Settings settings = opt.settings;
    if (settings.reasoner == "http") make_reasoner(settings);  // fail early on a bad endpoint config
    runner = [settings](const sim::SuiteItem& item, const sim::EpisodeConfig& cfg) {
      auto r = make_reasoner(settings);
      return reason::run_reasoned_episode(*r, item.blueprint, item.task, cfg);
    };
  } else if (opt.pipeline != "fit") {
    throw PreconditionError("pipeline must be reasoned, fit or ground-truth, got '" + opt.pipeline + "'");
  }
  return sim::evaluate(suite, opt.settings.episodes, opt.settings.seed, base, runner, opt.settings.threads);
}

}  // namespace eac::cli
