#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "eac/commands.hpp"
#include "eac/concepts.hpp"
#include "eac/errors.hpp"

#include "CLI11.hpp"

using nlohmann::json;
namespace cli = eac::cli;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw eac::PreconditionError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw eac::ParseError("'" + path + "': " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw eac::PreconditionError("cannot write '" + path + "'");
  out << text;
}

std::map<std::string, double> param_flags(const std::vector<std::string>& extra) {
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < extra.size(); ++i) {
    const std::string& flag = extra[i];
    if (flag.rfind("--", 0) != 0 || flag.size() < 3) throw CLI::ExtrasError({flag});
    std::string name = flag.substr(2), value;
    if (const auto eq = name.find('='); eq != std::string::npos) {
      value = name.substr(eq + 1);
      name = name.substr(0, eq);
    } else {
      if (i + 1 >= extra.size()) throw CLI::ArgumentMismatch(name, 1, 0);
      value = extra[++i];
    }
    try {
      std::size_t used = 0;
      out[name] = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--" + name, "expected a number, got '" + value + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structural concept fitting and articulated-object manipulation"};
  app.require_subcommand(1);
  app.fallthrough();

  eac::io::SettingsLayer flags;
  std::string config_path;
  app.add_option("--config", config_path, "JSON settings file");
  app.add_option("--reasoner", flags.reasoner, "mock | http")->check(CLI::IsMember({"mock", "http"}));
  app.add_option("--reasoner-url", flags.reasoner_url, "Base URL of a chat-completion endpoint");
  app.add_option("--seed", flags.seed, "Random seed");
  app.add_option("--threads", flags.threads, "Worker threads for evaluation");
  app.add_option("--episodes", flags.episodes, "Episodes per suite item");

  auto* concepts = app.add_subcommand("concepts", "Concept asset library");
  concepts->require_subcommand(1);
  concepts->add_subcommand("list", "List the builtin assets");
  auto* render = concepts->add_subcommand("render", "Sample an asset instance as a PLY cloud; params as --<name> <value>");
  std::string render_asset, render_out;
  std::size_t render_n = 2000;
  render->add_option("asset", render_asset, "Asset id")->required();
  std::vector<std::string> render_params;
  render->add_option("--points", render_n, "Number of points");
  render->add_option("--params", render_params, "name=value pairs, comma separated")->delimiter(',');
  render->add_option("--out", render_out, "Output PLY (default stdout)");
  render->allow_extras();
  render->fallthrough(false);

  auto* fit = app.add_subcommand("fit", "Fit a concept asset to a point cloud");
  std::string fit_cloud, fit_asset, fit_out;
  bool fit_oracle = false;
  fit->add_option("cloud", fit_cloud, "PLY point cloud")->required();
  fit->add_option("--concept", fit_asset, "Asset id")->required();
  fit->add_flag("--oracle", fit_oracle, "Also run the brute-force grid oracle");
  fit->add_option("--out", fit_out, "Output JSON (default stdout)");

  auto* run = app.add_subcommand("run", "Run one instruction on a scene");
  std::string run_scene, run_instruction, run_out, run_replay;
  bool run_gt = false;
  run->add_option("--scene", run_scene, "Scene JSON");
  run->add_option("--instruction", run_instruction, "Instruction text");
  run->add_flag("--ground-truth", run_gt, "Use the true part geometry instead of fitting");
  run->add_option("--replay", run_replay, "Re-run the configuration stored in a run record");
  run->add_option("--out", run_out, "Output run record (default stdout)");

  auto* evaluate = app.add_subcommand("evaluate", "Success rates over a suite");
  cli::EvaluateOptions eval;
  std::string eval_json;
  evaluate->add_option("--suite", eval.suite, "Suite name")->capture_default_str();
  evaluate->add_option("--pipeline", eval.pipeline, "reasoned | fit | ground-truth")
      ->capture_default_str()
      ->check(CLI::IsMember({"reasoned", "fit", "ground-truth"}));
  evaluate->add_option("--tasks", eval.tasks, "pull | push | both")
      ->capture_default_str()
      ->check(CLI::IsMember({"pull", "push", "both"}));
  evaluate->add_option("--json", eval_json, "Also write the report as JSON");

  auto* generate = app.add_subcommand("generate", "Write a scene with one random object");
  std::string gen_bp, gen_out;
  double gen_open = 0.0;
  bool gen_cloud = false;
  generate->add_option("blueprint", gen_bp, "Blueprint id")->required();
  generate->add_option("--open-fraction", gen_open, "Initial opening as a fraction of the joint range");
  generate->add_flag("--cloud", gen_cloud, "Embed a rendered partial view");
  generate->add_option("--out", gen_out, "Output scene JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kUsage;
  }

  std::map<std::string, double> params;
  if (render->parsed()) {
    try {
      std::vector<std::string> extra = render->remaining();
      for (const auto& kv : render_params) extra.push_back("--" + kv);
      params = param_flags(extra);
      if (const auto it = params.find("seed"); it != params.end()) {  // global option given after the asset
        flags.seed = static_cast<std::uint64_t>(it->second);
        params.erase(it);
      }
    } catch (const CLI::ParseError& e) {
      std::cerr << "concepts render: " << e.what() << "\n";
      return cli::kUsage;
    }
  }

  try {
    const eac::io::SettingsLayer file =
        config_path.empty() ? eac::io::SettingsLayer{} : eac::io::settings_from_json(read_json_file(config_path));
    const auto settings = eac::io::resolve_settings(flags, eac::io::settings_from_env(std::getenv), file);

    if (*concepts) {
      if (concepts->got_subcommand("list")) {
        cli::cmd_concepts_list(std::cout);
      } else {
        const auto cloud = cli::cmd_concepts_render(render_asset, params, render_n, settings.seed);
        std::ostringstream ply;
        eac::concepts::write_ply(ply, cloud);
        write_text(render_out, ply.str());
      }
    } else if (*fit) {
      const auto cloud = eac::concepts::read_ply_file(fit_cloud);
      write_text(fit_out, cli::cmd_fit(cloud, fit_asset, fit_oracle).dump(2) + "\n");
    } else if (*run) {
      cli::RunOptions opt;
      if (!run_replay.empty()) {
        opt = cli::run_options_from_record(read_json_file(run_replay));
        opt.settings.reasoner_token = settings.reasoner_token;
      } else {
        if (run_scene.empty() || run_instruction.empty()) {
          std::cerr << "run: --scene and --instruction are required unless --replay is given\n";
          return cli::kUsage;
        }
        opt.scene = eac::io::read_scene_file(run_scene);
        opt.instruction = run_instruction;
        opt.settings = settings;
        opt.ground_truth = run_gt;
      }
      write_text(run_out, cli::cmd_run(opt).dump(2) + "\n");
    } else if (*evaluate) {
      eval.settings = settings;
      const auto report = cli::cmd_evaluate(eval);
      eac::sim::write_table(std::cout, report);
      if (!eval_json.empty()) write_text(eval_json, eac::sim::to_json(report).dump(2) + "\n");
    } else if (*generate) {
      const auto scene = cli::cmd_generate(gen_bp, settings.seed, gen_open, gen_cloud);
      write_text(gen_out, eac::io::to_json(scene).dump(2) + "\n");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code_for(e);
  }
  return cli::kOk;
}
