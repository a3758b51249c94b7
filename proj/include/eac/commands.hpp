#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "eac/io.hpp"
#include "eac/reason.hpp"
#include "eac/sim.hpp"

// Command implementations behind the `eac` executable. Each returns data or
// writes to the given stream; exit codes are assigned by the executable.
namespace eac::cli {

/// Exit codes shared by every command.
enum ExitCode { kOk = 0, kUsage = 2, kInput = 3, kRuntime = 4 };

/// Maps an exception to its exit code: input errors (parse, not found,
/// range, precondition) give kInput, everything else kRuntime.
int exit_code_for(const std::exception& e);

void cmd_concepts_list(std::ostream& os);
/// Surface samples of an asset instance. Throws eac::RangeError on missing
/// or out-of-range parameters, eac::NotFoundError naming valid ids.
PointCloud cmd_concepts_render(const std::string& asset_id, const std::map<std::string, double>& params, std::size_t n,
                               std::uint64_t seed);

/// Fit record; with `oracle` a brute-force grid search around the fitted
/// pose is added for comparison.
nlohmann::json cmd_fit(const PointCloud& cloud, const std::string& asset_id, bool oracle);

/// Scene file with one random object of a builtin blueprint, optionally with
/// a rendered partial cloud from a camera on the protocol band.
io::SceneFile cmd_generate(const std::string& blueprint_id, std::uint64_t seed, double open_fraction, bool with_cloud);

struct RunOptions {
  io::SceneFile scene;
  std::string instruction;
  io::Settings settings;
  bool ground_truth = false;
};

std::unique_ptr<reason::Reasoner> make_reasoner(const io::Settings& s);

/// Run record: config echo, scene graph, plan, concept choice, strategies,
/// planned waypoints and the episode outcome. No timestamps.
nlohmann::json cmd_run(const RunOptions& opt);
/// Options embedded in a run record, for replay. Throws eac::ParseError.
RunOptions run_options_from_record(const nlohmann::json& record);

struct EvaluateOptions {
  std::string suite = "builtin";
  std::string tasks = "pull";         // pull | push | both
  std::string pipeline = "reasoned";  // reasoned | fit | ground-truth
  io::Settings settings;
};

std::vector<sim::SuiteItem> suite_by_name(const std::string& suite, const std::string& tasks);
sim::EvaluationReport cmd_evaluate(const EvaluateOptions& opt);

}  // namespace eac::cli
