#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "eac/concepts.hpp"
#include "eac/manip.hpp"
#include "eac/sim.hpp"

namespace eac::reason {

// --- scene graph and plans --------------------------------------------------

/// Relations an edge may carry.
const std::vector<std::string>& relation_vocabulary();

struct SceneNode {
  std::string id;
  std::string name;
  std::string state;  // "open", "closed", ... or "none"
};

struct SceneEdge {
  std::string from;  // node id
  std::string relation;
  std::string to;    // node id
};

struct SceneGraph {
  std::vector<SceneNode> nodes;
  std::vector<SceneEdge> edges;

  /// Throws eac::PreconditionError on duplicate ids, dangling edges or
  /// relations outside the vocabulary.
  void validate() const;
  const SceneNode* find_name(const std::string& name) const;
  const SceneNode* find_id(const std::string& id) const;
};

enum class Status { pending, done, failed };
std::string to_string(Status s);

struct SubTask {
  std::string instruction;
  std::string condition;
  std::vector<std::string> objects;  // graph node names the sub-task mentions
  Status status = Status::pending;
  int attempts = 0;
};

struct Plan {
  std::vector<SubTask> subtasks;

  /// Throws eac::PreconditionError when empty or when a sub-task mentions a
  /// name that is not a node of `graph`; the message lists those names.
  void validate(const SceneGraph& graph) const;
};

// --- reasoner ---------------------------------------------------------------

/// Prompt template text by id (parse_objects, parse_relations, decompose,
/// select_concept, select_strategy, verify). Throws eac::NotFoundError.
const std::string& prompt_template(const std::string& template_id);
std::vector<std::string> prompt_template_ids();

/// Replaces every <name> placeholder with vars[name]. Throws
/// eac::PreconditionError naming placeholders without a value.
std::string render_prompt(const std::string& template_id, const std::map<std::string, std::string>& vars);

struct Query {
  std::string template_id;
  std::string prompt;       // rendered text sent to a remote model
  nlohmann::json context;   // structured inputs the prompt was rendered from
};

class Reasoner {
 public:
  virtual ~Reasoner() = default;
  /// Reply text for one query. Throws eac::TransportError on transport failures.
  virtual std::string complete(const Query& q) = 0;
};

/// Key-value lines of the first fenced block in `reply`, in order.
/// Throws eac::ParseError (quoting the reply) without a well-formed block.
std::vector<std::pair<std::string, std::string>> parse_reply(const std::string& reply);

/// Deterministic stand-in for a language model: a pure function of the
/// template id and the query context.
class MockReasoner : public Reasoner {
 public:
  std::string complete(const Query& q) override;
};

struct HttpConfig {
  std::string url;    // base URL, e.g. http://localhost:8000
  std::string path = "/v1/chat/completions";
  std::string model = "default";
  std::string token;  // sent as a bearer token when non-empty
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
  std::chrono::milliseconds backoff{500};
  int max_in_flight = 4;

  /// URL and token from EAC_REASONER_URL / EAC_REASONER_TOKEN when the
  /// fields are empty.
  HttpConfig with_environment() const;
};

/// Chat-completion client. Each request carries the rendered prompt as a
/// single user message; the reply is the first choice's message content.
class HttpReasoner : public Reasoner {
 public:
  explicit HttpReasoner(HttpConfig cfg);
  ~HttpReasoner() override;
  std::string complete(const Query& q) override;

 private:
  struct Impl;
  HttpConfig cfg_;
  std::unique_ptr<Impl> impl_;
};

// --- operations -------------------------------------------------------------

/// Scene description handed to the reasoner: objects with their parts,
/// part states and positions.
nlohmann::json describe(const blueprint::StructuralInstance& object);
nlohmann::json describe(const std::vector<blueprint::StructuralInstance>& objects);

/// Two queries, objects first and then states and relations.
SceneGraph parse_objects(Reasoner& r, const nlohmann::json& descriptor, const std::string& instruction);

Plan decompose(Reasoner& r, const std::string& instruction, const SceneGraph& graph);

struct ConceptCandidate {
  concepts::AssetPtr asset;
  std::optional<double> residual;  // fit residual (m) when a fit was attempted
};

/// Asset id chosen among `candidates`. A single candidate is returned
/// without a query. Out-of-list replies are retried once, then rejected with
/// eac::PreconditionError, as is an empty list.
std::string select_concept(Reasoner& r, const std::vector<ConceptCandidate>& candidates, const std::string& target,
                           const std::string& subtask);

/// Strategy chosen for `subtask`; same membership rules as select_concept.
/// A "none" reply or an empty list throws eac::PreconditionError.
manip::Strategy select_strategy(Reasoner& r, const std::vector<manip::Strategy>& strategies,
                                const std::string& target, const std::string& concept_id,
                                const std::string& subtask);

/// Condition answered from simulator state: "is the X grasped?" and
/// "is the X opened?" / "is the X closed?". Throws eac::NotFoundError for
/// other conditions.
bool verify(const sim::SimSession& session, const std::string& condition);
/// Condition answered by the reasoner from an observation record.
bool verify(Reasoner& r, const std::string& condition, const nlohmann::json& observation);

/// Runs sub-tasks in order. Each is executed and verified up to
/// 1 + retry_limit times; a sub-task that never verifies is marked failed and
/// the rest stay pending.
void run_loop(Plan& plan, const std::function<void(SubTask&, std::size_t)>& execute,
              const std::function<bool(const SubTask&)>& check, int retry_limit = 2);

struct TaskOptions {
  int retry_limit = 2;
  std::optional<SceneGraph> graph;  // skips object parsing when given
};

struct ConceptChoice {
  std::string asset_id;
  fit::FitResult fit;
  std::vector<fit::FitResult> candidates;
};

struct TaskRecord {
  std::string instruction;
  SceneGraph graph;
  Plan plan;
  ConceptChoice concept_choice;
  std::vector<std::string> strategies;  // chosen id per sub-task
  sim::EpisodeResult episode;
};

/// Whole reasoning pipeline on a simulator session: parse, decompose, fit and
/// select the concept, select strategies, then execute and verify.
TaskRecord run_task(Reasoner& r, sim::SimSession& session, const std::string& instruction,
                    const TaskOptions& opt = {});

/// "open the <object>" for pull, "close the <object>" for push.
std::string default_instruction(const blueprint::StructuralBlueprint& bp, sim::Task task);

/// Episode through run_task with the default instruction.
sim::EpisodeResult run_reasoned_episode(Reasoner& r, const blueprint::BlueprintPtr& bp, sim::Task task,
                                        const sim::EpisodeConfig& cfg);

nlohmann::json to_json(const SceneGraph& g);
nlohmann::json to_json(const Plan& p);
nlohmann::json to_json(const TaskRecord& t);

}  // namespace eac::reason
