#include <cstdlib>
#include <thread>

#include <gtest/gtest.h>

#include "eac/errors.hpp"
#include "eac/reason.hpp"

#include "httplib.h"

using namespace eac;
using namespace eac::reason;
using nlohmann::json;

namespace {

blueprint::StructuralInstance microwave(double q = 0.0) {
  const auto bp = blueprint::builtin_blueprint("microwave");
  return blueprint::instantiate(bp, blueprint::midpoint_params(*bp), Transform3()).with_joint("hinge", q);
}

json microwave_scene() { return describe(std::vector<blueprint::StructuralInstance>{microwave()}); }

// Replays canned replies and records the queries.
class Scripted : public Reasoner {
 public:
  explicit Scripted(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const Query& q) override {
    queries.push_back(q);
    return replies_.at(std::min(queries.size() - 1, replies_.size() - 1));
  }
  std::vector<Query> queries;

 private:
  std::vector<std::string> replies_;
};

class Counting : public MockReasoner {
 public:
  std::string complete(const Query& q) override {
    ++calls;
    return MockReasoner::complete(q);
  }
  int calls = 0;
};

sim::EpisodeConfig gt_config(std::uint64_t seed = 1) {
  sim::EpisodeConfig cfg;
  cfg.seed = seed;
  cfg.ground_truth = true;
  cfg.p_closed = 1.0;
  return cfg;
}

}  // namespace

TEST(Prompt, TemplatesRenderWithTheirPlaceholders) {
  EXPECT_EQ(prompt_template_ids(), (std::vector<std::string>{"decompose", "parse_objects", "parse_relations",
                                                             "select_concept", "select_strategy", "verify"}));
  const auto text = render_prompt("select_concept", {{"target object", "handle"},
                                                     {"sub-task", "grasp the door handle"},
                                                     {"candidates", "curve_handle: arc"},
                                                     {"evidence", "curve_handle: 0.001 m"}});
  EXPECT_NE(text.find("grasp the door handle"), std::string::npos);
  EXPECT_EQ(text.find("<target object>"), std::string::npos);
}

TEST(Prompt, MissingValueIsNamed) {
  try {
    render_prompt("verify", {{"condition", "is the door opened?"}});
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("observation"), std::string::npos);
  }
  EXPECT_THROW(prompt_template("nope"), NotFoundError);
}

TEST(Reply, FencedKeyValues) {
  const auto kv = parse_reply("Sure.\n```text\nconcept: curve_handle\n\nObjects: a, b\n```\ntrailing: ignored\n");
  ASSERT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"concept", "curve_handle"}));
  EXPECT_EQ(kv[1], (std::pair<std::string, std::string>{"objects", "a, b"}));
  EXPECT_TRUE(parse_reply("```\n```").empty());
  EXPECT_THROW(parse_reply("concept: curve_handle"), ParseError);
  EXPECT_THROW(parse_reply("```\nconcept: x\n"), ParseError);
  EXPECT_THROW(parse_reply("```\njust words\n```"), ParseError);
}

TEST(ParseObjects, MicrowaveFixture) {
  MockReasoner m;
  const auto g = parse_objects(m, microwave_scene(), "open the microwave door");
  EXPECT_NO_THROW(g.validate());
  const auto* mw = g.find_name("microwave");
  const auto* handle = g.find_name("handle");
  ASSERT_TRUE(mw && handle);
  EXPECT_EQ(mw->state, "closed");
  bool edge = false;
  for (const auto& e : g.edges) edge |= e.from == handle->id && e.relation == "part-of" && e.to == mw->id;
  EXPECT_TRUE(edge);
}

TEST(ParseObjects, ObjectsQueryComesFirst) {
  Scripted s({"```\nobject: microwave\nobject: handle\n```", "```\nstate: microwave | closed\n"
                                                             "relation: handle | part-of | microwave\n```"});
  const auto g = parse_objects(s, microwave_scene(), "open the microwave door");
  ASSERT_EQ(s.queries.size(), 2u);
  EXPECT_EQ(s.queries[0].template_id, "parse_objects");
  EXPECT_EQ(s.queries[1].template_id, "parse_relations");
  EXPECT_EQ(g.nodes.size(), 2u);
  EXPECT_EQ(g.edges.size(), 1u);
}

TEST(ParseObjects, EmptyScene) {
  MockReasoner m;
  const auto g = parse_objects(m, json{{"objects", json::array()}}, "open the door");
  EXPECT_TRUE(g.nodes.empty());
  EXPECT_TRUE(g.edges.empty());
}

TEST(ParseObjects, MalformedReplyYieldsNoGraph) {
  Scripted bad_first({"no fence here"});
  EXPECT_THROW(parse_objects(bad_first, microwave_scene(), "x"), ParseError);
  Scripted bad_second({"```\nobject: microwave\n```", "```\nrelation: microwave | hugs | microwave\n```"});
  EXPECT_THROW(parse_objects(bad_second, microwave_scene(), "x"), ParseError);
  Scripted unknown({"```\nobject: microwave\n```", "```\nstate: fridge | open\n```"});
  EXPECT_THROW(parse_objects(unknown, microwave_scene(), "x"), ParseError);
}

TEST(SceneGraph, ValidateChecksIdsEdgesAndRelations) {
  SceneGraph g;
  g.nodes = {{"a", "door", "closed"}, {"b", "handle", "none"}};
  g.edges = {{"b", "part-of", "a"}};
  EXPECT_NO_THROW(g.validate());
  g.edges = {{"b", "part-of", "c"}};
  EXPECT_THROW(g.validate(), PreconditionError);
  g.edges = {{"b", "near", "a"}};
  EXPECT_THROW(g.validate(), PreconditionError);
  g.edges.clear();
  g.nodes.push_back({"a", "other", "none"});
  EXPECT_THROW(g.validate(), PreconditionError);
}

TEST(Decompose, OpenTheMicrowaveDoor) {
  MockReasoner m;
  const auto g = parse_objects(m, microwave_scene(), "open the microwave door");
  const auto plan = decompose(m, "open the microwave door", g);
  ASSERT_EQ(plan.subtasks.size(), 2u);
  EXPECT_EQ(plan.subtasks[0].instruction, "grasp the door handle");
  EXPECT_EQ(plan.subtasks[0].condition, "is the handle grasped?");
  EXPECT_EQ(plan.subtasks[1].instruction, "pull open the door");
  EXPECT_EQ(plan.subtasks[1].condition, "is the door opened?");
  for (const auto& s : plan.subtasks) {
    EXPECT_EQ(s.status, Status::pending);
    EXPECT_EQ(s.attempts, 0);
  }
}

TEST(Decompose, PushTheDrawerIsOneStep) {
  const auto bp = blueprint::builtin_blueprint("drawer");
  const auto inst = blueprint::instantiate(bp, blueprint::midpoint_params(*bp), Transform3());
  MockReasoner m;
  const auto g = parse_objects(m, describe(std::vector<blueprint::StructuralInstance>{inst}), "push the drawer");
  const auto plan = decompose(m, "push the drawer", g);
  ASSERT_EQ(plan.subtasks.size(), 1u);
  EXPECT_EQ(plan.subtasks[0].condition, "is the drawer closed?");
}

TEST(Decompose, UnknownObjectsAreListed) {
  MockReasoner m;
  const auto g = parse_objects(m, microwave_scene(), "open the fridge door");
  try {
    decompose(m, "open the fridge door", g);
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("fridge"), std::string::npos);
    EXPECT_EQ(std::string(e.what()).find("door,"), std::string::npos);
  }
  EXPECT_THROW(decompose(m, "  ", g), PreconditionError);
  EXPECT_THROW(decompose(m, "dance with the door", g), PreconditionError);
}

TEST(MockReasoner, PureFunctionOfTemplateAndContext) {
  MockReasoner a, b;
  Query q{"parse_objects", "ignored", {{"scene", microwave_scene()}, {"instruction", "open the microwave door"}}};
  const auto first = a.complete(q);
  EXPECT_EQ(first, a.complete(q));
  EXPECT_EQ(first, b.complete(q));
  q.prompt = "different text, same context";
  EXPECT_EQ(first, b.complete(q));
  EXPECT_THROW(a.complete(Query{"unknown", "", {}}), NotFoundError);
}

TEST(SelectConcept, ArcShapedCloudPicksCurveHandle) {
  sim::EpisodeConfig cfg;
  cfg.seed = 2;
  sim::SimSession s(blueprint::builtin_blueprint("microwave"), sim::Task::pull, cfg);
  std::vector<ConceptCandidate> cands;
  for (const std::string id : {"bar_handle", "curve_handle"}) {
    const auto a = concepts::builtin_asset(id);
    const auto f = s.fit_part("handle", a);
    cands.push_back({a, f.fitted ? std::optional<double>(f.residual) : std::nullopt});
  }
  MockReasoner m;
  EXPECT_EQ(select_concept(m, cands, "handle", "grasp the door handle"), "curve_handle");
}

TEST(SelectConcept, SingleCandidateSkipsTheReasoner) {
  Counting c;
  EXPECT_EQ(select_concept(c, {{concepts::builtin_asset("knob"), std::nullopt}}, "knob", "grasp the knob"), "knob");
  EXPECT_EQ(c.calls, 0);
  EXPECT_THROW(select_concept(c, {}, "knob", "grasp the knob"), PreconditionError);
}

TEST(SelectConcept, MembershipRetriedOnceThenRejected) {
  const std::vector<ConceptCandidate> cands{{concepts::builtin_asset("bar_handle"), 0.002},
                                            {concepts::builtin_asset("curve_handle"), 0.001}};
  Scripted twice({"```\nconcept: teapot\n```"});
  EXPECT_THROW(select_concept(twice, cands, "handle", "grasp"), PreconditionError);
  EXPECT_EQ(twice.queries.size(), 2u);
  Scripted once({"```\nconcept: teapot\n```", "```\nconcept: bar_handle\n```"});
  EXPECT_EQ(select_concept(once, cands, "handle", "grasp"), "bar_handle");
  EXPECT_NE(once.queries[1].prompt.find("teapot"), std::string::npos);
}

TEST(SelectStrategy, PullOpenPicksThePullStrategy) {
  const auto inst = microwave();
  const auto strategies = manip::list_strategies(inst, "handle");
  MockReasoner m;
  EXPECT_EQ(select_strategy(m, strategies, "handle", "curve_handle", "pull open the door").id, "curve_pull");
  std::vector<manip::Strategy> rules;
  for (const auto& s : strategies)
    if (s.kind == manip::Strategy::Kind::rule) rules.push_back(s);
  EXPECT_EQ(select_strategy(m, rules, "handle", "curve_handle", "pull open the door").id, "pull_revolute");
}

TEST(SelectStrategy, PushVerbNegatesTheForce) {
  const auto inst = microwave(0.5);
  std::vector<manip::Strategy> rules;
  for (const auto& s : manip::list_strategies(inst, "handle"))
    if (s.kind == manip::Strategy::Kind::rule) rules.push_back(s);
  MockReasoner m;
  const auto chosen = select_strategy(m, rules, "handle", "curve_handle", "push the door closed");
  EXPECT_EQ(chosen.id, "push_revolute");
  const auto& part = inst.part("handle");
  const auto g = manip::grasp_pose(part.asset, manip::grasp_family(part.asset, "curve_pull"), 0.0);
  const Vec3 push = manip::force_direction(inst, "handle", manip::force_rule(chosen.id), g);
  const Vec3 pull = manip::force_direction(inst, "handle", manip::force_rule("pull_revolute"), g);
  EXPECT_LT((push + pull).norm(), 1e-15);
}

TEST(SelectStrategy, NothingApplicable) {
  MockReasoner m;
  const std::vector<manip::Strategy> rules{{manip::Strategy::Kind::rule, "pull_prismatic", "pull along the slide axis"}};
  EXPECT_THROW(select_strategy(m, rules, "handle", "bar_handle", "rotate the handle"), PreconditionError);
  EXPECT_THROW(select_strategy(m, {}, "handle", "bar_handle", "pull open the drawer"), PreconditionError);
}

TEST(Verify, SimulatorPredicates) {
  sim::SimSession s(blueprint::builtin_blueprint("microwave"), sim::Task::pull, gt_config());
  EXPECT_FALSE(verify(s, "is the handle grasped?"));
  EXPECT_FALSE(verify(s, "is the door opened?"));
  ASSERT_TRUE(s.grasp("handle", s.true_part("handle"), "pull_revolute").ok);
  EXPECT_TRUE(verify(s, "is the handle grasped?"));
  EXPECT_FALSE(verify(s, "is the door opened?"));
  EXPECT_THROW(verify(s, "is the kettle boiling?"), NotFoundError);
  ASSERT_TRUE(s.interact().ok);
  EXPECT_TRUE(verify(s, "is the door opened?"));
}

TEST(Verify, ThroughTheReasoner) {
  MockReasoner m;
  const json obs{{"grasped", {"handle"}}, {"opened", json::array()}};
  EXPECT_TRUE(verify(m, "is the handle grasped?", obs));
  EXPECT_FALSE(verify(m, "is the door opened?", obs));
  EXPECT_THROW(verify(m, "how warm is it?", obs), ParseError);
}

TEST(RunLoop, NominalMicrowaveCompletes) {
  MockReasoner m;
  sim::SimSession s(blueprint::builtin_blueprint("microwave"), sim::Task::pull, gt_config());
  const auto rec = run_task(m, s, "open the microwave door");
  ASSERT_EQ(rec.plan.subtasks.size(), 2u);
  for (const auto& st : rec.plan.subtasks) {
    EXPECT_EQ(st.status, Status::done);
    EXPECT_EQ(st.attempts, 1);
  }
  EXPECT_EQ(rec.strategies, (std::vector<std::string>{"curve_pull", "pull_revolute"}));
  EXPECT_TRUE(rec.episode.success);
}

TEST(RunLoop, FailedStepHaltsTheRest) {
  Plan p;
  p.subtasks = {{"grasp the door handle", "is the handle grasped?", {}, Status::pending, 0},
                {"pull open the door", "is the door opened?", {}, Status::pending, 0}};
  std::vector<std::size_t> executed;
  run_loop(p, [&](SubTask&, std::size_t i) { executed.push_back(i); }, [](const SubTask&) { return false; }, 1);
  EXPECT_EQ(p.subtasks[0].status, Status::failed);
  EXPECT_EQ(p.subtasks[0].attempts, 2);
  EXPECT_EQ(p.subtasks[1].status, Status::pending);
  EXPECT_EQ(p.subtasks[1].attempts, 0);
  EXPECT_EQ(executed, (std::vector<std::size_t>{0, 0}));
}

TEST(RunLoop, ZeroLimitMeansOneAttempt) {
  Plan p;
  p.subtasks = {{"a", "c", {}, Status::pending, 0}, {"b", "c", {}, Status::pending, 0}};
  int calls = 0;
  run_loop(p, [&](SubTask&, std::size_t) { ++calls; }, [](const SubTask&) { return true; }, 0);
  EXPECT_EQ(calls, 2);
  for (const auto& s : p.subtasks) EXPECT_EQ(s.attempts, 1);
  EXPECT_THROW(run_loop(p, [](SubTask&, std::size_t) {}, [](const SubTask&) { return true; }, -1), PreconditionError);
}

TEST(RunLoop, RetryCanRecover) {
  Plan p;
  p.subtasks = {{"a", "c", {}, Status::pending, 0}};
  int calls = 0;
  run_loop(p, [&](SubTask&, std::size_t) { ++calls; }, [&](const SubTask&) { return calls == 3; }, 2);
  EXPECT_EQ(p.subtasks[0].status, Status::done);
  EXPECT_EQ(p.subtasks[0].attempts, 3);
}

TEST(RunTask, FittedPipelineAcrossCategories) {
  MockReasoner m;
  for (const auto& bp : blueprint::builtin_blueprints()) {
    sim::EpisodeConfig cfg;
    cfg.seed = 5;
    const auto r = run_reasoned_episode(m, bp, sim::Task::pull, cfg);
    EXPECT_TRUE(r.success) << bp->blueprint_id << ": " << r.detail;
  }
}

TEST(RunTask, RecordIsDeterministic) {
  auto once = [] {
    MockReasoner m;
    sim::EpisodeConfig cfg;
    cfg.seed = 8;
    sim::SimSession s(blueprint::builtin_blueprint("cabinet"), sim::Task::pull, cfg);
    return to_json(run_task(m, s, "open the cabinet")).dump();
  };
  EXPECT_EQ(once(), once());
}

TEST(HttpReasoner, TalksChatCompletions) {
  httplib::Server srv;
  std::string auth, content;
  srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    content = json::parse(req.body).at("messages").at(0).at("content");
    const json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", "```\nanswer: yes\n```"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread t([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  HttpConfig cfg;
  cfg.url = "http://127.0.0.1:" + std::to_string(port);
  cfg.token = "secret";
  HttpReasoner r(cfg);
  EXPECT_TRUE(verify(r, "is the handle grasped?", json::object()));
  EXPECT_EQ(auth, "Bearer secret");
  EXPECT_NE(content.find("is the handle grasped?"), std::string::npos);
  srv.stop();
  t.join();
}

TEST(HttpReasoner, UnreachableEndpointIsATransportError) {
  HttpConfig cfg;
  cfg.url = "http://127.0.0.1:1";
  cfg.retries = 1;
  cfg.backoff = std::chrono::milliseconds(1);
  cfg.timeout = std::chrono::milliseconds(200);
  HttpReasoner r(cfg);
  try {
    r.complete(Query{"verify", "x", {}});
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_NE(std::string(e.what()).find("127.0.0.1:1"), std::string::npos);
  }
  cfg.url.clear();
  EXPECT_THROW(HttpReasoner{cfg}, PreconditionError);
}

TEST(HttpConfig, EnvironmentFillsBlanks) {
  ::setenv("EAC_REASONER_URL", "http://env-host:9", 1);
  ::setenv("EAC_REASONER_TOKEN", "tok", 1);
  HttpConfig cfg;
  EXPECT_EQ(cfg.with_environment().url, "http://env-host:9");
  EXPECT_EQ(cfg.with_environment().token, "tok");
  cfg.url = "http://flag:1";
  EXPECT_EQ(cfg.with_environment().url, "http://flag:1");
  ::unsetenv("EAC_REASONER_URL");
  ::unsetenv("EAC_REASONER_TOKEN");
}
