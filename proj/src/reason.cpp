#include "eac/reason.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <regex>
#include <set>
#include <sstream>

#include "eac/errors.hpp"

namespace eac::reason {

using nlohmann::json;

namespace {

// Generated at configure time from data/prompts/*.txt.
const std::vector<std::pair<const char*, const char*>> kTemplates = {
#include "builtin_prompt_data.inc"
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(lower(s));
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

std::string block(const std::vector<std::string>& lines) {
  std::string out = "```\n";
  for (const auto& l : lines) out += l + "\n";
  return out + "```\n";
}

std::string excerpt(const std::string& reply) {
  return reply.size() > 400 ? reply.substr(0, 400) + "..." : reply;
}

std::string joint_state(const blueprint::StructuralInstance& inst, const std::string& joint_id) {
  const auto& j = inst.joint(joint_id);
  const double fraction = (inst.q(joint_id) - j.closed_value()) * j.opening_sign / j.range();
  return fraction > 0.02 ? "open" : "closed";
}

// --- mock replies ---

std::string mock_objects(const json& ctx) {
  std::vector<std::string> lines;
  for (const auto& o : ctx.at("scene").value("objects", json::array())) {
    lines.push_back("object: " + o.at("name").get<std::string>());
    for (const auto& p : o.value("parts", json::array())) lines.push_back("object: " + p.at("name").get<std::string>());
  }
  return block(lines);
}

std::string mock_relations(const json& ctx) {
  std::set<std::string> known;
  for (const auto& n : ctx.at("objects")) known.insert(n.get<std::string>());
  std::vector<std::string> lines;
  const auto& objects = ctx.at("scene").value("objects", json::array());
  for (const auto& o : objects) {
    const std::string name = o.at("name");
    if (known.count(name)) lines.push_back("state: " + name + " | " + o.value("state", "none"));
    for (const auto& p : o.value("parts", json::array()))
      if (known.count(p.at("name"))) lines.push_back("state: " + p.at("name").get<std::string>() + " | " + p.value("state", "none"));
  }
  for (const auto& o : objects) {
    const std::string name = o.at("name");
    for (const auto& p : o.value("parts", json::array())) {
      const std::string part = p.at("name"), parent = p.at("parent");
      if (!known.count(part)) continue;
      if (known.count(parent)) lines.push_back("relation: " + part + " | part-of | " + parent);
      if (parent != name && known.count(name)) lines.push_back("relation: " + part + " | part-of | " + name);
    }
  }
  for (std::size_t i = 0; i < objects.size(); ++i)
    for (std::size_t k = i + 1; k < objects.size(); ++k) {
      const auto a = objects[i].value("position", std::vector<double>{0, 0, 0});
      const auto b = objects[k].value("position", std::vector<double>{0, 0, 0});
      const double dx = b[0] - a[0], dz = b[2] - a[2];
      std::string rel;
      if (std::abs(dz) > std::abs(dx)) rel = dz > 0 ? "below" : "above";
      else if (dx != 0.0) rel = dx > 0 ? "left-of" : "right-of";
      if (!rel.empty())
        lines.push_back("relation: " + objects[i].at("name").get<std::string>() + " | " + rel + " | " +
                        objects[k].at("name").get<std::string>());
    }
  return block(lines);
}

std::string mock_decompose(const json& ctx) {
  const auto w = words(ctx.at("instruction").get<std::string>());
  const auto& graph = ctx.at("graph");
  std::map<std::string, std::string> name_of;
  for (const auto& n : graph.at("nodes")) name_of[n.at("id")] = n.at("name");
  std::map<std::string, std::vector<std::string>> part_of;
  for (const auto& e : graph.at("edges"))
    if (e.at("relation") == "part-of") part_of[name_of[e.at("from")]].push_back(name_of[e.at("to")]);

  if (w.size() < 2) return block({});
  const std::string verb = w[0];
  std::vector<std::string> phrase(w.begin() + 1, w.end());
  if (!phrase.empty() && phrase.front() == "the") phrase.erase(phrase.begin());
  if (phrase.empty()) return block({});
  const std::string thing = phrase.back();
  const std::string refs = join(phrase, ", ");

  if (verb == "open") {
    std::string target;
    for (const std::string cand : {"handle", "knob", "lever"})
      if (part_of.count(cand)) {
        target = cand;
        break;
      }
    if (target.empty()) return block({"subtask: pull open the " + join(phrase, " "), "condition: is the " + thing + " opened?",
                                      "objects: " + refs});
    // the holder is the owner that is itself a part, else the object
    std::string holder = part_of[target].front();
    for (const auto& owner : part_of[target])
      if (part_of.count(owner)) holder = owner;
    return block({"subtask: grasp the " + holder + " " + target, "condition: is the " + target + " grasped?",
                  "objects: " + holder + ", " + target, "subtask: pull open the " + thing,
                  "condition: is the " + thing + " opened?", "objects: " + refs});
  }
  if (verb == "close")
    return block({"subtask: push the " + thing + " closed", "condition: is the " + thing + " closed?", "objects: " + refs});
  if (verb == "push")
    return block({"subtask: push the " + join(phrase, " "), "condition: is the " + thing + " closed?", "objects: " + refs});
  return block({});
}

std::string mock_concept(const json& ctx) {
  const auto& cands = ctx.at("candidates");
  std::string best;
  double best_r = std::numeric_limits<double>::infinity();
  for (const auto& c : cands) {
    const double r = c.at("residual").is_number() ? c.at("residual").get<double>() : std::numeric_limits<double>::infinity();
    if (best.empty() || r < best_r) {
      best = c.at("id");
      best_r = r;
    }
  }
  return block({"concept: " + best});
}

std::string mock_strategy(const json& ctx) {
  const auto w = words(ctx.at("subtask").get<std::string>());
  const std::string verb = w.empty() ? "" : w[0];
  const auto& strategies = ctx.at("strategies");
  if (verb == "grasp") {
    for (const auto& s : strategies)
      if (s.at("kind") == "family" && s.value("mode", "grasp") == "grasp") return block({"strategy: " + s.at("id").get<std::string>()});
    return block({"strategy: none"});
  }
  static const std::map<std::string, std::string> keyword{{"pull", "pull"},     {"open", "pull"},   {"push", "push"},
                                                          {"close", "push"},    {"rotate", "rotate"}, {"turn", "rotate"},
                                                          {"twist", "rotate"},  {"slide", "slide"}};
  const auto it = keyword.find(verb);
  if (it != keyword.end())
    for (const auto& s : strategies)
      if (s.at("id").get<std::string>().find(it->second) != std::string::npos)
        return block({"strategy: " + s.at("id").get<std::string>()});
  return block({"strategy: none"});
}

std::string mock_verify(const json& ctx) {
  static const std::regex re(R"(^is the (.+) (grasped|opened|closed)\?$)");
  std::smatch m;
  const std::string cond = ctx.at("condition");
  if (!std::regex_match(cond, m, re)) return block({"answer: unknown"});
  const auto& facts = ctx.at("observation").value(m[2].str(), json::array());
  const bool yes = std::find(facts.begin(), facts.end(), json(m[1].str())) != facts.end();
  return block({std::string("answer: ") + (yes ? "yes" : "no")});
}

// --- helpers for the operations ---

std::vector<std::string> values_of(const std::vector<std::pair<std::string, std::string>>& kv, const std::string& key) {
  std::vector<std::string> out;
  for (const auto& [k, v] : kv)
    if (k == key) out.push_back(v);
  return out;
}

void expect_keys(const std::vector<std::pair<std::string, std::string>>& kv, const std::set<std::string>& allowed,
                 const std::string& reply) {
  for (const auto& [k, v] : kv)
    if (!allowed.count(k)) throw ParseError("unexpected key '" + k + "' in reply: " + excerpt(reply));
}

// Single-key choice with membership check and one retry.
std::string choose(Reasoner& r, Query q, const std::string& key, const std::set<std::string>& members,
                   const std::string& what) {
  std::string last;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::string reply = r.complete(q);
    const auto kv = parse_reply(reply);
    const auto vals = values_of(kv, key);
    if (vals.size() != 1) throw ParseError("expected one '" + key + "' line in reply: " + excerpt(reply));
    last = vals.front();
    if (last == "none") throw PreconditionError("no applicable " + what);
    if (members.count(last)) return last;
    q.prompt += "\n\"" + last + "\" is not one of the offered ids. Answer with one of them.\n";
    q.context["rejected"].push_back(last);
  }
  throw PreconditionError(what + " reply '" + last + "' is not among the offered ids: " +
                          join(std::vector<std::string>(members.begin(), members.end()), ", "));
}

}  // namespace

// --- graph and plan ---------------------------------------------------------

const std::vector<std::string>& relation_vocabulary() {
  static const std::vector<std::string> v{"left-of", "right-of", "above", "below", "inside", "on-top-of", "part-of"};
  return v;
}

void SceneGraph::validate() const {
  std::set<std::string> ids;
  for (const auto& n : nodes)
    if (!ids.insert(n.id).second) throw PreconditionError("scene graph: duplicate node id '" + n.id + "'");
  const auto& vocab = relation_vocabulary();
  for (const auto& e : edges) {
    if (!ids.count(e.from) || !ids.count(e.to))
      throw PreconditionError("scene graph: edge " + e.from + " -> " + e.to + " has an unknown endpoint");
    if (std::find(vocab.begin(), vocab.end(), e.relation) == vocab.end())
      throw PreconditionError("scene graph: unknown relation '" + e.relation + "'");
  }
}

const SceneNode* SceneGraph::find_name(const std::string& name) const {
  for (const auto& n : nodes)
    if (n.name == name) return &n;
  return nullptr;
}

const SceneNode* SceneGraph::find_id(const std::string& id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

std::string to_string(Status s) {
  switch (s) {
    case Status::pending: return "pending";
    case Status::done: return "done";
    case Status::failed: return "failed";
  }
  return "pending";
}

void Plan::validate(const SceneGraph& graph) const {
  if (subtasks.empty()) throw PreconditionError("plan has no sub-tasks");
  std::vector<std::string> unknown;
  for (const auto& s : subtasks)
    for (const auto& o : s.objects)
      if (!graph.find_name(o) && std::find(unknown.begin(), unknown.end(), o) == unknown.end()) unknown.push_back(o);
  if (!unknown.empty()) throw PreconditionError("plan mentions objects not in the scene: " + join(unknown, ", "));
}

// --- prompts and replies ----------------------------------------------------

const std::string& prompt_template(const std::string& template_id) {
  static const std::map<std::string, std::string> all = [] {
    std::map<std::string, std::string> m;
    for (const auto& [file, text] : kTemplates) {
      std::string id = file;
      id = id.substr(0, id.rfind('.'));
      m[id] = text;
    }
    return m;
  }();
  const auto it = all.find(template_id);
  if (it == all.end()) {
    std::vector<std::string> ids;
    for (const auto& [k, v] : all) ids.push_back(k);
    throw NotFoundError("unknown prompt template '" + template_id + "' (known: " + join(ids, ", ") + ")");
  }
  return it->second;
}

std::vector<std::string> prompt_template_ids() {
  std::vector<std::string> out;
  for (const auto& [file, text] : kTemplates) {
    const std::string f = file;
    out.push_back(f.substr(0, f.rfind('.')));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string render_prompt(const std::string& template_id, const std::map<std::string, std::string>& vars) {
  static const std::regex placeholder(R"(<([a-z][a-z -]*)>)");
  const std::string& text = prompt_template(template_id);
  std::string out;
  std::vector<std::string> missing;
  auto begin = std::sregex_iterator(text.begin(), text.end(), placeholder);
  std::size_t pos = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out += text.substr(pos, static_cast<std::size_t>(m.position()) - pos);
    const auto v = vars.find(m[1].str());
    if (v == vars.end()) {
      if (std::find(missing.begin(), missing.end(), m[1].str()) == missing.end()) missing.push_back(m[1].str());
    } else {
      out += v->second;
    }
    pos = static_cast<std::size_t>(m.position() + m.length());
  }
  if (!missing.empty()) throw PreconditionError("prompt '" + template_id + "' has no value for: " + join(missing, ", "));
  return out + text.substr(pos);
}

std::vector<std::pair<std::string, std::string>> parse_reply(const std::string& reply) {
  std::istringstream is(reply);
  std::string line;
  bool inside = false, closed = false;
  std::vector<std::pair<std::string, std::string>> out;
  while (std::getline(is, line)) {
    const std::string t = trim(line);
    if (t.rfind("```", 0) == 0) {
      if (inside) {
        closed = true;
        break;
      }
      inside = true;
      continue;
    }
    if (!inside || t.empty()) continue;
    const auto colon = t.find(':');
    if (colon == std::string::npos || colon == 0) throw ParseError("malformed line '" + t + "' in reply: " + excerpt(reply));
    out.emplace_back(lower(trim(t.substr(0, colon))), trim(t.substr(colon + 1)));
  }
  if (!inside) throw ParseError("reply has no fenced block: " + excerpt(reply));
  if (!closed) throw ParseError("reply has an unterminated fenced block: " + excerpt(reply));
  return out;
}

std::string MockReasoner::complete(const Query& q) {
  const auto& ctx = q.context;
  if (q.template_id == "parse_objects") return mock_objects(ctx);
  if (q.template_id == "parse_relations") return mock_relations(ctx);
  if (q.template_id == "decompose") return mock_decompose(ctx);
  if (q.template_id == "select_concept") return mock_concept(ctx);
  if (q.template_id == "select_strategy") return mock_strategy(ctx);
  if (q.template_id == "verify") return mock_verify(ctx);
  throw NotFoundError("mock reasoner has no rule for template '" + q.template_id + "'");
}

// --- operations -------------------------------------------------------------

json describe(const blueprint::StructuralInstance& object) {
  const auto& bp = object.blueprint();
  json o{{"name", bp.object_name}, {"blueprint", bp.blueprint_id}};
  const Vec3 t = object.pose().translation();
  o["position"] = {t.x(), t.y(), t.z()};
  o["state"] = joint_state(object, object.driving_joint(bp.target_part));
  json parts = json::array();
  std::string root;
  for (const auto& p : object.parts()) {
    if (p.parent.empty()) {
      root = p.part_id;
      continue;
    }
    json jp{{"name", p.name}, {"parent", p.parent == root ? bp.object_name : object.part(p.parent).name}};
    jp["state"] = p.joint ? joint_state(object, p.joint->joint_id) : "none";
    parts.push_back(jp);
  }
  o["parts"] = parts;
  return o;
}

json describe(const std::vector<blueprint::StructuralInstance>& objects) {
  json arr = json::array();
  for (const auto& o : objects) arr.push_back(describe(o));
  return {{"objects", arr}};
}

SceneGraph parse_objects(Reasoner& r, const json& descriptor, const std::string& instruction) {
  const std::string scene = descriptor.dump(2);
  Query q1{"parse_objects", render_prompt("parse_objects", {{"instruction", instruction}, {"scene", scene}}),
           {{"instruction", instruction}, {"scene", descriptor}}};
  const std::string reply1 = r.complete(q1);
  const auto kv1 = parse_reply(reply1);
  expect_keys(kv1, {"object"}, reply1);
  std::vector<std::string> names;
  for (const auto& n : values_of(kv1, "object")) {
    if (n.empty()) throw ParseError("empty object name in reply: " + excerpt(reply1));
    if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
  }
  SceneGraph g;
  if (names.empty()) return g;
  for (std::size_t i = 0; i < names.size(); ++i) g.nodes.push_back({"n" + std::to_string(i), names[i], "none"});

  Query q2{"parse_relations",
           render_prompt("parse_relations", {{"instruction", instruction}, {"scene", scene}, {"objects", join(names, "\n")}}),
           {{"instruction", instruction}, {"scene", descriptor}, {"objects", names}}};
  const std::string reply2 = r.complete(q2);
  const auto kv2 = parse_reply(reply2);
  expect_keys(kv2, {"state", "relation"}, reply2);
  auto node = [&](const std::string& name) -> SceneNode& {
    for (auto& n : g.nodes)
      if (n.name == name) return n;
    throw ParseError("reply names unknown object '" + name + "': " + excerpt(reply2));
  };
  for (const auto& [k, v] : kv2) {
    const auto f = split(v, '|');
    if (k == "state") {
      if (f.size() != 2) throw ParseError("state line needs 'name | state': " + excerpt(reply2));
      node(f[0]).state = f[1].empty() ? "none" : f[1];
    } else {
      if (f.size() != 3) throw ParseError("relation line needs 'a | relation | b': " + excerpt(reply2));
      const auto& vocab = relation_vocabulary();
      if (std::find(vocab.begin(), vocab.end(), f[1]) == vocab.end())
        throw ParseError("unknown relation '" + f[1] + "' in reply: " + excerpt(reply2));
      g.edges.push_back({node(f[0]).id, f[1], node(f[2]).id});
    }
  }
  g.validate();
  return g;
}

Plan decompose(Reasoner& r, const std::string& instruction, const SceneGraph& graph) {
  if (trim(instruction).empty()) throw PreconditionError("decompose: empty instruction");
  std::string listing;
  for (const auto& n : graph.nodes) listing += n.name + " (" + n.state + ")\n";
  for (const auto& e : graph.edges)
    listing += graph.find_id(e.from)->name + " " + e.relation + " " + graph.find_id(e.to)->name + "\n";
  Query q{"decompose", render_prompt("decompose", {{"instruction", instruction}, {"objects", listing}}),
          {{"instruction", instruction}, {"graph", to_json(graph)}}};
  const std::string reply = r.complete(q);
  const auto kv = parse_reply(reply);
  expect_keys(kv, {"subtask", "condition", "objects"}, reply);
  Plan plan;
  for (const auto& [k, v] : kv) {
    if (k == "subtask") {
      plan.subtasks.push_back({v, {}, {}, Status::pending, 0});
      continue;
    }
    if (plan.subtasks.empty()) throw ParseError("'" + k + "' before any sub-task in reply: " + excerpt(reply));
    auto& s = plan.subtasks.back();
    if (k == "condition") {
      s.condition = v;
    } else {
      for (const auto& o : split(v, ','))
        if (!o.empty()) s.objects.push_back(o);
    }
  }
  for (const auto& s : plan.subtasks)
    if (s.instruction.empty() || s.condition.empty())
      throw ParseError("sub-task without instruction or condition in reply: " + excerpt(reply));
  if (plan.subtasks.empty()) throw PreconditionError("no decomposition for '" + instruction + "'");
  plan.validate(graph);
  return plan;
}

std::string select_concept(Reasoner& r, const std::vector<ConceptCandidate>& candidates, const std::string& target,
                           const std::string& subtask) {
  if (candidates.empty()) throw PreconditionError("select_concept: no candidates");
  if (candidates.size() == 1) return candidates.front().asset->asset_id;
  std::string listing, evidence;
  json ctx_cands = json::array();
  std::set<std::string> members;
  char buf[64];
  for (const auto& c : candidates) {
    members.insert(c.asset->asset_id);
    listing += c.asset->asset_id + ": " + c.asset->synopsis + "\n";
    const bool finite = c.residual && std::isfinite(*c.residual);
    if (finite) std::snprintf(buf, sizeof buf, "%.6f m", *c.residual);
    evidence += c.asset->asset_id + ": " + (finite ? std::string(buf) : std::string("no fit")) + "\n";
    ctx_cands.push_back({{"id", c.asset->asset_id},
                         {"synopsis", c.asset->synopsis},
                         {"residual", finite ? json(*c.residual) : json(nullptr)}});
  }
  Query q{"select_concept",
          render_prompt("select_concept",
                        {{"target object", target}, {"sub-task", subtask}, {"candidates", listing}, {"evidence", evidence}}),
          {{"target", target}, {"subtask", subtask}, {"candidates", ctx_cands}}};
  return choose(r, q, "concept", members, "concept");
}

manip::Strategy select_strategy(Reasoner& r, const std::vector<manip::Strategy>& strategies, const std::string& target,
                                const std::string& concept_id, const std::string& subtask) {
  if (strategies.empty()) throw PreconditionError("select_strategy: no strategies for '" + subtask + "'");
  std::string listing;
  json ctx = json::array();
  std::set<std::string> members;
  for (const auto& s : strategies) {
    members.insert(s.id);
    const std::string kind = s.kind == manip::Strategy::Kind::family ? "family" : "rule";
    listing += s.id + " (" + kind + "): " + s.synopsis + "\n";
    json js{{"id", s.id}, {"kind", kind}, {"synopsis", s.synopsis}};
    if (s.kind == manip::Strategy::Kind::family) js["mode"] = s.mode == manip::ContactMode::push ? "push" : "grasp";
    ctx.push_back(js);
  }
  Query q{"select_strategy",
          render_prompt("select_strategy",
                        {{"target object", target}, {"concept", concept_id}, {"sub-task", subtask}, {"strategies", listing}}),
          {{"target", target}, {"concept", concept_id}, {"subtask", subtask}, {"strategies", ctx}}};
  const std::string id = choose(r, q, "strategy", members, "strategy");
  for (const auto& s : strategies)
    if (s.id == id) return s;
  throw PreconditionError("strategy '" + id + "' vanished");
}

bool verify(const sim::SimSession& session, const std::string& condition) {
  static const std::regex re(R"(^is the (.+) (grasped|opened|closed)\?$)");
  std::smatch m;
  if (!std::regex_match(condition, m, re)) throw NotFoundError("no simulator predicate for condition '" + condition + "'");
  const std::string what = m[2].str();
  if (what == "grasped") return session.grasped(session.target_part());
  const double goal = session.config().success_fraction - 1e-12;
  const double f = session.opened_fraction();
  return what == "opened" ? f >= goal : f <= -goal;
}

bool verify(Reasoner& r, const std::string& condition, const json& observation) {
  Query q{"verify", render_prompt("verify", {{"condition", condition}, {"observation", observation.dump(2)}}),
          {{"condition", condition}, {"observation", observation}}};
  const std::string reply = r.complete(q);
  const auto vals = values_of(parse_reply(reply), "answer");
  if (vals.size() != 1) throw ParseError("expected one 'answer' line in reply: " + excerpt(reply));
  const std::string a = lower(vals.front());
  if (a == "yes" || a == "true") return true;
  if (a == "no" || a == "false") return false;
  throw ParseError("answer '" + vals.front() + "' is neither yes nor no");
}

void run_loop(Plan& plan, const std::function<void(SubTask&, std::size_t)>& execute,
              const std::function<bool(const SubTask&)>& check, int retry_limit) {
  if (retry_limit < 0) throw PreconditionError("run_loop: retry limit must be >= 0");
  if (plan.subtasks.empty()) throw PreconditionError("run_loop: empty plan");
  for (std::size_t i = 0; i < plan.subtasks.size(); ++i) {
    auto& s = plan.subtasks[i];
    while (s.attempts <= retry_limit) {
      ++s.attempts;
      execute(s, i);
      if (check(s)) {
        s.status = Status::done;
        break;
      }
    }
    if (s.status != Status::done) {
      s.status = Status::failed;
      return;
    }
  }
}

TaskRecord run_task(Reasoner& r, sim::SimSession& session, const std::string& instruction, const TaskOptions& opt) {
  TaskRecord rec;
  rec.instruction = instruction;
  const auto& object = session.scene().object;
  const std::string part_id = session.target_part();
  const std::string target = object.part(part_id).name;

  rec.graph = opt.graph ? *opt.graph
                        : parse_objects(r, describe(std::vector<blueprint::StructuralInstance>{object}), instruction);
  rec.plan = decompose(r, instruction, rec.graph);

  // concept: fit every candidate the library offers for the target
  std::vector<ConceptCandidate> candidates;
  auto& fits = rec.concept_choice.candidates;
  if (session.config().ground_truth) {
    const auto truth = session.true_part(part_id);
    candidates.push_back({concepts::builtin_asset(truth.asset_id), 0.0});
    fits.push_back(truth);
  } else {
    for (const auto& a : concepts::prune(concepts::builtin_library(), session.blueprint().target_query)) {
      fits.push_back(session.fit_part(part_id, a));
      candidates.push_back({a, fits.back().fitted ? std::optional<double>(fits.back().residual) : std::nullopt});
    }
  }
  const std::string& first = rec.plan.subtasks.front().instruction;
  rec.concept_choice.asset_id = select_concept(r, candidates, target, first);
  for (const auto& f : fits)
    if (f.asset_id == rec.concept_choice.asset_id) rec.concept_choice.fit = f;
  const auto& fit = rec.concept_choice.fit;

  // strategies: families for grasp steps, force rules for motion steps
  const auto asset = concepts::builtin_asset(fit.asset_id);
  std::vector<double> mid;
  for (const auto& p : asset->params) mid.push_back(p.midpoint());
  // without a fit the midpoint shape only serves to list strategies; grasp reports the failure
  const auto inst = fit.params.empty() ? concepts::AssetInstance(asset, mid) : fit.instance(asset);
  const auto kind = session.estimated_joint(part_id).kind;
  std::vector<manip::Strategy> families, rules;
  for (const auto& f : manip::grasp_families(inst)) families.push_back({manip::Strategy::Kind::family, f.family_id, f.synopsis, f.mode});
  for (const auto& fr : manip::force_rules())
    if (fr.applies_to(kind)) rules.push_back({manip::Strategy::Kind::rule, fr.rule_id, fr.synopsis});
  std::vector<manip::Strategy> chosen;
  for (const auto& s : rec.plan.subtasks) {
    const auto w = words(s.instruction);
    const bool grasp_step = !w.empty() && w[0] == "grasp";
    chosen.push_back(select_strategy(r, grasp_step ? families : rules, target, fit.asset_id, s.instruction));
    rec.strategies.push_back(chosen.back().id);
  }
  std::string rule_id = sim::rule_for(session.task(), kind);
  for (const auto& s : chosen)
    if (s.kind == manip::Strategy::Kind::rule) {
      rule_id = s.id;
      break;
    }
  std::vector<std::string> family_ids;
  for (const auto& s : chosen)
    if (s.kind == manip::Strategy::Kind::family) family_ids.push_back(s.id);

  auto execute = [&](SubTask&, std::size_t i) {
    if (chosen[i].kind == manip::Strategy::Kind::family) {
      if (!session.grasped(part_id)) session.grasp(part_id, fit, rule_id, family_ids);
      return;
    }
    if (!session.grasped(part_id) && !session.grasp(part_id, fit, rule_id, family_ids).ok) return;
    session.interact();
  };
  auto check = [&](const SubTask& s) { return verify(session, s.condition); };
  run_loop(rec.plan, execute, check, opt.retry_limit);
  rec.episode = session.result();
  return rec;
}

std::string default_instruction(const blueprint::StructuralBlueprint& bp, sim::Task task) {
  return (task == sim::Task::pull ? "open the " : "close the ") + bp.object_name;
}

sim::EpisodeResult run_reasoned_episode(Reasoner& r, const blueprint::BlueprintPtr& bp, sim::Task task,
                                        const sim::EpisodeConfig& cfg) {
  sim::SimSession session(bp, task, cfg);
  return run_task(r, session, default_instruction(*bp, task)).episode;
}

// --- json -------------------------------------------------------------------

json to_json(const SceneGraph& g) {
  json nodes = json::array(), edges = json::array();
  for (const auto& n : g.nodes) nodes.push_back({{"id", n.id}, {"name", n.name}, {"state", n.state}});
  for (const auto& e : g.edges) edges.push_back({{"from", e.from}, {"relation", e.relation}, {"to", e.to}});
  return {{"nodes", nodes}, {"edges", edges}};
}

json to_json(const Plan& p) {
  json arr = json::array();
  for (const auto& s : p.subtasks)
    arr.push_back({{"instruction", s.instruction},
                   {"condition", s.condition},
                   {"objects", s.objects},
                   {"status", to_string(s.status)},
                   {"attempts", s.attempts}});
  return arr;
}

json to_json(const TaskRecord& t) {
  json cands = json::array();
  for (const auto& f : t.concept_choice.candidates) cands.push_back(fit::to_json(f, *concepts::builtin_asset(f.asset_id)));
  return {{"instruction", t.instruction},
          {"graph", to_json(t.graph)},
          {"plan", to_json(t.plan)},
          {"concept", {{"chosen", t.concept_choice.asset_id}, {"candidates", cands}}},
          {"strategies", t.strategies},
          {"episode", sim::to_json(t.episode)}};
}

}  // namespace eac::reason
