#include <gtest/gtest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include "eac/errors.hpp"
#include "eac/io.hpp"

using namespace eac;
using nlohmann::json;

namespace {

json microwave_scene() {
  return json::parse(R"({
    "schema": "eac.scene/1",
    "objects": [{"blueprint": "microwave",
                 "params": {"l": 0.42, "height": 0.3, "depth": 0.35, "t": 0.02, "R_o": 0.08, "theta_c": 2.0, "r_t": 0.007},
                 "pose": {"xyz": [0.1, -0.2, 0.3], "rpy": [0, 0, 0.5]},
                 "joints": {"hinge": 0.4}}]
  })");
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("eac_test_io_" + name);
}

}  // namespace

TEST(Scene, ParsesObjectPoseAndJoints) {
  const auto s = io::scene_from_json(microwave_scene());
  ASSERT_EQ(s.objects.size(), 1u);
  EXPECT_EQ(s.objects[0].blueprint_id, "microwave");
  EXPECT_DOUBLE_EQ(s.objects[0].params.at("R_o"), 0.08);
  EXPECT_NEAR((s.objects[0].pose.translation() - Vec3(0.1, -0.2, 0.3)).norm(), 0.0, 1e-15);
  EXPECT_NEAR(s.objects[0].pose.rotation().rpy().z(), 0.5, 1e-12);
  const auto inst = io::instantiate(s.objects[0]);
  EXPECT_NEAR(inst.joint_state().at("hinge"), 0.4, 1e-15);
  EXPECT_FALSE(s.cloud);
  EXPECT_FALSE(s.graph);
}

TEST(Scene, RoundTripsThroughJson) {
  auto j = microwave_scene();
  j["cloud"] = {{"points", {{0.0, 0.1, 0.2, 1}, {0.3, 0.4, 0.5, 2}}}};
  j["graph"] = json::parse(R"({"nodes": [{"id": "n0", "name": "microwave", "state": "none"},
                                         {"id": "n1", "name": "door", "state": "closed"}],
                               "edges": [{"from": "n1", "relation": "part-of", "to": "n0"}]})");
  const auto s = io::scene_from_json(j);
  const auto back = io::scene_from_json(io::to_json(s));
  EXPECT_EQ(io::to_json(back), io::to_json(s));
  ASSERT_TRUE(back.cloud);
  EXPECT_EQ(back.cloud->labels, (std::vector<int>{1, 2}));
  ASSERT_TRUE(back.graph);
  EXPECT_EQ(back.graph->edges.size(), 1u);
}

TEST(Scene, FileRoundTripAndRelativePly) {
  const auto dir = temp_path("dir");
  std::filesystem::create_directories(dir);
  PointCloud pc;
  pc.points = {Vec3(0, 0, 0), Vec3(1, 2, 3)};
  pc.labels = {0, 3};
  concepts::write_ply_file((dir / "view.ply").string(), pc);
  auto j = microwave_scene();
  j["cloud"] = {{"ply", "view.ply"}};
  std::ofstream((dir / "scene.json").string()) << j.dump();
  const auto s = io::read_scene_file((dir / "scene.json").string());
  ASSERT_TRUE(s.cloud);
  EXPECT_EQ(s.cloud->size(), 2u);
  EXPECT_EQ(s.cloud->labels[1], 3);

  io::write_scene_file((dir / "out.json").string(), s);
  EXPECT_EQ(io::to_json(io::read_scene_file((dir / "out.json").string())), io::to_json(s));
  std::filesystem::remove_all(dir);
}

TEST(Scene, RejectsBadInput) {
  auto j = microwave_scene();
  j["schema"] = "eac.scene/2";
  EXPECT_THROW(io::scene_from_json(j), ParseError);

  j = microwave_scene();
  j["objects"][0]["blueprint"] = "fridge";
  try {
    io::scene_from_json(j);
    FAIL();
  } catch (const NotFoundError& e) {
    EXPECT_NE(std::string(e.what()).find("microwave"), std::string::npos);
  }

  j = microwave_scene();
  j["objects"][0]["colour"] = "red";
  EXPECT_THROW(io::scene_from_json(j), ParseError);

  j = microwave_scene();
  j["objects"] = json::array();
  EXPECT_THROW(io::scene_from_json(j), ParseError);

  j = microwave_scene();
  j["objects"][0]["params"]["l"] = "wide";
  EXPECT_THROW(io::scene_from_json(j), ParseError);

  j = microwave_scene();
  j["cloud"] = {{"points", {{0.0, 0.1, 0.2}}}};
  EXPECT_THROW(io::scene_from_json(j), ParseError);

  j = microwave_scene();
  j["graph"] = json::parse(R"({"nodes": [{"id": "n0", "name": "microwave"}],
                               "edges": [{"from": "n0", "relation": "part-of", "to": "n9"}]})");
  EXPECT_THROW(io::scene_from_json(j), ParseError);

  EXPECT_THROW(io::read_scene_file("/nonexistent/scene.json"), PreconditionError);
}

TEST(Scene, InstantiateRejectsOutOfRange) {
  auto s = io::scene_from_json(microwave_scene());
  s.objects[0].params["R_o"] = 0.5;
  EXPECT_THROW(io::instantiate(s.objects[0]), RangeError);
  s = io::scene_from_json(microwave_scene());
  s.objects[0].joints["hinge"] = 3.0;
  EXPECT_THROW(io::instantiate(s.objects[0]), RangeError);
  s = io::scene_from_json(microwave_scene());
  s.objects[0].params.erase("r_t");
  EXPECT_THROW(io::instantiate(s.objects[0]), RangeError);
}

TEST(Scene, RandomObjectIsDeterministicAndInRange) {
  for (const auto& bp : blueprint::builtin_blueprints()) {
    for (double f : {0.0, 0.5, 1.0}) {
      const auto a = io::random_object(bp->blueprint_id, 17, f);
      const auto b = io::random_object(bp->blueprint_id, 17, f);
      EXPECT_EQ(a.params, b.params);
      EXPECT_EQ(a.joints, b.joints);
      const auto inst = io::instantiate(a);
      const auto& j = inst.joint(inst.driving_joint(bp->target_part));
      EXPECT_NEAR(std::abs(inst.joint_state().at(j.joint_id) - j.closed_value()), f * j.range(), 1e-12) << bp->blueprint_id;
    }
  }
}

TEST(Pose, JsonRoundTrip) {
  const Transform3 t(rot_rpy(0.3, -0.2, 1.1), Vec3(1, 2, 3));
  const auto back = io::pose_from_json(io::pose_to_json(t));
  EXPECT_NEAR((back.translation() - t.translation()).norm(), 0.0, 1e-15);
  EXPECT_NEAR((back.rotation().matrix() - t.rotation().matrix()).norm(), 0.0, 1e-12);
  EXPECT_THROW(io::pose_from_json(json::parse(R"({"xyz": [1, 2]})")), ParseError);
  EXPECT_THROW(io::pose_from_json(json::parse(R"({"quat": [1, 0, 0, 0]})")), ParseError);
}

TEST(Settings, FlagBeatsEnvBeatsFileBeatsDefault) {
  io::SettingsLayer flags, env, file;
  EXPECT_EQ(io::resolve_settings(flags, env, file).seed, 0u);
  EXPECT_EQ(io::resolve_settings(flags, env, file).reasoner, "mock");
  file.seed = 3;
  file.threads = 2;
  EXPECT_EQ(io::resolve_settings(flags, env, file).seed, 3u);
  env.seed = 4;
  EXPECT_EQ(io::resolve_settings(flags, env, file).seed, 4u);
  flags.seed = 5;
  const auto s = io::resolve_settings(flags, env, file);
  EXPECT_EQ(s.seed, 5u);
  EXPECT_EQ(s.threads, 2);
  EXPECT_EQ(s.episodes, 50);
}

TEST(Settings, ReadsEnvironmentThroughInjectedLookup) {
  const std::map<std::string, std::string> vars{{"EAC_REASONER", "http"},
                                                {"EAC_REASONER_URL", "http://localhost:9"},
                                                {"EAC_SEED", "12"},
                                                {"EAC_EPISODES", "7"}};
  const auto lookup = [&](const char* name) -> const char* {
    const auto it = vars.find(name);
    return it == vars.end() ? nullptr : it->second.c_str();
  };
  const auto s = io::resolve_settings({}, io::settings_from_env(lookup), {});
  EXPECT_EQ(s.reasoner, "http");
  EXPECT_EQ(s.reasoner_url, "http://localhost:9");
  EXPECT_EQ(s.seed, 12u);
  EXPECT_EQ(s.episodes, 7);
  EXPECT_EQ(s.threads, 1);

  const auto bad = [](const char* name) -> const char* { return std::strcmp(name, "EAC_SEED") == 0 ? "x1" : nullptr; };
  EXPECT_THROW(io::settings_from_env(bad), ParseError);
}

TEST(Settings, ConfigFileIsStrict) {
  const auto l = io::settings_from_json(json::parse(R"({"seed": 9, "reasoner": "mock"})"));
  EXPECT_EQ(*l.seed, 9u);
  EXPECT_THROW(io::settings_from_json(json::parse(R"({"sead": 9})")), ParseError);
  EXPECT_THROW(io::settings_from_json(json::parse(R"({"seed": "nine"})")), ParseError);
  io::SettingsLayer f;
  f.reasoner = "oracle";
  EXPECT_THROW(io::resolve_settings({}, {}, f), PreconditionError);
  f = {};
  f.threads = 0;
  EXPECT_THROW(io::resolve_settings({}, {}, f), PreconditionError);
}
