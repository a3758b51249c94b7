#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "eac/blueprint.hpp"
#include "eac/executor.hpp"
#include "eac/fit.hpp"
#include "eac/manip.hpp"

namespace eac::sim {

struct GripperState {
  Transform3 pose;
  double width = manip::kMaxOpening;
  std::string attached;  // part id, empty when free
  manip::ContactMode mode = manip::ContactMode::grasp;
  Transform3 offset;     // gripper pose in the attached part's frame
};

/// Articulated object plus a flying parallel gripper.
struct SimScene {
  explicit SimScene(blueprint::StructuralInstance object);

  blueprint::StructuralInstance object;
  GripperState gripper;

  bool attached() const { return !gripper.attached.empty(); }
};

/// Home pose of the gripper: 1 m above the origin, approach pointing down.
Transform3 gripper_home();

/// Part hit by the gripper proxy at `pose`, skipping `ignore` and its
/// subtree; empty when free.
std::string gripper_collision(const SimScene& scene, const Transform3& pose, double width,
                              const std::string& ignore = {});

/// Moves the free gripper to `g` and closes it to g.width. Grasp mode
/// attaches when the closing segment (with lateral slack up to 5 mm) passes
/// through a grasp-region of a part while both fingers stay outside it.
/// Push mode attaches as a one-sided contact when the fingertips are within
/// 5 mm of a push region. Otherwise the gripper stays free.
SimScene try_grasp(const SimScene& scene, const manip::GraspPose& g, manip::ContactMode mode = manip::ContactMode::grasp);

/// Detaches and opens the gripper.
SimScene release(const SimScene& scene);

struct StepConfig {
  double gain = 1.0;
  double revolute_cap = 5.0 * kPi / 180.0;  // rad per step
  double prismatic_cap = 0.01;              // m per step
};

/// Quasi-static response of the attached part's driving joint to a gripper
/// displacement; the gripper then follows the part rigidly. A push contact
/// moving away from its surface breaks off. Throws eac::PreconditionError
/// when the gripper is free.
SimScene step_interact(const SimScene& scene, const Vec3& displacement, const StepConfig& cfg = {});

// --- episodes ---------------------------------------------------------------

enum class Task { pull, push };
std::string to_string(Task t);
Task task_from_string(const std::string& s);

enum class Failure { none, no_grasp, no_motion, wrong_direction, collision, plan_fail };
std::string to_string(Failure f);

struct EpisodeConfig {
  std::uint64_t seed = 0;
  double p_closed = 0.5;            // chance a pull episode starts fully closed
  double max_open_fraction = 0.6;   // otherwise uniform open fraction in [0, this]
  double success_fraction = 0.1;    // required joint travel as a fraction of the range
  int max_steps = 60;
  double step_length = 0.01;        // gripper displacement per interaction step (m)
  bool ground_truth = false;        // bypass perception: true asset and pose
  std::size_t render_points = 3000; // surface samples per part
  double noise_sigma = 0.0005;
  std::size_t min_target_points = 600;  // views showing less of the target are resampled
  int grasp_candidates = 12;        // family values tried per family
  double obstacle_radius = 0.005;   // inflation of observed non-target points (m)
  fit::FitConfig fit;
  StepConfig step;
  exec::PlanConfig plan;

  /// Throws eac::PreconditionError on out-of-range settings.
  void validate() const;
};

struct EpisodeResult {
  std::string blueprint_id;
  std::string category;
  Task task = Task::pull;
  bool success = false;
  Failure failure = Failure::none;  // none iff success
  std::string detail;
  std::string concept_id;           // asset used for the target part
  std::vector<double> joint_trajectory;
  int steps = 0;
};

/// Outcome of a single action inside a session.
struct ActionResult {
  bool ok = false;
  Failure failure = Failure::none;
  std::string detail;
};

/// One seeded episode: object parameters, initial joint state, camera and
/// the evolving scene. Actions mirror the sub-tasks of a manipulation plan.
class SimSession {
 public:
  SimSession(blueprint::BlueprintPtr bp, Task task, const EpisodeConfig& cfg);
  /// Session on a given object: its parameters, pose and joint state are
  /// kept; only the camera comes from the seed.
  SimSession(blueprint::StructuralInstance object, Task task, const EpisodeConfig& cfg);

  const SimScene& scene() const { return scene_; }
  const blueprint::StructuralBlueprint& blueprint() const { return *bp_; }
  const EpisodeConfig& config() const { return cfg_; }
  Task task() const { return task_; }
  const std::string& target_part() const { return bp_->target_part; }
  const std::string& target_joint() const { return joint_id_; }
  const Vec3& camera() const { return camera_; }
  /// Labeled partial cloud of the initial scene.
  const PointCloud& observation() const { return cloud_; }
  /// Replaces the rendered observation, e.g. with a recorded cloud. Labels
  /// must be part indices of the object. Throws eac::PreconditionError.
  void set_observation(PointCloud cloud);
  /// Observed points of one part.
  PointCloud part_cloud(const std::string& part_id) const;

  /// Fits `asset` to the part's observed points in the object frame and
  /// returns the pose in the world frame.
  fit::FitResult fit_part(const std::string& part_id, const concepts::AssetPtr& asset) const;
  /// Ground-truth asset and pose of the part, packaged like a fit.
  fit::FitResult true_part(const std::string& part_id) const;

  /// Driving joint estimated from the category blueprint and the known
  /// object pose, in the world frame.
  blueprint::JointSpec estimated_joint(const std::string& part_id) const;

  /// Plans and executes approach plus grasp on the part described by `part`.
  /// Family values are tried in preferred order; only `family_ids` are used
  /// when non-empty.
  ActionResult grasp(const std::string& part_id, const fit::FitResult& part, const std::string& rule_id,
                     const std::vector<std::string>& family_ids = {});
  /// Closed-loop interaction along the force rule used for the grasp until
  /// the goal is reached or the step budget runs out.
  ActionResult interact();

  /// Waypoints planned for the executed grasp, if any.
  const std::optional<exec::Trajectory>& planned_trajectory() const { return traj_; }

  bool grasped(const std::string& part_id) const;
  /// Joint travel toward open since the start, as a fraction of the range.
  double opened_fraction() const;
  bool goal_reached() const;

  EpisodeResult result() const;

 private:
  blueprint::BlueprintPtr bp_;
  Task task_;
  EpisodeConfig cfg_;
  SimScene scene_;
  std::string joint_id_;
  double q0_ = 0.0;
  Vec3 camera_ = Vec3::Zero();
  PointCloud cloud_;
  std::optional<exec::WorldPlan> plan_;
  std::optional<exec::Trajectory> traj_;
  std::vector<double> trajectory_;
  int steps_ = 0;
  Failure failure_ = Failure::none;
  std::string detail_;
  std::string concept_;

  void observe(std::mt19937_64& rng);
};

struct PipelineHooks {
  /// Index of the chosen candidate fit; default picks the lowest residual
  /// among the fitted ones.
  std::function<std::size_t(const std::vector<fit::FitResult>&)> choose_concept;
};

/// Default force rule for a task and joint kind.
std::string rule_for(Task task, blueprint::JointKind kind);

/// Full pipeline for one episode: observe, fit, plan, grasp, interact.
EpisodeResult run_episode(const blueprint::BlueprintPtr& bp, Task task, const EpisodeConfig& cfg,
                          const PipelineHooks& hooks = {});

struct SuiteItem {
  blueprint::BlueprintPtr blueprint;
  Task task = Task::pull;
};

struct CategoryRow {
  std::string category;
  Task task = Task::pull;
  int episodes = 0;
  int successes = 0;
  double rate = 0.0;
  double mean_steps = 0.0;
  std::vector<std::pair<std::string, int>> failures;  // reason -> count
};

struct EvaluationReport {
  std::vector<CategoryRow> rows;
  double average = 0.0;  // mean of the per-row rates
};

/// Episode seed derived from the suite seed, item index and episode index.
std::uint64_t episode_seed(std::uint64_t seed, std::size_t item, std::size_t episode);

using EpisodeRunner = std::function<EpisodeResult(const SuiteItem&, const EpisodeConfig&)>;

/// Runs `episodes` per item on `threads` workers; results depend only on
/// the seed. Throws eac::PreconditionError when episodes < 1.
EvaluationReport evaluate(const std::vector<SuiteItem>& suite, int episodes, std::uint64_t seed,
                          const EpisodeConfig& base, const EpisodeRunner& runner = {}, int threads = 1);

void write_table(std::ostream& os, const EvaluationReport& report);
nlohmann::json to_json(const EvaluationReport& report);
nlohmann::json to_json(const EpisodeResult& r);

}  // namespace eac::sim
