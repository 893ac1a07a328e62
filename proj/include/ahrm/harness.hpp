#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ahrm/config.hpp"
#include "ahrm/env_planar.hpp"
#include "ahrm/mechanism.hpp"
#include "ahrm/ppo.hpp"

namespace ahrm::harness {

/// Something that picks actions: the PPO policy or a scripted controller.
class ActionSource {
 public:
  virtual ~ActionSource() = default;
  virtual void begin_episode() {}
  virtual ppo::ActResult act(std::span<const double> observation) = 0;
  virtual double value(std::span<const double> /*observation*/) { return 0.0; }
};

class PolicyAgent : public ActionSource {
 public:
  PolicyAgent(const ppo::NetParams& params, ppo::ActMode mode, std::mt19937_64& rng)
      : params_(params), mode_(mode), rng_(rng) {}

  ppo::ActResult act(std::span<const double> observation) override {
    return ppo::act(params_, observation, mode_, rng_);
  }
  double value(std::span<const double> observation) override {
    return ppo::state_value(params_, observation);
  }

 private:
  const ppo::NetParams& params_;
  ppo::ActMode mode_;
  std::mt19937_64& rng_;
};

/// Straight-line controller: drive to the west side of the target along the
/// table edge, then push due east through the gap between the obstacles.
class ScriptedPusher : public ActionSource {
 public:
  explicit ScriptedPusher(const env::EnvConfig& config);
  void begin_episode() override { waypoint_ = 0; }
  ppo::ActResult act(std::span<const double> observation) override;

 private:
  env::EnvConfig config_;
  int waypoint_ = 0;
};

/// Replays a fixed action forever.
class ConstantAction : public ActionSource {
 public:
  explicit ConstantAction(env::Vec2 action) : action_(action) {}
  ppo::ActResult act(std::span<const double> observation) override;

 private:
  env::Vec2 action_;
};

/// Scalar reward handed to the learner for one step.
double variant_reward(Variant variant, std::span<const double> components,
                      const env::PlanarPushEnv& env, const reward::MechanismState* mechanism);

struct EpisodeResult {
  ppo::Trajectory trajectory;
  reward::EpisodeRecord record{env::kNumPhases, env::kNumObjectives};
  bool terminated_by_constraint = false;
  bool success = false;
  bool timeout = false;
  double shaped_return = 0.0;
  int obstacle_touches = 0;  // contact onsets
  double target_travel = 0.0;
  std::vector<int> levels;   // hierarchy level per phase during the episode
};

struct EpisodeOptions {
  // Discount for the success credit; unset leaves successes as plain
  // terminal steps.
  std::optional<double> success_credit_gamma;
};

/// Discounted value of `remaining` further steps each paying `per_step`.
double success_credit(double per_step, int remaining, double gamma);

/// Plays one episode. For hierarchical variants, a phase whose level is
/// gated has its running sum of the gated level checked against tau each
/// time a stretch of steps in that phase closes (the pusher leaves the phase
/// or the step budget runs out); a violation ends the episode on that step.
EpisodeResult run_episode(env::PlanarPushEnv& env, std::uint64_t reset_seed, ActionSource& agent,
                          Variant variant, const reward::MechanismState* mechanism,
                          const EpisodeOptions& options = {});

std::optional<reward::MechanismState> make_mechanism(const RunConfig& config);

nlohmann::json mechanism_snapshot(const reward::MechanismState& state);

struct TrainSummary {
  std::filesystem::path run_dir;
  int episodes = 0;
  int successes = 0;
  int constraint_terminations = 0;
  int updates = 0;
};

/// Directory a run writes into: <output_dir>/<variant>_seed<seed>.
std::filesystem::path run_directory(const RunConfig& config);

/// Full training run. Writes config.json, episodes.csv, priorities.json and
/// checkpoint.bin into run_directory(config).
TrainSummary train(const RunConfig& config);

struct EvalReport {
  int n_evals = 0;
  int successes = 0;
  double success_rate = 0.0;
  int obstacle_touches = 0;
  double time_to_success_mean = 0.0;  // seconds, successes only
  double time_to_success_std = 0.0;
  double travel_length_mean = 0.0;    // table units, all evaluations
  double travel_length_std = 0.0;
};

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& doc);

EvalReport evaluate_policy(ActionSource& agent, const env::EnvConfig& config, int n,
                           std::uint64_t seed);

/// Deterministic-policy evaluation of a checkpoint. Read-only on the file.
EvalReport evaluate(const std::filesystem::path& checkpoint, const env::EnvConfig& config,
                    int n = 40, std::uint64_t seed = 0);

struct CompareResult {
  std::filesystem::path table_csv;
  std::filesystem::path curves_csv;
  std::filesystem::path svg;
};

inline constexpr int kCurveWindow = 10;

/// Trailing moving average; the first entries average what is available.
std::vector<double> smooth(std::span<const double> values, int window);

/// Reads completed run directories and writes comparison.csv, curves.csv and
/// learning_curves.svg into `out_dir`.
CompareResult compare(const std::vector<std::filesystem::path>& run_dirs,
                      const std::filesystem::path& out_dir);

std::string render_svg(const std::vector<std::string>& names,
                       const std::vector<std::vector<double>>& series, const std::string& title,
                       const std::string& x_label, const std::string& y_label);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace ahrm::harness
