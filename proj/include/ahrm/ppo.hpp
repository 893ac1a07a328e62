#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ahrm/mlp.hpp"

namespace ahrm::ppo {

enum class OptimizerKind { kSgd, kAdam };

struct PpoConfig {
  double gamma = 0.995;
  int horizon = 512;
  double entropy_coef = 0.02;
  double clip = 0.05;
  double gae_lambda = 0.95;
  int minibatch = 64;
  double lr = 0.001;
  int epochs = 3;
  double value_coef = 0.5;
  bool normalize_advantages = true;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::vector<int> hidden{64, 64, 64};
  double init_log_std = -0.5;

  void validate() const;
};

/// Policy-mean network, value network and a state-independent log-std.
struct NetParams {
  Mlp policy;
  Mlp value;
  Eigen::VectorXd log_std;

  int obs_dim() const { return policy.input_dim(); }
  int act_dim() const { return policy.output_dim(); }
  std::size_t num_params() const {
    return policy.num_params() + value.num_params() + static_cast<std::size_t>(log_std.size());
  }

  NetParams zeros_like() const;
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
  bool all_finite() const;

  bool operator==(const NetParams& other) const;
};

NetParams init_params(int obs_dim, int act_dim, const std::vector<int>& widths,
                      std::uint64_t seed, double init_log_std = -0.5);

enum class ActMode { kStochastic, kDeterministic };

struct ActResult {
  Eigen::VectorXd action;      // tanh-squashed, in (-1, 1)
  Eigen::VectorXd pre_squash;  // Gaussian sample before tanh
  double log_prob = 0.0;       // includes the tanh change-of-variables term
  double value = 0.0;
};

/// Throws std::invalid_argument on a non-finite observation.
ActResult act(const NetParams& params, std::span<const double> observation, ActMode mode,
              std::mt19937_64& rng);

double state_value(const NetParams& params, std::span<const double> observation);

/// log density of a = tanh(u) with u ~ N(mean, exp(log_std)), evaluated at u.
double squashed_log_prob(const Eigen::VectorXd& pre_squash, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std);

/// Differential entropy of tanh(u), u ~ N(mean, exp(log_std)) for a single
/// dimension, by numerical quadrature.
double squashed_gaussian_entropy(double mean, double log_std);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Recursive GAE. `values` carries one more entry than `rewards`: the
/// bootstrap value of the state following the last step.
GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              const std::vector<bool>& dones, double gamma, double lambda);

struct TrajectoryStep {
  std::vector<double> observation;
  Eigen::VectorXd action;
  Eigen::VectorXd pre_squash;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  int phase = 1;
  std::vector<double> components;
  bool done = false;       // episode ended after this step
  bool truncated = false;  // ended by the time limit; bootstrap from bootstrap_value
  double bootstrap_value = 0.0;
  bool constraint_violated = false;
};

using Trajectory = std::vector<TrajectoryStep>;

/// Training batch, one sample per column.
struct Batch {
  Eigen::MatrixXd observations;
  Eigen::MatrixXd pre_squash;
  Eigen::VectorXd old_log_prob;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  int size() const { return static_cast<int>(observations.cols()); }
  Batch select(std::span<const int> columns) const;
};

/// Runs GAE over a rollout that may span several episodes. `last_value` is
/// V(s) of the state after the final step, used when that step is not done.
Batch build_batch(std::span<const TrajectoryStep> steps, double last_value,
                  const PpoConfig& config);

struct LossTerms {
  double total = 0.0;
  double policy_loss = 0.0;  // negated clipped surrogate
  double value_loss = 0.0;
  double entropy = 0.0;      // Gaussian entropy of the pre-squash distribution
  double clip_fraction = 0.0;
};

/// Minimisation objective -surrogate + c_v * mean (V - R)^2 - c_e * H. When
/// `grads` is given, it receives dtotal/dparams (overwritten).
LossTerms ppo_loss(const NetParams& params, const Batch& batch, const PpoConfig& config,
                   NetParams* grads);

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, std::size_t num_params, const PpoConfig& config);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  OptimizerKind kind_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long t_ = 0;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double first_minibatch_clip_fraction = 0.0;
  int minibatches = 0;
  bool aborted = false;
  std::string diagnostic;
};

/// `epochs` passes of shuffled minibatch descent on ppo_loss. On a
/// non-finite loss or gradient the parameters are restored and the stats
/// carry a diagnostic.
UpdateStats update(NetParams& params, Optimizer& optimizer, const Batch& batch,
                   const PpoConfig& config, std::mt19937_64& rng);

}  // namespace ahrm::ppo
