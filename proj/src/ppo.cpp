#include "ahrm/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ahrm::ppo {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

// log(1 - tanh(u)^2), symmetric in u and stable for large |u|.
double log_squash_jacobian(double u) {
  const double a = std::abs(u);
  return 2.0 * (std::numbers::ln2 - a - std::log1p(std::exp(-2.0 * a)));
}

Eigen::MatrixXd as_column(std::span<const double> v) {
  Eigen::MatrixXd col(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) col(static_cast<Eigen::Index>(i), 0) = v[i];
  return col;
}

void append_mlp(const Mlp& net, std::vector<double>& out) {
  for (const auto& layer : net.layers()) {
    out.insert(out.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
    out.insert(out.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
}

std::size_t assign_mlp(Mlp& net, const Eigen::VectorXd& flat, std::size_t offset) {
  for (auto& layer : net.layers()) {
    std::copy_n(flat.data() + offset, layer.weight.size(), layer.weight.data());
    offset += layer.weight.size();
    std::copy_n(flat.data() + offset, layer.bias.size(), layer.bias.data());
    offset += layer.bias.size();
  }
  return offset;
}

}  // namespace

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("ppo.gamma must be in (0, 1]");
  if (!(gae_lambda > 0.0 && gae_lambda <= 1.0)) {
    throw std::invalid_argument("ppo.gae_lambda must be in (0, 1]");
  }
  if (!(clip > 0.0)) throw std::invalid_argument("ppo.clip must be > 0");
  if (horizon < 1 || minibatch < 1 || epochs < 1) {
    throw std::invalid_argument("ppo.horizon, ppo.minibatch and ppo.epochs must be positive");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("ppo.lr must be > 0");
  if (entropy_coef < 0.0 || value_coef < 0.0) {
    throw std::invalid_argument("ppo loss coefficients must be >= 0");
  }
  for (int w : hidden) {
    if (w <= 0) throw std::invalid_argument("ppo.hidden widths must be positive");
  }
}

NetParams NetParams::zeros_like() const {
  return {policy.zeros_like(), value.zeros_like(), Eigen::VectorXd::Zero(log_std.size())};
}

Eigen::VectorXd NetParams::flatten() const {
  std::vector<double> out;
  out.reserve(num_params());
  append_mlp(policy, out);
  append_mlp(value, out);
  out.insert(out.end(), log_std.data(), log_std.data() + log_std.size());
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

void NetParams::assign(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != num_params()) {
    throw std::invalid_argument("flat parameter vector has the wrong length");
  }
  std::size_t offset = assign_mlp(policy, flat, 0);
  offset = assign_mlp(value, flat, offset);
  std::copy_n(flat.data() + offset, log_std.size(), log_std.data());
}

bool NetParams::all_finite() const {
  auto finite = [](const Mlp& net) {
    return std::all_of(net.layers().begin(), net.layers().end(), [](const DenseLayer& l) {
      return l.weight.allFinite() && l.bias.allFinite();
    });
  };
  return finite(policy) && finite(value) && log_std.allFinite();
}

bool NetParams::operator==(const NetParams& other) const {
  return policy == other.policy && value == other.value &&
         log_std.size() == other.log_std.size() && log_std == other.log_std;
}

NetParams init_params(int obs_dim, int act_dim, const std::vector<int>& widths,
                      std::uint64_t seed, double init_log_std) {
  std::mt19937_64 rng(seed);
  NetParams params;
  params.policy = Mlp(obs_dim, widths, act_dim, rng);
  params.value = Mlp(obs_dim, widths, 1, rng);
  params.log_std = Eigen::VectorXd::Constant(act_dim, init_log_std);
  return params;
}

double squashed_log_prob(const Eigen::VectorXd& pre_squash, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std) {
  double lp = 0.0;
  for (Eigen::Index d = 0; d < pre_squash.size(); ++d) {
    const double z = (pre_squash(d) - mean(d)) * std::exp(-log_std(d));
    lp += -0.5 * z * z - log_std(d) - kHalfLog2Pi - log_squash_jacobian(pre_squash(d));
  }
  return lp;
}

double squashed_gaussian_entropy(double mean, double log_std) {
  // H[tanh(u)] = H[u] + E[log(1 - tanh(u)^2)]; the expectation by Simpson's
  // rule over +-12 standard deviations.
  const double sigma = std::exp(log_std);
  constexpr int kIntervals = 4000;
  constexpr double kLo = -12.0;
  constexpr double kHi = 12.0;
  const double h = (kHi - kLo) / kIntervals;
  double acc = 0.0;
  for (int i = 0; i <= kIntervals; ++i) {
    const double z = kLo + i * h;
    const double weight = (i == 0 || i == kIntervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    const double pdf = std::exp(-0.5 * z * z - kHalfLog2Pi);
    acc += weight * pdf * log_squash_jacobian(mean + sigma * z);
  }
  const double expectation = acc * h / 3.0;
  return 0.5 + kHalfLog2Pi + log_std + expectation;
}

ActResult act(const NetParams& params, std::span<const double> observation, ActMode mode,
              std::mt19937_64& rng) {
  if (static_cast<int>(observation.size()) != params.obs_dim()) {
    throw std::invalid_argument("observation length does not match the network");
  }
  for (double v : observation) {
    if (!std::isfinite(v)) throw std::invalid_argument("observation contains non-finite values");
  }
  const Eigen::MatrixXd x = as_column(observation);
  const Eigen::VectorXd mean = params.policy.forward(x).col(0);

  ActResult out;
  out.pre_squash = mean;
  if (mode == ActMode::kStochastic) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index d = 0; d < mean.size(); ++d) {
      out.pre_squash(d) += std::exp(params.log_std(d)) * normal(rng);
    }
  }
  out.action = out.pre_squash.array().tanh();
  out.log_prob = squashed_log_prob(out.pre_squash, mean, params.log_std);
  out.value = params.value.forward(x)(0, 0);
  return out;
}

double state_value(const NetParams& params, std::span<const double> observation) {
  return params.value.forward(as_column(observation))(0, 0);
}

GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              const std::vector<bool>& dones, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n) {
    throw std::invalid_argument("gae expects |values| = |rewards| + 1 and |dones| = |rewards|");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_advantage = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * live * values[t + 1] - values[t];
    next_advantage = delta + gamma * lambda * live * next_advantage;
    out.advantages[t] = next_advantage;
    out.returns[t] = next_advantage + values[t];
  }
  return out;
}

Batch Batch::select(std::span<const int> columns) const {
  Batch out;
  const auto n = static_cast<Eigen::Index>(columns.size());
  out.observations.resize(observations.rows(), n);
  out.pre_squash.resize(pre_squash.rows(), n);
  out.old_log_prob.resize(n);
  out.advantages.resize(n);
  out.returns.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = columns[i];
    out.observations.col(i) = observations.col(c);
    out.pre_squash.col(i) = pre_squash.col(c);
    out.old_log_prob(i) = old_log_prob(c);
    out.advantages(i) = advantages(c);
    out.returns(i) = returns(c);
  }
  return out;
}

Batch build_batch(std::span<const TrajectoryStep> steps, double last_value,
                  const PpoConfig& config) {
  if (steps.empty()) throw std::invalid_argument("cannot build a batch from an empty rollout");
  const auto n = static_cast<Eigen::Index>(steps.size());
  const auto obs_dim = static_cast<Eigen::Index>(steps.front().observation.size());
  const auto act_dim = steps.front().pre_squash.size();

  std::vector<double> rewards(steps.size());
  std::vector<double> values(steps.size() + 1);
  std::vector<bool> dones(steps.size());
  Batch batch;
  batch.observations.resize(obs_dim, n);
  batch.pre_squash.resize(act_dim, n);
  batch.old_log_prob.resize(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& s = steps[t];
    rewards[t] = s.reward + (s.truncated ? config.gamma * s.bootstrap_value : 0.0);
    values[t] = s.value;
    dones[t] = s.done;
    for (Eigen::Index i = 0; i < obs_dim; ++i) batch.observations(i, t) = s.observation[i];
    batch.pre_squash.col(t) = s.pre_squash;
    batch.old_log_prob(t) = s.log_prob;
  }
  values.back() = last_value;

  auto estimate = gae(rewards, values, dones, config.gamma, config.gae_lambda);
  batch.advantages = Eigen::Map<Eigen::VectorXd>(estimate.advantages.data(), n);
  batch.returns = Eigen::Map<Eigen::VectorXd>(estimate.returns.data(), n);
  return batch;
}

LossTerms ppo_loss(const NetParams& params, const Batch& batch, const PpoConfig& config,
                   NetParams* grads) {
  const int n = batch.size();
  if (n == 0) throw std::invalid_argument("empty batch");
  const double inv_n = 1.0 / n;
  const Eigen::Index act_dim = params.log_std.size();

  Mlp::Tape policy_tape;
  Mlp::Tape value_tape;
  const Eigen::MatrixXd mean = params.policy.forward(batch.observations, policy_tape);
  const Eigen::MatrixXd value = params.value.forward(batch.observations, value_tape);
  const Eigen::VectorXd inv_std = (-params.log_std).array().exp();

  Eigen::MatrixXd d_mean = Eigen::MatrixXd::Zero(act_dim, n);
  Eigen::VectorXd d_log_std = Eigen::VectorXd::Zero(act_dim);
  Eigen::MatrixXd d_value(1, n);

  LossTerms terms;
  int clipped = 0;
  for (int b = 0; b < n; ++b) {
    const Eigen::VectorXd z =
        (batch.pre_squash.col(b) - mean.col(b)).cwiseProduct(inv_std);
    const double log_prob = squashed_log_prob(batch.pre_squash.col(b), mean.col(b), params.log_std);
    const double ratio = std::exp(log_prob - batch.old_log_prob(b));
    const double adv = batch.advantages(b);
    const double unclipped = ratio * adv;
    const double clipped_ratio = std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip);
    const double clipped_term = clipped_ratio * adv;
    terms.policy_loss -= std::min(unclipped, clipped_term) * inv_n;
    if (std::abs(ratio - 1.0) > config.clip) ++clipped;

    if (unclipped <= clipped_term) {
      // d(-ratio * A / n) / d log_prob
      const double coef = -adv * ratio * inv_n;
      d_mean.col(b) = coef * z.cwiseProduct(inv_std);
      d_log_std.array() += coef * (z.array().square() - 1.0);
    }

    const double err = value(0, b) - batch.returns(b);
    terms.value_loss += err * err * inv_n;
    d_value(0, b) = config.value_coef * 2.0 * err * inv_n;
  }
  terms.clip_fraction = static_cast<double>(clipped) * inv_n;
  terms.entropy = (0.5 + kHalfLog2Pi) * static_cast<double>(act_dim) + params.log_std.sum();
  terms.total = terms.policy_loss + config.value_coef * terms.value_loss -
                config.entropy_coef * terms.entropy;

  if (grads != nullptr) {
    *grads = params.zeros_like();
    params.policy.backward(policy_tape, d_mean, grads->policy);
    params.value.backward(value_tape, d_value, grads->value);
    grads->log_std = d_log_std.array() - config.entropy_coef;
  }
  return terms;
}

Optimizer::Optimizer(OptimizerKind kind, std::size_t num_params, const PpoConfig& config)
    : kind_(kind),
      lr_(config.lr),
      beta1_(config.adam_beta1),
      beta2_(config.adam_beta2),
      eps_(config.adam_eps) {
  if (kind_ == OptimizerKind::kAdam) {
    m_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_params));
    v_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_params));
  }
}

void Optimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (kind_ == OptimizerKind::kSgd) {
    params.noalias() -= lr_ * grad;
    return;
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

UpdateStats update(NetParams& params, Optimizer& optimizer, const Batch& batch,
                   const PpoConfig& config, std::mt19937_64& rng) {
  UpdateStats stats;
  if (batch.size() < config.minibatch) {
    throw std::invalid_argument("batch has fewer steps than one minibatch");
  }
  const NetParams saved_params = params;
  const Optimizer saved_optimizer = optimizer;
  auto abort = [&](std::string why) {
    params = saved_params;
    optimizer = saved_optimizer;
    stats.aborted = true;
    stats.diagnostic = std::move(why);
    return stats;
  };

  Batch working = batch;
  if (config.normalize_advantages && working.size() > 1) {
    const double mu = working.advantages.mean();
    const double var = (working.advantages.array() - mu).square().mean();
    working.advantages = (working.advantages.array() - mu) / (std::sqrt(var) + 1e-8);
  }

  std::vector<int> order(working.size());
  std::iota(order.begin(), order.end(), 0);
  NetParams grads;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.minibatch) {
      const std::size_t end = std::min(order.size(), start + config.minibatch);
      const Batch mb = working.select(std::span<const int>(order).subspan(start, end - start));
      const LossTerms terms = ppo_loss(params, mb, config, &grads);
      if (!std::isfinite(terms.total) || !grads.all_finite()) {
        std::ostringstream why;
        why << "non-finite loss in epoch " << epoch << ", minibatch " << stats.minibatches
            << " (policy " << terms.policy_loss << ", value " << terms.value_loss << ")";
        return abort(why.str());
      }
      if (stats.minibatches == 0) stats.first_minibatch_clip_fraction = terms.clip_fraction;
      stats.policy_loss += terms.policy_loss;
      stats.value_loss += terms.value_loss;
      stats.entropy += terms.entropy;
      stats.clip_fraction += terms.clip_fraction;
      ++stats.minibatches;

      Eigen::VectorXd flat = params.flatten();
      optimizer.step(flat, grads.flatten());
      params.assign(flat);
    }
  }
  if (!params.all_finite()) return abort("parameters became non-finite");
  const double k = 1.0 / stats.minibatches;
  stats.policy_loss *= k;
  stats.value_loss *= k;
  stats.entropy *= k;
  stats.clip_fraction *= k;
  return stats;
}

}  // namespace ahrm::ppo
