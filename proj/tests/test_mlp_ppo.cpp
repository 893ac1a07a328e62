#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "ahrm/mlp.hpp"
#include "ahrm/ppo.hpp"

using namespace ahrm::ppo;

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

Batch random_batch(const NetParams& params, int n, std::mt19937_64& rng, double near_spread,
                   int far_every) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> u(-near_spread, near_spread);
  Batch b;
  b.observations.resize(params.obs_dim(), n);
  b.pre_squash.resize(params.act_dim(), n);
  b.old_log_prob.resize(n);
  b.advantages.resize(n);
  b.returns.resize(n);
  const Eigen::MatrixXd obs = Eigen::MatrixXd::NullaryExpr(
      params.obs_dim(), n, [&]() { return normal(rng); });
  b.observations = obs;
  const Eigen::MatrixXd mean = params.policy.forward(obs);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < params.act_dim(); ++d) {
      b.pre_squash(d, i) = mean(d, i) + std::exp(params.log_std(d)) * normal(rng);
    }
    double lp = squashed_log_prob(b.pre_squash.col(i), mean.col(i), params.log_std);
    lp += (far_every > 0 && i % far_every == 0) ? (i % 2 == 0 ? 0.5 : -0.5) : u(rng);
    b.old_log_prob(i) = lp;
    b.advantages(i) = normal(rng);
    b.returns(i) = normal(rng);
  }
  return b;
}

double loss_at(NetParams params, const Eigen::VectorXd& flat, const Batch& b,
               const PpoConfig& c) {
  params.assign(flat);
  return ppo_loss(params, b, c, nullptr).total;
}

}  // namespace

TEST(Mlp, ShapesAndInitRange) {
  std::mt19937_64 rng(1);
  Mlp net(5, {7, 3}, 2, rng);
  EXPECT_EQ(net.input_dim(), 5);
  EXPECT_EQ(net.output_dim(), 2);
  EXPECT_EQ(net.hidden_widths(), (std::vector<int>{7, 3}));
  EXPECT_EQ(net.num_params(), std::size_t(5 * 7 + 7 + 7 * 3 + 3 + 3 * 2 + 2));
  const double bound = 1.0 / std::sqrt(5.0);
  EXPECT_LE(net.layers()[0].weight.cwiseAbs().maxCoeff(), bound);
  EXPECT_LE(net.layers()[0].bias.cwiseAbs().maxCoeff(), bound);
  EXPECT_THROW(Mlp(0, {3}, 1, rng), std::invalid_argument);
  EXPECT_THROW(Mlp(2, {0}, 1, rng), std::invalid_argument);
}

TEST(Mlp, ForwardMatchesHandComputation) {
  std::mt19937_64 rng(2);
  Mlp net(2, {3}, 1, rng);
  Eigen::MatrixXd x(2, 1);
  x << 0.3, -0.7;
  const auto& l0 = net.layers()[0];
  const auto& l1 = net.layers()[1];
  const Eigen::VectorXd h = (l0.weight * x.col(0) + l0.bias).array().tanh();
  const double expected = (l1.weight * h + l1.bias)(0);
  EXPECT_NEAR(net.forward(x)(0, 0), expected, 1e-15);
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  Mlp net(3, {4, 4}, 2, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 5);
  Eigen::MatrixXd g = Eigen::MatrixXd::Random(2, 5);
  auto objective = [&](const Mlp& m) { return (m.forward(x).cwiseProduct(g)).sum(); };
  Mlp::Tape tape;
  net.forward(x, tape);
  Mlp grads = net.zeros_like();
  net.backward(tape, g, grads);
  const double h = 1e-6;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    for (Eigen::Index i = 0; i < net.layers()[l].weight.size(); ++i) {
      Mlp plus = net, minus = net;
      plus.layers()[l].weight.data()[i] += h;
      minus.layers()[l].weight.data()[i] -= h;
      const double fd = (objective(plus) - objective(minus)) / (2 * h);
      EXPECT_NEAR(grads.layers()[l].weight.data()[i], fd, 1e-7);
    }
    for (Eigen::Index i = 0; i < net.layers()[l].bias.size(); ++i) {
      Mlp plus = net, minus = net;
      plus.layers()[l].bias(i) += h;
      minus.layers()[l].bias(i) -= h;
      const double fd = (objective(plus) - objective(minus)) / (2 * h);
      EXPECT_NEAR(grads.layers()[l].bias(i), fd, 1e-7);
    }
  }
}

TEST(NetParams, FlattenAssignRoundTrip) {
  NetParams p = init_params(4, 2, {5, 5}, 11);
  const Eigen::VectorXd flat = p.flatten();
  EXPECT_EQ(static_cast<std::size_t>(flat.size()), p.num_params());
  NetParams q = p.zeros_like();
  q.assign(flat);
  EXPECT_TRUE(p == q);
  EXPECT_THROW(q.assign(Eigen::VectorXd::Zero(3)), std::invalid_argument);
  EXPECT_TRUE(init_params(4, 2, {5, 5}, 11) == p);
  EXPECT_FALSE(init_params(4, 2, {5, 5}, 12) == p);
}

TEST(SquashedLogProb, MatchesChangeOfVariables) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd u(2), mean(2), log_std(2);
    for (int d = 0; d < 2; ++d) {
      u(d) = 2.0 * normal(rng);
      mean(d) = normal(rng);
      log_std(d) = 0.5 * normal(rng);
    }
    double expected = 0.0;
    for (int d = 0; d < 2; ++d) {
      const double sigma = std::exp(log_std(d));
      const double gauss = -0.5 * std::pow((u(d) - mean(d)) / sigma, 2) - std::log(sigma) - kHalfLog2Pi;
      expected += gauss - std::log(1.0 - std::pow(std::tanh(u(d)), 2));
    }
    EXPECT_NEAR(squashed_log_prob(u, mean, log_std), expected, 1e-9);
  }
  // Stable far in the tails where 1 - tanh^2 underflows.
  Eigen::VectorXd far(1), zero = Eigen::VectorXd::Zero(1);
  far << 400.0;
  EXPECT_TRUE(std::isfinite(squashed_log_prob(far, zero, zero)));
}

TEST(SquashedEntropy, NarrowLimitAndMonteCarlo) {
  // Narrow at 0: log(1 - tanh(u)^2) = -u^2 + O(u^4), so the squashing costs
  // about sigma^2.
  const double sigma = std::exp(-6.0);
  EXPECT_NEAR(squashed_gaussian_entropy(0.0, -6.0), 0.5 + kHalfLog2Pi - 6.0 - sigma * sigma, 1e-9);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.3, 1.0);
  const int n = 400000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::log(1.0 - std::pow(std::tanh(normal(rng)), 2));
  EXPECT_NEAR(squashed_gaussian_entropy(0.3, 0.0), 0.5 + kHalfLog2Pi + acc / n, 0.01);
}

TEST(SquashedEntropy, DecreasesAsLogStdShrinks) {
  const double wide = squashed_gaussian_entropy(0.2, -1.0);
  const double mid = squashed_gaussian_entropy(0.2, -3.0);
  const double narrow = squashed_gaussian_entropy(0.2, -6.0);
  EXPECT_GT(wide, mid);
  EXPECT_GT(mid, narrow);
}

TEST(Act, DeterministicUsesMeanAndValidatesInput) {
  NetParams p = init_params(3, 2, {4}, 6);
  std::mt19937_64 rng(0);
  const std::vector<double> obs{0.1, 0.2, 0.3};
  const auto r = act(p, obs, ActMode::kDeterministic, rng);
  Eigen::MatrixXd x(3, 1);
  x << 0.1, 0.2, 0.3;
  const Eigen::VectorXd mean = p.policy.forward(x).col(0);
  EXPECT_TRUE(r.pre_squash.isApprox(mean));
  EXPECT_NEAR(r.action(0), std::tanh(mean(0)), 1e-15);
  EXPECT_NEAR(r.value, state_value(p, obs), 1e-15);
  EXPECT_THROW(act(p, std::vector<double>{0.1, NAN, 0.3}, ActMode::kDeterministic, rng),
               std::invalid_argument);
  EXPECT_THROW(act(p, std::vector<double>{0.1}, ActMode::kDeterministic, rng),
               std::invalid_argument);
}

TEST(Act, StochasticActionsStayInOpenBox) {
  NetParams p = init_params(3, 2, {4}, 7);
  std::mt19937_64 rng(1);
  const std::vector<double> obs{1.0, -2.0, 0.5};
  for (int i = 0; i < 1000; ++i) {
    const auto r = act(p, obs, ActMode::kStochastic, rng);
    EXPECT_LE(r.action.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_TRUE(std::isfinite(r.log_prob));
  }
}

TEST(Act, StochasticActionApproachesSquashedMeanAsLogStdShrinks) {
  NetParams p = init_params(3, 2, {4}, 15);
  const std::vector<double> obs{0.4, -0.1, 0.9};
  std::mt19937_64 rng(2);
  const Eigen::VectorXd target = act(p, obs, ActMode::kDeterministic, rng).action;
  double previous = std::numeric_limits<double>::infinity();
  for (double log_std : {-2.0, -6.0, -12.0}) {
    p.log_std.setConstant(log_std);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const auto r = act(p, obs, ActMode::kStochastic, rng);
      worst = std::max(worst, (r.action - target).cwiseAbs().maxCoeff());
    }
    EXPECT_LT(worst, previous);
    EXPECT_LT(worst, 10.0 * std::exp(log_std));
    previous = worst;
  }
}

TEST(Gae, MatchesDirectDoubleSum) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution ends(0.15);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 17;
    const double gamma = 0.9 + 0.002 * trial;
    const double lambda = 0.5 + 0.01 * trial;
    std::vector<double> r(n), v(n + 1);
    std::vector<bool> done(n);
    for (int t = 0; t < n; ++t) {
      r[t] = normal(rng);
      v[t] = normal(rng);
      done[t] = ends(rng);
    }
    v[n] = normal(rng);
    const auto out = gae(r, v, done, gamma, lambda);
    for (int t = 0; t < n; ++t) {
      double expected = 0.0;
      double discount = 1.0;
      for (int k = t; k < n; ++k) {
        const double next = done[k] ? 0.0 : v[k + 1];
        expected += discount * (r[k] + gamma * next - v[k]);
        if (done[k]) break;
        discount *= gamma * lambda;
      }
      EXPECT_NEAR(out.advantages[t], expected, 1e-10);
      EXPECT_NEAR(out.returns[t], expected + v[t], 1e-10);
    }
  }
}

TEST(Gae, LambdaOneGivesDiscountedReturns) {
  const std::vector<double> r{1.0, 2.0, 3.0};
  const std::vector<double> v{0.5, -0.5, 0.25, 7.0};
  const auto out = gae(r, v, {false, false, true}, 0.9, 1.0);
  EXPECT_NEAR(out.returns[0], 1.0 + 0.9 * 2.0 + 0.81 * 3.0, 1e-12);
  EXPECT_NEAR(out.returns[2], 3.0, 1e-12);
}

TEST(Gae, LambdaZeroGivesOneStepTdError) {
  const std::vector<double> r{1.0, -2.0, 0.5, 4.0};
  const std::vector<double> v{0.3, 0.7, -1.1, 2.0, 5.0};
  const std::vector<bool> done{false, true, false, false};
  const auto out = gae(r, v, done, 0.9, 0.0);
  for (int t = 0; t < 4; ++t) {
    const double next = done[t] ? 0.0 : v[t + 1];
    EXPECT_NEAR(out.advantages[t], r[t] + 0.9 * next - v[t], 1e-12) << t;
  }
}

TEST(Gae, RejectsMismatchedLengths) {
  EXPECT_THROW(gae(std::vector<double>{1.0}, std::vector<double>{1.0}, {false}, 0.9, 0.9),
               std::invalid_argument);
}

TEST(BuildBatch, TruncationBootstrapsAndDoneStops) {
  PpoConfig c;
  c.gamma = 0.5;
  c.gae_lambda = 1.0;
  auto step = [](double reward, bool done, bool truncated, double boot) {
    TrajectoryStep s;
    s.observation = {0.0};
    s.action = Eigen::VectorXd::Zero(1);
    s.pre_squash = Eigen::VectorXd::Zero(1);
    s.reward = reward;
    s.done = done;
    s.truncated = truncated;
    s.bootstrap_value = boot;
    return s;
  };
  std::vector<TrajectoryStep> steps{step(1.0, false, false, 0.0), step(1.0, true, true, 8.0),
                                    step(2.0, true, false, 100.0), step(1.0, false, false, 0.0)};
  const Batch b = build_batch(steps, 10.0, c);
  EXPECT_NEAR(b.returns(0), 1.0 + 0.5 * (1.0 + 0.5 * 8.0), 1e-12);
  EXPECT_NEAR(b.returns(1), 5.0, 1e-12);
  EXPECT_NEAR(b.returns(2), 2.0, 1e-12);  // terminal: bootstrap_value ignored
  EXPECT_NEAR(b.returns(3), 1.0 + 0.5 * 10.0, 1e-12);
  EXPECT_THROW(build_batch({}, 0.0, c), std::invalid_argument);
}

TEST(PpoLoss, GradientMatchesFiniteDifferences) {
  PpoConfig c;
  c.entropy_coef = 0.02;
  c.value_coef = 0.5;
  std::mt19937_64 rng(9);
  int checked = 0;
  for (int net = 0; net < 20; ++net) {
    NetParams p = init_params(3, 2, {4, 3}, 100 + net, -0.3);
    const Batch b = random_batch(p, 12, rng, 0.02, 5);
    NetParams grads;
    ppo_loss(p, b, c, &grads);
    const Eigen::VectorXd analytic = grads.flatten();
    const Eigen::VectorXd flat = p.flatten();
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
      Eigen::VectorXd plus = flat, minus = flat;
      plus(i) += h;
      minus(i) -= h;
      const double fd = (loss_at(p, plus, b, c) - loss_at(p, minus, b, c)) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(analytic(i)), 1e-3});
      EXPECT_LT(std::abs(fd - analytic(i)) / scale, 1e-4) << "net " << net << " param " << i;
      ++checked;
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(PpoLoss, TinyNetworkGradientOnEightSteps) {
  PpoConfig c;
  std::mt19937_64 rng(16);
  NetParams p = init_params(2, 1, {4}, 16, -0.2);
  const Batch b = random_batch(p, 8, rng, 0.02, 3);
  NetParams grads;
  ppo_loss(p, b, c, &grads);
  const Eigen::VectorXd analytic = grads.flatten();
  const Eigen::VectorXd flat = p.flatten();
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    Eigen::VectorXd plus = flat, minus = flat;
    plus(i) += h;
    minus(i) -= h;
    const double fd = (loss_at(p, plus, b, c) - loss_at(p, minus, b, c)) / (2 * h);
    EXPECT_NEAR(fd, analytic(i), 1e-6 * std::max(1.0, std::abs(fd))) << "param " << i;
  }
}

TEST(PpoLoss, ZeroAdvantageAndExactValuesLeaveOnlyEntropyGradient) {
  PpoConfig c;
  std::mt19937_64 rng(17);
  NetParams p = init_params(3, 2, {5}, 17);
  Batch b = random_batch(p, 16, rng, 0.0, 0);
  b.advantages.setZero();
  b.returns = p.value.forward(b.observations).row(0).transpose();
  NetParams grads;
  ppo_loss(p, b, c, &grads);
  const Eigen::Index nets = static_cast<Eigen::Index>(p.policy.num_params() + p.value.num_params());
  EXPECT_LT(grads.flatten().head(nets).cwiseAbs().maxCoeff(), 1e-15);
  for (Eigen::Index d = 0; d < grads.log_std.size(); ++d) {
    EXPECT_NEAR(grads.log_std(d), -c.entropy_coef, 1e-15);
  }

  NetParams q = p;
  Optimizer opt(OptimizerKind::kSgd, p.num_params(), c);
  Eigen::VectorXd flat = q.flatten();
  opt.step(flat, grads.flatten());
  q.assign(flat);
  EXPECT_TRUE(q.policy == p.policy);
  EXPECT_TRUE(q.value == p.value);
  EXPECT_TRUE((q.log_std.array() > p.log_std.array()).all());
}

TEST(PpoLoss, RatioOneHasNoClippingAndPolicyLossIsMinusMeanAdvantage) {
  NetParams p = init_params(3, 2, {4}, 10);
  std::mt19937_64 rng(10);
  const Batch b = random_batch(p, 32, rng, 0.0, 0);
  PpoConfig c;
  const auto terms = ppo_loss(p, b, c, nullptr);
  EXPECT_EQ(terms.clip_fraction, 0.0);
  EXPECT_NEAR(terms.policy_loss, -b.advantages.mean(), 1e-12);
  EXPECT_NEAR(terms.entropy, 2 * (0.5 + kHalfLog2Pi) + p.log_std.sum(), 1e-12);
}

TEST(PpoLoss, FarRatiosAreClipped) {
  NetParams p = init_params(3, 2, {4}, 10);
  std::mt19937_64 rng(11);
  const Batch b = random_batch(p, 20, rng, 0.0, 1);
  PpoConfig c;
  EXPECT_EQ(ppo_loss(p, b, c, nullptr).clip_fraction, 1.0);
}

TEST(Optimizer, SgdStepIsLearningRateTimesGradient) {
  PpoConfig c;
  c.lr = 0.01;
  Optimizer opt(OptimizerKind::kSgd, 3, c);
  Eigen::VectorXd x(3), g(3);
  x << 1.0, 2.0, 3.0;
  g << 0.5, -1.0, 0.0;
  opt.step(x, g);
  EXPECT_NEAR(x(0), 0.995, 1e-15);
  EXPECT_NEAR(x(1), 2.01, 1e-15);
  EXPECT_EQ(x(2), 3.0);
}

TEST(Optimizer, AdamFirstStepIsSignOfGradient) {
  PpoConfig c;
  c.lr = 0.001;
  Optimizer opt(OptimizerKind::kAdam, 3, c);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3), g(3);
  g << 3.0, -0.2, 1e-3;
  opt.step(x, g);
  EXPECT_NEAR(x(0), -0.001, 1e-9);
  EXPECT_NEAR(x(1), 0.001, 1e-9);
  EXPECT_NEAR(x(2), -0.001, 1e-7);
}

TEST(Update, FirstMinibatchIsUnclippedAndSeedDeterministic) {
  NetParams p = init_params(3, 2, {8, 8}, 12);
  std::mt19937_64 data_rng(12);
  const Batch b = random_batch(p, 256, data_rng, 0.0, 0);
  PpoConfig c;
  NetParams a = p, bb = p;
  Optimizer oa(OptimizerKind::kSgd, p.num_params(), c), ob(OptimizerKind::kSgd, p.num_params(), c);
  std::mt19937_64 ra(99), rb(99);
  const auto sa = update(a, oa, b, c, ra);
  const auto sb = update(bb, ob, b, c, rb);
  EXPECT_FALSE(sa.aborted);
  EXPECT_EQ(sa.first_minibatch_clip_fraction, 0.0);
  EXPECT_EQ(sa.minibatches, 3 * 4);
  EXPECT_TRUE(a == bb);
  EXPECT_FALSE(a == p);
  EXPECT_EQ(sa.policy_loss, sb.policy_loss);
}

TEST(Update, NonFiniteLossRestoresParameters) {
  NetParams p = init_params(3, 2, {4}, 13);
  std::mt19937_64 data_rng(13);
  Batch b = random_batch(p, 128, data_rng, 0.0, 0);
  b.returns(17) = NAN;
  PpoConfig c;
  NetParams q = p;
  Optimizer opt(OptimizerKind::kAdam, p.num_params(), c);
  std::mt19937_64 rng(0);
  const auto stats = update(q, opt, b, c, rng);
  EXPECT_TRUE(stats.aborted);
  EXPECT_FALSE(stats.diagnostic.empty());
  EXPECT_TRUE(q == p);
}

TEST(Update, RejectsBatchSmallerThanMinibatch) {
  NetParams p = init_params(3, 2, {4}, 14);
  std::mt19937_64 rng(14);
  const Batch b = random_batch(p, 10, rng, 0.0, 0);
  PpoConfig c;
  Optimizer opt(OptimizerKind::kSgd, p.num_params(), c);
  EXPECT_THROW(update(p, opt, b, c, rng), std::invalid_argument);
}

TEST(PpoConfig, Validation) {
  PpoConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gamma = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.clip = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.hidden = {64, 0};
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
