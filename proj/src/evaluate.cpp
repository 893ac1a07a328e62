#include <cmath>
#include <stdexcept>

#include "ahrm/checkpoint.hpp"
#include "ahrm/harness.hpp"

namespace ahrm::harness {

namespace {

void mean_std(const std::vector<double>& xs, double& mean, double& stdev) {
  mean = 0.0;
  stdev = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  for (double x : xs) stdev += (x - mean) * (x - mean);
  stdev = std::sqrt(stdev / static_cast<double>(xs.size()));
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  return {{"n_evals", r.n_evals},
          {"successes", r.successes},
          {"success_rate", r.success_rate},
          {"obstacle_touches", r.obstacle_touches},
          {"time_to_success_mean", r.time_to_success_mean},
          {"time_to_success_std", r.time_to_success_std},
          {"travel_length_mean", r.travel_length_mean},
          {"travel_length_std", r.travel_length_std}};
}

EvalReport eval_report_from_json(const nlohmann::json& doc) {
  EvalReport r;
  try {
    r.n_evals = doc.at("n_evals").get<int>();
    r.successes = doc.at("successes").get<int>();
    r.success_rate = doc.at("success_rate").get<double>();
    r.obstacle_touches = doc.at("obstacle_touches").get<int>();
    r.time_to_success_mean = doc.at("time_to_success_mean").get<double>();
    r.time_to_success_std = doc.at("time_to_success_std").get<double>();
    r.travel_length_mean = doc.at("travel_length_mean").get<double>();
    r.travel_length_std = doc.at("travel_length_std").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed eval report: ") + e.what());
  }
  if (r.n_evals < 0 || r.successes < 0 || r.successes > r.n_evals) {
    throw std::invalid_argument("eval report counts are inconsistent");
  }
  return r;
}

EvalReport evaluate_policy(ActionSource& agent, const env::EnvConfig& config, int n,
                           std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  env::PlanarPushEnv env(config);
  std::vector<double> times;
  std::vector<double> travels;
  EvalReport report;
  report.n_evals = n;
  for (int i = 0; i < n; ++i) {
    agent.begin_episode();
    std::vector<double> obs = env.reset(derive_seed(seed, static_cast<std::uint64_t>(i)));
    double travel = 0.0;
    bool prev_touch = false;
    while (true) {
      ppo::ActResult choice = agent.act(obs);
      const env::Vec2 before = env.state().target_pos;
      env::StepResult res = env.step(env::Vec2(choice.action(0), choice.action(1)));
      travel += (env.state().target_pos - before).norm();
      if (res.events.touched_obstacle && !prev_touch) ++report.obstacle_touches;
      prev_touch = res.events.touched_obstacle;
      if (res.events.terminal()) {
        if (res.events.success) {
          ++report.successes;
          times.push_back(env.state().step_count * config.dt);
        }
        break;
      }
      obs = std::move(res.observation);
    }
    travels.push_back(travel);
  }
  report.success_rate = static_cast<double>(report.successes) / n;
  mean_std(times, report.time_to_success_mean, report.time_to_success_std);
  mean_std(travels, report.travel_length_mean, report.travel_length_std);
  return report;
}

EvalReport evaluate(const std::filesystem::path& checkpoint, const env::EnvConfig& config, int n,
                    std::uint64_t seed) {
  const ppo::NetParams params =
      ppo::load(checkpoint, config.observation_dim(), env::kActionDim);
  std::mt19937_64 unused(0);
  PolicyAgent agent(params, ppo::ActMode::kDeterministic, unused);
  return evaluate_policy(agent, config, n, seed);
}

}  // namespace ahrm::harness
