#include "ahrm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "ahrm/checkpoint.hpp"

namespace ahrm::harness {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Streams for derive_seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kPolicyStream = 2;
constexpr std::uint64_t kUpdateStream = 3;
constexpr std::uint64_t kResetStreamBase = 1'000'000;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

nlohmann::json assignment_names(const reward::PriorityAssignment& a) {
  nlohmann::json names = nlohmann::json::array();
  for (int obj : a.order()) names.push_back(env::objective_name(obj));
  return names;
}

nlohmann::json event_json(const reward::LifecycleEvent& e) {
  nlohmann::json j;
  j["kind"] = e.kind == reward::LifecycleEvent::Kind::kDetermined ? "determined" : "level_converged";
  j["episode"] = e.episode;
  j["phase"] = e.phase;
  j["visits"] = e.visits;
  j["assignment"] = assignment_names(e.assignment);
  if (e.kind == reward::LifecycleEvent::Kind::kDetermined) {
    j["rbar"] = e.r_bar;
  } else {
    j["level"] = e.level;
    j["tau"] = e.tau;
  }
  return j;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(splitmix64(base) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

ScriptedPusher::ScriptedPusher(const env::EnvConfig& config) : config_(config) {
  config_.validate();
}

ppo::ActResult ScriptedPusher::act(std::span<const double> observation) {
  if (observation.size() < 2) throw std::invalid_argument("observation too short");
  const env::Vec2 pos(observation[0], observation[1]);
  // Line up west of the target first, then drive east until the target leaves
  // the table. The second waypoint lies beyond the edge on purpose.
  const env::Vec2 line_up(config_.pusher_start.x(), config_.center.y());
  const env::Vec2 beyond(2.0, config_.center.y());
  if (waypoint_ == 0 && (pos - line_up).norm() < 1e-9) waypoint_ = 1;
  const env::Vec2 goal = waypoint_ == 0 ? line_up : beyond;
  const env::Vec2 a = ((goal - pos) / config_.max_speed).cwiseMax(-1.0).cwiseMin(1.0);

  ppo::ActResult out;
  out.action = a;
  out.pre_squash = a;
  return out;
}

ppo::ActResult ConstantAction::act(std::span<const double> /*observation*/) {
  ppo::ActResult out;
  out.action = action_;
  out.pre_squash = action_;
  return out;
}

double variant_reward(Variant variant, std::span<const double> components,
                      const env::PlanarPushEnv& env, const reward::MechanismState* mechanism) {
  if (variant == Variant::kLs) {
    double sum = 0.0;
    for (double c : components) sum += c;
    return sum;
  }
  if (mechanism == nullptr) {
    throw std::invalid_argument("hierarchical variants need a mechanism state");
  }
  const auto boundaries = env.boundaries();
  return reward::shaped_reward(components, env.state().pusher_pos, env.state().phase, *mechanism,
                               boundaries);
}

double success_credit(double per_step, int remaining, double gamma) {
  if (remaining <= 0) return 0.0;
  if (gamma == 1.0) return per_step * remaining;
  return per_step * (1.0 - std::pow(gamma, remaining)) / (1.0 - gamma);
}

EpisodeResult run_episode(env::PlanarPushEnv& env, std::uint64_t reset_seed, ActionSource& agent,
                          Variant variant, const reward::MechanismState* mechanism,
                          const EpisodeOptions& options) {
  const bool gated = variant != Variant::kLs;
  if (gated && mechanism == nullptr) {
    throw std::invalid_argument("hierarchical variants need a mechanism state");
  }

  EpisodeResult out;
  if (gated) {
    for (int k = 1; k <= env::kNumPhases; ++k) out.levels.push_back(mechanism->level(k));
  }
  agent.begin_episode();
  std::vector<double> obs = env.reset(reset_seed);
  std::vector<double> running(env::kNumPhases, 0.0);
  int prev_phase = env.state().phase;
  bool prev_touch = false;

  while (true) {
    ppo::ActResult choice = agent.act(obs);
    const env::Vec2 action(choice.action(0), choice.action(1));
    const env::Vec2 target_before = env.state().target_pos;
    env::StepResult res = env.step(action);
    const int phase = res.events.phase;

    out.record.add_step(phase, res.components);
    const double reward = variant_reward(variant, res.components, env, mechanism);
    out.shaped_return += reward;
    out.target_travel += (env.state().target_pos - target_before).norm();
    if (res.events.touched_obstacle && !prev_touch) ++out.obstacle_touches;
    prev_touch = res.events.touched_obstacle;

    bool violated = false;
    if (gated) {
      const int gated_level = mechanism->gated_level(phase);
      if (gated_level > 0) {
        running[phase - 1] +=
            reward::hierarchy_reward(res.components, mechanism->assignment(phase), gated_level);
      }
      if (!res.events.success) {
        if (phase != prev_phase) {
          violated = !reward::constraint_satisfied(running[prev_phase - 1],
                                                   mechanism->gate(prev_phase));
        }
        if (res.events.timeout) {
          violated = violated ||
                     !reward::constraint_satisfied(running[phase - 1], mechanism->gate(phase));
        }
      }
    }

    ppo::TrajectoryStep step;
    step.observation = std::move(obs);
    step.action = choice.action;
    step.pre_squash = choice.pre_squash;
    step.log_prob = choice.log_prob;
    step.value = choice.value;
    step.reward = reward;
    step.phase = phase;
    step.components = res.components;
    step.constraint_violated = violated;
    step.done = violated || res.events.terminal();
    step.truncated = !violated && res.events.timeout;
    if (step.truncated) step.bootstrap_value = agent.value(res.observation);
    if (res.events.success && options.success_credit_gamma) {
      // Every objective counts as met for the rest of the budget.
      const double per_step = gated ? mechanism->level(phase) : env::kNumObjectives;
      step.truncated = true;
      step.bootstrap_value = success_credit(per_step, env.config().max_steps - env.state().step_count,
                                            *options.success_credit_gamma);
    }
    out.trajectory.push_back(std::move(step));

    if (violated) {
      out.terminated_by_constraint = true;
      break;
    }
    if (res.events.terminal()) {
      out.success = res.events.success;
      out.timeout = res.events.timeout;
      break;
    }
    obs = std::move(res.observation);
    prev_phase = phase;
  }
  return out;
}

std::optional<reward::MechanismState> make_mechanism(const RunConfig& config) {
  switch (config.variant) {
    case Variant::kAhrm:
      return reward::MechanismState::adaptive(env::kNumPhases, env::kNumObjectives,
                                              config.mechanism);
    case Variant::kMhrm:
      return reward::MechanismState::fixed(config.mhrm_assignments, config.mechanism);
    case Variant::kFhrm:
      return reward::MechanismState::fixed(
          std::vector<reward::PriorityAssignment>(env::kNumPhases, config.fhrm_assignment),
          config.mechanism);
    case Variant::kLs:
      return std::nullopt;
  }
  return std::nullopt;
}

nlohmann::json mechanism_snapshot(const reward::MechanismState& state) {
  nlohmann::json phases = nlohmann::json::array();
  for (int k = 1; k <= state.num_phases(); ++k) {
    nlohmann::json p;
    p["phase"] = k;
    p["assignment"] = assignment_names(state.assignment(k));
    p["determined"] = state.determined(k);
    p["level"] = state.level(k);
    p["visits"] = state.visits(k);
    nlohmann::json taus = nlohmann::json::array();
    for (int j = 1; j <= state.num_objectives(); ++j) {
      auto tau = state.tau(k, j);
      taus.push_back(tau ? nlohmann::json(*tau) : nlohmann::json(nullptr));
    }
    p["tau"] = taus;
    phases.push_back(p);
  }
  return {{"adaptive", state.is_adaptive()}, {"phases", phases}};
}

std::filesystem::path run_directory(const RunConfig& config) {
  return std::filesystem::path(config.output_dir) /
         (std::string(variant_name(config.variant)) + "_seed" + std::to_string(config.seed));
}

TrainSummary train(const RunConfig& config) {
  config.validate();
  TrainSummary summary;
  summary.run_dir = run_directory(config);
  std::filesystem::create_directories(summary.run_dir);
  write_text(summary.run_dir / "config.json", to_json(config).dump(2) + "\n");

  env::PlanarPushEnv env(config.env);
  ppo::NetParams params = ppo::init_params(env.observation_dim(), env::kActionDim,
                                           config.ppo.hidden, derive_seed(config.seed, kInitStream),
                                           config.ppo.init_log_std);
  ppo::Optimizer optimizer(config.ppo.optimizer, params.num_params(), config.ppo);
  std::mt19937_64 policy_rng(derive_seed(config.seed, kPolicyStream));
  std::mt19937_64 update_rng(derive_seed(config.seed, kUpdateStream));
  std::optional<reward::MechanismState> mechanism = make_mechanism(config);
  const reward::MechanismState* mech = mechanism ? &*mechanism : nullptr;
  PolicyAgent agent(params, ppo::ActMode::kStochastic, policy_rng);

  std::string csv =
      "episode,variant,seed,total_steps,terminated_by_constraint,success,phase1_steps,"
      "phase2_steps,phase3_steps,sum_f1,sum_f2,sum_f3,shaped_return,level_phase1,level_phase2,"
      "level_phase3\n";
  std::vector<reward::LifecycleEvent> events;
  ppo::Trajectory buffer;
  EpisodeOptions options;
  if (config.success_credit) options.success_credit_gamma = config.ppo.gamma;
  const auto horizon = static_cast<std::size_t>(config.ppo.horizon);

  for (int ep = 1; ep <= config.episodes; ++ep) {
    EpisodeResult result = run_episode(env, derive_seed(config.seed, kResetStreamBase + ep), agent,
                                       config.variant, mech, options);
    summary.episodes = ep;
    if (result.success) ++summary.successes;
    if (result.terminated_by_constraint) ++summary.constraint_terminations;

    if (!(config.discard_constraint_episodes && result.terminated_by_constraint)) {
      std::move(result.trajectory.begin(), result.trajectory.end(), std::back_inserter(buffer));
    }
    while (buffer.size() >= horizon) {
      std::span<const ppo::TrajectoryStep> chunk(buffer.data(), horizon);
      // Whole episodes enter the buffer, so the step after a non-terminal
      // chunk end is always present.
      const double last_value =
          chunk.back().done ? 0.0 : ppo::state_value(params, buffer[horizon].observation);
      ppo::Batch batch = ppo::build_batch(chunk, last_value, config.ppo);
      ppo::UpdateStats stats = ppo::update(params, optimizer, batch, config.ppo, update_rng);
      if (stats.aborted) {
        nlohmann::json dump;
        dump["episode"] = ep;
        dump["update"] = summary.updates + 1;
        dump["diagnostic"] = stats.diagnostic;
        if (mech) dump["mechanism"] = mechanism_snapshot(*mech);
        write_text(summary.run_dir / "failure_state.json", dump.dump(2) + "\n");
        ppo::save(params, summary.run_dir / "failure_checkpoint.bin");
        throw std::runtime_error("training aborted at episode " + std::to_string(ep) + ": " +
                                 stats.diagnostic);
      }
      ++summary.updates;
      buffer.erase(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(horizon));
    }

    const reward::EpisodeRecord& rec = result.record;
    csv += std::to_string(ep) + "," + variant_name(config.variant) + "," +
           std::to_string(config.seed) + "," + std::to_string(rec.total_steps()) + "," +
           (result.terminated_by_constraint ? "1" : "0") + "," + (result.success ? "1" : "0");
    for (int k = 1; k <= env::kNumPhases; ++k) csv += "," + std::to_string(rec.steps_in(k));
    for (int i = 0; i < env::kNumObjectives; ++i) csv += "," + fmt(rec.total(i));
    csv += "," + fmt(result.shaped_return);
    for (int k = 0; k < env::kNumPhases; ++k) {
      csv += "," + (result.levels.empty() ? std::string("0") : std::to_string(result.levels[k]));
    }
    csv += "\n";

    if (mechanism) {
      auto new_events = mechanism->end_episode(rec, ep);
      events.insert(events.end(), new_events.begin(), new_events.end());
    }
  }

  write_text(summary.run_dir / "episodes.csv", csv);
  ppo::save(params, summary.run_dir / "checkpoint.bin");

  nlohmann::json pri;
  pri["variant"] = variant_name(config.variant);
  nlohmann::json objectives = nlohmann::json::array();
  for (int i = 0; i < env::kNumObjectives; ++i) objectives.push_back(env::objective_name(i));
  pri["objectives"] = objectives;
  if (!mechanism) {
    pri["status"] = "not applicable";
  } else {
    pri["status"] = mechanism->is_adaptive() ? "adaptive" : "configured";
    nlohmann::json phases = nlohmann::json::object();
    for (int k = 1; k <= env::kNumPhases; ++k) {
      nlohmann::json p;
      p["determined_at_episode"] = nullptr;
      p["visits_at_determination"] = nullptr;
      p["assignment"] = assignment_names(mechanism->assignment(k));
      p["rbar"] = nullptr;
      for (const auto& e : events) {
        if (e.phase == k && e.kind == reward::LifecycleEvent::Kind::kDetermined) {
          p["determined_at_episode"] = e.episode;
          p["visits_at_determination"] = e.visits;
          p["assignment"] = assignment_names(e.assignment);
          p["rbar"] = e.r_bar;
          break;
        }
      }
      p["final_assignment"] = assignment_names(mechanism->assignment(k));
      p["final_level"] = mechanism->level(k);
      nlohmann::json taus = nlohmann::json::array();
      for (int j = 1; j <= env::kNumObjectives; ++j) {
        auto tau = mechanism->tau(k, j);
        taus.push_back(tau ? nlohmann::json(*tau) : nlohmann::json(nullptr));
      }
      p["tau"] = taus;
      p["visits"] = mechanism->visits(k);
      phases["phase" + std::to_string(k)] = p;
    }
    pri["phases"] = phases;
    nlohmann::json ev = nlohmann::json::array();
    for (const auto& e : events) ev.push_back(event_json(e));
    pri["events"] = ev;
  }
  write_text(summary.run_dir / "priorities.json", pri.dump(2) + "\n");
  return summary;
}

}  // namespace ahrm::harness
