#include "ahrm/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ahrm::reward {

void MechanismParams::validate() const {
  if (visit_threshold < 1) throw std::invalid_argument("visit_threshold must be >= 1");
  if (window < 2) throw std::invalid_argument("window must be >= 2");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  transition.validate();
}

MechanismState::MechanismState(int num_phases, int num_objectives, MechanismParams params,
                               std::vector<PriorityAssignment> initial, bool adaptive)
    : num_objectives_(num_objectives),
      params_(params),
      adaptive_(adaptive),
      table_(num_phases, num_objectives) {
  params_.validate();
  if (num_phases < 1 || num_objectives < 1) {
    throw std::invalid_argument("need at least one phase and one objective");
  }
  if (static_cast<int>(initial.size()) != num_phases) {
    throw std::invalid_argument("one initial assignment per phase required");
  }
  phases_.resize(num_phases);
  for (int k = 0; k < num_phases; ++k) {
    if (initial[k].size() != num_objectives) {
      throw std::invalid_argument("initial assignment size does not match objective count");
    }
    auto& ps = phases_[k];
    ps.assignment = std::move(initial[k]);
    ps.determined = !adaptive;
    ps.tau.assign(num_objectives, std::nullopt);
    ps.tau_source_end.assign(num_objectives, 0);
    ps.history.assign(num_objectives, {});
  }
}

MechanismState MechanismState::adaptive(int num_phases, int num_objectives,
                                        MechanismParams params) {
  std::vector<PriorityAssignment> initial(num_phases,
                                          PriorityAssignment::identity(num_objectives));
  return MechanismState(num_phases, num_objectives, params, std::move(initial), true);
}

MechanismState MechanismState::fixed(std::vector<PriorityAssignment> assignments,
                                     MechanismParams params) {
  if (assignments.empty()) throw std::invalid_argument("need at least one phase");
  int n = assignments.front().size();
  int k = static_cast<int>(assignments.size());
  return MechanismState(k, n, params, std::move(assignments), false);
}

MechanismState::PhaseState& MechanismState::phase_state(int phase) {
  if (phase < 1 || phase > num_phases()) {
    throw std::invalid_argument("phase " + std::to_string(phase) + " out of range");
  }
  return phases_[phase - 1];
}

const MechanismState::PhaseState& MechanismState::phase_state(int phase) const {
  if (phase < 1 || phase > num_phases()) {
    throw std::invalid_argument("phase " + std::to_string(phase) + " out of range");
  }
  return phases_[phase - 1];
}

const PriorityAssignment& MechanismState::assignment(int phase) const {
  return phase_state(phase).assignment;
}

int MechanismState::level(int phase) const { return phase_state(phase).level; }

std::optional<double> MechanismState::tau(int phase, int level) const {
  const auto& ps = phase_state(phase);
  if (level < 1 || level > num_objectives_) throw std::invalid_argument("level out of range");
  return ps.tau[level - 1];
}

int MechanismState::gated_level(int phase) const {
  const auto& ps = phase_state(phase);
  if (ps.level < 2 || !ps.tau[ps.level - 2].has_value()) return 0;
  return ps.level - 1;
}

std::optional<double> MechanismState::gate(int phase) const {
  int gated = gated_level(phase);
  if (gated == 0) return std::nullopt;
  return phase_state(phase).tau[gated - 1];
}

int MechanismState::visits(int phase) const { return table_.visits(phase); }

bool MechanismState::determined(int phase) const { return phase_state(phase).determined; }

std::span<const double> MechanismState::history(int phase, int level) const {
  const auto& ps = phase_state(phase);
  if (level < 1 || level > num_objectives_) throw std::invalid_argument("level out of range");
  return ps.history[level - 1];
}

double MechanismState::level_sum(std::span<const double> objective_sums,
                                 const PriorityAssignment& assignment, int level) const {
  return hierarchy_reward(objective_sums, assignment, level);
}

void MechanismState::rebuild_after_reassignment(int phase) {
  // Sums recorded under the old order are re-expressed under the new one
  // from the same episodes, so gates and convergence windows stay coherent.
  auto& ps = phase_state(phase);
  const auto& entries = table_.entries(phase);
  for (int level = 1; level <= num_objectives_; ++level) {
    auto& hist = ps.history[level - 1];
    std::size_t n = hist.size();
    hist.clear();
    for (std::size_t p = entries.size() - n; p < entries.size(); ++p) {
      hist.push_back(level_sum(entries[p], ps.assignment, level));
    }
    if (ps.tau[level - 1].has_value()) {
      int end = ps.tau_source_end[level - 1];
      int begin = std::max(0, end - params_.window);
      std::vector<double> sums;
      for (int p = begin; p < end; ++p) sums.push_back(level_sum(entries[p], ps.assignment, level));
      ps.tau[level - 1] = update_constraint_threshold(sums);
    }
  }
}

std::vector<LifecycleEvent> MechanismState::end_episode(const EpisodeRecord& episode,
                                                        int episode_index) {
  if (episode.num_phases() != num_phases() || episode.num_objectives() != num_objectives_) {
    throw std::invalid_argument("episode record shape does not match mechanism");
  }
  record_episode_returns(episode, table_);

  std::vector<LifecycleEvent> events;
  const std::size_t keep = 2 * static_cast<std::size_t>(params_.window);
  for (int k = 1; k <= num_phases(); ++k) {
    if (!episode.visited(k)) continue;
    auto& ps = phase_state(k);
    const int visits = table_.visits(k);

    auto& hist = ps.history[ps.level - 1];
    hist.push_back(level_sum(episode.sums(k), ps.assignment, ps.level));
    if (hist.size() > keep) hist.erase(hist.begin(), hist.end() - keep);

    const bool first_time = !ps.determined && visits == params_.visit_threshold;
    const bool periodic = params_.redetermine && visits % params_.visit_threshold == 0;
    if (adaptive_ && (first_time || periodic)) {
      auto r_bar = average_returns(table_, k, params_.visit_threshold);
      auto order = determine_priorities(r_bar);
      ps.determined = true;
      bool changed = !(order == ps.assignment);
      ps.assignment = order;
      if (changed) rebuild_after_reassignment(k);
      events.push_back({LifecycleEvent::Kind::kDetermined, episode_index, k, visits,
                        ps.assignment, std::move(r_bar)});
    }

    const auto& current = ps.history[ps.level - 1];
    if (!ps.tau[ps.level - 1].has_value() &&
        level_converged(current, params_.window, params_.tol)) {
      std::span<const double> recent(current.data() + current.size() - params_.window,
                                     params_.window);
      double tau = update_constraint_threshold(recent);
      ps.tau[ps.level - 1] = tau;
      ps.tau_source_end[ps.level - 1] = visits;
      LifecycleEvent ev{LifecycleEvent::Kind::kLevelConverged, episode_index, k, visits,
                        ps.assignment, {}};
      ev.level = ps.level;
      ev.tau = tau;
      events.push_back(std::move(ev));
      if (ps.level < num_objectives_) ++ps.level;
    }
  }
  return events;
}

void MechanismState::force_level(int phase, int level, std::optional<double> gate_tau) {
  auto& ps = phase_state(phase);
  if (level < 1 || level > num_objectives_) throw std::invalid_argument("level out of range");
  ps.level = level;
  if (level >= 2) {
    ps.tau[level - 2] = gate_tau;
    ps.tau_source_end[level - 2] = table_.visits(phase);
  }
}

double shaped_reward(std::span<const double> components, const Eigen::Vector2d& position,
                     int phase, const MechanismState& state,
                     std::span<const CircleBoundary> boundaries) {
  const auto& params = state.params();
  const double own =
      hierarchy_reward(components, state.assignment(phase), state.level(phase));

  // Candidate boundaries: b(phase-1, phase) and b(phase, phase+1).
  int best_lower = 0;
  double best_s = 0.0;
  for (int lower : {phase - 1, phase}) {
    if (lower < 1 || lower >= state.num_phases()) continue;
    if (lower - 1 >= static_cast<int>(boundaries.size())) continue;
    double s = boundary_distance(position, boundaries[lower - 1]);
    if (std::abs(s) > params.transition.delta) continue;
    if (best_lower == 0 || std::abs(s) < std::abs(best_s)) {
      best_lower = lower;
      best_s = s;
    }
  }
  if (best_lower == 0) return own;

  const int upper = best_lower + 1;
  const double reward_old =
      best_lower == phase
          ? own
          : hierarchy_reward(components, state.assignment(best_lower), state.level(best_lower));
  const double reward_new =
      upper == phase
          ? own
          : hierarchy_reward(components, state.assignment(upper), state.level(upper));
  return blended_reward(reward_old, reward_new, transition_weight(best_s, params.transition));
}

}  // namespace ahrm::reward
