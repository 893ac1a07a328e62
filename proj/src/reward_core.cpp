#include "ahrm/reward_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ahrm/errors.hpp"

namespace ahrm::reward {

namespace {

double mean_of(std::span<const double> values) {
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

void check_phase(int phase, int num_phases) {
  if (phase < 1 || phase > num_phases) {
    throw std::invalid_argument("phase " + std::to_string(phase) + " outside [1, " +
                                std::to_string(num_phases) + "]");
  }
}

}  // namespace

PriorityAssignment::PriorityAssignment(std::vector<int> order) : order_(std::move(order)) {
  std::vector<bool> seen(order_.size(), false);
  for (int objective : order_) {
    if (objective < 0 || objective >= static_cast<int>(order_.size()) || seen[objective]) {
      throw std::invalid_argument("priority order is not a permutation");
    }
    seen[objective] = true;
  }
}

PriorityAssignment PriorityAssignment::identity(int num_objectives) {
  if (num_objectives < 1) throw std::invalid_argument("need at least one objective");
  std::vector<int> order(num_objectives);
  std::iota(order.begin(), order.end(), 0);
  return PriorityAssignment(std::move(order));
}

int PriorityAssignment::objective_at(int level) const {
  if (level < 1 || level > size()) {
    throw std::invalid_argument("priority level " + std::to_string(level) + " outside [1, " +
                                std::to_string(size()) + "]");
  }
  return order_[level - 1];
}

int PriorityAssignment::level_of(int objective) const {
  auto it = std::find(order_.begin(), order_.end(), objective);
  if (it == order_.end()) throw std::invalid_argument("unknown objective index");
  return static_cast<int>(it - order_.begin()) + 1;
}

double hierarchy_reward(std::span<const double> components,
                        const PriorityAssignment& assignment, int level) {
  if (static_cast<int>(components.size()) != assignment.size()) {
    throw std::invalid_argument("component count does not match assignment");
  }
  if (level < 1 || level > assignment.size()) {
    throw std::invalid_argument("hierarchy level " + std::to_string(level) + " outside [1, " +
                                std::to_string(assignment.size()) + "]");
  }
  double total = 0.0;
  for (int m = 1; m <= level; ++m) total += components[assignment.objective_at(m)];
  return total;
}

double update_constraint_threshold(std::span<const double> history) {
  if (history.empty()) {
    throw InvalidState("constraint threshold requested before any converged episodes");
  }
  return mean_of(history);
}

bool constraint_satisfied(double running_sum, std::optional<double> tau) noexcept {
  return !tau.has_value() || running_sum >= *tau;
}

bool level_converged(std::span<const double> series, int window, double tol) {
  if (window < 2) throw std::invalid_argument("convergence window must be >= 2");
  if (!(tol > 0.0)) throw std::invalid_argument("convergence tolerance must be > 0");
  if (series.size() < 2 * static_cast<std::size_t>(window)) return false;
  auto recent = series.last(window);
  auto previous = series.subspan(series.size() - 2 * window, window);
  double prev_mean = mean_of(previous);
  return std::abs(mean_of(recent) - prev_mean) <= tol * std::max(1.0, std::abs(prev_mean));
}

EpisodeRecord::EpisodeRecord(int num_phases, int num_objectives)
    : num_objectives_(num_objectives),
      phase_steps_(num_phases, 0),
      sums_(num_phases, std::vector<double>(num_objectives, 0.0)) {}

void EpisodeRecord::add_step(int phase, std::span<const double> components) {
  check_phase(phase, num_phases());
  if (static_cast<int>(components.size()) != num_objectives_) {
    throw std::invalid_argument("component count does not match episode record");
  }
  ++phase_steps_[phase - 1];
  auto& sums = sums_[phase - 1];
  for (int i = 0; i < num_objectives_; ++i) sums[i] += components[i];
}

int EpisodeRecord::steps_in(int phase) const {
  check_phase(phase, num_phases());
  return phase_steps_[phase - 1];
}

std::span<const double> EpisodeRecord::sums(int phase) const {
  check_phase(phase, num_phases());
  return sums_[phase - 1];
}

int EpisodeRecord::total_steps() const noexcept {
  return std::accumulate(phase_steps_.begin(), phase_steps_.end(), 0);
}

double EpisodeRecord::total(int objective) const {
  double total = 0.0;
  for (const auto& sums : sums_) total += sums.at(objective);
  return total;
}

ObjectiveReturnTable::ObjectiveReturnTable(int num_phases, int num_objectives)
    : num_objectives_(num_objectives), entries_(num_phases) {}

void ObjectiveReturnTable::append(int phase, std::vector<double> objective_sums) {
  check_phase(phase, num_phases());
  if (static_cast<int>(objective_sums.size()) != num_objectives_) {
    throw std::invalid_argument("objective sum count does not match table");
  }
  for (double v : objective_sums) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite objective return");
  }
  entries_[phase - 1].push_back(std::move(objective_sums));
}

int ObjectiveReturnTable::visits(int phase) const {
  check_phase(phase, num_phases());
  return static_cast<int>(entries_[phase - 1].size());
}

const std::vector<std::vector<double>>& ObjectiveReturnTable::entries(int phase) const {
  check_phase(phase, num_phases());
  return entries_[phase - 1];
}

void record_episode_returns(const EpisodeRecord& episode, ObjectiveReturnTable& table) {
  for (int k = 1; k <= episode.num_phases(); ++k) {
    if (!episode.visited(k)) continue;
    auto sums = episode.sums(k);
    table.append(k, std::vector<double>(sums.begin(), sums.end()));
  }
}

std::vector<double> average_returns(const ObjectiveReturnTable& table, int phase,
                                    int max_entries) {
  const auto& entries = table.entries(phase);
  if (entries.empty()) {
    throw InvalidState("phase " + std::to_string(phase) + " has no recorded visits");
  }
  if (max_entries < 1) throw std::invalid_argument("max_entries must be positive");
  std::size_t count = std::min<std::size_t>(entries.size(), max_entries);
  std::vector<double> mean(table.num_objectives(), 0.0);
  for (std::size_t p = entries.size() - count; p < entries.size(); ++p) {
    for (int i = 0; i < table.num_objectives(); ++i) mean[i] += entries[p][i];
  }
  for (double& v : mean) v /= static_cast<double>(count);
  return mean;
}

PriorityAssignment determine_priorities(std::span<const double> r_bar) {
  std::vector<int> order(r_bar.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(r_bar[a]) > std::abs(r_bar[b]);
  });
  return PriorityAssignment(std::move(order));
}

void TransitionSpec::validate() const {
  if (!std::isfinite(alpha) || alpha <= 0.0) {
    throw std::invalid_argument("transition alpha must be finite and positive");
  }
  if (!std::isfinite(delta) || delta <= 0.0) {
    throw std::invalid_argument("transition delta must be finite and positive");
  }
}

double transition_weight(double signed_distance, const TransitionSpec& spec) {
  if (signed_distance < -spec.delta) return 0.0;
  if (signed_distance > spec.delta) return 1.0;
  return std::clamp(0.5 * (1.0 + std::tanh(spec.alpha * signed_distance)), 0.0, 1.0);
}

double blended_reward(double reward_old, double reward_new, double w) noexcept {
  // Exact endpoints: (1 - w) * a + w * b can round away from a or b.
  if (w == 0.0) return reward_old;
  if (w == 1.0) return reward_new;
  return (1.0 - w) * reward_old + w * reward_new;
}

double boundary_distance(const Eigen::Vector2d& position, const CircleBoundary& boundary) {
  return boundary.radius - (position - boundary.center).norm();
}

}  // namespace ahrm::reward
