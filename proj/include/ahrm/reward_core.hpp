#pragma once

#include <Eigen/Core>

#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace ahrm::reward {

// Raw per-objective reward components f_i for one timestep.
using ObjectiveVector = std::vector<double>;

/// Ordered mapping priority level -> objective index. Objective indices are
/// zero-based; priority levels are one-based (level 1 is the highest).
class PriorityAssignment {
 public:
  PriorityAssignment() = default;

  /// Throws std::invalid_argument unless `order` is a permutation of 0..n-1.
  explicit PriorityAssignment(std::vector<int> order);

  static PriorityAssignment identity(int num_objectives);

  int size() const noexcept { return static_cast<int>(order_.size()); }

  /// Objective holding priority `level` (1-based).
  int objective_at(int level) const;

  /// Priority level (1-based) held by `objective`.
  int level_of(int objective) const;

  const std::vector<int>& order() const noexcept { return order_; }

  bool operator==(const PriorityAssignment&) const = default;

 private:
  std::vector<int> order_;
};

/// Sum of the components of the `level` highest-priority objectives.
double hierarchy_reward(std::span<const double> components,
                        const PriorityAssignment& assignment, int level);

/// Mean of the most recent episode sums of a converged level. Throws
/// InvalidState on empty history.
double update_constraint_threshold(std::span<const double> history);

/// Hard priority gate: an unset threshold never blocks.
bool constraint_satisfied(double running_sum, std::optional<double> tau) noexcept;

/// Two-window relative-mean convergence test. Needs at least 2*window
/// entries; compares the last window against the one before it.
bool level_converged(std::span<const double> series, int window, double tol);

/// Per-phase, per-objective raw component sums and phase durations for one
/// episode. Phases are 1-based.
class EpisodeRecord {
 public:
  EpisodeRecord(int num_phases, int num_objectives);

  void add_step(int phase, std::span<const double> components);

  int num_phases() const noexcept { return static_cast<int>(phase_steps_.size()); }
  int num_objectives() const noexcept { return num_objectives_; }

  bool visited(int phase) const { return steps_in(phase) > 0; }
  int steps_in(int phase) const;
  std::span<const double> sums(int phase) const;

  int total_steps() const noexcept;
  double total(int objective) const;

 private:
  int num_objectives_;
  std::vector<int> phase_steps_;
  std::vector<std::vector<double>> sums_;
};

/// Episode sums r_{i,p}^k for every episode that visited phase k.
class ObjectiveReturnTable {
 public:
  ObjectiveReturnTable(int num_phases, int num_objectives);

  void append(int phase, std::vector<double> objective_sums);

  int num_phases() const noexcept { return static_cast<int>(entries_.size()); }
  int num_objectives() const noexcept { return num_objectives_; }

  /// e_k
  int visits(int phase) const;
  const std::vector<std::vector<double>>& entries(int phase) const;

 private:
  int num_objectives_;
  std::vector<std::vector<std::vector<double>>> entries_;
};

/// Appends one entry per visited phase; phases not visited are untouched.
void record_episode_returns(const EpisodeRecord& episode, ObjectiveReturnTable& table);

/// Per-objective mean over the most recent `max_entries` entries of a phase.
/// Throws InvalidState when the phase has never been visited.
std::vector<double> average_returns(const ObjectiveReturnTable& table, int phase,
                                    int max_entries);

/// Orders objectives by |r_bar| descending, lower index first on ties.
PriorityAssignment determine_priorities(std::span<const double> r_bar);

struct TransitionSpec {
  double alpha = 100.0;
  double delta = 0.05;

  /// Throws std::invalid_argument unless both are finite and positive.
  void validate() const;
};

/// Weight of the later phase's reward. `signed_distance` is negative on the
/// earlier-phase side of the boundary.
double transition_weight(double signed_distance, const TransitionSpec& spec);

double blended_reward(double reward_old, double reward_new, double w) noexcept;

struct CircleBoundary {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
};

/// R - |position - center|: positive inside the circle (the later phase).
double boundary_distance(const Eigen::Vector2d& position, const CircleBoundary& boundary);

}  // namespace ahrm::reward
