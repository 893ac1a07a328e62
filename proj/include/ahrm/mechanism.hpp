#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

#include "ahrm/reward_core.hpp"

namespace ahrm::reward {

struct MechanismParams {
  int visit_threshold = 30;  // P: visits before priorities of a phase are determined
  int window = 10;           // W: episodes per convergence window and per threshold
  double tol = 0.05;
  bool redetermine = false;  // re-sort every P visits instead of freezing
  TransitionSpec transition;

  void validate() const;
};

struct LifecycleEvent {
  enum class Kind { kDetermined, kLevelConverged };

  Kind kind;
  int episode;
  int phase;
  int visits;
  PriorityAssignment assignment;
  std::vector<double> r_bar;  // kDetermined only
  int level = 0;              // kLevelConverged only
  double tau = 0.0;           // kLevelConverged only
};

/// Per-phase hierarchy bookkeeping: assignments, the level currently being
/// learned, constraint thresholds and visit counts.
///
/// An adaptive state starts from identity assignments and sorts each phase's
/// objectives once that phase has been visited P times. A non-adaptive state
/// keeps its configured assignments for the whole run; levels and thresholds
/// still advance the same way.
class MechanismState {
 public:
  MechanismState(int num_phases, int num_objectives, MechanismParams params,
                 std::vector<PriorityAssignment> initial, bool adaptive);

  static MechanismState adaptive(int num_phases, int num_objectives, MechanismParams params);
  static MechanismState fixed(std::vector<PriorityAssignment> assignments,
                              MechanismParams params);

  int num_phases() const noexcept { return static_cast<int>(phases_.size()); }
  int num_objectives() const noexcept { return num_objectives_; }
  bool is_adaptive() const noexcept { return adaptive_; }
  const MechanismParams& params() const noexcept { return params_; }

  const PriorityAssignment& assignment(int phase) const;
  int level(int phase) const;
  std::optional<double> tau(int phase, int level) const;

  /// Level whose running sum gates the current episode in `phase` (j - 1),
  /// or 0 when nothing gates it yet.
  int gated_level(int phase) const;
  std::optional<double> gate(int phase) const;

  int visits(int phase) const;
  bool determined(int phase) const;
  std::span<const double> history(int phase, int level) const;
  const ObjectiveReturnTable& returns() const noexcept { return table_; }

  /// Episode-end bookkeeping: records returns, determines priorities when a
  /// phase first reaches P visits (adaptive only) and advances converged
  /// levels, installing their thresholds.
  std::vector<LifecycleEvent> end_episode(const EpisodeRecord& episode, int episode_index);

  /// Test hook: installs a threshold and level directly.
  void force_level(int phase, int level, std::optional<double> gate_tau);

 private:
  struct PhaseState {
    PriorityAssignment assignment;
    int level = 1;
    bool determined = false;
    std::vector<std::optional<double>> tau;
    // Number of table entries at the moment each level converged.
    std::vector<int> tau_source_end;
    std::vector<std::vector<double>> history;
  };

  PhaseState& phase_state(int phase);
  const PhaseState& phase_state(int phase) const;
  double level_sum(std::span<const double> objective_sums, const PriorityAssignment& assignment,
                   int level) const;
  void rebuild_after_reassignment(int phase);

  int num_objectives_;
  MechanismParams params_;
  bool adaptive_;
  std::vector<PhaseState> phases_;
  ObjectiveReturnTable table_;
};

/// Scalar reward for one step: the current phase's hierarchy reward, blended
/// with the neighbouring phase's when the position lies within delta of a
/// shared boundary. boundaries[k - 1] separates phase k from phase k + 1.
double shaped_reward(std::span<const double> components, const Eigen::Vector2d& position,
                     int phase, const MechanismState& state,
                     std::span<const CircleBoundary> boundaries);

}  // namespace ahrm::reward
