#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ahrm/reward_core.hpp"

namespace ahrm::env {

using Vec2 = Eigen::Vector2d;

inline constexpr int kNumPhases = 3;
inline constexpr int kNumObjectives = 3;
inline constexpr int kActionDim = 2;

// Objective indices shared by the environment, the hierarchy and the logs.
enum Objective : int { kAvoid = 0, kManipulate = 1, kTime = 2 };

const char* objective_name(int objective);
int objective_from_name(const std::string& name);

enum class TimeRewardForm {
  kFasterThanLast,  // +1 while t_k < Gamma_k, -1 afterwards (default)
  kLiteral,         // branches as printed: -1 while t_k < Gamma_k, +1 afterwards
  kPenalty,         // -1 on every step except t_k == Gamma_k
};

enum class ObstacleRewardForm {
  kSigned,       // -1 while an obstacle moves, +1 otherwise (default)
  kPenaltyOnly,  // -1 while an obstacle moves, 0 otherwise
};

struct EnvConfig {
  Vec2 center{0.5, 0.5};
  double target_radius = 0.04;
  double pusher_radius = 0.03;
  double obstacle_radius = 0.04;
  double obstacle_ring_radius = 0.18;
  std::vector<double> obstacle_angles_deg{45.0, 135.0, 225.0, 315.0};
  double phase1_radius = 0.30;
  double contact_margin = 0.03;  // R2 = r_t + r_p + contact_margin
  double max_speed = 0.05;       // units per step
  double dt = 0.05;              // seconds per step
  int max_steps = 200;
  Vec2 pusher_start{0.10, 0.10};
  double start_jitter = 0.01;
  TimeRewardForm time_reward = TimeRewardForm::kFasterThanLast;
  ObstacleRewardForm obstacle_reward = ObstacleRewardForm::kSigned;

  double contact_radius() const noexcept { return target_radius + pusher_radius + contact_margin; }
  int num_obstacles() const noexcept { return static_cast<int>(obstacle_angles_deg.size()); }
  int observation_dim() const noexcept { return 8 + 4 * num_obstacles(); }

  /// Throws std::invalid_argument when the geometry invariants fail.
  void validate() const;

  static EnvConfig symmetric();
  /// Three obstacles clustered on the west side, leaving the east open.
  static EnvConfig asymmetric();
};

struct StepEvents {
  bool touched_obstacle = false;
  bool target_moved = false;
  bool success = false;
  bool timeout = false;
  int phase = 1;

  bool terminal() const noexcept { return success || timeout; }
};

struct StepResult {
  std::vector<double> observation;
  reward::ObjectiveVector components;
  StepEvents events;
};

struct EnvState {
  Vec2 pusher_pos = Vec2::Zero();
  Vec2 target_pos = Vec2::Zero();
  Vec2 target_vel = Vec2::Zero();
  std::vector<Vec2> obstacle_pos;
  std::vector<Vec2> obstacle_vel;
  int step_count = 0;
  Vec2 prev_action = Vec2::Zero();
  double prev_d = 0.0;
  double prev_l = 0.0;
  std::vector<int> phase_time;  // t_k this episode
  std::vector<int> gamma;       // Gamma_k from the previous episode
  int phase = 1;
  bool terminated = false;
};

// Reward components. Binary so that every objective has the same magnitude.
double f_obstacle(bool any_obstacle_moving,
                  ObstacleRewardForm form = ObstacleRewardForm::kSigned) noexcept;
double f_manipulation(double d, double l, double d_prev, double l_prev) noexcept;
double f_time(int t_k, int gamma_k, TimeRewardForm form = TimeRewardForm::kFasterThanLast);

int phase_of(const Vec2& pusher_pos, const Vec2& target_pos, const EnvConfig& config);

/// Phase boundaries in the current state: b(1,2) around the table centre and
/// b(2,3) around the (possibly displaced) target.
std::vector<reward::CircleBoundary> phase_boundaries(const Vec2& target_pos,
                                                     const EnvConfig& config);

struct BoundaryDistance {
  int boundary;  // k for b(k, k+1)
  double s;      // positive on the later-phase side
};

BoundaryDistance signed_phase_distance(const Vec2& pusher_pos, const Vec2& target_pos,
                                       const EnvConfig& config);

/// Velocity-controlled disc pusher on the unit table. Contacts are resolved
/// quasi-statically: overlapping discs are translated out along the line of
/// centres, without momentum or rotation.
class PlanarPushEnv {
 public:
  explicit PlanarPushEnv(EnvConfig config = EnvConfig::symmetric());

  std::vector<double> reset(std::uint64_t seed);

  /// Throws InvalidState after the episode has terminated.
  StepResult step(const Vec2& action);

  const EnvConfig& config() const noexcept { return config_; }
  const EnvState& state() const noexcept { return state_; }
  int observation_dim() const noexcept { return config_.observation_dim(); }

  std::vector<double> observation() const;
  std::vector<reward::CircleBoundary> boundaries() const {
    return phase_boundaries(state_.target_pos, config_);
  }

 private:
  void resolve_contacts(std::vector<Vec2>& discs, const std::vector<double>& radii) const;

  EnvConfig config_;
  EnvState state_;
  bool first_episode_ = true;
};

bool outside_table(const Vec2& p) noexcept;

}  // namespace ahrm::env
