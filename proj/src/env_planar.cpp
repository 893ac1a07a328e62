#include "ahrm/env_planar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "ahrm/errors.hpp"

namespace ahrm::env {

namespace {

constexpr int kMaxContactPasses = 200;
constexpr double kOverlapEps = 1e-12;

Vec2 ring_point(const Vec2& center, double radius, double angle_deg) {
  double a = angle_deg * std::numbers::pi / 180.0;
  return center + radius * Vec2(std::cos(a), std::sin(a));
}

}  // namespace

const char* objective_name(int objective) {
  switch (objective) {
    case kAvoid: return "avoid";
    case kManipulate: return "manip";
    case kTime: return "time";
  }
  throw std::invalid_argument("unknown objective index");
}

int objective_from_name(const std::string& name) {
  for (int i = 0; i < kNumObjectives; ++i) {
    if (name == objective_name(i)) return i;
  }
  throw std::invalid_argument("unknown objective name '" + name + "'");
}

void EnvConfig::validate() const {
  auto positive = [](double v, const char* what) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw std::invalid_argument(std::string(what) + " must be finite and positive");
    }
  };
  positive(target_radius, "target_radius");
  positive(pusher_radius, "pusher_radius");
  positive(obstacle_radius, "obstacle_radius");
  positive(obstacle_ring_radius, "obstacle_ring_radius");
  positive(phase1_radius, "phase1_radius");
  positive(max_speed, "max_speed");
  positive(dt, "dt");
  if (contact_margin < 0.0) throw std::invalid_argument("contact_margin must be >= 0");
  if (start_jitter < 0.0) throw std::invalid_argument("start_jitter must be >= 0");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  double edge = std::min({center.x(), center.y(), 1.0 - center.x(), 1.0 - center.y()});
  if (!(contact_radius() < phase1_radius && phase1_radius < edge)) {
    throw std::invalid_argument("phase radii must satisfy R2 < R1 < distance to table edge");
  }
  std::vector<Vec2> obstacles;
  for (double angle : obstacle_angles_deg) {
    obstacles.push_back(ring_point(center, obstacle_ring_radius, angle));
  }
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    if ((obstacles[i] - center).norm() < obstacle_radius + target_radius) {
      throw std::invalid_argument("obstacle overlaps the target");
    }
    for (std::size_t j = i + 1; j < obstacles.size(); ++j) {
      if ((obstacles[i] - obstacles[j]).norm() < 2.0 * obstacle_radius) {
        throw std::invalid_argument("obstacles overlap each other");
      }
    }
  }
}

EnvConfig EnvConfig::symmetric() { return EnvConfig{}; }

EnvConfig EnvConfig::asymmetric() {
  EnvConfig config;
  config.obstacle_angles_deg = {135.0, 180.0, 225.0};
  return config;
}

double f_obstacle(bool any_obstacle_moving, ObstacleRewardForm form) noexcept {
  if (any_obstacle_moving) return -1.0;
  return form == ObstacleRewardForm::kPenaltyOnly ? 0.0 : 1.0;
}

double f_manipulation(double d, double l, double d_prev, double l_prev) noexcept {
  return (d - l) > (d_prev - l_prev) ? 1.0 : -1.0;
}

double f_time(int t_k, int gamma_k, TimeRewardForm form) {
  if (t_k < 1 || gamma_k < 1) throw std::invalid_argument("phase times must be >= 1");
  const bool faster = t_k < gamma_k;
  if (form == TimeRewardForm::kLiteral) return faster ? -1.0 : 1.0;
  if (form == TimeRewardForm::kPenalty) return t_k == gamma_k ? 1.0 : -1.0;
  return faster ? 1.0 : -1.0;
}

int phase_of(const Vec2& pusher_pos, const Vec2& target_pos, const EnvConfig& config) {
  if ((pusher_pos - target_pos).norm() <= config.contact_radius()) return 3;
  if ((pusher_pos - config.center).norm() <= config.phase1_radius) return 2;
  return 1;
}

std::vector<reward::CircleBoundary> phase_boundaries(const Vec2& target_pos,
                                                     const EnvConfig& config) {
  return {{config.center, config.phase1_radius}, {target_pos, config.contact_radius()}};
}

BoundaryDistance signed_phase_distance(const Vec2& pusher_pos, const Vec2& target_pos,
                                       const EnvConfig& config) {
  auto boundaries = phase_boundaries(target_pos, config);
  BoundaryDistance best{1, reward::boundary_distance(pusher_pos, boundaries[0])};
  double s23 = reward::boundary_distance(pusher_pos, boundaries[1]);
  if (std::abs(s23) < std::abs(best.s)) best = {2, s23};
  return best;
}

bool outside_table(const Vec2& p) noexcept {
  return p.x() < 0.0 || p.x() > 1.0 || p.y() < 0.0 || p.y() > 1.0;
}

PlanarPushEnv::PlanarPushEnv(EnvConfig config) : config_(std::move(config)) {
  config_.validate();
  state_.phase_time.assign(kNumPhases, 0);
  state_.gamma.assign(kNumPhases, config_.max_steps);
  state_.terminated = true;
}

std::vector<double> PlanarPushEnv::reset(std::uint64_t seed) {
  if (first_episode_) {
    state_.gamma.assign(kNumPhases, config_.max_steps);
    first_episode_ = false;
  } else {
    for (int k = 0; k < kNumPhases; ++k) {
      if (state_.phase_time[k] > 0) state_.gamma[k] = state_.phase_time[k];
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-config_.start_jitter, config_.start_jitter);
  const double jx = jitter(rng);
  const double jy = jitter(rng);

  state_.pusher_pos = config_.pusher_start + Vec2(jx, jy);
  state_.target_pos = config_.center;
  state_.target_vel.setZero();
  state_.obstacle_pos.clear();
  for (double angle : config_.obstacle_angles_deg) {
    state_.obstacle_pos.push_back(ring_point(config_.center, config_.obstacle_ring_radius, angle));
  }
  state_.obstacle_vel.assign(state_.obstacle_pos.size(), Vec2::Zero());
  state_.step_count = 0;
  state_.prev_action.setZero();
  state_.prev_d = (state_.target_pos - config_.center).norm();
  state_.prev_l = (state_.pusher_pos - state_.target_pos).norm();
  state_.phase_time.assign(kNumPhases, 0);
  state_.phase = phase_of(state_.pusher_pos, state_.target_pos, config_);
  state_.terminated = false;
  return observation();
}

std::vector<double> PlanarPushEnv::observation() const {
  std::vector<double> obs;
  obs.reserve(observation_dim());
  auto put = [&](const Vec2& v) {
    obs.push_back(v.x());
    obs.push_back(v.y());
  };
  put(state_.pusher_pos);
  put(state_.target_pos);
  put(state_.target_vel);
  for (const auto& p : state_.obstacle_pos) put(p);
  for (const auto& v : state_.obstacle_vel) put(v);
  put(state_.prev_action);
  return obs;
}

void PlanarPushEnv::resolve_contacts(std::vector<Vec2>& discs,
                                     const std::vector<double>& radii) const {
  // Index 0 is the pusher, which is kinematic. `hops` counts contacts from
  // the pusher; a disc is only ever pushed by a disc closer to the pusher.
  constexpr int kUnmoved = std::numeric_limits<int>::max();
  const std::size_t n = discs.size();
  std::vector<int> hops(n, kUnmoved);
  hops[0] = 0;

  for (int pass = 0; pass < kMaxContactPasses; ++pass) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (hops[i] == kUnmoved && hops[j] == kUnmoved) continue;
        Vec2 delta = discs[j] - discs[i];
        double dist = delta.norm();
        double penetration = radii[i] + radii[j] - dist;
        if (penetration <= kOverlapEps) continue;
        Vec2 dir = dist > 1e-12 ? Vec2(delta / dist) : Vec2(1.0, 0.0);
        if (hops[i] < hops[j]) {
          discs[j] += dir * penetration;
          hops[j] = std::min(hops[j], hops[i] + 1);
        } else if (hops[j] < hops[i]) {
          discs[i] -= dir * penetration;
          hops[i] = std::min(hops[i], hops[j] + 1);
        } else {
          discs[i] -= dir * (0.5 * penetration);
          discs[j] += dir * (0.5 * penetration);
        }
        changed = true;
      }
    }
    if (!changed) return;
  }
}

StepResult PlanarPushEnv::step(const Vec2& action) {
  if (state_.terminated) throw InvalidState("step called on a terminated episode; call reset()");
  if (!action.allFinite()) throw std::invalid_argument("action must be finite");

  const Vec2 a = action.cwiseMax(-1.0).cwiseMin(1.0);
  const int m = config_.num_obstacles();

  std::vector<Vec2> discs;
  std::vector<double> radii;
  discs.reserve(2 + m);
  radii.reserve(2 + m);
  Vec2 pusher = state_.pusher_pos + a * config_.max_speed;
  pusher = pusher.cwiseMax(0.0).cwiseMin(1.0);
  discs.push_back(pusher);
  radii.push_back(config_.pusher_radius);
  discs.push_back(state_.target_pos);
  radii.push_back(config_.target_radius);
  for (const auto& p : state_.obstacle_pos) {
    discs.push_back(p);
    radii.push_back(config_.obstacle_radius);
  }
  resolve_contacts(discs, radii);

  StepEvents events;
  const Vec2 target_disp = discs[1] - state_.target_pos;
  events.target_moved = target_disp.squaredNorm() > 0.0;
  state_.target_vel = events.target_moved ? Vec2(target_disp / config_.dt) : Vec2::Zero();
  state_.target_pos = discs[1];
  for (int i = 0; i < m; ++i) {
    const Vec2 disp = discs[2 + i] - state_.obstacle_pos[i];
    const bool moved = disp.squaredNorm() > 0.0;
    events.touched_obstacle = events.touched_obstacle || moved;
    state_.obstacle_vel[i] = moved ? Vec2(disp / config_.dt) : Vec2::Zero();
    state_.obstacle_pos[i] = discs[2 + i];
  }
  state_.pusher_pos = discs[0];

  const double d = (state_.target_pos - config_.center).norm();
  const double l = (state_.pusher_pos - state_.target_pos).norm();
  const int phase = phase_of(state_.pusher_pos, state_.target_pos, config_);
  int& t_k = state_.phase_time[phase - 1];
  ++t_k;

  StepResult result;
  result.components = {f_obstacle(events.touched_obstacle, config_.obstacle_reward),
                       f_manipulation(d, l, state_.prev_d, state_.prev_l),
                       f_time(t_k, state_.gamma[phase - 1], config_.time_reward)};

  state_.prev_d = d;
  state_.prev_l = l;
  state_.prev_action = a;
  state_.phase = phase;
  ++state_.step_count;

  events.phase = phase;
  events.success = outside_table(state_.target_pos);
  events.timeout = !events.success && state_.step_count >= config_.max_steps;
  state_.terminated = events.terminal();

  result.events = events;
  result.observation = observation();
  return result;
}

}  // namespace ahrm::env
