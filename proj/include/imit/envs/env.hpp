#pragma once

#include <string>
#include <vector>

#include "imit/core/tensor.hpp"

namespace imit {

// Two deterministic toy control tasks.
//
// Reacher: point mass on the plane driven by bounded acceleration toward a
// fixed target. state = [pos(2), vel(2), target(2)], action in [-1,1]^2,
// dt = 0.05, horizon 50. Dynamics: pos' = pos + dt·vel, then
// vel' = vel + dt·action; the target never moves.
//
// Walker: 1-D gait-style task. state = [position, velocity, sin φ, cos φ],
// action is a force in [-4,4], dt = 0.025, horizon 400. Dynamics:
// vel' = vel + dt·(action − 0.1·vel), pos' = pos + dt·vel', and the phase
// advances φ' = φ + dt·style_freq (φ is carried exactly so sin²+cos² = 1).
enum class EnvKind { kReacher, kWalker };

struct EnvParams {
    EnvKind kind = EnvKind::kReacher;
    std::vector<double> task;  // reacher: {target_x, target_y}; walker: {target_speed}
    double style_amp = 0.0;    // walker expert style oscillation amplitude
    double style_freq = 0.0;   // walker phase advance rate, rad/s
};

struct EnvState {
    Tensor s;
    double phase = 0.0;  // walker only; kept alongside s to avoid drift
};

constexpr double kReacherDt = 0.05;
constexpr double kWalkerDt = 0.025;
constexpr std::size_t kReacherHorizon = 50;
constexpr std::size_t kWalkerHorizon = 400;
constexpr double kReacherActionBound = 1.0;
constexpr double kWalkerActionBound = 4.0;
constexpr double kWalkerDrag = 0.1;
constexpr double kReacherKp = 4.0;
constexpr double kReacherKd = 2.0;
constexpr double kWalkerKv = 3.0;

std::size_t state_dim(EnvKind kind);
std::size_t action_dim(EnvKind kind);
double action_bound(EnvKind kind);
std::size_t default_horizon(EnvKind kind);
std::string kind_name(EnvKind kind);
EnvKind kind_from_name(const std::string& name);

EnvState env_initial(const EnvParams& params);
EnvState make_reacher_state(const EnvParams& params, double px, double py, double vx,
                            double vy);
EnvState make_walker_state(const EnvParams& params, double pos, double vel, double phase);

// Reconstructs a steppable EnvState from a recorded full state (the walker's
// phase is recovered from its sine/cosine; any 2π offset is immaterial).
EnvState env_state_from_full(const EnvParams& params, const Tensor& full_state);

// Deterministic step; non-finite action fails, out-of-bound actions clamp.
EnvState env_step(const EnvParams& params, const EnvState& state, const Tensor& action);

// Scripted demonstration controllers. Reacher: PD toward the target,
// a = clamp(kp·(target−pos) − kd·vel). Walker: speed tracking with a styled
// oscillation, a = clamp(kv·(target_speed−vel) + style_amp·sin φ).
Tensor scripted_expert_action(const EnvParams& params, const EnvState& state);

// Projection of the full state onto what the learned networks see. The
// reacher's target is deliberately hidden (the embedding must carry the task)
// and the walker's unbounded absolute position is dropped.
std::size_t obs_dim(EnvKind kind);
Tensor observe(EnvKind kind, const Tensor& full_state);

}  // namespace imit
