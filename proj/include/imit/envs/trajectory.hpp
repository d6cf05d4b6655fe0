#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "imit/envs/env.hpp"

namespace imit {

struct TrajectoryMeta {
    std::string kind;        // "reacher" | "walker"
    std::int64_t expert_id = 0;
    std::vector<double> task;  // target point or target speed
    double style_amp = 0.0;
    double style_freq = 0.0;
};

// One demonstration or rollout: states x_1..x_{T+1}, actions a_1..a_T.
struct Trajectory {
    std::vector<Tensor> states;
    std::vector<Tensor> actions;
    TrajectoryMeta meta;

    std::size_t horizon() const { return actions.size(); }
};

// Enforces states.len == actions.len+1, finiteness, and dimension agreement.
void validate_trajectory(const Trajectory& traj);

EnvParams env_params_from_meta(const TrajectoryMeta& meta);

using Policy = std::function<Tensor(const Tensor& state, std::size_t step)>;

// Runs `policy` for T steps from `start`; actions are recorded after the
// environment's clamp so stored trajectories always carry in-bound actions.
Trajectory rollout(const EnvParams& env, const EnvState& start, const Policy& policy,
                   std::size_t T);

// Line-delimited structured-text files, one trajectory per line; doubles are
// serialized with shortest-round-trip decimals so reload is bit-exact.
void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajs);
std::vector<Trajectory> load_trajectories(const std::string& path);

}  // namespace imit
