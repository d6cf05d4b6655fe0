#pragma once

#include "imit/core/rng.hpp"
#include "imit/envs/trajectory.hpp"

namespace imit {

// Demonstration corpus layout. Reacher: one expert per target sampled from
// the unit disc, several noisy rollouts each, plus held-out targets. Walker:
// one expert per (target speed, style) pair over speeds {-1, 0, 1, 3}, plus
// one held-out rollout per expert.
struct DatasetConfig {
    EnvKind kind = EnvKind::kReacher;
    std::size_t reacher_train_targets = 50;
    std::size_t reacher_rollouts = 4;
    std::size_t reacher_test_targets = 10;
    std::size_t walker_styles = 3;  // experts = 4 speeds × styles
    std::size_t walker_rollouts = 5;
    std::size_t horizon = 0;  // 0 → environment default
    double expert_noise = 0.05;
    std::uint64_t seed = 0;
};

struct Dataset {
    std::vector<Trajectory> train;
    std::vector<Trajectory> test;
};

Dataset generate_dataset(const DatasetConfig& config);

}  // namespace imit
