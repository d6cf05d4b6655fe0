#pragma once

#include <span>
#include <vector>

#include "imit/envs/trajectory.hpp"

namespace imit {

inline constexpr double kDefaultSpeedTargetsArr[] = {-1.0, 0.0, 1.0, 3.0};
inline constexpr std::span<const double> kDefaultSpeedTargets{kDefaultSpeedTargetsArr};

// Mean of the velocity coordinate over every recorded state (including the
// initial one). Locomotion trajectories only.
double mean_velocity(const Trajectory& traj);

// |mean velocity(demo) − mean velocity(imitation)|. Locomotion trajectories.
double speed_diff(const Trajectory& demo, const Trajectory& imitation);

// Euclidean distance between the final positions. Reaching trajectories.
double endpoint_error(const Trajectory& demo, const Trajectory& imitation);

// Fraction of target speeds matched by at least one imitation within tol.
double mode_coverage(std::span<const Trajectory> imitations,
                     std::span<const double> targets = kDefaultSpeedTargets,
                     double tol = 0.5);

}  // namespace imit
