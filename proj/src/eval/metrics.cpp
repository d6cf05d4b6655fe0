#include "imit/eval/metrics.hpp"

#include <cmath>

#include "imit/core/error.hpp"
#include "imit/envs/env.hpp"

namespace imit {

namespace {

void require_kind(const Trajectory& traj, EnvKind kind, const char* what) {
    require(kind_from_name(traj.meta.kind) == kind,
            std::string(what) + ": trajectory is from the wrong environment kind");
    require(!traj.states.empty(), std::string(what) + ": empty trajectory");
}

}  // namespace

double mean_velocity(const Trajectory& traj) {
    require_kind(traj, EnvKind::kWalker, "mean_velocity");
    double acc = 0.0;
    for (const Tensor& s : traj.states) acc += s[1];
    return acc / double(traj.states.size());
}

double speed_diff(const Trajectory& demo, const Trajectory& imitation) {
    return std::abs(mean_velocity(demo) - mean_velocity(imitation));
}

double endpoint_error(const Trajectory& demo, const Trajectory& imitation) {
    require_kind(demo, EnvKind::kReacher, "endpoint_error");
    require_kind(imitation, EnvKind::kReacher, "endpoint_error");
    const Tensor& a = demo.states.back();
    const Tensor& b = imitation.states.back();
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    return std::sqrt(dx * dx + dy * dy);
}

double mode_coverage(std::span<const Trajectory> imitations,
                     std::span<const double> targets, double tol) {
    require(!imitations.empty(), "mode_coverage: empty imitation list");
    require(!targets.empty(), "mode_coverage: empty target list");
    std::size_t hit = 0;
    for (const double target : targets) {
        for (const Trajectory& traj : imitations) {
            if (std::abs(mean_velocity(traj) - target) <= tol) {
                ++hit;
                break;
            }
        }
    }
    return double(hit) / double(targets.size());
}

}  // namespace imit
