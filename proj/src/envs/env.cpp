#include "imit/envs/env.hpp"

#include <algorithm>
#include <cmath>

namespace imit {

namespace {

double clamp(double v, double b) { return std::max(-b, std::min(b, v)); }

void check_task(const EnvParams& p) {
    const std::size_t want = p.kind == EnvKind::kReacher ? 2 : 1;
    require(p.task.size() == want, "env: task parameter needs " + std::to_string(want) +
                                       " values, got " + std::to_string(p.task.size()));
}

}  // namespace

std::size_t state_dim(EnvKind kind) { return kind == EnvKind::kReacher ? 6 : 4; }
std::size_t action_dim(EnvKind kind) { return kind == EnvKind::kReacher ? 2 : 1; }
double action_bound(EnvKind kind) {
    return kind == EnvKind::kReacher ? kReacherActionBound : kWalkerActionBound;
}
std::size_t default_horizon(EnvKind kind) {
    return kind == EnvKind::kReacher ? kReacherHorizon : kWalkerHorizon;
}

std::string kind_name(EnvKind kind) {
    return kind == EnvKind::kReacher ? "reacher" : "walker";
}

EnvKind kind_from_name(const std::string& name) {
    if (name == "reacher") return EnvKind::kReacher;
    if (name == "walker") return EnvKind::kWalker;
    throw UsageError("unknown environment kind '" + name + "'");
}

EnvState make_reacher_state(const EnvParams& params, double px, double py, double vx,
                            double vy) {
    check_task(params);
    EnvState st;
    st.s = Tensor::vec({px, py, vx, vy, params.task[0], params.task[1]});
    return st;
}

EnvState make_walker_state(const EnvParams& params, double pos, double vel, double phase) {
    check_task(params);
    EnvState st;
    st.s = Tensor::vec({pos, vel, std::sin(phase), std::cos(phase)});
    st.phase = phase;
    return st;
}

EnvState env_initial(const EnvParams& params) {
    return params.kind == EnvKind::kReacher ? make_reacher_state(params, 0, 0, 0, 0)
                                            : make_walker_state(params, 0, 0, 0);
}

EnvState env_state_from_full(const EnvParams& params, const Tensor& full_state) {
    require(full_state.shape == Shape::vec(state_dim(params.kind)) &&
                full_state.all_finite(),
            "env_state_from_full: malformed state");
    if (params.kind == EnvKind::kReacher)
        return make_reacher_state(params, full_state[0], full_state[1], full_state[2],
                                  full_state[3]);
    return make_walker_state(params, full_state[0], full_state[1],
                             std::atan2(full_state[2], full_state[3]));
}

EnvState env_step(const EnvParams& params, const EnvState& state, const Tensor& action) {
    require(action.all_finite(), "env: non-finite action");
    require(action.shape == Shape::vec(action_dim(params.kind)),
            "env: action shape " + action.shape.str());
    const double bound = action_bound(params.kind);

    if (params.kind == EnvKind::kReacher) {
        const double ax = clamp(action[0], bound), ay = clamp(action[1], bound);
        const Tensor& s = state.s;
        EnvState next;
        next.s = Tensor::vec({s[0] + kReacherDt * s[2], s[1] + kReacherDt * s[3],
                              s[2] + kReacherDt * ax, s[3] + kReacherDt * ay, s[4], s[5]});
        return next;
    }

    const double a = clamp(action[0], bound);
    const double vel = state.s[1] + kWalkerDt * (a - kWalkerDrag * state.s[1]);
    const double pos = state.s[0] + kWalkerDt * vel;
    const double phase = state.phase + kWalkerDt * params.style_freq;
    EnvState next;
    next.s = Tensor::vec({pos, vel, std::sin(phase), std::cos(phase)});
    next.phase = phase;
    return next;
}

Tensor scripted_expert_action(const EnvParams& params, const EnvState& state) {
    check_task(params);
    const double bound = action_bound(params.kind);
    if (params.kind == EnvKind::kReacher) {
        const Tensor& s = state.s;
        return Tensor::vec({clamp(kReacherKp * (s[4] - s[0]) - kReacherKd * s[2], bound),
                            clamp(kReacherKp * (s[5] - s[1]) - kReacherKd * s[3], bound)});
    }
    const double a = kWalkerKv * (params.task[0] - state.s[1]) +
                     params.style_amp * state.s[2];
    return Tensor::vec({clamp(a, bound)});
}

std::size_t obs_dim(EnvKind kind) { return kind == EnvKind::kReacher ? 4 : 3; }

Tensor observe(EnvKind kind, const Tensor& full_state) {
    require(full_state.shape == Shape::vec(state_dim(kind)),
            "observe: state shape " + full_state.shape.str());
    if (kind == EnvKind::kReacher)
        return Tensor::vec({full_state[0], full_state[1], full_state[2], full_state[3]});
    return Tensor::vec({full_state[1], full_state[2], full_state[3]});
}

}  // namespace imit
