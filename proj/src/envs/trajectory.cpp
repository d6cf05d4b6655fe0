#include "imit/envs/trajectory.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

namespace imit {

void validate_trajectory(const Trajectory& traj) {
    require(!traj.actions.empty(), "trajectory: no actions");
    require(traj.states.size() == traj.actions.size() + 1,
            "trajectory: " + std::to_string(traj.states.size()) + " states vs " +
                std::to_string(traj.actions.size()) + " actions");
    const EnvKind kind = kind_from_name(traj.meta.kind);
    const double bound = action_bound(kind);
    for (const Tensor& s : traj.states) {
        require(s.shape == Shape::vec(state_dim(kind)),
                "trajectory: state shape " + s.shape.str());
        require(s.all_finite(), "trajectory: non-finite state");
    }
    for (const Tensor& a : traj.actions) {
        require(a.shape == Shape::vec(action_dim(kind)),
                "trajectory: action shape " + a.shape.str());
        require(a.all_finite(), "trajectory: non-finite action");
        for (const double v : a.data)
            require(std::abs(v) <= bound + 1e-12, "trajectory: out-of-bound action");
    }
}

EnvParams env_params_from_meta(const TrajectoryMeta& meta) {
    EnvParams p;
    p.kind = kind_from_name(meta.kind);
    p.task = meta.task;
    p.style_amp = meta.style_amp;
    p.style_freq = meta.style_freq;
    return p;
}

Trajectory rollout(const EnvParams& env, const EnvState& start, const Policy& policy,
                   std::size_t T) {
    require(T >= 1, "rollout: horizon must be >= 1");
    const double bound = action_bound(env.kind);
    Trajectory traj;
    traj.meta.kind = kind_name(env.kind);
    traj.meta.task = env.task;
    traj.meta.style_amp = env.style_amp;
    traj.meta.style_freq = env.style_freq;
    traj.states.reserve(T + 1);
    traj.actions.reserve(T);

    EnvState state = start;
    traj.states.push_back(state.s);
    for (std::size_t t = 0; t < T; ++t) {
        Tensor a = policy(state.s, t);
        require(a.all_finite(),
                "rollout: policy returned non-finite action at step " + std::to_string(t));
        for (double& v : a.data) v = std::max(-bound, std::min(bound, v));
        state = env_step(env, state, a);
        traj.actions.push_back(std::move(a));
        traj.states.push_back(state.s);
    }
    return traj;
}

namespace {

nlohmann::json tensor_rows(const std::vector<Tensor>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const Tensor& r : rows) out.push_back(r.data);
    return out;
}

std::vector<Tensor> rows_to_tensors(const nlohmann::json& rows, const char* what) {
    std::vector<Tensor> out;
    if (!rows.is_array()) throw UsageError(std::string("trajectory file: ") + what +
                                           " is not an array");
    for (const auto& r : rows) {
        std::vector<double> v = r.get<std::vector<double>>();
        out.push_back(Tensor::vec(std::move(v)));
    }
    return out;
}

}  // namespace

void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajs) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write trajectory file: " + path);
    for (const Trajectory& traj : trajs) {
        validate_trajectory(traj);
        nlohmann::json j;
        j["states"] = tensor_rows(traj.states);
        j["actions"] = tensor_rows(traj.actions);
        j["meta"] = {{"kind", traj.meta.kind},
                     {"expert_id", traj.meta.expert_id},
                     {"task", traj.meta.task},
                     {"style_amp", traj.meta.style_amp},
                     {"style_freq", traj.meta.style_freq}};
        out << j.dump() << "\n";
    }
    require(static_cast<bool>(out), "trajectory write failed: " + path);
}

std::vector<Trajectory> load_trajectories(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read trajectory file: " + path);
    std::vector<Trajectory> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw UsageError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        Trajectory traj;
        traj.states = rows_to_tensors(j.at("states"), "states");
        traj.actions = rows_to_tensors(j.at("actions"), "actions");
        const auto& m = j.at("meta");
        traj.meta.kind = m.at("kind").get<std::string>();
        traj.meta.expert_id = m.at("expert_id").get<std::int64_t>();
        traj.meta.task = m.at("task").get<std::vector<double>>();
        traj.meta.style_amp = m.at("style_amp").get<double>();
        traj.meta.style_freq = m.at("style_freq").get<double>();
        validate_trajectory(traj);
        out.push_back(std::move(traj));
    }
    return out;
}

}  // namespace imit
