#include "imit/envs/dataset.hpp"

#include <array>
#include <cmath>

namespace imit {

namespace {

constexpr std::array<double, 4> kWalkerSpeeds = {-1.0, 0.0, 1.0, 3.0};
constexpr double kTwoPi = 6.283185307179586;

Policy noisy_expert(const EnvParams& env, double noise, Rng& rng) {
    // The scripted controller plus Gaussian action noise; the rollout clamp
    // keeps recorded actions in bounds.
    return [&rng, env, noise](const Tensor& s, std::size_t) {
        EnvState st;
        st.s = s;
        if (env.kind == EnvKind::kWalker) {
            // sin/cos are part of the state; phase itself is not needed here.
            st.phase = 0.0;
        }
        Tensor a = scripted_expert_action(env, st);
        for (double& v : a.data) v += noise * rng.normal();
        return a;
    };
}

Trajectory reacher_demo(const Rng& base, const DatasetConfig& cfg, double tx, double ty,
                        std::int64_t expert_id, std::size_t horizon) {
    Rng rng = base;
    EnvParams env{EnvKind::kReacher, {tx, ty}, 0.0, 0.0};
    const double px = rng.uniform(-0.1, 0.1);
    const double py = rng.uniform(-0.1, 0.1);
    const EnvState start = make_reacher_state(env, px, py, 0.0, 0.0);
    Trajectory traj = rollout(env, start, noisy_expert(env, cfg.expert_noise, rng), horizon);
    traj.meta.expert_id = expert_id;
    return traj;
}

Trajectory walker_demo(const Rng& base, const DatasetConfig& cfg, const EnvParams& env,
                       std::int64_t expert_id, std::size_t horizon) {
    Rng rng = base;
    const double phase0 = rng.uniform(0.0, kTwoPi);
    const EnvState start = make_walker_state(env, 0.0, 0.0, phase0);
    Trajectory traj = rollout(env, start, noisy_expert(env, cfg.expert_noise, rng), horizon);
    traj.meta.expert_id = expert_id;
    return traj;
}

}  // namespace

Dataset generate_dataset(const DatasetConfig& cfg) {
    Dataset out;
    Rng root(cfg.seed);
    const std::size_t horizon =
        cfg.horizon > 0 ? cfg.horizon : default_horizon(cfg.kind);

    if (cfg.kind == EnvKind::kReacher) {
        require(cfg.reacher_train_targets >= 1 && cfg.reacher_rollouts >= 1,
                "dataset: reacher counts must be >= 1");
        Rng targets = root.fork("reacher-targets");
        std::vector<std::pair<double, double>> all;
        for (std::size_t i = 0; i < cfg.reacher_train_targets + cfg.reacher_test_targets;
             ++i) {
            const double r = std::sqrt(targets.uniform());
            const double th = targets.uniform(0.0, kTwoPi);
            all.emplace_back(r * std::cos(th), r * std::sin(th));
        }
        for (std::size_t i = 0; i < cfg.reacher_train_targets; ++i)
            for (std::size_t j = 0; j < cfg.reacher_rollouts; ++j)
                out.train.push_back(reacher_demo(root.fork("reacher-demo", i * 1024 + j),
                                                 cfg, all[i].first, all[i].second,
                                                 static_cast<std::int64_t>(i), horizon));
        for (std::size_t k = 0; k < cfg.reacher_test_targets; ++k) {
            const std::size_t i = cfg.reacher_train_targets + k;
            out.test.push_back(reacher_demo(root.fork("reacher-held-out", k), cfg,
                                            all[i].first, all[i].second,
                                            static_cast<std::int64_t>(i), horizon));
        }
        return out;
    }

    require(cfg.walker_styles >= 1 && cfg.walker_rollouts >= 1,
            "dataset: walker counts must be >= 1");
    std::int64_t expert_id = 0;
    for (const double speed : kWalkerSpeeds) {
        for (std::size_t style = 0; style < cfg.walker_styles; ++style) {
            EnvParams env{EnvKind::kWalker,
                          {speed},
                          0.5 * static_cast<double>(style),
                          2.0 + static_cast<double>(style)};
            const std::uint64_t e = static_cast<std::uint64_t>(expert_id);
            for (std::size_t m = 0; m < cfg.walker_rollouts; ++m)
                out.train.push_back(walker_demo(root.fork("walker-demo", e * 1024 + m),
                                                cfg, env, expert_id, horizon));
            out.test.push_back(
                walker_demo(root.fork("walker-held-out", e), cfg, env, expert_id, horizon));
            ++expert_id;
        }
    }
    return out;
}

}  // namespace imit
