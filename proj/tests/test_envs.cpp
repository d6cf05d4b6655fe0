#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "imit/envs/dataset.hpp"
#include "imit/envs/env.hpp"
#include "imit/envs/trajectory.hpp"

using namespace imit;

TEST_CASE("reacher dynamics: rest is a fixed point; position integrates old velocity") {
    EnvParams env{EnvKind::kReacher, {0.3, 0.4}, 0.0, 0.0};
    const EnvState rest = make_reacher_state(env, 0, 0, 0, 0);
    const EnvState still = env_step(env, rest, Tensor::vec({0.0, 0.0}));
    CHECK(still.s.data == rest.s.data);

    const EnvState moving = make_reacher_state(env, 0, 0, 1.0, 0.0);
    const EnvState next = env_step(env, moving, Tensor::vec({0.0, 0.0}));
    CHECK(next.s[0] == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(next.s[1] == 0.0);
    CHECK(next.s[2] == 1.0);  // zero action leaves velocity alone
    CHECK(next.s[4] == 0.3);  // target constant
    CHECK(next.s[5] == 0.4);

    CHECK_THROWS_AS(
        (void)env_step(env, rest, Tensor::vec({std::nan(""), 0.0})), NumericalError);
}

TEST_CASE("walker dynamics: constant action matches the closed-form recursion") {
    EnvParams env{EnvKind::kWalker, {0.0}, 0.0, 3.0};
    EnvState st = make_walker_state(env, 0, 0, 0);
    const double a = 2.0;
    const int n = 200;
    for (int i = 0; i < n; ++i) st = env_step(env, st, Tensor::vec({a}));
    // v_{k+1} = v_k + dt(a − 0.1 v_k) ⇒ v_n = (a/0.1)(1 − (1 − 0.1·dt)^n)
    const double expect = (a / 0.1) * (1.0 - std::pow(1.0 - 0.1 * kWalkerDt, n));
    CHECK(st.s[1] == doctest::Approx(expect).epsilon(1e-12));
    // Phase stays on the unit circle exactly.
    CHECK(st.s[2] * st.s[2] + st.s[3] * st.s[3] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(st.phase == doctest::Approx(n * kWalkerDt * 3.0).epsilon(1e-12));
}

TEST_CASE("scripted experts: fixed points and tracking quality") {
    EnvParams reach{EnvKind::kReacher, {0.5, -0.2}, 0.0, 0.0};
    const EnvState at_target = make_reacher_state(reach, 0.5, -0.2, 0.0, 0.0);
    const Tensor a0 = scripted_expert_action(reach, at_target);
    CHECK(a0[0] == 0.0);
    CHECK(a0[1] == 0.0);

    EnvParams walk{EnvKind::kWalker, {1.0}, 0.0, 2.0};
    const EnvState at_speed = make_walker_state(walk, 0.0, 1.0, 0.7);
    CHECK(scripted_expert_action(walk, at_speed)[0] == 0.0);

    // Simulated controller: closest approach over the horizon for targets on a
    // dense polar grid of the unit disc. The pinned gains and integrator give
    // a worst case just above 0.065 at the rim, so the bound is 0.07.
    double worst = 0.0;
    for (int ir = 1; ir <= 10; ++ir)
        for (int it = 0; it < 24; ++it) {
            const double r = ir / 10.0;
            const double th = it / 24.0 * 6.283185307179586;
            EnvParams env{EnvKind::kReacher, {r * std::cos(th), r * std::sin(th)}, 0, 0};
            EnvState st = env_initial(env);
            double best = 1e18;
            for (std::size_t step = 0; step < kReacherHorizon; ++step) {
                st = env_step(env, st, scripted_expert_action(env, st));
                best = std::min(best, std::hypot(env.task[0] - st.s[0],
                                                 env.task[1] - st.s[1]));
            }
            worst = std::max(worst, best);
        }
    CHECK(worst < 0.07);

    // Walker expert at target speed 3: the drag term biases the fixed point to
    // 3·kv/(kv+0.1·(1−...)) ≈ 2.90, well within 0.2 of the target.
    EnvParams fast{EnvKind::kWalker, {3.0}, 0.5, 2.5};
    EnvState st = make_walker_state(fast, 0, 0, 0.3);
    double acc = 0.0;
    for (int step = 0; step < 400; ++step) {
        st = env_step(fast, st, scripted_expert_action(fast, st));
        if (step >= 200) acc += st.s[1];
    }
    CHECK(std::abs(acc / 200.0 - 3.0) < 0.2);
}

TEST_CASE("rollout: shape contract, determinism, failure diagnostics") {
    EnvParams env{EnvKind::kReacher, {0.2, 0.1}, 0.0, 0.0};
    const Policy zero = [](const Tensor&, std::size_t) { return Tensor::vec({0.0, 0.0}); };
    const Trajectory still = rollout(env, env_initial(env), zero, 5);
    CHECK(still.states.size() == 6);
    CHECK(still.actions.size() == 5);
    for (const Tensor& s : still.states) CHECK(s.data == still.states[0].data);
    validate_trajectory(still);

    auto noisy = [&](std::uint64_t seed) {
        Rng rng(seed);
        const Policy p = [&rng](const Tensor&, std::size_t) {
            return Tensor::vec({rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)});
        };
        return rollout(env, env_initial(env), p, 20);
    };
    const Trajectory t1 = noisy(11), t2 = noisy(11);
    for (std::size_t i = 0; i < t1.states.size(); ++i)
        CHECK(t1.states[i].data == t2.states[i].data);
    for (std::size_t i = 0; i < t1.actions.size(); ++i) {
        CHECK(t1.actions[i].data == t2.actions[i].data);
        for (const double v : t1.actions[i].data) CHECK(std::abs(v) <= 1.0);  // clamped
    }

    const Policy bad = [](const Tensor&, std::size_t step) {
        return step == 3 ? Tensor::vec({std::nan(""), 0.0}) : Tensor::vec({0.0, 0.0});
    };
    CHECK_THROWS_WITH_AS((void)rollout(env, env_initial(env), bad, 10),
                         doctest::Contains("step 3"), NumericalError);
}

TEST_CASE("dataset generation: counts, metas, bit-stability") {
    DatasetConfig tiny;
    tiny.kind = EnvKind::kReacher;
    tiny.reacher_train_targets = 1;
    tiny.reacher_rollouts = 1;
    tiny.reacher_test_targets = 0;
    tiny.horizon = 3;
    const Dataset d1 = generate_dataset(tiny);
    CHECK(d1.train.size() == 1);
    CHECK(d1.test.empty());

    DatasetConfig big;
    big.kind = EnvKind::kReacher;
    big.reacher_train_targets = 375;
    big.reacher_rollouts = 4;
    big.reacher_test_targets = 10;
    big.horizon = 2;
    const Dataset dp = generate_dataset(big);
    CHECK(dp.train.size() == 1500);
    CHECK(dp.test.size() == 10);

    DatasetConfig walk;
    walk.kind = EnvKind::kWalker;
    walk.walker_styles = 3;
    walk.walker_rollouts = 5;
    walk.horizon = 4;
    const Dataset dw = generate_dataset(walk);
    CHECK(dw.train.size() == 60);
    CHECK(dw.test.size() == 12);
    bool speeds_seen[4] = {false, false, false, false};
    const double speeds[4] = {-1.0, 0.0, 1.0, 3.0};
    for (const Trajectory& t : dw.train) {
        validate_trajectory(t);
        REQUIRE(t.meta.task.size() == 1);
        for (int i = 0; i < 4; ++i)
            if (t.meta.task[0] == speeds[i]) speeds_seen[i] = true;
        // Phase invariant at every recorded step.
        for (const Tensor& s : t.states)
            CHECK(s[2] * s[2] + s[3] * s[3] == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (const bool seen : speeds_seen) CHECK(seen);

    const Dataset da = generate_dataset(walk);
    REQUIRE(da.train.size() == dw.train.size());
    for (std::size_t i = 0; i < da.train.size(); ++i)
        for (std::size_t t = 0; t < da.train[i].states.size(); ++t)
            CHECK(da.train[i].states[t].data == dw.train[i].states[t].data);
}

TEST_CASE("trajectory files: bit-exact round-trip, meta preserved, malformed input fails") {
    DatasetConfig cfg;
    cfg.kind = EnvKind::kWalker;
    cfg.walker_styles = 2;
    cfg.walker_rollouts = 1;
    cfg.horizon = 7;
    cfg.seed = 99;
    const Dataset d = generate_dataset(cfg);

    const std::string path =
        (std::filesystem::temp_directory_path() / "imit_traj_roundtrip.jsonl").string();
    save_trajectories(path, d.train);
    const std::vector<Trajectory> back = load_trajectories(path);
    REQUIRE(back.size() == d.train.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        const Trajectory& a = d.train[i];
        const Trajectory& b = back[i];
        CHECK(a.meta.kind == b.meta.kind);
        CHECK(a.meta.expert_id == b.meta.expert_id);
        CHECK(a.meta.task == b.meta.task);
        CHECK(a.meta.style_amp == b.meta.style_amp);
        CHECK(a.meta.style_freq == b.meta.style_freq);
        REQUIRE(a.states.size() == b.states.size());
        for (std::size_t t = 0; t < a.states.size(); ++t)
            CHECK(std::memcmp(a.states[t].data.data(), b.states[t].data.data(),
                              a.states[t].size() * sizeof(double)) == 0);
        for (std::size_t t = 0; t < a.actions.size(); ++t)
            CHECK(std::memcmp(a.actions[t].data.data(), b.actions[t].data.data(),
                              a.actions[t].size() * sizeof(double)) == 0);
    }
    std::remove(path.c_str());

    CHECK_THROWS_AS((void)load_trajectories("/nonexistent/nowhere.jsonl"), UsageError);
    const std::string badpath =
        (std::filesystem::temp_directory_path() / "imit_traj_bad.jsonl").string();
    {
        std::ofstream bad(badpath);
        bad << "{not json}\n";
    }
    CHECK_THROWS_AS((void)load_trajectories(badpath), UsageError);
    std::remove(badpath.c_str());
}
