#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "imit/core/error.hpp"
#include "imit/envs/dataset.hpp"
#include "imit/vae/vae.hpp"

using namespace imit;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

VaeSpecs tiny_reacher_specs() {
    return make_vae_specs(EnvKind::kReacher, 3, 2, {4}, 3, 2, 2);
}

// Reacher held at the origin with a zero policy: every observation and every
// action is exactly zero, which makes zero-weight losses analytic.
Trajectory rest_trajectory(std::size_t T) {
    EnvParams env{EnvKind::kReacher, {0.0, 0.0}, 0.0, 0.0};
    Trajectory traj = rollout(env, env_initial(env), [](const Tensor& s, std::size_t) {
        (void)s;
        return Tensor::vec({0.0, 0.0});
    }, T);
    return traj;
}

void zero_all(VaeParams& p) {
    for (double& v : p.encoder.flat()) v = 0.0;
    for (double& v : p.action_decoder.flat()) v = 0.0;
    for (double& v : p.state_decoder.flat()) v = 0.0;
}

Trajectory short_expert_trajectory(std::size_t T) {
    DatasetConfig cfg;
    cfg.kind = EnvKind::kReacher;
    cfg.reacher_train_targets = 1;
    cfg.reacher_rollouts = 1;
    cfg.reacher_test_targets = 1;
    cfg.horizon = T;
    cfg.seed = 5;
    return generate_dataset(cfg).train.at(0);
}

}  // namespace

TEST_CASE("divergence from the standard normal: closed form, oracle, gradient") {
    CHECK(kl_standard_normal(Tensor::vec({0.0, 0.0}), Tensor::vec({0.0, 0.0})) == 0.0);
    CHECK(kl_standard_normal(Tensor::vec({1.0}), Tensor::vec({0.0})) == 0.5);

    Rng rng(3);
    Tensor mean(Shape::vec(3)), log_std(Shape::vec(3));
    for (double& v : mean.data) v = rng.uniform(-1.0, 1.0);
    for (double& v : log_std.data) v = rng.uniform(-1.0, 1.0);
    const double closed = kl_standard_normal(mean, log_std);
    CHECK(closed >= 0.0);

    // Tape form agrees with the raw form and with finite differences.
    ParamVector p;
    p.add("mean", mean);
    p.add("log_std", log_std);
    const LossFn f = [](Tape& t, const BoundParams& bp) {
        (void)t;
        return kl_standard_normal(bp.at("mean"), bp.at("log_std"));
    };
    Tape t;
    BoundParams bp(t, p);
    CHECK(t.scalar(f(t, bp)) == doctest::Approx(closed).epsilon(1e-14));
    CHECK(check_gradient(f, p, 1e-6) < 1e-8);

    // Monte Carlo oracle: E_q[log q(z) - log p(z)] over reparameterized draws.
    const std::size_t n = 1000000;
    double sum = 0.0, sumsq = 0.0;
    Rng mc(77);
    for (std::size_t i = 0; i < n; ++i) {
        double term = 0.0;
        for (std::size_t d = 0; d < 3; ++d) {
            const double e = mc.normal();
            const double z = mean[d] + std::exp(log_std[d]) * e;
            const double log_q = -log_std[d] - 0.5 * e * e - 0.5 * kLog2Pi;
            const double log_p = -0.5 * z * z - 0.5 * kLog2Pi;
            term += log_q - log_p;
        }
        sum += term;
        sumsq += term * term;
    }
    const double mc_mean = sum / double(n);
    const double mc_var = (sumsq / double(n) - mc_mean * mc_mean) / double(n);
    const double se = std::sqrt(mc_var);
    REQUIRE(se > 0.0);
    CHECK(std::abs(closed - mc_mean) < 3.0 * se);
}

TEST_CASE("zero-weight loss on a rest trajectory is the Gaussian normalizer count") {
    const std::size_t T = 5;
    VaeSpecs specs = make_vae_specs(EnvKind::kReacher, 3, 2, {4}, 3, 2, 3);
    Rng rng(1);
    VaeParams params = init_vae_params(specs, rng);
    zero_all(params);
    const Trajectory traj = rest_trajectory(T);
    const Tensor eps = Tensor::zeros(Shape::vec(2));

    VaeLossParts parts = vae_loss(specs, params, traj, eps);
    CHECK(parts.kl == 0.0);
    // Actions: 2 dims of N(0,1) at their mode. States: 4 dims whose uniform
    // 3-component standard-normal mixture collapses to one normalizer each.
    CHECK(parts.recon_action == doctest::Approx(double(T) * kLog2Pi).epsilon(1e-12));
    CHECK(parts.recon_state ==
          doctest::Approx(double(T) * 2.0 * kLog2Pi).epsilon(1e-12));
    CHECK(parts.total == doctest::Approx(double(T) * 3.0 * kLog2Pi).epsilon(1e-12));

    // Shrinking the action spread at a matched mode lowers the loss by
    // exactly T·A·log_std.
    params.action_decoder.set("act.log_std", Tensor::vec({-2.0, -2.0}));
    VaeLossParts sharp = vae_loss(specs, params, traj, eps);
    CHECK(sharp.total ==
          doctest::Approx(double(T) * (3.0 * kLog2Pi - 4.0)).epsilon(1e-12));
    CHECK(sharp.total < parts.total);
}

TEST_CASE("loss gradient matches finite differences for every parameter group") {
    const VaeSpecs specs = tiny_reacher_specs();
    Rng rng(9);
    VaeParams params = init_vae_params(specs, rng);
    const Trajectory traj = short_expert_trajectory(3);
    Tensor eps(Shape::vec(2));
    eps.data = {0.4, -0.7};

    for (int group = 0; group < 3; ++group) {
        const LossFn f = [&, group](Tape& t, const BoundParams& bp) {
            BoundParams enc_f(t, params.encoder, false);
            BoundParams act_f(t, params.action_decoder, false);
            BoundParams sd_f(t, params.state_decoder, false);
            const BoundParams& enc = group == 0 ? bp : enc_f;
            const BoundParams& act = group == 1 ? bp : act_f;
            const BoundParams& sd = group == 2 ? bp : sd_f;
            return vae_loss_vars(t, specs, enc, act, sd, traj, eps).total;
        };
        const ParamVector& pv = group == 0   ? params.encoder
                                : group == 1 ? params.action_decoder
                                             : params.state_decoder;
        CHECK(check_gradient(f, pv, 1e-5) <= 1e-4);
    }
}

TEST_CASE("doubling a cyclic trajectory doubles reconstruction, not divergence") {
    const VaeSpecs specs = tiny_reacher_specs();
    Rng rng(21);
    VaeParams params = init_vae_params(specs, rng);
    const Tensor eps = Tensor::zeros(Shape::vec(2));

    // States on a closed loop so the self-concatenated sequence has consistent
    // transitions: the doubled trajectory repeats exactly the same (x_t,
    // a_t, x_{t+1}) triples twice.
    auto cyclic = [](std::size_t periods) {
        Trajectory tr;
        tr.meta = TrajectoryMeta{"reacher", 0, {0.0, 0.0}, 0.0, 0.0};
        std::vector<Tensor> base;
        for (std::size_t t = 0; t < 6; ++t) {
            const double th = double(t) * 1.0471975511965976;  // 2π/6
            base.push_back(Tensor::vec({0.3 * std::cos(th), 0.3 * std::sin(th),
                                        -0.2 * std::sin(th), 0.1 * std::cos(th), 0.0,
                                        0.0}));
        }
        for (std::size_t p = 0; p < periods; ++p)
            for (std::size_t t = 0; t < 6; ++t) {
                tr.states.push_back(base[t]);
                tr.actions.push_back(Tensor::vec({0.1, -0.1}));
            }
        tr.states.push_back(base[0]);
        return tr;
    };

    const VaeLossParts one = vae_loss(specs, params, cyclic(1), eps);
    const VaeLossParts two = vae_loss(specs, params, cyclic(2), eps);

    const double recon1 = one.recon_action + one.recon_state;
    const double recon2 = two.recon_action + two.recon_state;
    CHECK(recon2 / recon1 == doctest::Approx(2.0).epsilon(0.1));
    // The divergence term reacts only through the encoder's view of the longer
    // sequence — nowhere near doubling.
    REQUIRE(one.kl > 0.0);
    CHECK(two.kl / one.kl == doctest::Approx(1.0).epsilon(0.5));
}

TEST_CASE("non-finite losses name the offending term") {
    const VaeSpecs specs = tiny_reacher_specs();
    Rng rng(2);
    const Trajectory traj = short_expert_trajectory(2);
    const Tensor eps = Tensor::zeros(Shape::vec(2));
    const double nan = std::nan("");

    VaeParams bad_act = init_vae_params(specs, rng);
    bad_act.action_decoder.set("act.log_std", Tensor::vec({nan, nan}));
    CHECK_THROWS_WITH_AS(vae_loss(specs, bad_act, traj, eps),
                         doctest::Contains("action reconstruction"), NumericalError);

    Rng rng2(2);
    VaeParams bad_sd = init_vae_params(specs, rng2);
    Tensor head_b = bad_sd.state_decoder.get("sd.head2.b");
    head_b.data[0] = nan;
    bad_sd.state_decoder.set("sd.head2.b", head_b);
    CHECK_THROWS_WITH_AS(vae_loss(specs, bad_sd, traj, eps),
                         doctest::Contains("state reconstruction"), NumericalError);

    Rng rng3(2);
    VaeParams bad_enc = init_vae_params(specs, rng3);
    Tensor hw = bad_enc.encoder.get("enc.head.w");
    hw.data[0] = nan;
    bad_enc.encoder.set("enc.head.w", hw);
    CHECK_THROWS_WITH_AS(vae_loss(specs, bad_enc, traj, eps),
                         doctest::Contains("divergence"), NumericalError);
}

TEST_CASE("one epoch on one trajectory lowers the fixed-noise loss for most seeds") {
    const VaeSpecs specs = make_vae_specs(EnvKind::kReacher, 2, 2, {4}, 2, 1, 2);
    const Trajectory traj = short_expert_trajectory(4);
    const std::vector<Trajectory> data{traj};
    const Tensor eps = Tensor::zeros(Shape::vec(2));

    VaeTrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 1;

    int improved = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng probe(seed);
        Rng init_replay = probe.fork("vae-init");
        const VaeParams before = init_vae_params(specs, init_replay);
        const double loss0 = vae_loss(specs, before, traj, eps).total;

        Rng train_rng(seed);
        const VaeTrainResult res = train_vae(data, specs, cfg, train_rng);
        const double loss1 = vae_loss(specs, res.params, traj, eps).total;
        if (loss1 < loss0) ++improved;
    }
    CHECK(improved >= 9);
}

TEST_CASE("training runs are reproducible bit for bit") {
    const VaeSpecs specs = make_vae_specs(EnvKind::kReacher, 2, 2, {4}, 2, 1, 2);
    DatasetConfig dcfg;
    dcfg.kind = EnvKind::kReacher;
    dcfg.reacher_train_targets = 3;
    dcfg.reacher_rollouts = 1;
    dcfg.reacher_test_targets = 1;
    dcfg.horizon = 3;
    dcfg.seed = 8;
    const Dataset data = generate_dataset(dcfg);

    VaeTrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 2;

    Rng r1(123), r2(123);
    const VaeTrainResult a = train_vae(data.train, specs, cfg, r1);
    const VaeTrainResult b = train_vae(data.train, specs, cfg, r2);
    CHECK(a.epoch_loss == b.epoch_loss);
    CHECK(a.params.encoder.flat() == b.params.encoder.flat());
    CHECK(a.params.action_decoder.flat() == b.params.action_decoder.flat());
    CHECK(a.params.state_decoder.flat() == b.params.state_decoder.flat());

    // Serial reference path must agree with the (possibly threaded) default.
    VaeTrainConfig serial = cfg;
    serial.parallel = false;
    Rng r3(123);
    const VaeTrainResult c = train_vae(data.train, specs, serial, r3);
    CHECK(a.epoch_loss == c.epoch_loss);
    CHECK(a.params.encoder.flat() == c.params.encoder.flat());
    CHECK(a.params.action_decoder.flat() == c.params.action_decoder.flat());
    CHECK(a.params.state_decoder.flat() == c.params.state_decoder.flat());
}

TEST_CASE("twenty demonstrations train to a markedly lower loss") {
    const VaeSpecs specs = make_vae_specs(EnvKind::kReacher, 4, 2, {8}, 4, 2, 2);
    DatasetConfig dcfg;
    dcfg.kind = EnvKind::kReacher;
    dcfg.reacher_train_targets = 5;
    dcfg.reacher_rollouts = 4;
    dcfg.reacher_test_targets = 1;
    dcfg.horizon = 10;
    dcfg.seed = 4;
    const Dataset data = generate_dataset(dcfg);
    REQUIRE(data.train.size() == 20);

    VaeTrainConfig cfg;
    cfg.epochs = 40;
    Rng rng(6);
    Rng init_replay = rng.fork("vae-init");
    const VaeParams before = init_vae_params(specs, init_replay);

    const VaeTrainResult res = train_vae(data.train, specs, cfg, rng);
    const Tensor eps = Tensor::zeros(Shape::vec(2));
    double initial = 0.0, final = 0.0;
    for (const Trajectory& tr : data.train) {
        initial += vae_loss(specs, before, tr, eps).total;
        final += vae_loss(specs, res.params, tr, eps).total;
    }
    CHECK(final <= 0.7 * initial);
}

TEST_CASE("encoding: zero-weight form and determinism") {
    const VaeSpecs specs = tiny_reacher_specs();
    Rng rng(14);
    VaeParams params = init_vae_params(specs, rng);
    const Trajectory traj = short_expert_trajectory(4);

    SUBCASE("zero weights give a standard-normal posterior, sample = noise") {
        VaeParams zero = params;
        zero_all(zero);
        Rng draw(55);
        const Embedding e = encode(specs, zero, traj, draw);
        CHECK(e.mean.data == std::vector<double>{0.0, 0.0});
        CHECK(e.log_std.data == std::vector<double>{0.0, 0.0});
        Rng replay(55);
        CHECK(e.sample[0] == replay.normal());
        CHECK(e.sample[1] == replay.normal());
    }

    SUBCASE("same trajectory, same seed, same embedding") {
        Rng d1(7), d2(7);
        const Embedding a = encode(specs, params, traj, d1);
        const Embedding b = encode(specs, params, traj, d2);
        CHECK(a.mean.data == b.mean.data);
        CHECK(a.log_std.data == b.log_std.data);
        CHECK(a.sample.data == b.sample.data);
    }
}

TEST_CASE("imitation rollouts: trivial at zero weights, bit-stable when seeded") {
    const VaeSpecs specs = tiny_reacher_specs();
    Rng rng(31);
    VaeParams params = init_vae_params(specs, rng);
    EnvParams env{EnvKind::kReacher, {0.2, -0.3}, 0.0, 0.0};
    const Tensor z = Tensor::vec({0.1, -0.4});

    SUBCASE("zero decoder weights hold the reacher at rest") {
        VaeParams zero = params;
        zero_all(zero);
        Rng r(1);
        const Trajectory traj =
            imitate(specs, zero, env, z, env_initial(env), 6, r, true);
        for (const Tensor& a : traj.actions) CHECK(a.data == std::vector<double>{0, 0});
        for (const Tensor& s : traj.states) {
            CHECK(s[0] == 0.0);
            CHECK(s[1] == 0.0);
        }
    }

    SUBCASE("deterministic and seeded-stochastic runs repeat exactly") {
        Rng r1(3), r2(3);
        const Trajectory a = imitate(specs, params, env, z, env_initial(env), 8, r1, true);
        const Trajectory b = imitate(specs, params, env, z, env_initial(env), 8, r2, true);
        REQUIRE(a.horizon() == b.horizon());
        for (std::size_t t = 0; t < a.horizon(); ++t)
            CHECK(a.actions[t].data == b.actions[t].data);

        Rng s1(4), s2(4);
        const Trajectory c =
            imitate(specs, params, env, z, env_initial(env), 8, s1, false);
        const Trajectory d =
            imitate(specs, params, env, z, env_initial(env), 8, s2, false);
        for (std::size_t t = 0; t < c.horizon(); ++t) {
            CHECK(c.actions[t].data == d.actions[t].data);
            CHECK(c.actions[t].data != a.actions[t].data);  // noise actually applied
        }
    }
}

TEST_CASE("embedding interpolation is the exact convex combination") {
    const Tensor z1 = Tensor::vec({1.0, -2.0, 0.5});
    const Tensor z2 = Tensor::vec({-1.0, 4.0, 0.5});
    const std::vector<double> alphas{0.0, 0.25, 0.5, 1.0};
    const std::vector<Tensor> out = interpolate_embeddings(z1, z2, alphas);
    REQUIRE(out.size() == 4);
    CHECK(out[0].data == z1.data);
    CHECK(out[3].data == z2.data);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(out[2][i] == doctest::Approx(0.5 * (z1[i] + z2[i])).epsilon(1e-15));

    const std::vector<Tensor> same =
        interpolate_embeddings(z1, z1, std::vector<double>{0.5});
    CHECK(same[0].data == z1.data);

    // Affinity: z(a1) + z(a2) = z(a1+a2) + z(0) elementwise.
    const std::vector<Tensor> probe =
        interpolate_embeddings(z1, z2, std::vector<double>{0.0, 0.2, 0.3, 0.5});
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(probe[1][i] + probe[2][i] ==
              doctest::Approx(probe[3][i] + probe[0][i]).epsilon(1e-14));

    CHECK_THROWS_AS(interpolate_embeddings(z1, z2, std::vector<double>{1.5}),
                    NumericalError);
    CHECK_THROWS_AS(interpolate_embeddings(z1, z2, std::vector<double>{0.5, 0.2}),
                    NumericalError);
}

TEST_CASE("blended rollouts: degenerate schedules and the ramp itself") {
    // Linear action head that copies the embedding, so recorded actions reveal
    // exactly which embedding drove each step.
    VaeSpecs specs = make_vae_specs(EnvKind::kReacher, 2, 2, {}, 2, 1, 2);
    Rng rng(8);
    VaeParams params = init_vae_params(specs, rng);
    zero_all(params);
    Tensor w0 = Tensor::zeros(Shape::mat(2, 6));
    w0.at(0, 4) = 1.0;
    w0.at(1, 5) = 1.0;
    params.action_decoder.set("act.w0", w0);
    params.action_decoder.set("act.log_std", Tensor::vec({-40.0, -40.0}));

    EnvParams env{EnvKind::kReacher, {0.0, 0.0}, 0.0, 0.0};
    const Tensor z1 = Tensor::vec({0.3, -0.1});
    const Tensor z2 = Tensor::vec({-0.2, 0.5});

    SUBCASE("identical embeddings reproduce imitate draw for draw") {
        Rng b(9), i(9);
        const Trajectory blended =
            blend_rollout(specs, params, env, z1, z1, 2, 3, 8, b);
        const Trajectory imitated =
            imitate(specs, params, env, z1, env_initial(env), 8, i, false);
        for (std::size_t t = 0; t < 8; ++t) {
            CHECK(blended.actions[t].data == imitated.actions[t].data);
            CHECK(blended.states[t].data == imitated.states[t].data);
        }
    }

    SUBCASE("window zero is a hard switch; edge placements reduce to imitate") {
        Rng b1(3), i1(3);
        const Trajectory all_z1 = blend_rollout(specs, params, env, z1, z2, 6, 0, 6, b1);
        const Trajectory ref1 = imitate(specs, params, env, z1, env_initial(env), 6, i1, false);
        for (std::size_t t = 0; t < 6; ++t)
            CHECK(all_z1.actions[t].data == ref1.actions[t].data);

        Rng b2(3), i2(3);
        const Trajectory all_z2 = blend_rollout(specs, params, env, z1, z2, 0, 0, 6, b2);
        const Trajectory ref2 = imitate(specs, params, env, z2, env_initial(env), 6, i2, false);
        for (std::size_t t = 0; t < 6; ++t)
            CHECK(all_z2.actions[t].data == ref2.actions[t].data);
    }

    SUBCASE("ramp weights advance by (k+1)/window") {
        Rng b(12);
        const std::size_t switch_t = 1, window = 4, T = 8;
        const Trajectory traj =
            blend_rollout(specs, params, env, z1, z2, switch_t, window, T, b);
        for (std::size_t t = 0; t < T; ++t) {
            double a;
            if (t < switch_t)
                a = 0.0;
            else if (t < switch_t + window)
                a = double(t - switch_t + 1) / double(window);
            else
                a = 1.0;
            for (std::size_t d = 0; d < 2; ++d) {
                const double expect = (1.0 - a) * z1[d] + a * z2[d];
                CHECK(traj.actions[t][d] == doctest::Approx(expect).epsilon(1e-12));
            }
        }
    }

    CHECK_THROWS_AS(blend_rollout(specs, params, env, z1, z2, 5, 4, 8, rng),
                    NumericalError);
}
