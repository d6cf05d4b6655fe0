#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <vector>

#include "imit/core/param.hpp"
#include "imit/nets/encoder.hpp"
#include "imit/nets/mlp.hpp"
#include "imit/nets/state_decoder.hpp"

using namespace imit;

namespace {

Tensor random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(Shape::vec(n));
    for (double& x : t.data) x = rng.uniform(lo, hi);
    return t;
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("mlp: zero weights, identity map, hand-unrolled oracle") {
    Rng rng(1);

    MlpSpec spec{2, 3, {4}};
    ParamVector zero;
    add_mlp_params(zero, "net", spec, rng);
    for (double& x : zero.flat()) x = 0.0;
    const Tensor out = mlp_forward(zero, "net", spec, Tensor::vec({0.3, -0.8}));
    for (const double v : out.data) CHECK(v == 0.0);

    MlpSpec id_spec{3, 3, {}};
    ParamVector idp;
    add_mlp_params(idp, "net", id_spec, rng);
    Tensor w(Shape::mat(3, 3));
    for (std::size_t i = 0; i < 3; ++i) w.at(i, i) = 1.0;
    idp.set("net.w0", w);
    idp.set("net.b0", Tensor::zeros(Shape::vec(3)));
    const Tensor in = Tensor::vec({1.5, -2.5, 0.25});
    CHECK(mlp_forward(idp, "net", id_spec, in).data == in.data);

    // Independent matrix-arithmetic oracle for a 2-16-8-3 net.
    MlpSpec big{2, 3, {16, 8}};
    ParamVector p;
    add_mlp_params(p, "net", big, rng);
    const Tensor x = random_vec(2, rng);
    const Tensor got = mlp_forward(p, "net", big, x);

    std::vector<double> h(x.data.begin(), x.data.end());
    std::size_t dims[4] = {2, 16, 8, 3};
    for (std::size_t layer = 0; layer < 3; ++layer) {
        const Tensor w_l = p.get("net.w" + std::to_string(layer));
        const Tensor b_l = p.get("net.b" + std::to_string(layer));
        std::vector<double> next(dims[layer + 1]);
        for (std::size_t r = 0; r < dims[layer + 1]; ++r) {
            double acc = b_l[r];
            for (std::size_t c = 0; c < dims[layer]; ++c) acc += w_l.at(r, c) * h[c];
            next[r] = layer + 1 < 3 ? std::tanh(acc) : acc;
        }
        h = std::move(next);
    }
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(got[i] == doctest::Approx(h[i]).epsilon(1e-12));
}

TEST_CASE("mlp: dimension mismatch fails, gradient passes finite differences") {
    Rng rng(2);
    MlpSpec spec{3, 2, {5}};
    ParamVector p;
    add_mlp_params(p, "net", spec, rng);
    CHECK_THROWS_AS((void)mlp_forward(p, "net", spec, Tensor::vec({1.0, 2.0})),
                    NumericalError);

    const Tensor x = random_vec(3, rng);
    auto f = [&](Tape& t, const BoundParams& b) {
        Var out = mlp_apply(b, "net", spec, t.constant(x));
        return sum_all(mul(out, t.constant(Tensor::vec({0.7, -1.3}))));
    };
    CHECK(check_gradient(f, p, 1e-5) < 1e-4);
}

TEST_CASE("encoder: zero weights give zero embedding; length-1 average is the step") {
    Rng rng(3);
    EncoderSpec spec{2, 3, 2};
    ParamVector p;
    add_encoder_params(p, spec, rng);
    ParamVector zero = p;
    for (double& x : zero.flat()) x = 0.0;

    std::vector<Tensor> seq = {Tensor::vec({0.5, -0.5}), Tensor::vec({1.0, 0.0})};
    const auto [mean, log_std] = birnn_encode(zero, spec, seq);
    for (const double v : mean.data) CHECK(v == 0.0);
    for (const double v : log_std.data) CHECK(v == 0.0);

    // Length-1 sequence: embedding equals head(single-step direction output).
    std::vector<Tensor> one = {Tensor::vec({0.25, 0.75})};
    const std::vector<Tensor> outs = birnn_direction_outputs(p, spec, one);
    REQUIRE(outs.size() == 1);
    const Tensor hw = p.get("enc.head.w");
    const Tensor hb = p.get("enc.head.b");
    const auto [m1, ls1] = birnn_encode(p, spec, one);
    for (std::size_t r = 0; r < 4; ++r) {
        double acc = hb[r];
        for (std::size_t c = 0; c < 6; ++c) acc += hw.at(r, c) * outs[0][c];
        const double got = r < 2 ? m1[r] : ls1[r - 2];
        CHECK(got == doctest::Approx(acc).epsilon(1e-14));
    }

    CHECK_THROWS_AS((void)birnn_encode(p, spec, std::vector<Tensor>{}), NumericalError);
}

TEST_CASE("encoder: hand-computed gated cell (width 1)") {
    EncoderSpec spec{1, 1, 1};
    Rng rng(4);
    ParamVector p;
    add_encoder_params(p, spec, rng);
    // Silence the backward direction; fix forward weights to known values.
    for (const char* nm : {"enc.bw0.w", "enc.bw0.b", "enc.bw1.w", "enc.bw1.b"})
        p.set(nm, Tensor::zeros(p.entry(nm).shape));
    const Tensor w0(Shape::mat(4, 2), {0.3, -0.2,   // input gate [x, h]
                                       0.1, 0.4,    // forget gate
                                       -0.5, 0.2,   // output gate
                                       0.7, -0.1}); // candidate
    const Tensor b0 = Tensor::vec({0.05, 1.0, -0.1, 0.2});
    p.set("enc.fw0.w", w0);
    p.set("enc.fw0.b", b0);
    const Tensor w1(Shape::mat(4, 2), {0.6, 0.1, -0.3, 0.2, 0.4, -0.4, 0.25, 0.5});
    const Tensor b1 = Tensor::vec({0.0, 1.0, 0.1, -0.2});
    p.set("enc.fw1.w", w1);
    p.set("enc.fw1.b", b1);

    std::vector<Tensor> seq = {Tensor::vec({0.8}), Tensor::vec({-0.3})};
    const std::vector<Tensor> outs = birnn_direction_outputs(p, spec, seq);

    double h0 = 0.0, c0 = 0.0, h1 = 0.0, c1 = 0.0;
    std::vector<double> expected;
    for (const Tensor& xt : seq) {
        const double x = xt[0];
        auto cell = [](const Tensor& w, const Tensor& b, double in, double& h, double& c) {
            const double i = sigmoid_ref(w.at(0, 0) * in + w.at(0, 1) * h + b[0]);
            const double f = sigmoid_ref(w.at(1, 0) * in + w.at(1, 1) * h + b[1]);
            const double o = sigmoid_ref(w.at(2, 0) * in + w.at(2, 1) * h + b[2]);
            const double g = std::tanh(w.at(3, 0) * in + w.at(3, 1) * h + b[3]);
            c = f * c + i * g;
            h = o * std::tanh(c);
        };
        cell(w0, b0, x, h0, c0);
        cell(w1, b1, h0, h1, c1);
        expected.push_back(h1);
    }
    CHECK(outs[0][0] == doctest::Approx(expected[0]).epsilon(1e-14));
    CHECK(outs[1][0] == doctest::Approx(expected[1]).epsilon(1e-14));
}

TEST_CASE("encoder: reversal swaps direction outputs; symmetric weights fix the embedding") {
    Rng rng(5);
    EncoderSpec spec{2, 3, 2};
    ParamVector p;
    add_encoder_params(p, spec, rng);
    // Mirror forward weights into the backward direction.
    p.set("enc.bw0.w", p.get("enc.fw0.w"));
    p.set("enc.bw0.b", p.get("enc.fw0.b"));
    p.set("enc.bw1.w", p.get("enc.fw1.w"));
    p.set("enc.bw1.b", p.get("enc.fw1.b"));
    // Make the head indifferent to which half a feature lands in.
    Tensor hw = p.get("enc.head.w");
    for (std::size_t r = 0; r < hw.shape.d0; ++r)
        for (std::size_t c = 0; c < 3; ++c) hw.at(r, c + 3) = hw.at(r, c);
    p.set("enc.head.w", hw);

    Rng seq_rng(6);
    std::vector<Tensor> seq;
    for (int i = 0; i < 5; ++i) seq.push_back(random_vec(2, seq_rng));
    std::vector<Tensor> rev(seq.rbegin(), seq.rend());

    const std::vector<Tensor> fwd_outs = birnn_direction_outputs(p, spec, seq);
    const std::vector<Tensor> rev_outs = birnn_direction_outputs(p, spec, rev);
    for (std::size_t step = 0; step < seq.size(); ++step)
        for (std::size_t j = 0; j < 3; ++j) {
            // Forward half at step t == backward half at mirrored step.
            CHECK(fwd_outs[step][j] ==
                  doctest::Approx(rev_outs[seq.size() - 1 - step][j + 3]).epsilon(1e-14));
            CHECK(fwd_outs[step][j + 3] ==
                  doctest::Approx(rev_outs[seq.size() - 1 - step][j]).epsilon(1e-14));
        }

    const auto [m_f, ls_f] = birnn_encode(p, spec, seq);
    const auto [m_r, ls_r] = birnn_encode(p, spec, rev);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(m_f[i] == doctest::Approx(m_r[i]).epsilon(1e-12));
        CHECK(ls_f[i] == doctest::Approx(ls_r[i]).epsilon(1e-12));
    }
}

TEST_CASE("encoder: gradient passes finite differences") {
    Rng rng(7);
    EncoderSpec spec{2, 2, 2};
    ParamVector p;
    add_encoder_params(p, spec, rng);
    std::vector<Tensor> seq;
    for (int i = 0; i < 3; ++i) seq.push_back(random_vec(2, rng));
    auto f = [&](Tape& t, const BoundParams& b) {
        const LatentVars lv = birnn_apply(b, spec, seq);
        return add(sum_all(mul(lv.mean, t.constant(Tensor::vec({1.0, -0.5})))),
                   sum_all(mul(lv.log_std, t.constant(Tensor::vec({0.25, 2.0})))));
    };
    CHECK(check_gradient(f, p, 1e-5) < 1e-4);
}

TEST_CASE("mixture log density: collapse cases and quadrature normalization") {
    auto mog = [](std::vector<double> lg, std::vector<double> mu, std::vector<double> ls,
                  double v) {
        Tape t;
        return t.scalar(mog_log_prob(t.constant(Tensor::vec(std::move(lg))),
                                     t.constant(Tensor::vec(std::move(mu))),
                                     t.constant(Tensor::vec(std::move(ls))),
                                     t.constant_scalar(v)));
    };
    auto glp1 = [](double x, double mean, double ls) {
        Tape t;
        return t.scalar(gaussian_log_prob(t.constant(Tensor::vec({x})),
                                          t.constant(Tensor::vec({mean})),
                                          t.constant(Tensor::vec({ls}))));
    };

    CHECK(mog({3.7}, {0.4}, {-0.2}, 1.1) ==
          doctest::Approx(glp1(1.1, 0.4, -0.2)).epsilon(1e-14));
    CHECK(mog({1.0, -2.0}, {0.4, 0.4}, {-0.2, -0.2}, 1.1) ==
          doctest::Approx(glp1(1.1, 0.4, -0.2)).epsilon(1e-12));

    Rng rng(8);
    for (int rep = 0; rep < 3; ++rep) {
        std::vector<double> lg(3), mu(3), ls(3);
        for (int i = 0; i < 3; ++i) {
            lg[i] = rng.uniform(-1.0, 1.0);
            mu[i] = rng.uniform(-1.5, 1.5);
            ls[i] = rng.uniform(-1.0, 0.5);
        }
        const int n = 60000;
        const double lo = -20.0, hi = 20.0, h = (hi - lo) / n;
        double acc = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double w = (i == 0 || i == n) ? 0.5 : 1.0;
            acc += w * std::exp(mog(lg, mu, ls, lo + i * h));
        }
        CHECK(acc * h == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("state decoder: degenerate and zero-weight reductions") {
    Rng rng(9);
    StateDecoderSpec one{1, 2, 4, 2, 3};
    ParamVector p;
    add_state_decoder_params(p, one, rng);
    const Tensor z = random_vec(2, rng);
    const Tensor xp = random_vec(1, rng);
    const Tensor xn = random_vec(1, rng);
    // state_dim=1 must reduce to the single mixture density at position 0.
    Tape t;
    BoundParams b(t, p, false);
    const auto heads = state_decoder_heads(b, one, t.constant(z), t.constant(xp),
                                           t.constant(xn));
    const double direct = t.scalar(mog_log_prob(heads[0].logits, heads[0].means,
                                                heads[0].log_stds,
                                                t.constant_scalar(xn[0])));
    CHECK(state_decoder_log_prob(p, one, z, xp, xn) == direct);

    // All-zero params, K=1: every conditional is a standard normal.
    StateDecoderSpec sd{3, 2, 4, 2, 1};
    ParamVector pz;
    add_state_decoder_params(pz, sd, rng);
    for (double& x : pz.flat()) x = 0.0;
    const Tensor xn3 = Tensor::vec({0.3, -0.7, 1.2});
    double expect = 0.0;
    const double half_log_2pi = 0.5 * std::log(2.0 * 3.14159265358979323846);
    for (const double v : xn3.data) expect += -half_log_2pi - 0.5 * v * v;
    CHECK(state_decoder_log_prob(pz, sd, random_vec(2, rng), random_vec(3, rng), xn3) ==
          doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("state decoder: perturbing a component never reaches earlier conditionals") {
    Rng rng(10);
    StateDecoderSpec spec{4, 2, 5, 3, 2};
    ParamVector p;
    add_state_decoder_params(p, spec, rng);
    const Tensor z = random_vec(2, rng);
    const Tensor xp = random_vec(4, rng);
    Tensor xn = random_vec(4, rng);

    auto conditionals = [&](const Tensor& next) {
        Tape t;
        BoundParams b(t, p, false);
        const auto heads = state_decoder_heads(b, spec, t.constant(z), t.constant(xp),
                                               t.constant(next));
        std::vector<double> out;
        for (std::size_t d = 0; d < 4; ++d)
            out.push_back(t.scalar(mog_log_prob(heads[d].logits, heads[d].means,
                                                heads[d].log_stds,
                                                t.constant_scalar(next[d]))));
        return out;
    };

    const std::vector<double> base = conditionals(xn);
    for (std::size_t d = 0; d < 4; ++d) {
        Tensor bumped = xn;
        bumped.data[d] += 0.37;
        const std::vector<double> after = conditionals(bumped);
        for (std::size_t e = 0; e < d; ++e) {
            // Bit-identical: earlier conditionals cannot see the change.
            CHECK(std::memcmp(&base[e], &after[e], sizeof(double)) == 0);
        }
        CHECK(after[d] != base[d]);
    }
}

TEST_CASE("state decoder: autodiff causality — later components get zero gradient") {
    Rng rng(11);
    StateDecoderSpec spec{5, 2, 4, 2, 2};
    ParamVector p;
    add_state_decoder_params(p, spec, rng);
    const Tensor z = random_vec(2, rng);
    const Tensor xp = random_vec(5, rng);
    const Tensor xn = random_vec(5, rng);

    for (std::size_t d_max = 0; d_max + 1 < 5; ++d_max) {
        Tape t;
        BoundParams b(t, p, false);
        Var xnext = t.leaf(xn);
        Var lp = state_decoder_partial_log_prob(b, spec, t.constant(z), t.constant(xp),
                                                xnext, d_max);
        const Var wrt[] = {xnext};
        const Tensor g = t.gradients(lp, wrt)[0];
        for (std::size_t e = d_max + 1; e < 5; ++e) CHECK(g[e] == 0.0);
        CHECK(g[d_max] != 0.0);
    }
}

TEST_CASE("state decoder: gradient passes finite differences including inputs") {
    Rng rng(12);
    StateDecoderSpec spec{3, 2, 3, 2, 2};
    ParamVector p;
    add_state_decoder_params(p, spec, rng);
    p.add("z", random_vec(2, rng));
    p.add("x_prev", random_vec(3, rng));
    p.add("x_next", random_vec(3, rng));
    auto f = [&](Tape&, const BoundParams& b) {
        return state_decoder_apply_log_prob(b, spec, b.at("z"), b.at("x_prev"),
                                            b.at("x_next"));
    };
    CHECK(check_gradient(f, p, 1e-5) < 1e-4);
}

TEST_CASE("state decoder sampling: deterministic seed, mean path, mixture mean") {
    Rng rng(13);
    StateDecoderSpec spec{3, 2, 4, 2, 1};
    ParamVector p;
    add_state_decoder_params(p, spec, rng);
    for (double& x : p.flat()) x = 0.0;
    // Head bias layout [logits | means | log_stds]: pin mean 0.7, log_std -20.
    Tensor hb = p.get("sd.head2.b");
    hb.data[1] = 0.7;
    hb.data[2] = -20.0;
    p.set("sd.head2.b", hb);
    const Tensor z = Tensor::zeros(Shape::vec(2));
    const Tensor xp = Tensor::zeros(Shape::vec(3));
    Rng s1(77), s2(77);
    const Tensor a = state_decoder_sample(p, spec, z, xp, s1);
    const Tensor b = state_decoder_sample(p, spec, z, xp, s2);
    CHECK(a.data == b.data);  // fixed seed → identical
    for (const double v : a.data) CHECK(std::abs(v - 0.7) < 1e-6);

    // Monte Carlo mean of component 0 vs analytic mixture mean.
    StateDecoderSpec m{2, 2, 3, 2, 3};
    ParamVector pm;
    Rng prng(14);
    add_state_decoder_params(pm, m, prng);
    const Tensor zm = random_vec(2, prng);
    const Tensor xpm = random_vec(2, prng);
    Tape t;
    BoundParams bm(t, pm, false);
    const auto heads = state_decoder_heads(bm, m, t.constant(zm), t.constant(xpm),
                                           t.constant(Tensor::zeros(Shape::vec(2))));
    const Tensor lg = t.val(heads[0].logits);
    const Tensor mu = t.val(heads[0].means);
    const Tensor ls = t.val(heads[0].log_stds);
    double norm = 0.0, mean = 0.0, second = 0.0;
    for (std::size_t i = 0; i < 3; ++i) norm += std::exp(lg[i]);
    for (std::size_t i = 0; i < 3; ++i) {
        const double w = std::exp(lg[i]) / norm;
        mean += w * mu[i];
        second += w * (mu[i] * mu[i] + std::exp(2.0 * ls[i]));
    }
    const double var = second - mean * mean;

    Rng draw(15);
    const int n = 10000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        acc += state_decoder_sample(pm, m, zm, xpm, draw)[0];
    const double se = std::sqrt(var / n);
    CHECK(std::abs(acc / n - mean) < 3.0 * se);
}

TEST_CASE("forward passes are pure: repeated calls bit-identical") {
    Rng rng(16);
    StateDecoderSpec spec{3, 2, 4, 2, 2};
    ParamVector p;
    add_state_decoder_params(p, spec, rng);
    const Tensor z = random_vec(2, rng), xp = random_vec(3, rng), xn = random_vec(3, rng);
    const double a = state_decoder_log_prob(p, spec, z, xp, xn);
    const double b = state_decoder_log_prob(p, spec, z, xp, xn);
    CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);

    EncoderSpec es{2, 2, 2};
    ParamVector pe;
    add_encoder_params(pe, es, rng);
    std::vector<Tensor> seq = {random_vec(2, rng), random_vec(2, rng)};
    const auto r1 = birnn_encode(pe, es, seq);
    const auto r2 = birnn_encode(pe, es, seq);
    CHECK(r1.first.data == r2.first.data);
    CHECK(r1.second.data == r2.second.data);
}
