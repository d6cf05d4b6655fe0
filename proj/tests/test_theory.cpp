#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "imit/core/error.hpp"
#include "imit/core/rng.hpp"
#include "imit/theory/discrete_gan.hpp"

using namespace imit;

namespace {

// Uniform q(z|y) — a valid posterior that is almost never the Bayes one.
PosteriorMatrix uniform_posterior(std::size_t ny, std::size_t nz) {
    PosteriorMatrix q;
    q.q_given_y.assign(ny, std::vector<double>(nz, 1.0 / double(nz)));
    return q;
}

}  // namespace

TEST_CASE("constant discriminator 1/2 gives value -2 log 2 under any posterior") {
    Rng rng(41);
    for (int rep = 0; rep < 20; ++rep) {
        DiscreteGanInstance inst = random_instance(rng);
        for (auto& row : inst.d)
            for (double& v : row) v = 0.5;
        const double expect = -2.0 * std::log(2.0);
        CHECK(v_conditional(inst) == doctest::Approx(expect).epsilon(1e-14));
        CHECK(v_mixed(inst, true_posterior(inst)) ==
              doctest::Approx(expect).epsilon(1e-14));
        // The identity is degenerate here: every posterior gives the same value.
        CHECK(v_mixed(inst, uniform_posterior(inst.ny(), inst.nz())) ==
              doctest::Approx(expect).epsilon(1e-14));
        CHECK(v_mixed(inst, random_posterior(inst.ny(), inst.nz(), rng)) ==
              doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("one-point spaces reduce to log d + log(1-d)") {
    DiscreteGanInstance inst;
    inst.pz = {1.0};
    inst.py_given_z = {{1.0}};
    inst.g_given_z = {{1.0}};
    inst.d = {{0.3}};
    const double expect = std::log(0.3) + std::log(0.7);
    CHECK(v_conditional(inst) == doctest::Approx(expect).epsilon(1e-15));
    PosteriorMatrix q = true_posterior(inst);
    CHECK(q.q_given_y.size() == 1);
    CHECK(q.q_given_y[0][0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(v_mixed(inst, q) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("mixed-posterior value matches brute-force triple sum on a 3x5 instance") {
    Rng rng(7);
    DiscreteGanInstance inst = random_instance(rng, 5, 3);
    // Force the sizes: rebuild until we get exactly |Z|=3, |Y|=5.
    while (inst.nz() != 3 || inst.ny() != 5) inst = random_instance(rng, 5, 3);
    const PosteriorMatrix q = true_posterior(inst);

    // Independent accumulation: expand every term of
    //   sum_y p(y) sum_z q(z|y) [ log d(z,y) + sum_yh g(yh|z) log(1-d(z,yh)) ]
    // without hoisting anything.
    double brute = 0.0;
    for (std::size_t y = 0; y < 5; ++y) {
        double py = 0.0;
        for (std::size_t z = 0; z < 3; ++z) py += inst.pz[z] * inst.py_given_z[z][y];
        for (std::size_t z = 0; z < 3; ++z) {
            brute += py * q.q_given_y[y][z] * std::log(inst.d[z][y]);
            for (std::size_t yh = 0; yh < 5; ++yh)
                brute += py * q.q_given_y[y][z] * inst.g_given_z[z][yh] *
                         std::log(1.0 - inst.d[z][yh]);
        }
    }
    CHECK(std::abs(v_mixed(inst, q) - brute) < 1e-14);
}

TEST_CASE("bayes posterior: single latent, uninformative likelihood, exact identity") {
    Rng rng(11);

    SUBCASE("|Z| = 1 forces the posterior to 1") {
        DiscreteGanInstance inst = random_instance(rng, 8, 1);
        const PosteriorMatrix q = true_posterior(inst);
        for (const auto& row : q.q_given_y) {
            REQUIRE(row.size() == 1);
            CHECK(row[0] == doctest::Approx(1.0).epsilon(1e-15));
        }
    }

    SUBCASE("likelihood independent of z returns the prior") {
        DiscreteGanInstance inst = random_instance(rng, 6, 4);
        while (inst.nz() < 2) inst = random_instance(rng, 6, 4);
        for (std::size_t z = 1; z < inst.nz(); ++z)
            inst.py_given_z[z] = inst.py_given_z[0];
        const PosteriorMatrix q = true_posterior(inst);
        for (const auto& row : q.q_given_y)
            for (std::size_t z = 0; z < inst.nz(); ++z)
                CHECK(row[z] == doctest::Approx(inst.pz[z]).epsilon(1e-12));
    }

    SUBCASE("q(z|y) p(y) = p(y|z) p(z) entrywise") {
        for (int rep = 0; rep < 10; ++rep) {
            DiscreteGanInstance inst = random_instance(rng);
            const PosteriorMatrix q = true_posterior(inst);
            for (std::size_t y = 0; y < inst.ny(); ++y) {
                double py = 0.0;
                for (std::size_t z = 0; z < inst.nz(); ++z)
                    py += inst.pz[z] * inst.py_given_z[z][y];
                for (std::size_t z = 0; z < inst.nz(); ++z)
                    CHECK(std::abs(q.q_given_y[y][z] * py -
                                   inst.py_given_z[z][y] * inst.pz[z]) < 1e-12);
            }
        }
    }
}

TEST_CASE("posterior factorization: mixed value equals conditional value at the "
          "bayes posterior, and only there") {
    Rng rng(2024);
    for (int rep = 0; rep < 100; ++rep) {
        DiscreteGanInstance inst = random_instance(rng);
        CHECK(std::abs(v_mixed(inst, true_posterior(inst)) - v_conditional(inst)) <
              1e-10);
    }

    // Negative control. A non-Bayes posterior only exists for |Z| >= 2 (the
    // one-latent simplex is a single point), so control instances are drawn
    // with at least two latents.
    int control_hits = 0;
    for (int rep = 0; rep < 100; ++rep) {
        DiscreteGanInstance inst = random_instance(rng);
        while (inst.nz() < 2) inst = random_instance(rng);
        const PosteriorMatrix wrong = random_posterior(inst.ny(), inst.nz(), rng);
        if (std::abs(v_mixed(inst, wrong) - v_conditional(inst)) > 1e-3)
            ++control_hits;
    }
    // A mismatched posterior must move the value; allow a few near-collisions.
    CHECK(control_hits >= 95);
}

TEST_CASE("pointwise-optimal discriminator beats random ones") {
    Rng rng(99);
    for (int rep = 0; rep < 5; ++rep) {
        DiscreteGanInstance inst = random_instance(rng);
        inst.d = optimal_discriminator(inst);
        validate_instance(inst);
        const double vstar = v_conditional(inst);
        for (int k = 0; k < 50; ++k) {
            DiscreteGanInstance other = inst;
            for (auto& row : other.d)
                for (double& v : row) v = rng.uniform(0.05, 0.95);
            CHECK(v_conditional(other) <= vstar + 1e-15);
        }
    }
}

TEST_CASE("jensen-shannon divergence: endpoints, a hand value, symmetry") {
    const std::vector<double> p = {0.2, 0.5, 0.3};
    CHECK(jsd(p, p) == 0.0);  // log(1) is exactly zero termwise

    const std::vector<double> a = {1.0, 0.0};
    const std::vector<double> b = {0.0, 1.0};
    CHECK(jsd(a, b) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

    // Direct summation oracle for [1,0] vs [1/2,1/2]: m = [3/4, 1/4].
    const std::vector<double> u = {0.5, 0.5};
    const double oracle = 0.5 * (1.0 * std::log(1.0 / 0.75)) +
                          0.5 * (0.5 * std::log(0.5 / 0.75) + 0.5 * std::log(0.5 / 0.25));
    CHECK(jsd(a, u) == doctest::Approx(oracle).epsilon(1e-15));
    CHECK(oracle == doctest::Approx(0.215761).epsilon(1e-5));

    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        DiscreteGanInstance inst = random_instance(rng);
        const auto& x = inst.py_given_z[0];
        const auto& y = inst.g_given_z[0];
        CHECK(std::abs(jsd(x, y) - jsd(y, x)) < 1e-15);
        CHECK(jsd(x, y) >= 0.0);
        CHECK(jsd(x, y) <= std::log(2.0) + 1e-15);
    }

    CHECK_THROWS_AS(jsd(a, p), NumericalError);
}

TEST_CASE("generator cost: floor hit exactly when generator matches data") {
    Rng rng(17);
    for (int rep = 0; rep < 20; ++rep) {
        DiscreteGanInstance inst = random_instance(rng);
        DiscreteGanInstance matched = inst;
        matched.g_given_z = matched.py_given_z;
        // Every JSD term is exactly zero, so the cost is the floor bit-for-bit.
        CHECK(c_of_g(matched) == -std::log(4.0));

        const double c = c_of_g(inst);
        CHECK(c >= -std::log(4.0));
        CHECK(c <= 1e-15);  // 2 JSD <= log 4
    }
}

TEST_CASE("generator cost equals the conditional value at the optimal discriminator") {
    Rng rng(314);
    for (int rep = 0; rep < 100; ++rep) {
        DiscreteGanInstance inst = random_instance(rng);
        inst.d = optimal_discriminator(inst);
        CHECK(std::abs(v_conditional(inst) - c_of_g(inst)) < 1e-10);
    }
}

TEST_CASE("instance validation rejects malformed inputs") {
    Rng rng(1);
    DiscreteGanInstance good = random_instance(rng);

    DiscreteGanInstance bad_sum = good;
    bad_sum.pz[0] += 0.1;
    CHECK_THROWS_AS(validate_instance(bad_sum), NumericalError);

    DiscreteGanInstance bad_neg = good;
    bad_neg.py_given_z[0][0] = -bad_neg.py_given_z[0][0];
    CHECK_THROWS_AS(validate_instance(bad_neg), NumericalError);

    DiscreteGanInstance bad_d = good;
    bad_d.d[0][0] = 1.0;
    CHECK_THROWS_AS(validate_instance(bad_d), NumericalError);

    DiscreteGanInstance bad_rows = good;
    bad_rows.d.pop_back();
    if (good.nz() > 1) CHECK_THROWS_AS(validate_instance(bad_rows), NumericalError);
}
