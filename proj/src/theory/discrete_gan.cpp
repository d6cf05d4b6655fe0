#include "imit/theory/discrete_gan.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "imit/core/error.hpp"

namespace imit {

namespace {

constexpr double kClamp = 1e-12;

void check_stochastic(const std::vector<double>& row, const char* what) {
    double sum = 0.0;
    for (const double v : row) {
        require(std::isfinite(v) && v >= 0.0, std::string(what) + ": negative entry");
        sum += v;
    }
    require(std::abs(sum - 1.0) <= 1e-12, std::string(what) + ": row sums to " +
                                              std::to_string(sum));
}

std::vector<double> random_simplex(std::size_t n, Rng& rng) {
    std::vector<double> row(n);
    double sum = 0.0;
    for (double& v : row) {
        v = rng.uniform(0.05, 1.0);
        sum += v;
    }
    for (double& v : row) v /= sum;
    return row;
}

}  // namespace

void validate_instance(const DiscreteGanInstance& inst) {
    require(inst.nz() >= 1 && inst.ny() >= 1, "gan instance: empty spaces");
    check_stochastic(inst.pz, "pz");
    require(inst.py_given_z.size() == inst.nz() && inst.g_given_z.size() == inst.nz() &&
                inst.d.size() == inst.nz(),
            "gan instance: row count mismatch");
    for (std::size_t z = 0; z < inst.nz(); ++z) {
        require(inst.py_given_z[z].size() == inst.ny() &&
                    inst.g_given_z[z].size() == inst.ny() &&
                    inst.d[z].size() == inst.ny(),
                "gan instance: column count mismatch");
        check_stochastic(inst.py_given_z[z], "py_given_z");
        check_stochastic(inst.g_given_z[z], "g_given_z");
        for (const double v : inst.d[z])
            require(v > 0.0 && v < 1.0, "gan instance: discriminator outside (0,1)");
    }
}

DiscreteGanInstance random_instance(Rng& rng, std::size_t max_y, std::size_t max_z) {
    DiscreteGanInstance inst;
    const std::size_t nz = 1 + rng.below(max_z);
    const std::size_t ny = 2 + rng.below(max_y - 1);
    inst.pz = random_simplex(nz, rng);
    for (std::size_t z = 0; z < nz; ++z) {
        inst.py_given_z.push_back(random_simplex(ny, rng));
        inst.g_given_z.push_back(random_simplex(ny, rng));
        std::vector<double> drow(ny);
        for (double& v : drow) v = rng.uniform(0.05, 0.95);
        inst.d.push_back(std::move(drow));
    }
    validate_instance(inst);
    return inst;
}

PosteriorMatrix true_posterior(const DiscreteGanInstance& inst) {
    validate_instance(inst);
    PosteriorMatrix q;
    q.q_given_y.assign(inst.ny(), std::vector<double>(inst.nz(), 0.0));
    for (std::size_t y = 0; y < inst.ny(); ++y) {
        double py = 0.0;
        for (std::size_t z = 0; z < inst.nz(); ++z)
            py += inst.pz[z] * inst.py_given_z[z][y];
        require(py > 0.0, "posterior: marginal p(y) is zero at y=" + std::to_string(y));
        for (std::size_t z = 0; z < inst.nz(); ++z)
            q.q_given_y[y][z] = inst.pz[z] * inst.py_given_z[z][y] / py;
    }
    return q;
}

PosteriorMatrix random_posterior(std::size_t ny, std::size_t nz, Rng& rng) {
    PosteriorMatrix q;
    for (std::size_t y = 0; y < ny; ++y) q.q_given_y.push_back(random_simplex(nz, rng));
    return q;
}

double v_mixed(const DiscreteGanInstance& inst, const PosteriorMatrix& q) {
    validate_instance(inst);
    require(q.q_given_y.size() == inst.ny(), "v_mixed: posterior row count");

    // Generator term depends on z only; hoisted out of the y sum.
    std::vector<double> gen_term(inst.nz(), 0.0);
    for (std::size_t z = 0; z < inst.nz(); ++z)
        for (std::size_t y = 0; y < inst.ny(); ++y)
            gen_term[z] += inst.g_given_z[z][y] * std::log(1.0 - inst.d[z][y]);

    double total = 0.0;
    for (std::size_t y = 0; y < inst.ny(); ++y) {
        double py = 0.0;
        for (std::size_t z = 0; z < inst.nz(); ++z)
            py += inst.pz[z] * inst.py_given_z[z][y];
        double inner = 0.0;
        for (std::size_t z = 0; z < inst.nz(); ++z)
            inner += q.q_given_y[y][z] * (std::log(inst.d[z][y]) + gen_term[z]);
        total += py * inner;
    }
    return total;
}

double v_conditional(const DiscreteGanInstance& inst) {
    validate_instance(inst);
    double total = 0.0;
    for (std::size_t z = 0; z < inst.nz(); ++z) {
        double inner = 0.0;
        for (std::size_t y = 0; y < inst.ny(); ++y)
            inner += inst.py_given_z[z][y] * std::log(inst.d[z][y]) +
                     inst.g_given_z[z][y] * std::log(1.0 - inst.d[z][y]);
        total += inst.pz[z] * inner;
    }
    return total;
}

std::vector<std::vector<double>> optimal_discriminator(const DiscreteGanInstance& inst) {
    std::vector<std::vector<double>> d(inst.nz(), std::vector<double>(inst.ny(), 0.5));
    for (std::size_t z = 0; z < inst.nz(); ++z)
        for (std::size_t y = 0; y < inst.ny(); ++y) {
            const double p = inst.py_given_z[z][y];
            const double g = inst.g_given_z[z][y];
            if (p + g > 0.0) {
                const double v = p / (p + g);
                d[z][y] = std::min(1.0 - kClamp, std::max(kClamp, v));
            }
            // p = g = 0: the cell carries no probability under either measure;
            // any value works, ½ is kept.
        }
    return d;
}

double jsd(std::span<const double> p, std::span<const double> q) {
    require(p.size() == q.size(), "jsd: length mismatch");
    auto kl_to_mid = [&](std::span<const double> a) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] == 0.0) continue;  // 0·log 0 := 0
            const double m = 0.5 * (p[i] + q[i]);
            acc += a[i] * std::log(a[i] / m);
        }
        return acc;
    };
    return 0.5 * kl_to_mid(p) + 0.5 * kl_to_mid(q);
}

double c_of_g(const DiscreteGanInstance& inst) {
    validate_instance(inst);
    double acc = 0.0;
    for (std::size_t z = 0; z < inst.nz(); ++z)
        acc += inst.pz[z] * jsd(inst.py_given_z[z], inst.g_given_z[z]);
    return 2.0 * acc - std::log(4.0);
}

}  // namespace imit
