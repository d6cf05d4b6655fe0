#pragma once

#include <span>
#include <vector>

#include "imit/core/rng.hpp"
#include "imit/core/tensor.hpp"

namespace imit {

// Finite-space conditional GAN: latent z with prior pz, data distribution
// p(y|z), generator g(y|z), discriminator d(z,y) ∈ (0,1). Sums over these
// spaces are exact, so the mixed-posterior/conditional value identity and the
// optimal-discriminator cost identity can be checked to near machine
// precision.
struct DiscreteGanInstance {
    std::vector<double> pz;                        // |Z|
    std::vector<std::vector<double>> py_given_z;   // |Z| rows of |Y|
    std::vector<std::vector<double>> g_given_z;    // |Z| rows of |Y|
    std::vector<std::vector<double>> d;            // |Z| rows of |Y|, entries in (0,1)

    std::size_t nz() const { return pz.size(); }
    std::size_t ny() const { return py_given_z.empty() ? 0 : py_given_z[0].size(); }
};

void validate_instance(const DiscreteGanInstance& inst);

// Strictly positive random instance with |Y| in [2, max_y], |Z| in [1, max_z].
DiscreteGanInstance random_instance(Rng& rng, std::size_t max_y = 8,
                                    std::size_t max_z = 4);

struct PosteriorMatrix {
    std::vector<std::vector<double>> q_given_y;  // |Y| rows of |Z|
};

// Bayes posterior q(z|y) = p(y|z)p(z)/p(y). Fails if some queried y has
// marginal zero.
PosteriorMatrix true_posterior(const DiscreteGanInstance& inst);

// Arbitrary row-stochastic posterior — the negative control for the identity.
PosteriorMatrix random_posterior(std::size_t ny, std::size_t nz, Rng& rng);

// Σ_y p(y) Σ_z q(z|y) [ log d(z,y) + Σ_ŷ g(ŷ|z) log(1 − d(z,ŷ)) ]
double v_mixed(const DiscreteGanInstance& inst, const PosteriorMatrix& q);

// Σ_z p(z) [ Σ_y p(y|z) log d(z,y) + Σ_ŷ g(ŷ|z) log(1 − d(z,ŷ)) ]
double v_conditional(const DiscreteGanInstance& inst);

// d*(z,y) = p(y|z) / (p(y|z) + g(y|z)), clamped to [1e-12, 1−1e-12].
std::vector<std::vector<double>> optimal_discriminator(const DiscreteGanInstance& inst);

// ½ KL(p||m) + ½ KL(q||m) with m = (p+q)/2, natural log, 0·log 0 := 0.
double jsd(std::span<const double> p, std::span<const double> q);

// 2 Σ_z p(z) · JSD(p(·|z), g(·|z)) − log 4: the generator cost at the optimal
// discriminator.
double c_of_g(const DiscreteGanInstance& inst);

}  // namespace imit
