#pragma once

#include "splinelens/network.hpp"
#include "splinelens/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace splinelens {

// Plug-in moments recorded while computing stats: per unit <w^2, rho>
// (rho = elementwise batch variance of the layer input) and the fourth
// central moment of the pre-activation W z.
struct LayerMoments {
    Vector w2_rho;
    Vector phi4;
};

struct BatchStats {
    BNState bn;                                   // mu/sigma filled on BN layers, gamma=1, beta=0
    std::vector<std::optional<LayerMoments>> moments;
    std::string source;                           // "full_training_set" or "minibatch(id,size)"
    std::size_t batch_size = 0;
};

// Layer-by-layer population statistics per the running-update formula:
// mu_l = mean of W_l z_{l-1}, sigma_l = sqrt of the 1/|B| variance, with
// z propagated using the stats already fixed for earlier layers.
// batch is n x D_0, one input per row. eps_bn = 0 turns zero-variance
// units into an error naming (layer, unit); eps_bn > 0 floors sigma.
BatchStats compute_stats(const NetworkSpec& net, const Matrix& batch, double eps_bn = 0.0);

// Evaluates the whole batch through layers 1..upto (upto = depth() for all),
// returning z_{upto} rows. Shared propagation used by compute_stats and callers.
Matrix propagate(const NetworkSpec& net, const BNState& bn, const Matrix& batch, int upto);

struct VariancePrediction {
    double var_mu = 0.0;
    double var_sigma2 = 0.0;
};

// var(mu) = <w^2, rho>/|B|;
// var(sigma^2) = (1/|B|) (phi4 - <w^2, rho>^2 (|B|-3)/(|B|-1)).
// The formula is the classical sampling variance of the Bessel-corrected
// variance estimator; the running stats themselves use the 1/|B| estimator.
// See the module docs for the discrepancy note.
VariancePrediction variance_prediction(const Vector& w, const Vector& rho,
                                       double phi4, std::size_t batch_size);
VariancePrediction variance_prediction(double w2_rho, double phi4, std::size_t batch_size);

// n_draws mini-batches of batch_size sampled uniformly without replacement
// (independently per draw); deterministic under seed.
std::vector<BatchStats> sample_realizations(const NetworkSpec& net, const Matrix& dataset,
                                            std::size_t batch_size, std::size_t n_draws,
                                            std::uint64_t seed);

// Inflates stats computed from actual_size samples so they fluctuate as if
// computed from virtual_size < actual_size samples: Gaussian additive noise
// on mu, unit-mean scaled chi-square multiplicative noise on sigma^2.
// Requires the plug-in moments recorded by compute_stats.
BatchStats noise_controlled(const BatchStats& stats, std::size_t actual_size,
                            std::size_t virtual_size, std::uint64_t seed);

} // namespace splinelens
