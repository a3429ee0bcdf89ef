#pragma once

#include "splinelens/batchnorm.hpp"
#include "splinelens/partition2d.hpp"

#include <string>
#include <vector>

namespace splinelens {

struct JitterEnsemble {
    std::vector<BatchStats> realizations;
    std::vector<std::vector<LabeledSegment>> boundaries;   // per realization; may be empty
    std::vector<std::size_t> skipped_draws;                // degenerate stats
    std::uint64_t seed = 0;
    std::size_t batch_size = 0;
    std::size_t n_draws = 0;
};

// Per draw: stats from a resampled mini-batch, full partition trace, and the
// decision boundary F_{L,1}. Requires D_0 = 2 and a scalar head.
JitterEnsemble boundary_ensemble(const NetworkSpec& net, const Matrix& dataset,
                                 std::size_t batch_size, std::size_t n_draws, const Box2& box,
                                 std::uint64_t seed);

// Stats-only ensemble (any input dimension).
JitterEnsemble stats_ensemble(const NetworkSpec& net, const Matrix& dataset,
                              std::size_t batch_size, std::size_t n_draws, std::uint64_t seed);

// Symmetric Hausdorff distance between two polyline sets, dense arc-length
// sampling with `samples` points per set.
double hausdorff_distance(const std::vector<LabeledSegment>& a,
                          const std::vector<LabeledSegment>& b, std::size_t samples = 1000);

// Mean over all unordered boundary pairs.
double mean_pairwise_hausdorff(const JitterEnsemble& ensemble, std::size_t samples = 1000);

struct UnitDistributionRow {
    int layer = 0, unit = 0;
    double mu_mean = 0.0, mu_var = 0.0;
    double sigma2_mean = 0.0, sigma2_var = 0.0;
    double analytic_var_mu = 0.0, analytic_var_sigma2 = 0.0;
    double rel_gap_mu = 0.0, rel_gap_sigma2 = 0.0;
};

// Empirical mean/variance of mu and sigma^2 across draws vs the analytic
// predictions (one VariancePrediction per (layer, unit), ordered by layer
// then unit over the BN layers).
std::vector<UnitDistributionRow> distribution_report(const JitterEnsemble& ensemble,
                                                     const std::vector<VariancePrediction>& analytic);

std::string ensemble_csv(const JitterEnsemble& ensemble);
std::string distribution_report_csv(const std::vector<UnitDistributionRow>& rows);
std::string overlay_svg(const JitterEnsemble& ensemble, const Box2& box,
                        const Matrix* points = nullptr, const Eigen::VectorXi* labels = nullptr,
                        int width_px = 640);

} // namespace splinelens
