#pragma once

#include "splinelens/network.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace splinelens {

struct LabeledDataset {
    Matrix inputs;                        // n x D_0
    std::optional<Eigen::VectorXi> labels;
    std::string provenance;               // generator=...;seed=...

    Eigen::Index size() const { return inputs.rows(); }
    Eigen::Index dim() const { return inputs.cols(); }
};

// n points on r(theta) = r0 (1 + a cos(arms * theta)) with radial jitter.
LabeledDataset star2d(std::size_t n, int arms, double r0, double a, double jitter,
                      std::uint64_t seed);

enum class TwoClassKind { Clusters, Rings, Xor };

LabeledDataset two_class_2d(TwoClassKind kind, std::size_t n, double noise, std::uint64_t seed);

LabeledDataset gaussian_inputs(std::size_t n, Eigen::Index dim, const Vector& mean,
                               const Vector& diag_cov, std::uint64_t seed);

// Gaussian matched to the sample mean and per-dimension variance of `data`.
LabeledDataset matched_gaussian(const Matrix& data, std::size_t n, std::uint64_t seed);

void save_dataset_csv(const std::string& path, const LabeledDataset& ds);
LabeledDataset load_dataset_csv(const std::string& path);

} // namespace splinelens
