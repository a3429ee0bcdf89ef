#include "splinelens/datasets.hpp"
#include "splinelens/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace splinelens {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

LabeledDataset star2d(std::size_t n, int arms, double r0, double a, double jitter,
                      std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("star2d: n must be >= 1");
    if (arms < 3) throw std::invalid_argument("star2d: arms must be >= 3");
    Rng rng = Rng(seed).derive(0x5742);
    LabeledDataset ds;
    ds.inputs.resize(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double theta = rng.uniform(0.0, kTwoPi);
        const double r = r0 * (1.0 + a * std::cos(arms * theta)) + jitter * rng.normal();
        ds.inputs(static_cast<Eigen::Index>(i), 0) = r * std::cos(theta);
        ds.inputs(static_cast<Eigen::Index>(i), 1) = r * std::sin(theta);
    }
    ds.provenance = "generator=star2d;n=" + std::to_string(n) + ";arms=" + std::to_string(arms) +
                    ";r0=" + fmt17(r0) + ";a=" + fmt17(a) + ";jitter=" + fmt17(jitter) +
                    ";seed=" + std::to_string(seed);
    return ds;
}

LabeledDataset two_class_2d(TwoClassKind kind, std::size_t n, double noise, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("two_class_2d: n must be >= 2");
    Rng rng = Rng(seed).derive(0x2c2d);
    LabeledDataset ds;
    ds.inputs.resize(static_cast<Eigen::Index>(n), 2);
    Eigen::VectorXi labels(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);   // balanced by construction
        double x = 0.0, y = 0.0;
        switch (kind) {
            case TwoClassKind::Clusters: {
                const double cx = label == 0 ? -1.5 : 1.5;
                x = cx + noise * rng.normal();
                y = (label == 0 ? -0.5 : 0.5) + noise * rng.normal();
                break;
            }
            case TwoClassKind::Rings: {
                const double r = (label == 0 ? 0.8 : 2.0) + noise * rng.normal();
                const double t = rng.uniform(0.0, kTwoPi);
                x = r * std::cos(t);
                y = r * std::sin(t);
                break;
            }
            case TwoClassKind::Xor: {
                const double sx = rng.uniform() < 0.5 ? -1.0 : 1.0;
                const double sy = label == 0 ? sx : -sx;
                x = sx * 1.2 + noise * rng.normal();
                y = sy * 1.2 + noise * rng.normal();
                break;
            }
        }
        ds.inputs(static_cast<Eigen::Index>(i), 0) = x;
        ds.inputs(static_cast<Eigen::Index>(i), 1) = y;
        labels(static_cast<Eigen::Index>(i)) = label;
    }
    ds.labels = std::move(labels);
    const char* name = kind == TwoClassKind::Clusters ? "clusters"
                       : kind == TwoClassKind::Rings  ? "rings"
                                                      : "xor";
    ds.provenance = std::string("generator=two_class_2d;kind=") + name + ";n=" + std::to_string(n) +
                    ";noise=" + fmt17(noise) + ";seed=" + std::to_string(seed);
    return ds;
}

LabeledDataset gaussian_inputs(std::size_t n, Eigen::Index dim, const Vector& mean,
                               const Vector& diag_cov, std::uint64_t seed) {
    if (mean.size() != dim || diag_cov.size() != dim)
        throw std::invalid_argument("gaussian_inputs: mean/cov length != dim");
    if ((diag_cov.array() < 0.0).any())
        throw std::invalid_argument("gaussian_inputs: negative covariance entry");
    Rng rng = Rng(seed).derive(0x6a55);
    LabeledDataset ds;
    ds.inputs.resize(static_cast<Eigen::Index>(n), dim);
    for (Eigen::Index i = 0; i < ds.inputs.rows(); ++i)
        for (Eigen::Index j = 0; j < dim; ++j)
            ds.inputs(i, j) = mean(j) + std::sqrt(diag_cov(j)) * rng.normal();
    ds.provenance = "generator=gaussian_inputs;n=" + std::to_string(n) +
                    ";dim=" + std::to_string(dim) + ";seed=" + std::to_string(seed);
    return ds;
}

LabeledDataset matched_gaussian(const Matrix& data, std::size_t n, std::uint64_t seed) {
    const Vector mean = data.colwise().mean().transpose();
    const Vector var =
        ((data.rowwise() - mean.transpose()).array().square().colwise().sum() /
         static_cast<double>(data.rows()))
            .transpose();
    LabeledDataset ds = gaussian_inputs(n, data.cols(), mean, var, seed);
    ds.provenance = "generator=matched_gaussian;n=" + std::to_string(n) +
                    ";seed=" + std::to_string(seed);
    return ds;
}

void save_dataset_csv(const std::string& path, const LabeledDataset& ds) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "# " << ds.provenance << '\n';
    for (Eigen::Index j = 0; j < ds.dim(); ++j) {
        if (j) os << ',';
        os << 'x' << j;
    }
    if (ds.labels) os << ",label";
    os << '\n';
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        for (Eigen::Index j = 0; j < ds.dim(); ++j) {
            if (j) os << ',';
            os << fmt17(ds.inputs(i, j));
        }
        if (ds.labels) os << ',' << (*ds.labels)(i);
        os << '\n';
    }
}

LabeledDataset load_dataset_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::string line;
    LabeledDataset ds;
    std::vector<std::vector<double>> rows;
    bool has_label = false;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            ds.provenance = line.size() > 2 ? line.substr(2) : "";
            continue;
        }
        if (!header_seen) {
            header_seen = true;
            has_label = line.find("label") != std::string::npos;
            continue;
        }
        std::vector<double> row;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("dataset file has no rows: " + path);
    const Eigen::Index dim = static_cast<Eigen::Index>(rows[0].size()) - (has_label ? 1 : 0);
    ds.inputs.resize(static_cast<Eigen::Index>(rows.size()), dim);
    Eigen::VectorXi labels(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != dim + (has_label ? 1 : 0))
            throw std::runtime_error("dataset file: ragged row");
        for (Eigen::Index j = 0; j < dim; ++j) ds.inputs(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
        if (has_label) labels(static_cast<Eigen::Index>(i)) = static_cast<int>(rows[i].back());
    }
    if (has_label) ds.labels = std::move(labels);
    return ds;
}

} // namespace splinelens
