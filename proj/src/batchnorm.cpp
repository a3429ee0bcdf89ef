#include "splinelens/batchnorm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace splinelens {

Matrix propagate(const NetworkSpec& net, const BNState& bn, const Matrix& batch, int upto) {
    Matrix z = batch;   // rows are samples
    for (int l = 1; l <= upto; ++l) {
        Matrix h = z * net.weight(l).transpose();
        if (net.bn_at(l)) {
            const BNLayer& p = *bn.at(l);
            h = (((h.rowwise() - p.mu.transpose()).array().rowwise() / p.sigma.transpose().array())
                     .rowwise() * p.gamma.transpose().array())
                    .rowwise() + p.beta.transpose().array();
        } else {
            h.rowwise() += net.bias(l).transpose();
        }
        if (l < net.depth()) {
            z = h.unaryExpr([&](double u) { return net.activation(u); });
        } else {
            z = std::move(h);
        }
    }
    return z;
}

BatchStats compute_stats(const NetworkSpec& net, const Matrix& batch, double eps_bn) {
    const int L = net.depth();
    if (batch.rows() == 0) throw std::invalid_argument("compute_stats: empty batch");
    if (batch.cols() != net.width(0)) throw std::invalid_argument("compute_stats: batch width != D_0");
    const double n = static_cast<double>(batch.rows());

    BatchStats stats;
    stats.bn = BNState::none(L);
    stats.bn.mode = BNMode::Batch;
    stats.moments.resize(static_cast<std::size_t>(L));
    stats.batch_size = static_cast<std::size_t>(batch.rows());

    Matrix z = batch;
    for (int l = 1; l <= L; ++l) {
        Matrix h = z * net.weight(l).transpose();
        if (net.bn_at(l)) {
            const Vector mu = h.colwise().mean().transpose();
            Matrix centered = h.rowwise() - mu.transpose();
            const Vector var = (centered.array().square().colwise().sum() / n).transpose();
            Vector sigma(var.size());
            for (Eigen::Index k = 0; k < var.size(); ++k) {
                const double s = std::sqrt(var(k));
                if (eps_bn > 0.0) {
                    sigma(k) = std::max(s, eps_bn);   // floored; degenerate units logged by callers
                } else if (s == 0.0) {
                    throw std::runtime_error("compute_stats: degenerate statistic at layer " +
                                             std::to_string(l) + ", unit " + std::to_string(k + 1));
                } else {
                    sigma(k) = s;
                }
            }

            LayerMoments m;
            const Vector rho = ((z.rowwise() - z.colwise().mean()).array().square().colwise().sum() / n)
                                   .transpose();
            m.w2_rho = net.weight(l).array().square().matrix() * rho;
            m.phi4 = (centered.array().pow(4).colwise().sum() / n).transpose();
            stats.moments[static_cast<std::size_t>(l - 1)] = std::move(m);

            BNLayer p;
            p.mu = mu;
            p.sigma = sigma;
            p.gamma = Vector::Ones(mu.size());
            p.beta = Vector::Zero(mu.size());
            stats.bn.at(l) = std::move(p);

            h = (h.rowwise() - mu.transpose()).array().rowwise() / sigma.transpose().array();
        } else {
            h.rowwise() += net.bias(l).transpose();
        }
        if (l < L) z = h.unaryExpr([&](double u) { return net.activation(u); });
    }
    stats.source = "full_training_set";
    return stats;
}

VariancePrediction variance_prediction(double w2_rho, double phi4, std::size_t batch_size) {
    if (batch_size < 2) throw std::invalid_argument("variance_prediction: batch_size must be >= 2");
    const double B = static_cast<double>(batch_size);
    VariancePrediction p;
    p.var_mu = w2_rho / B;
    p.var_sigma2 = (phi4 - w2_rho * w2_rho * (B - 3.0) / (B - 1.0)) / B;
    return p;
}

VariancePrediction variance_prediction(const Vector& w, const Vector& rho,
                                       double phi4, std::size_t batch_size) {
    if (w.size() != rho.size()) throw std::invalid_argument("variance_prediction: length mismatch");
    if ((rho.array() < 0.0).any()) throw std::invalid_argument("variance_prediction: negative rho");
    return variance_prediction(w.array().square().matrix().dot(rho), phi4, batch_size);
}

std::vector<BatchStats> sample_realizations(const NetworkSpec& net, const Matrix& dataset,
                                            std::size_t batch_size, std::size_t n_draws,
                                            std::uint64_t seed) {
    const std::size_t n = static_cast<std::size_t>(dataset.rows());
    if (batch_size > n) throw std::invalid_argument("sample_realizations: batch_size > dataset size");
    if (n_draws < 1) throw std::invalid_argument("sample_realizations: n_draws must be >= 1");
    const Rng root(seed);
    std::vector<BatchStats> out;
    out.reserve(n_draws);
    for (std::size_t d = 0; d < n_draws; ++d) {
        Rng rng = root.derive(d);
        auto idx = rng.sample_without_replacement(n, batch_size);
        // Dataset order keeps summation order (and hence stats) identical to
        // the full-set computation when the draw is exhaustive.
        std::sort(idx.begin(), idx.end());
        Matrix minibatch(static_cast<Eigen::Index>(batch_size), dataset.cols());
        for (std::size_t i = 0; i < batch_size; ++i)
            minibatch.row(static_cast<Eigen::Index>(i)) = dataset.row(static_cast<Eigen::Index>(idx[i]));
        BatchStats s = compute_stats(net, minibatch);
        s.source = "minibatch(" + std::to_string(d) + "," + std::to_string(batch_size) + ")";
        out.push_back(std::move(s));
    }
    return out;
}

BatchStats noise_controlled(const BatchStats& stats, std::size_t actual_size,
                            std::size_t virtual_size, std::uint64_t seed) {
    if (virtual_size >= actual_size)
        throw std::invalid_argument("noise_controlled: virtual_size must be < actual_size");
    if (virtual_size < 2) throw std::invalid_argument("noise_controlled: sizes must be >= 2");
    BatchStats out = stats;
    Rng rng = Rng(seed).derive(0xbc);
    for (std::size_t li = 0; li < stats.bn.layers.size(); ++li) {
        if (!stats.bn.layers[li]) continue;
        if (!stats.moments[li])
            throw std::invalid_argument("noise_controlled: stats carry no plug-in moments");
        const LayerMoments& m = *stats.moments[li];
        BNLayer& p = *out.bn.layers[li];
        for (Eigen::Index k = 0; k < p.mu.size(); ++k) {
            const auto va = variance_prediction(m.w2_rho(k), m.phi4(k), actual_size);
            const auto vv = variance_prediction(m.w2_rho(k), m.phi4(k), virtual_size);
            const double mu_gap = vv.var_mu - va.var_mu;
            if (mu_gap > 0.0) p.mu(k) += std::sqrt(mu_gap) * rng.normal();

            const double s2 = p.sigma(k) * p.sigma(k);
            const double s2_gap = vv.var_sigma2 - va.var_sigma2;
            if (s2_gap > 0.0 && s2 > 0.0) {
                // chi2_k / k has unit mean and variance 2/k; pick k so the
                // multiplicative factor matches the target variance gap.
                const double rel_var = s2_gap / (s2 * s2);
                const double dof = 2.0 / rel_var;
                const double factor = rng.gamma(dof / 2.0) * 2.0 / dof;
                p.sigma(k) = std::sqrt(s2 * factor);
            }
        }
    }
    out.source = stats.source + "+noise(virtual=" + std::to_string(virtual_size) + ")";
    return out;
}

} // namespace splinelens
