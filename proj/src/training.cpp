#include "splinelens/training.hpp"
#include "splinelens/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace splinelens {

namespace {

struct BatchForward {
    std::vector<Matrix> pre_affine;   // S_l = Z_{l-1} W_l^T, per layer
    std::vector<Matrix> pre;          // H_l after BN/bias
    std::vector<Matrix> post;         // Z_l
    std::vector<Vector> batch_mu, batch_sigma;   // unfrozen BN only
    double loss = 0.0;
};

struct Gradients {
    std::vector<Matrix> dW;
    std::vector<Vector> dc;
};

BatchForward forward_batch(const NetworkSpec& net, const BNState& bn, bool use_batch_stats,
                           const Matrix& X) {
    const int L = net.depth();
    const double B = static_cast<double>(X.rows());
    BatchForward f;
    Matrix Z = X;
    for (int l = 1; l <= L; ++l) {
        Matrix S = Z * net.weight(l).transpose();
        Matrix H;
        if (net.bn_at(l)) {
            const BNLayer& p = *bn.at(l);
            Vector mu, sigma;
            if (use_batch_stats) {
                mu = S.colwise().mean().transpose();
                const Vector var =
                    ((S.rowwise() - mu.transpose()).array().square().colwise().sum() / B).transpose();
                sigma = var.array().sqrt().matrix();
                for (Eigen::Index k = 0; k < sigma.size(); ++k)
                    if (sigma(k) == 0.0)
                        throw std::runtime_error("train: degenerate batch statistic at layer " +
                                                 std::to_string(l) + ", unit " + std::to_string(k + 1));
            } else {
                mu = p.mu;
                sigma = p.sigma;
            }
            H = ((((S.rowwise() - mu.transpose()).array().rowwise() / sigma.transpose().array())
                      .rowwise() * p.gamma.transpose().array())
                     .rowwise() + p.beta.transpose().array())
                    .matrix();
            f.batch_mu.push_back(mu);
            f.batch_sigma.push_back(sigma);
        } else {
            H = S.rowwise() + net.bias(l).transpose();
            f.batch_mu.emplace_back();
            f.batch_sigma.emplace_back();
        }
        f.pre_affine.push_back(std::move(S));
        f.pre.push_back(H);
        if (l < L) {
            Z = H.unaryExpr([&](double u) { return net.activation(u); });
            f.post.push_back(Z);
        } else {
            f.post.push_back(H);
        }
    }
    return f;
}

// Loss and dLoss/dH_L (already averaged over the batch).
double loss_and_grad(LossKind loss, const Matrix& logits, const Eigen::VectorXi& labels,
                     Matrix& dH) {
    const Eigen::Index B = logits.rows();
    const Eigen::Index C = logits.cols();
    dH = Matrix::Zero(B, C);
    double total = 0.0;
    const double invB = 1.0 / static_cast<double>(B);
    for (Eigen::Index i = 0; i < B; ++i) {
        if (C == 1) {
            const double y = labels(i) != 0 ? 1.0 : -1.0;
            const double m = y * logits(i, 0);
            if (loss == LossKind::SoftmaxCrossEntropy) {
                // binary logistic on the scalar head
                total += m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
                const double s = 1.0 / (1.0 + std::exp(m));
                dH(i, 0) = -y * s * invB;
            } else {
                if (m < 1.0) {
                    total += 1.0 - m;
                    dH(i, 0) = -y * invB;
                }
            }
        } else {
            const int y = labels(i);
            if (loss == LossKind::SoftmaxCrossEntropy) {
                const double mx = logits.row(i).maxCoeff();
                const Eigen::ArrayXd e = (logits.row(i).transpose().array() - mx).exp();
                const double Zs = e.sum();
                total += std::log(Zs) - (logits(i, y) - mx);
                dH.row(i) = (e / Zs).matrix().transpose() * invB;
                dH(i, y) -= invB;
            } else {
                for (Eigen::Index j = 0; j < C; ++j) {
                    if (j == y) continue;
                    const double margin = 1.0 + logits(i, j) - logits(i, y);
                    if (margin > 0.0) {
                        total += margin;
                        dH(i, j) += invB;
                        dH(i, y) -= invB;
                    }
                }
            }
        }
    }
    return total * invB;
}

Gradients backward_batch(const NetworkSpec& net, const BNState& bn, bool use_batch_stats,
                         const Matrix& X, const BatchForward& f, const Matrix& dHL) {
    const int L = net.depth();
    const double B = static_cast<double>(X.rows());
    Gradients g;
    g.dW.resize(static_cast<std::size_t>(L));
    g.dc.resize(static_cast<std::size_t>(L));
    Matrix dH = dHL;
    for (int l = L; l >= 1; --l) {
        const Matrix& Zprev = l == 1 ? X : f.post[static_cast<std::size_t>(l - 2)];
        Matrix dS;
        if (net.bn_at(l)) {
            const BNLayer& p = *bn.at(l);
            const Vector& sigma = use_batch_stats ? f.batch_sigma[static_cast<std::size_t>(l - 1)]
                                                  : p.sigma;
            Matrix dxhat = dH.array().rowwise() * p.gamma.transpose().array();
            if (use_batch_stats) {
                const Vector& mu = f.batch_mu[static_cast<std::size_t>(l - 1)];
                const Matrix xhat =
                    ((f.pre_affine[static_cast<std::size_t>(l - 1)].rowwise() - mu.transpose())
                         .array().rowwise() / sigma.transpose().array())
                        .matrix();
                const Vector sum_d = dxhat.colwise().sum().transpose();
                const Vector sum_dx = (dxhat.array() * xhat.array()).colwise().sum().transpose();
                dS = ((B * dxhat.array() - (Matrix::Ones(xhat.rows(), 1) * sum_d.transpose()).array() -
                       xhat.array() * (Matrix::Ones(xhat.rows(), 1) * sum_dx.transpose()).array())
                          .rowwise() / (B * sigma.transpose().array()))
                         .matrix();
            } else {
                dS = (dxhat.array().rowwise() / sigma.transpose().array()).matrix();
            }
            g.dc[static_cast<std::size_t>(l - 1)] = Vector::Zero(net.width(l));
        } else {
            dS = dH;
            g.dc[static_cast<std::size_t>(l - 1)] = dS.colwise().sum().transpose();
        }
        g.dW[static_cast<std::size_t>(l - 1)] = dS.transpose() * Zprev;
        if (l > 1) {
            const Matrix dZ = dS * net.weight(l);
            const Matrix& H = f.pre[static_cast<std::size_t>(l - 2)];
            dH = (dZ.array() *
                  H.unaryExpr([&](double u) { return net.activation.slope(u); }).array())
                     .matrix();
        }
    }
    return g;
}

} // namespace

std::pair<NetworkSpec, BNState> initialize(const std::vector<Eigen::Index>& widths,
                                           Activation activation, InitMode mode,
                                           const Matrix& dataset, std::uint64_t seed) {
    if (widths.size() < 2) throw std::invalid_argument("initialize: need at least two widths");
    const int L = static_cast<int>(widths.size()) - 1;
    Rng rng = Rng(seed).derive(0x171);
    NetworkSpec net;
    net.activation = activation;
    net.has_bn.assign(static_cast<std::size_t>(L), false);
    for (int l = 1; l <= L; ++l) {
        const Eigen::Index fan_out = widths[static_cast<std::size_t>(l)];
        const Eigen::Index fan_in = widths[static_cast<std::size_t>(l - 1)];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Matrix W(fan_out, fan_in);
        for (Eigen::Index r = 0; r < fan_out; ++r)
            for (Eigen::Index c = 0; c < fan_in; ++c) W(r, c) = rng.uniform(-limit, limit);
        net.weights.push_back(std::move(W));
        Vector c = Vector::Zero(fan_out);
        if (mode == InitMode::RandomBias && l < L)
            for (Eigen::Index r = 0; r < fan_out; ++r) c(r) = rng.uniform(-limit, limit);
        net.biases.push_back(std::move(c));
    }
    BNState bn = BNState::none(L);
    if (mode == InitMode::BNWarmup) {
        if (dataset.rows() == 0) throw std::invalid_argument("initialize: bn_warmup needs data");
        for (int l = 1; l < L; ++l) net.has_bn[static_cast<std::size_t>(l - 1)] = true;
        BatchStats stats = compute_stats(net, dataset);
        bn = std::move(stats.bn);
    }
    net.validate(bn);
    return {std::move(net), std::move(bn)};
}

TrainHistory train(NetworkSpec& net, BNState& bn, const Matrix& inputs,
                   const Eigen::VectorXi& labels, const TrainConfig& config,
                   const Matrix* holdout_inputs, const Eigen::VectorXi* holdout_labels) {
    if (labels.size() != inputs.rows()) throw std::invalid_argument("train: labels/inputs mismatch");
    const std::size_t n = static_cast<std::size_t>(inputs.rows());
    const bool use_batch_stats = !config.bn_frozen;
    const Rng root(config.seed);
    TrainHistory hist;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng = root.derive(epoch);
        auto order = rng.sample_without_replacement(n, n);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t bs = std::min(config.batch_size, n - start);
            Matrix X(static_cast<Eigen::Index>(bs), inputs.cols());
            Eigen::VectorXi y(static_cast<Eigen::Index>(bs));
            for (std::size_t i = 0; i < bs; ++i) {
                X.row(static_cast<Eigen::Index>(i)) =
                    inputs.row(static_cast<Eigen::Index>(order[start + i]));
                y(static_cast<Eigen::Index>(i)) = labels(static_cast<Eigen::Index>(order[start + i]));
            }
            const BatchForward f = forward_batch(net, bn, use_batch_stats, X);
            Matrix dH;
            const double loss = loss_and_grad(config.loss, f.post.back(), y, dH);
            if (!std::isfinite(loss))
                throw std::runtime_error("train: loss diverged at epoch " + std::to_string(epoch));
            const Gradients g = backward_batch(net, bn, use_batch_stats, X, f, dH);
            for (int l = 1; l <= net.depth(); ++l) {
                net.weights[static_cast<std::size_t>(l - 1)] -=
                    config.learning_rate * g.dW[static_cast<std::size_t>(l - 1)];
                if (!net.bn_at(l))
                    net.biases[static_cast<std::size_t>(l - 1)] -=
                        config.learning_rate * g.dc[static_cast<std::size_t>(l - 1)];
            }
            epoch_loss += loss;
            ++batches;
        }
        if (use_batch_stats) {
            // Keep the stored stats in sync with the evolving weights.
            BatchStats stats = compute_stats(net, inputs);
            bn = std::move(stats.bn);
        }
        hist.loss.push_back(epoch_loss / static_cast<double>(batches));
        hist.accuracy.push_back(evaluate_accuracy(net, bn, inputs, labels));
        if (holdout_inputs && holdout_labels)
            hist.holdout_accuracy.push_back(
                evaluate_accuracy(net, bn, *holdout_inputs, *holdout_labels));
        if (config.snapshot_every && (epoch + 1) % config.snapshot_every == 0)
            hist.snapshots.emplace_back(epoch + 1, std::make_pair(net, bn));
    }
    return hist;
}

double evaluate_accuracy(const NetworkSpec& net, const BNState& bn, const Matrix& inputs,
                         const Eigen::VectorXi& labels) {
    const Matrix out = propagate(net, bn, inputs, net.depth());
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        int pred;
        if (out.cols() == 1) {
            pred = out(i, 0) >= 0.0 ? 1 : 0;
        } else {
            out.row(i).maxCoeff(&pred);
        }
        if (pred == labels(i)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(out.rows());
}

GradCheckResult grad_check(const NetworkSpec& net, const BNState& bn, LossKind loss,
                           const Vector& x, int label, double fd_step) {
    GradCheckResult result;
    {
        const ForwardTrace t = forward(net, bn, x);
        for (int l = 1; l < net.depth(); ++l)
            if ((t.h(l).cwiseAbs().array() < 10.0 * fd_step).any()) {
                result.near_kink = true;
                return result;
            }
    }
    Matrix X = x.transpose();
    Eigen::VectorXi y(1);
    y(0) = label;
    const BatchForward f = forward_batch(net, bn, false, X);
    Matrix dH;
    loss_and_grad(loss, f.post.back(), y, dH);
    const Gradients g = backward_batch(net, bn, false, X, f, dH);

    NetworkSpec probe = net;
    auto loss_at = [&]() {
        const BatchForward pf = forward_batch(probe, bn, false, X);
        Matrix tmp;
        return loss_and_grad(loss, pf.post.back(), y, tmp);
    };
    auto update_err = [&](double analytic, double numeric) {
        const double denom = std::max(1e-8, std::abs(analytic) + std::abs(numeric));
        result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic - numeric) / denom);
    };
    for (int l = 1; l <= net.depth(); ++l) {
        Matrix& W = probe.weights[static_cast<std::size_t>(l - 1)];
        for (Eigen::Index r = 0; r < W.rows(); ++r)
            for (Eigen::Index c = 0; c < W.cols(); ++c) {
                const double saved = W(r, c);
                W(r, c) = saved + fd_step;
                const double lp = loss_at();
                W(r, c) = saved - fd_step;
                const double lm = loss_at();
                W(r, c) = saved;
                update_err(g.dW[static_cast<std::size_t>(l - 1)](r, c), (lp - lm) / (2.0 * fd_step));
            }
        if (!net.bn_at(l)) {
            Vector& cvec = probe.biases[static_cast<std::size_t>(l - 1)];
            for (Eigen::Index r = 0; r < cvec.size(); ++r) {
                const double saved = cvec(r);
                cvec(r) = saved + fd_step;
                const double lp = loss_at();
                cvec(r) = saved - fd_step;
                const double lm = loss_at();
                cvec(r) = saved;
                update_err(g.dc[static_cast<std::size_t>(l - 1)](r), (lp - lm) / (2.0 * fd_step));
            }
        }
    }
    return result;
}

std::vector<bool> each_side_check(const NetworkSpec& net, const BNState& bn,
                                  const Matrix& minibatch) {
    const Matrix out = propagate(net, bn, minibatch, net.depth());
    std::vector<bool> straddles(static_cast<std::size_t>(out.cols()));
    for (Eigen::Index k = 0; k < out.cols(); ++k)
        straddles[static_cast<std::size_t>(k)] =
            (out.col(k).array() > 0.0).any() && (out.col(k).array() < 0.0).any();
    return straddles;
}

std::string history_csv(const TrainHistory& history) {
    std::ostringstream os;
    os << "epoch,loss,accuracy" << (history.holdout_accuracy.empty() ? "" : ",holdout_accuracy")
       << '\n';
    for (std::size_t e = 0; e < history.loss.size(); ++e) {
        char buf[80];
        std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g", e + 1, history.loss[e],
                      history.accuracy[e]);
        os << buf;
        if (!history.holdout_accuracy.empty()) {
            std::snprintf(buf, sizeof buf, ",%.10g", history.holdout_accuracy[e]);
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

} // namespace splinelens
