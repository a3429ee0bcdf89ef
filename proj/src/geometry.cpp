#include "splinelens/geometry.hpp"
#include "splinelens/partition2d.hpp"
#include "splinelens/batchnorm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace splinelens {

namespace {

double clamped_arccos(double v) {
    if (v > 1.0) {
        if (v > 1.0 + 1e-12) throw std::runtime_error("arccos argument exceeds 1 beyond rounding");
        v = 1.0;
    } else if (v < -1.0) {
        if (v < -1.0 - 1e-12) throw std::runtime_error("arccos argument below -1 beyond rounding");
        v = -1.0;
    }
    return std::acos(v);
}

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
    const Point2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

// Effective feature-space hyperplane offset of unit (j,k): the zero set of
// h_{j,k} in layer j's input space is {z : <w, z> = offset}.
double unit_hyperplane_offset(const NetworkSpec& net, const BNState& bn, int layer, int unit) {
    if (net.bn_at(layer)) {
        const BNLayer& p = *bn.at(layer);
        return p.mu(unit - 1) - p.beta(unit - 1) * p.sigma(unit - 1) / p.gamma(unit - 1);
    }
    return -net.bias(layer)(unit - 1);
}

} // namespace

double distance_to_hyperplane(const Vector& v, const Hyperplane& h) {
    const double n = h.normal.norm();
    if (n == 0.0) throw std::invalid_argument("distance_to_hyperplane: zero normal");
    if (v.size() != h.normal.size()) throw std::invalid_argument("distance_to_hyperplane: dimension mismatch");
    return std::abs(h.normal.dot(v) - h.offset) / n;
}

double tls_loss_row(double mu, const Vector& w, const Matrix& batch) {
    const double n2 = w.squaredNorm();
    if (n2 == 0.0) throw std::invalid_argument("tls_loss: zero-norm row");
    const Vector proj = batch * w;
    return (proj.array() - mu).square().mean() / n2;
}

double tls_loss(const Vector& mu, const Matrix& W, const Matrix& batch) {
    if (mu.size() != W.rows()) throw std::invalid_argument("tls_loss: mu length != rows of W");
    if (batch.rows() == 0) throw std::invalid_argument("tls_loss: empty batch");
    double total = 0.0;
    for (Eigen::Index k = 0; k < W.rows(); ++k)
        total += tls_loss_row(mu(k), W.row(k).transpose(), batch);
    return total;
}

Theorem1Report verify_theorem1(const Matrix& W, const Matrix& batch) {
    const Eigen::Index rows = W.rows();
    Theorem1Report rep;
    rep.argmin_numeric.resize(rows);
    rep.batch_mean.resize(rows);
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (Eigen::Index k = 0; k < rows; ++k) {
        const Vector w = W.row(k).transpose();
        const Vector proj = batch * w;
        rep.batch_mean(k) = proj.mean();
        double lo = proj.minCoeff() - 1.0;
        double hi = proj.maxCoeff() + 1.0;
        auto f = [&](double mu) { return tls_loss_row(mu, w, batch); };
        double a = hi - invphi * (hi - lo);
        double b = lo + invphi * (hi - lo);
        double fa = f(a), fb = f(b);
        for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(lo) + std::abs(hi)); ++it) {
            if (fa < fb) {
                hi = b; b = a; fb = fa;
                a = hi - invphi * (hi - lo);
                fa = f(a);
            } else {
                lo = a; a = b; fa = fb;
                b = lo + invphi * (hi - lo);
                fb = f(b);
            }
        }
        // Golden section stalls near sqrt(machine eps); the loss is exactly
        // quadratic in mu, so one parabolic vertex step lands on the minimum
        // to full precision.
        double m = 0.5 * (lo + hi);
        const double d = 1e-3 * (1.0 + std::abs(m));
        const double fm = f(m), fp = f(m + d), fn = f(m - d);
        const double curv = fp - 2.0 * fm + fn;
        if (curv > 0.0) m -= d * (fp - fn) / (2.0 * curv);
        rep.argmin_numeric(k) = m;
        const double pop_var = (proj.array() - proj.mean()).square().mean();
        const double resid = std::abs(f(rep.argmin_numeric(k)) - pop_var / w.squaredNorm());
        rep.identity_residual = std::max(rep.identity_residual, resid);
    }
    rep.gap = (rep.argmin_numeric - rep.batch_mean).cwiseAbs().maxCoeff();
    return rep;
}

double centroid_incidence(const NetworkSpec& net, const BNState& bn, int layer,
                          const Matrix& batch) {
    if (!net.bn_at(layer)) throw std::invalid_argument("centroid_incidence: layer has no BN");
    if (bn.mode != BNMode::Batch)
        throw std::invalid_argument("centroid_incidence: stats are not batch-derived");
    const Matrix z = propagate(net, bn, batch, layer - 1);
    const Vector mean = z.colwise().mean().transpose();
    const BNLayer& p = *bn.at(layer);
    return (net.weight(layer) * mean - p.mu).cwiseAbs().maxCoeff();
}

std::optional<double> facet_local_distance(const NetworkSpec& net, const BNState& bn,
                                           const Vector& x, int layer, int unit) {
    const ActivationCode code = activation_code(net, bn, x);
    const RegionAffine r = region_affine(net, bn, code, layer);
    const UnitAffine u = unit_preactivation_affine(net, bn, r, layer, unit);
    const double n = u.grad.norm();
    if (n < 1e-14) return std::nullopt;
    return std::abs(u.grad.dot(x) + u.offset) / n;
}

std::optional<double> folded_distance(const Vector& x, int layer, int unit,
                                      const Partition2D& partition) {
    if (x.size() != 2) throw std::invalid_argument("folded_distance: input must be 2-D");
    if (layer > partition.depth) throw std::invalid_argument("folded_distance: layer beyond traced depth");
    const auto segs = folded_hyperplane(partition, layer, unit);
    if (segs.empty()) return std::nullopt;
    const Point2 p(x(0), x(1));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : segs) best = std::min(best, point_segment_distance(p, s.a, s.b));
    return best;
}

Theorem2Report verify_theorem2(const NetworkSpec& net, const BNState& bn, const Vector& x,
                               int layer, int unit, double mu_alt,
                               const Partition2D& partition, const Partition2D& partition_alt) {
    constexpr double tol = 1e-8;
    const ForwardTrace t = forward(net, bn, x);
    const Vector z = layer == 1 ? x : t.z(layer - 1);
    const Vector w = net.weight(layer).row(unit - 1).transpose();
    const double mu = unit_hyperplane_offset(net, bn, layer, unit);

    Theorem2Report rep;
    rep.feature_dist = distance_to_hyperplane(z, {w, mu});
    rep.feature_dist_alt = distance_to_hyperplane(z, {w, mu_alt});
    const auto fd = folded_distance(x, layer, unit, partition);
    const auto fd_alt = folded_distance(x, layer, unit, partition_alt);
    rep.facet_reachable = fd.has_value();
    rep.facet_reachable_alt = fd_alt.has_value();
    if (!fd || !fd_alt) return rep;
    rep.folded_dist = *fd;
    rep.folded_dist_alt = *fd_alt;

    rep.implication_holds = true;
    if (rep.feature_dist < rep.feature_dist_alt - tol && rep.folded_dist > rep.folded_dist_alt + tol)
        rep.implication_holds = false;
    if (rep.feature_dist_alt < rep.feature_dist - tol && rep.folded_dist_alt > rep.folded_dist + tol)
        rep.implication_holds = false;
    rep.zero_iff_zero = ((rep.feature_dist <= tol) == (rep.folded_dist <= tol)) &&
                        ((rep.feature_dist_alt <= tol) == (rep.folded_dist_alt <= tol));
    return rep;
}

QMatrix q_matrix(const NetworkSpec& net, const BNState& bn, int layer, const Vector& code) {
    if (code.size() != net.width(layer)) throw std::invalid_argument("q_matrix: code length != D_layer");
    const double alpha = net.activation.alpha;
    QMatrix q;
    q.layer = layer;
    q.diag.resize(code.size());
    for (Eigen::Index i = 0; i < code.size(); ++i) {
        double slope;
        if (code(i) == 1.0) slope = 1.0;
        else if (code(i) == alpha) slope = alpha;
        else throw std::invalid_argument("q_matrix: code symbol not in {alpha, 1}");
        const double sigma = net.bn_at(layer) ? bn.at(layer)->sigma(i) : 1.0;
        q.diag(i) = slope / sigma;
    }
    return q;
}

double DihedralReport::theta_F_Fp_unfolded() const {
    return 3.14159265358979323846 - theta_F_Fp;
}

DihedralReport dihedral_angles(const NetworkSpec& net, const BNState& bn,
                               const Vector& w2, int i,
                               const Vector& code_omega, const Vector& code_omega_p) {
    const Matrix& W1 = net.weight(1);
    if (w2.size() != W1.rows()) throw std::invalid_argument("dihedral_angles: w2 length != D_1");
    int diff = 0;
    for (Eigen::Index j = 0; j < code_omega.size(); ++j)
        if (code_omega(j) != code_omega_p(j)) ++diff;
    if (diff != 1 || code_omega(i - 1) == code_omega_p(i - 1))
        throw std::invalid_argument("dihedral_angles: codes must differ exactly at entry i");

    const QMatrix q = q_matrix(net, bn, 1, code_omega);
    const QMatrix qp = q_matrix(net, bn, 1, code_omega_p);
    const Vector n = W1.transpose() * (q.diag.asDiagonal() * w2);     // (w2^T Q W1)^T
    const Vector np = W1.transpose() * (qp.diag.asDiagonal() * w2);
    const Vector w1i = W1.row(i - 1).transpose();
    if (n.norm() == 0.0 || np.norm() == 0.0 || w1i.norm() == 0.0)
        throw std::invalid_argument("dihedral_angles: zero-norm composite normal");

    DihedralReport rep;
    rep.theta_F_H = clamped_arccos(std::abs(n.dot(w1i)) / (n.norm() * w1i.norm()));
    rep.theta_Fp_H = clamped_arccos(std::abs(np.dot(w1i)) / (np.norm() * w1i.norm()));
    rep.theta_F_Fp = clamped_arccos(std::abs(n.dot(np)) / (n.norm() * np.norm()));
    return rep;
}

} // namespace splinelens
