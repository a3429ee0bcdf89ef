#pragma once

#include "splinelens/network.hpp"

#include <optional>
#include <vector>

namespace splinelens {

struct Partition2D;   // partition2d.hpp

// {z : <w, z> = mu}, ||w|| > 0.
struct Hyperplane {
    Vector normal;
    double offset = 0.0;
};

// |<w, v> - mu| / ||w||.
double distance_to_hyperplane(const Vector& v, const Hyperplane& h);

// Sum over rows k of the average squared distance from the batch rows to
// the hyperplane {z : <w_k, z> = mu_k}.
double tls_loss(const Vector& mu, const Matrix& W, const Matrix& batch);
double tls_loss_row(double mu, const Vector& w, const Matrix& batch);

struct Theorem1Report {
    Vector argmin_numeric;   // per row
    Vector batch_mean;       // mean of W * batch rows
    double gap = 0.0;        // ||argmin - batch_mean||_inf
    double identity_residual = 0.0;   // max_k |L_k(mu*) - sigma*^2_k/||w_k||^2|
};

// 1-D golden-section minimization of the per-row TLS loss; reports the gap
// to the batch mean of W z and the loss-equals-variance identity residual.
Theorem1Report verify_theorem1(const Matrix& W, const Matrix& batch);

// max_k |<w_{l,k}, mean z_{l-1}> - mu_{l,k}| over the propagated batch.
double centroid_incidence(const NetworkSpec& net, const BNState& bn, int layer,
                          const Matrix& batch);

// |<w_{j,k}, z_{j-1}(x)> - offset| / ||A^T w_{j,k}||: distance from x to the
// affine extension of facet F_{j,k} within x's region. nullopt when the
// input-space normal is numerically zero (unit constant on the region).
std::optional<double> facet_local_distance(const NetworkSpec& net, const BNState& bn,
                                           const Vector& x, int layer, int unit);

// Exact minimum distance from x to the traced segments of F_{j,k} inside
// the partition's box; nullopt when the facet never enters the box.
std::optional<double> folded_distance(const Vector& x, int layer, int unit,
                                      const Partition2D& partition);

struct Theorem2Report {
    double feature_dist = 0.0;        // d(z_{j-1}(x), H) under mu
    double feature_dist_alt = 0.0;    // under mu'
    double folded_dist = 0.0;
    double folded_dist_alt = 0.0;
    bool facet_reachable = false;
    bool facet_reachable_alt = false;
    bool implication_holds = false;   // feature closer => input-space closer (tol 1e-8)
    bool zero_iff_zero = false;
};

Theorem2Report verify_theorem2(const NetworkSpec& net, const BNState& bn, const Vector& x,
                               int layer, int unit, double mu_alt,
                               const Partition2D& partition, const Partition2D& partition_alt);

// Diagonal entries alpha/sigma_i (code entry alpha) or 1/sigma_i (code entry 1).
struct QMatrix {
    int layer = 1;
    Vector diag;
};

QMatrix q_matrix(const NetworkSpec& net, const BNState& bn, int layer, const Vector& code);

struct DihedralReport {
    double theta_F_H = 0.0;    // facet(omega) vs H_{1,i}
    double theta_Fp_H = 0.0;   // facet(omega') vs H_{1,i}
    double theta_F_Fp = 0.0;   // facet vs facet
    // The absolute values confine all three to [0, pi/2]; the unfolded
    // reading of the facet-facet angle is pi - theta_F_Fp.
    double theta_F_Fp_unfolded() const;
};

// Two-layer dihedral angles between the facets of F_{2,k} on adjacent
// regions omega, omega' (codes differing only at entry i) and H_{1,i}.
DihedralReport dihedral_angles(const NetworkSpec& net, const BNState& bn,
                               const Vector& w2, int i,
                               const Vector& code_omega, const Vector& code_omega_p);

} // namespace splinelens
