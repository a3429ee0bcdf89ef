#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace splinelens {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ActivationKind { Relu, LeakyRelu, Abs };

// Two-piece activation a(u) = u for u >= 0, alpha*u otherwise.
// alpha = 0 (relu), alpha in (0,1) (leaky), alpha = -1 (abs).
struct Activation {
    ActivationKind kind = ActivationKind::Relu;
    double alpha = 0.0;

    static Activation relu() { return {ActivationKind::Relu, 0.0}; }
    static Activation leaky(double alpha) { return {ActivationKind::LeakyRelu, alpha}; }
    static Activation abs() { return {ActivationKind::Abs, -1.0}; }

    double operator()(double u) const { return u >= 0.0 ? u : alpha * u; }
    // Slope at u; ties at 0 take the positive branch.
    double slope(double u) const { return u >= 0.0 ? 1.0 : alpha; }
};

// Per-layer BN parameters; sigma strictly positive elementwise.
struct BNLayer {
    Vector mu, sigma, gamma, beta;

    static BNLayer identity(Eigen::Index d) {
        BNLayer l;
        l.mu = Vector::Zero(d);
        l.sigma = Vector::Ones(d);
        l.gamma = Vector::Ones(d);
        l.beta = Vector::Zero(d);
        return l;
    }
};

enum class BNMode { Batch, Fixed };

// BN parameters for the layers of one network. Entry l-1 is layer l's
// parameters; an empty optional means the layer has no BN.
struct BNState {
    std::vector<std::optional<BNLayer>> layers;
    BNMode mode = BNMode::Fixed;

    static BNState none(int depth) {
        BNState s;
        s.layers.resize(static_cast<std::size_t>(depth));
        return s;
    }
    const std::optional<BNLayer>& at(int layer) const { return layers[static_cast<std::size_t>(layer - 1)]; }
    std::optional<BNLayer>& at(int layer) { return layers[static_cast<std::size_t>(layer - 1)]; }
    bool has(int layer) const { return at(layer).has_value(); }
};

// Layer map convention: z_0 = x, W_l : R^{D_{l-1}} -> R^{D_l},
// h_l = BN(W_l z_{l-1}) on BN layers, h_l = W_l z_{l-1} + c_l otherwise,
// z_l = a(h_l) for l < L, z_L = h_L (linear head).
//
// Math-to-code table (textbook notation mixes 0- and 1-based layer indices;
// this single convention is used everywhere):
//   z_ell (layer input)        -> post[l-1] here (z_{l-1})
//   h_{ell,k}                  -> pre[l](k)
//   W_ell, c_ell               -> weights[l-1], biases[l-1]
//   A_{1|ell}, B_{1|ell}       -> RegionAffine{A, b} with target_layer = ell+1
struct NetworkSpec {
    std::vector<Matrix> weights;    // W_1..W_L
    std::vector<Vector> biases;     // c_1..c_L (zero where unused)
    Activation activation;
    std::vector<bool> has_bn;       // per layer 1..L; layer L never has BN

    int depth() const { return static_cast<int>(weights.size()); }
    Eigen::Index width(int layer) const {
        // width(0) = D_0 (input), width(l) = D_l.
        return layer == 0 ? weights[0].cols() : weights[static_cast<std::size_t>(layer - 1)].rows();
    }
    const Matrix& weight(int layer) const { return weights[static_cast<std::size_t>(layer - 1)]; }
    const Vector& bias(int layer) const { return biases[static_cast<std::size_t>(layer - 1)]; }
    bool bn_at(int layer) const { return has_bn[static_cast<std::size_t>(layer - 1)]; }

    void validate(const BNState& bn) const;
};

struct ForwardTrace {
    std::vector<Vector> pre;    // h_1..h_L
    std::vector<Vector> post;   // z_1..z_L
    const Vector& h(int layer) const { return pre[static_cast<std::size_t>(layer - 1)]; }
    const Vector& z(int layer) const { return post[static_cast<std::size_t>(layer - 1)]; }
    const Vector& output() const { return post.back(); }
};

// Per-layer pre-activation sign pattern, entries in {alpha, 1}.
struct ActivationCode {
    std::vector<Vector> layers;   // layers 1..L-1 when full; may be shorter

    int depth() const { return static_cast<int>(layers.size()); }
    const Vector& at(int layer) const { return layers[static_cast<std::size_t>(layer - 1)]; }
    bool operator==(const ActivationCode& o) const;
    std::string to_string() const;
};

// Affine map x -> z_{j-1} valid on the region generating the code.
struct RegionAffine {
    int target_layer = 1;   // j: the layer whose input this map produces
    Matrix A;
    Vector b;
};

ForwardTrace forward(const NetworkSpec& net, const BNState& bn, const Vector& x);
ActivationCode activation_code(const NetworkSpec& net, const BNState& bn, const Vector& x);
ActivationCode code_from_trace(const NetworkSpec& net, const ForwardTrace& trace);
RegionAffine region_affine(const NetworkSpec& net, const BNState& bn,
                           const ActivationCode& code, int target_layer);

// Input-space affine coefficients of h_{j,k} given the region map to z_{j-1}:
// h_{j,k}(x) = grad . x + offset on the region.
struct UnitAffine {
    Vector grad;
    double offset = 0.0;
};
UnitAffine unit_preactivation_affine(const NetworkSpec& net, const BNState& bn,
                                     const RegionAffine& to_input, int layer, int unit);

// A^T w_{j,k} with (A,b) from x's region; the input-space facet normal.
// May be (numerically) zero; callers must check.
Vector preactivation_normal(const NetworkSpec& net, const BNState& bn,
                            const Vector& x, int layer, int unit);

// Folds all gamma into downstream weights/beta; output-preserving.
// Requires gamma > 0 elementwise.
std::pair<NetworkSpec, BNState> absorb_gamma(const NetworkSpec& net, const BNState& bn);

// Text format, versioned header "SPLINELENS-NET v1"; 17 significant digits.
void save_network(const std::string& path, const NetworkSpec& net, const BNState& bn);
std::pair<NetworkSpec, BNState> load_network(const std::string& path);

} // namespace splinelens
