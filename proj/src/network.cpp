#include "splinelens/network.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace splinelens {

void NetworkSpec::validate(const BNState& bn) const {
    const int L = depth();
    if (L < 1) throw std::invalid_argument("network: empty layer list");
    if (static_cast<int>(biases.size()) != L || static_cast<int>(has_bn.size()) != L ||
        static_cast<int>(bn.layers.size()) != L)
        throw std::invalid_argument("network: per-layer list lengths disagree");
    for (int l = 1; l <= L; ++l) {
        const Matrix& W = weight(l);
        if (l > 1 && W.cols() != width(l - 1))
            throw std::invalid_argument("network: weight shape mismatch at layer " + std::to_string(l));
        if (bias(l).size() != W.rows())
            throw std::invalid_argument("network: bias length mismatch at layer " + std::to_string(l));
        if (bn_at(l) != bn.has(l))
            throw std::invalid_argument("network: BN layer set disagrees with BNState at layer " + std::to_string(l));
        if (bn.has(l)) {
            const BNLayer& p = *bn.at(l);
            if (p.mu.size() != W.rows() || p.sigma.size() != W.rows() ||
                p.gamma.size() != W.rows() || p.beta.size() != W.rows())
                throw std::invalid_argument("network: BN parameter length mismatch at layer " + std::to_string(l));
            if ((p.sigma.array() <= 0.0).any())
                throw std::invalid_argument("network: non-positive sigma at layer " + std::to_string(l));
        }
    }
    if (bn_at(L)) throw std::invalid_argument("network: the linear head cannot carry BN");
    switch (activation.kind) {
        case ActivationKind::Relu:
            if (activation.alpha != 0.0) throw std::invalid_argument("relu requires alpha = 0");
            break;
        case ActivationKind::LeakyRelu:
            if (!(activation.alpha > 0.0 && activation.alpha < 1.0))
                throw std::invalid_argument("leaky relu requires alpha in (0,1)");
            break;
        case ActivationKind::Abs:
            if (activation.alpha != -1.0) throw std::invalid_argument("abs requires alpha = -1");
            break;
    }
}

ForwardTrace forward(const NetworkSpec& net, const BNState& bn, const Vector& x) {
    const int L = net.depth();
    if (x.size() != net.width(0)) throw std::invalid_argument("forward: input length != D_0");
    ForwardTrace t;
    t.pre.reserve(static_cast<std::size_t>(L));
    t.post.reserve(static_cast<std::size_t>(L));
    Vector z = x;
    for (int l = 1; l <= L; ++l) {
        Vector h = net.weight(l) * z;
        if (net.bn_at(l)) {
            const BNLayer& p = *bn.at(l);
            if ((p.sigma.array() <= 0.0).any())
                throw std::invalid_argument("forward: non-positive sigma at layer " + std::to_string(l));
            h = ((h - p.mu).array() / p.sigma.array() * p.gamma.array() + p.beta.array()).matrix();
        } else {
            h += net.bias(l);
        }
        t.pre.push_back(h);
        if (l < L) {
            Vector zn(h.size());
            for (Eigen::Index i = 0; i < h.size(); ++i) zn(i) = net.activation(h(i));
            t.post.push_back(zn);
            z = std::move(zn);
        } else {
            t.post.push_back(h);
        }
    }
    return t;
}

ActivationCode code_from_trace(const NetworkSpec& net, const ForwardTrace& trace) {
    ActivationCode code;
    const int L = net.depth();
    code.layers.reserve(static_cast<std::size_t>(L - 1));
    for (int l = 1; l < L; ++l) {
        const Vector& h = trace.h(l);
        Vector c(h.size());
        for (Eigen::Index i = 0; i < h.size(); ++i) c(i) = net.activation.slope(h(i));
        code.layers.push_back(std::move(c));
    }
    return code;
}

ActivationCode activation_code(const NetworkSpec& net, const BNState& bn, const Vector& x) {
    return code_from_trace(net, forward(net, bn, x));
}

bool ActivationCode::operator==(const ActivationCode& o) const {
    if (layers.size() != o.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].size() != o.layers[i].size() || layers[i] != o.layers[i]) return false;
    return true;
}

std::string ActivationCode::to_string() const {
    std::string s;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (l) s += '|';
        for (Eigen::Index i = 0; i < layers[l].size(); ++i)
            s += layers[l](i) == 1.0 ? '+' : '-';
    }
    return s;
}

RegionAffine region_affine(const NetworkSpec& net, const BNState& bn,
                           const ActivationCode& code, int target_layer) {
    const int L = net.depth();
    if (target_layer < 1 || target_layer > L)
        throw std::invalid_argument("region_affine: target layer out of range");
    if (code.depth() < target_layer - 1)
        throw std::invalid_argument("region_affine: code does not cover layers 1.." +
                                    std::to_string(target_layer - 1));
    const Eigen::Index d0 = net.width(0);
    RegionAffine r;
    r.target_layer = target_layer;
    r.A = Matrix::Identity(d0, d0);
    r.b = Vector::Zero(d0);
    for (int l = 1; l < target_layer; ++l) {
        const Matrix& W = net.weight(l);
        if (code.at(l).size() != W.rows())
            throw std::invalid_argument("region_affine: code length mismatch at layer " + std::to_string(l));
        Matrix A = W * r.A;
        Vector b = W * r.b;
        if (net.bn_at(l)) {
            const BNLayer& p = *bn.at(l);
            const Eigen::ArrayXd g = p.gamma.array() / p.sigma.array();
            A.array().colwise() *= g;
            b = (g * (b - p.mu).array() + p.beta.array()).matrix();
        } else {
            b += net.bias(l);
        }
        A.array().colwise() *= code.at(l).array();
        b.array() *= code.at(l).array();
        r.A = std::move(A);
        r.b = std::move(b);
    }
    return r;
}

UnitAffine unit_preactivation_affine(const NetworkSpec& net, const BNState& bn,
                                     const RegionAffine& to_input, int layer, int unit) {
    const Vector w = net.weight(layer).row(unit - 1).transpose();
    UnitAffine u;
    u.grad = to_input.A.transpose() * w;
    u.offset = w.dot(to_input.b);
    if (net.bn_at(layer)) {
        const BNLayer& p = *bn.at(layer);
        const double s = p.gamma(unit - 1) / p.sigma(unit - 1);
        u.grad *= s;
        u.offset = s * (u.offset - p.mu(unit - 1)) + p.beta(unit - 1);
    } else {
        u.offset += net.bias(layer)(unit - 1);
    }
    return u;
}

Vector preactivation_normal(const NetworkSpec& net, const BNState& bn,
                            const Vector& x, int layer, int unit) {
    const ActivationCode code = activation_code(net, bn, x);
    const RegionAffine r = region_affine(net, bn, code, layer);
    return r.A.transpose() * net.weight(layer).row(unit - 1).transpose();
}

std::pair<NetworkSpec, BNState> absorb_gamma(const NetworkSpec& net, const BNState& bn) {
    const int L = net.depth();
    for (int l = 1; l <= L; ++l)
        if (bn.has(l) && (bn.at(l)->gamma.array() <= 0.0).any())
            throw std::invalid_argument("absorb_gamma: non-positive gamma at layer " + std::to_string(l) +
                                        " (a(cu) = c a(u) needs c > 0)");
    NetworkSpec net2 = net;
    BNState bn2 = bn;
    // gamma_l scales unit outputs; push it into W_{l+1} columns (or the head)
    // and rescale beta, using a(c u) = c a(u) for c > 0.
    for (int l = 1; l < L; ++l) {
        if (!bn2.has(l)) continue;
        BNLayer& p = *bn2.at(l);
        const Vector g = p.gamma;
        p.beta = (p.beta.array() / g.array()).matrix();
        p.gamma = Vector::Ones(g.size());
        Matrix& Wn = net2.weights[static_cast<std::size_t>(l)];
        Wn.array().rowwise() *= g.transpose().array();
    }
    return {std::move(net2), std::move(bn2)};
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_row(std::ostream& os, const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) os << ' ';
        os << fmt17(v(i));
    }
    os << '\n';
}

Vector read_row(std::istream& is, Eigen::Index n, const char* what) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error(std::string("network file: missing ") + what);
    std::istringstream ss(line);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(ss >> v(i))) throw std::runtime_error(std::string("network file: short row in ") + what);
    return v;
}

} // namespace

void save_network(const std::string& path, const NetworkSpec& net, const BNState& bn) {
    net.validate(bn);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "SPLINELENS-NET v1\n";
    os << "widths";
    for (int l = 0; l <= net.depth(); ++l) os << ' ' << net.width(l);
    os << '\n';
    switch (net.activation.kind) {
        case ActivationKind::Relu: os << "relu\n"; break;
        case ActivationKind::LeakyRelu: os << "leaky " << fmt17(net.activation.alpha) << '\n'; break;
        case ActivationKind::Abs: os << "abs\n"; break;
    }
    for (int l = 1; l <= net.depth(); ++l) {
        os << "W " << l << '\n';
        for (Eigen::Index r = 0; r < net.weight(l).rows(); ++r)
            write_row(os, net.weight(l).row(r).transpose());
        if (!net.bias(l).isZero(0.0)) {
            os << "c " << l << '\n';
            write_row(os, net.bias(l));
        }
        if (bn.has(l)) {
            const BNLayer& p = *bn.at(l);
            os << "BN " << l << '\n';
            write_row(os, p.mu);
            write_row(os, p.sigma);
            write_row(os, p.gamma);
            write_row(os, p.beta);
        }
    }
}

std::pair<NetworkSpec, BNState> load_network(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(is, line) || line != "SPLINELENS-NET v1")
        throw std::runtime_error("network file: bad header in " + path);
    if (!std::getline(is, line)) throw std::runtime_error("network file: missing widths");
    std::istringstream ws(line);
    std::string tag;
    ws >> tag;
    if (tag != "widths") throw std::runtime_error("network file: expected widths line");
    std::vector<Eigen::Index> widths;
    for (Eigen::Index d; ws >> d;) widths.push_back(d);
    if (widths.size() < 2) throw std::runtime_error("network file: need at least D_0 and D_1");
    const int L = static_cast<int>(widths.size()) - 1;

    NetworkSpec net;
    if (!std::getline(is, line)) throw std::runtime_error("network file: missing activation");
    {
        std::istringstream as(line);
        std::string kind;
        as >> kind;
        if (kind == "relu") net.activation = Activation::relu();
        else if (kind == "abs") net.activation = Activation::abs();
        else if (kind == "leaky") {
            double a;
            if (!(as >> a)) throw std::runtime_error("network file: leaky needs alpha");
            net.activation = Activation::leaky(a);
        } else throw std::runtime_error("network file: unknown activation '" + kind + "'");
    }
    net.has_bn.assign(static_cast<std::size_t>(L), false);
    BNState bn = BNState::none(L);
    for (int l = 1; l <= L; ++l) {
        net.weights.emplace_back(Matrix::Zero(widths[static_cast<std::size_t>(l)],
                                              widths[static_cast<std::size_t>(l - 1)]));
        net.biases.emplace_back(Vector::Zero(widths[static_cast<std::size_t>(l)]));
    }
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream hs(line);
        std::string kind;
        int l;
        if (!(hs >> kind >> l) || l < 1 || l > L)
            throw std::runtime_error("network file: bad section line '" + line + "'");
        const Eigen::Index rows = widths[static_cast<std::size_t>(l)];
        const Eigen::Index cols = widths[static_cast<std::size_t>(l - 1)];
        if (kind == "W") {
            for (Eigen::Index r = 0; r < rows; ++r)
                net.weights[static_cast<std::size_t>(l - 1)].row(r) = read_row(is, cols, "W").transpose();
        } else if (kind == "c") {
            net.biases[static_cast<std::size_t>(l - 1)] = read_row(is, rows, "c");
        } else if (kind == "BN") {
            BNLayer p;
            p.mu = read_row(is, rows, "BN mu");
            p.sigma = read_row(is, rows, "BN sigma");
            p.gamma = read_row(is, rows, "BN gamma");
            p.beta = read_row(is, rows, "BN beta");
            bn.at(l) = std::move(p);
            net.has_bn[static_cast<std::size_t>(l - 1)] = true;
        } else {
            throw std::runtime_error("network file: unknown section '" + kind + "'");
        }
    }
    net.validate(bn);
    return {std::move(net), std::move(bn)};
}

} // namespace splinelens
