#include "splinelens/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace splinelens {

BallCount ball_count(const NetworkSpec& net, const BNState& bn, const Vector& x,
                     double epsilon, const std::vector<int>& layer_set) {
    if (epsilon < 0.0) throw std::invalid_argument("ball_count: epsilon must be >= 0");
    const int L = net.depth();
    for (int j : layer_set)
        if (j < 1 || j > L) throw std::invalid_argument("ball_count: layer out of range");

    const ForwardTrace trace = forward(net, bn, x);
    const ActivationCode code = code_from_trace(net, trace);

    BallCount result;
    Matrix A = Matrix::Identity(x.size(), x.size());
    Vector b = Vector::Zero(x.size());
    for (int j = 1; j <= L; ++j) {
        if (std::find(layer_set.begin(), layer_set.end(), j) != layer_set.end()) {
            const RegionAffine to_input{j, A, b};
            for (int k = 1; k <= static_cast<int>(net.width(j)); ++k) {
                const UnitAffine u = unit_preactivation_affine(net, bn, to_input, j, k);
                const double n = u.grad.norm();
                if (n < 1e-14) {
                    if (std::isinf(epsilon)) ++result.count;
                    else ++result.degenerate;
                    continue;
                }
                if (std::abs(u.grad.dot(x) + u.offset) / n <= epsilon) ++result.count;
            }
        }
        if (j < L) {
            // Advance (A, b) through layer j along x's code.
            const Matrix& W = net.weight(j);
            Matrix A2 = W * A;
            Vector b2 = W * b;
            if (net.bn_at(j)) {
                const BNLayer& p = *bn.at(j);
                const Eigen::ArrayXd g = p.gamma.array() / p.sigma.array();
                A2.array().colwise() *= g;
                b2 = (g * (b2 - p.mu).array() + p.beta.array()).matrix();
            } else {
                b2 += net.bias(j);
            }
            A2.array().colwise() *= code.at(j).array();
            b2.array() *= code.at(j).array();
            A = std::move(A2);
            b = std::move(b2);
        }
    }
    return result;
}

ConcentrationMap concentration_map(const NetworkSpec& net, const BNState& bn, const Box2& box,
                                   int resolution, double epsilon, const std::vector<int>& layers) {
    if (net.width(0) != 2) throw std::invalid_argument("concentration_map: input dimension must be 2");
    if (resolution < 1) throw std::invalid_argument("concentration_map: resolution must be >= 1");
    ConcentrationMap map;
    map.box = box;
    map.resolution = resolution;
    map.counts.assign(static_cast<std::size_t>(resolution),
                      std::vector<int>(static_cast<std::size_t>(resolution), 0));
    const double dx = box.width() / resolution;
    const double dy = box.height() / resolution;
    for (int r = 0; r < resolution; ++r) {
        for (int c = 0; c < resolution; ++c) {
            Vector x(2);
            x << box.xmin + (c + 0.5) * dx, box.ymin + (r + 0.5) * dy;
            const int n = ball_count(net, bn, x, epsilon, layers).count;
            map.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = n;
            map.max_count = std::max(map.max_count, n);
        }
    }
    return map;
}

ConcentrationCurve concentration_curve(const NetworkSpec& net, const BNState& bn,
                                       const Matrix& points, const std::vector<double>& epsilons) {
    if (points.rows() == 0) throw std::invalid_argument("concentration_curve: empty points");
    for (std::size_t i = 1; i < epsilons.size(); ++i)
        if (epsilons[i] < epsilons[i - 1])
            throw std::invalid_argument("concentration_curve: epsilons must be ascending");
    std::vector<int> all_layers;
    for (int j = 1; j <= net.depth(); ++j) all_layers.push_back(j);
    ConcentrationCurve curve;
    curve.epsilons = epsilons;
    curve.mean_counts.assign(epsilons.size(), 0.0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const Vector x = points.row(i).transpose();
        for (std::size_t e = 0; e < epsilons.size(); ++e)
            curve.mean_counts[e] += ball_count(net, bn, x, epsilons[e], all_layers).count;
    }
    for (auto& m : curve.mean_counts) m /= static_cast<double>(points.rows());
    return curve;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace

std::string concentration_map_csv(const ConcentrationMap& map) {
    std::ostringstream os;
    os << "row,col,x,y,count,normalized\n";
    const double dx = map.box.width() / map.resolution;
    const double dy = map.box.height() / map.resolution;
    for (int r = 0; r < map.resolution; ++r)
        for (int c = 0; c < map.resolution; ++c)
            os << r << ',' << c << ',' << fmt(map.box.xmin + (c + 0.5) * dx) << ','
               << fmt(map.box.ymin + (r + 0.5) * dy) << ','
               << map.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] << ','
               << fmt(map.normalized(r, c)) << '\n';
    return os.str();
}

std::string concentration_map_svg(const ConcentrationMap& map, int width_px) {
    const int n = map.resolution;
    const double cell = static_cast<double>(width_px) / n;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_px << "\" height=\""
       << width_px << "\" viewBox=\"0 0 " << width_px << ' ' << width_px << "\">\n";
    os << "<!-- max_count=" << map.max_count << " -->\n";
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const int level = static_cast<int>(std::lround(255.0 * (1.0 - map.normalized(r, c))));
            char color[8];
            std::snprintf(color, sizeof color, "#%02x%02x%02x", level, level, level);
            os << "<rect x=\"" << fmt(c * cell) << "\" y=\"" << fmt((n - 1 - r) * cell)
               << "\" width=\"" << fmt(cell) << "\" height=\"" << fmt(cell) << "\" fill=\"" << color
               << "\"/>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

std::string concentration_curve_csv(const ConcentrationCurve& curve) {
    std::ostringstream os;
    os << "epsilon,mean_count\n";
    for (std::size_t i = 0; i < curve.epsilons.size(); ++i)
        os << fmt(curve.epsilons[i]) << ',' << fmt(curve.mean_counts[i]) << '\n';
    return os.str();
}

} // namespace splinelens
