#include "splinelens/jitter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace splinelens {

namespace {

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
    const Point2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

// Arc-length-uniform samples along a polyline set.
std::vector<Point2> sample_polylines(const std::vector<LabeledSegment>& segs, std::size_t samples) {
    std::vector<Point2> pts;
    double total = 0.0;
    for (const auto& s : segs) total += s.length();
    if (total == 0.0 || segs.empty()) return pts;
    const double step = total / static_cast<double>(samples);
    double carried = 0.0;
    for (const auto& s : segs) {
        const double len = s.length();
        double t = step - carried;
        while (t <= len) {
            pts.push_back(s.a + (t / len) * (s.b - s.a));
            t += step;
        }
        carried = len - (t - step);
    }
    if (pts.empty()) pts.push_back(segs.front().a);
    return pts;
}

double directed_hausdorff(const std::vector<Point2>& pts, const std::vector<LabeledSegment>& segs) {
    double worst = 0.0;
    for (const auto& p : pts) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& s : segs) best = std::min(best, point_segment_distance(p, s.a, s.b));
        worst = std::max(worst, best);
    }
    return worst;
}

JitterEnsemble build_ensemble(const NetworkSpec& net, const Matrix& dataset,
                              std::size_t batch_size, std::size_t n_draws, std::uint64_t seed,
                              const Box2* box) {
    if (n_draws < 1) throw std::invalid_argument("ensemble: n_draws must be >= 1");
    JitterEnsemble ens;
    ens.seed = seed;
    ens.batch_size = batch_size;
    ens.n_draws = n_draws;
    for (std::size_t d = 0; d < n_draws; ++d) {
        BatchStats s;
        try {
            s = std::move(sample_realizations(net, dataset, batch_size, 1,
                                              Rng::mix(seed) ^ d)
                              .front());
        } catch (const std::runtime_error&) {
            ens.skipped_draws.push_back(d);
            continue;
        }
        if (box) {
            try {
                const Partition2D part = trace(net, s.bn, net.depth(), *box);
                ens.boundaries.push_back(decision_boundary(part));
            } catch (const std::runtime_error&) {
                ens.skipped_draws.push_back(d);
                continue;
            }
        }
        ens.realizations.push_back(std::move(s));
    }
    return ens;
}

} // namespace

JitterEnsemble boundary_ensemble(const NetworkSpec& net, const Matrix& dataset,
                                 std::size_t batch_size, std::size_t n_draws, const Box2& box,
                                 std::uint64_t seed) {
    if (net.width(0) != 2) throw std::invalid_argument("boundary_ensemble: input dimension must be 2");
    if (net.width(net.depth()) != 1)
        throw std::invalid_argument("boundary_ensemble: head must be scalar");
    return build_ensemble(net, dataset, batch_size, n_draws, seed, &box);
}

JitterEnsemble stats_ensemble(const NetworkSpec& net, const Matrix& dataset,
                              std::size_t batch_size, std::size_t n_draws, std::uint64_t seed) {
    return build_ensemble(net, dataset, batch_size, n_draws, seed, nullptr);
}

double hausdorff_distance(const std::vector<LabeledSegment>& a,
                          const std::vector<LabeledSegment>& b, std::size_t samples) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("hausdorff_distance: empty polyline set");
    const auto pa = sample_polylines(a, samples);
    const auto pb = sample_polylines(b, samples);
    return std::max(directed_hausdorff(pa, b), directed_hausdorff(pb, a));
}

double mean_pairwise_hausdorff(const JitterEnsemble& ensemble, std::size_t samples) {
    const std::size_t n = ensemble.boundaries.size();
    if (n < 2) throw std::invalid_argument("mean_pairwise_hausdorff: need at least 2 boundaries");
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            sum += hausdorff_distance(ensemble.boundaries[i], ensemble.boundaries[j], samples);
            ++pairs;
        }
    return sum / static_cast<double>(pairs);
}

std::vector<UnitDistributionRow> distribution_report(const JitterEnsemble& ensemble,
                                                     const std::vector<VariancePrediction>& analytic) {
    if (ensemble.realizations.size() < 2)
        throw std::invalid_argument("distribution_report: need at least 2 draws");
    const double n = static_cast<double>(ensemble.realizations.size());
    std::vector<UnitDistributionRow> rows;
    const BNState& first = ensemble.realizations.front().bn;
    std::size_t a = 0;
    for (std::size_t li = 0; li < first.layers.size(); ++li) {
        if (!first.layers[li]) continue;
        const Eigen::Index d = first.layers[li]->mu.size();
        for (Eigen::Index k = 0; k < d; ++k) {
            UnitDistributionRow row;
            row.layer = static_cast<int>(li) + 1;
            row.unit = static_cast<int>(k) + 1;
            double sm = 0, sm2 = 0, ss = 0, ss2 = 0;
            for (const auto& r : ensemble.realizations) {
                const double mu = r.bn.layers[li]->mu(k);
                const double s2 = r.bn.layers[li]->sigma(k) * r.bn.layers[li]->sigma(k);
                sm += mu;
                sm2 += mu * mu;
                ss += s2;
                ss2 += s2 * s2;
            }
            row.mu_mean = sm / n;
            row.mu_var = sm2 / n - row.mu_mean * row.mu_mean;
            row.sigma2_mean = ss / n;
            row.sigma2_var = ss2 / n - row.sigma2_mean * row.sigma2_mean;
            if (a < analytic.size()) {
                row.analytic_var_mu = analytic[a].var_mu;
                row.analytic_var_sigma2 = analytic[a].var_sigma2;
                row.rel_gap_mu = row.analytic_var_mu > 0
                                     ? std::abs(row.mu_var - row.analytic_var_mu) / row.analytic_var_mu
                                     : std::abs(row.mu_var);
                row.rel_gap_sigma2 =
                    row.analytic_var_sigma2 > 0
                        ? std::abs(row.sigma2_var - row.analytic_var_sigma2) / row.analytic_var_sigma2
                        : std::abs(row.sigma2_var);
            }
            ++a;
            rows.push_back(row);
        }
    }
    return rows;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

std::string ensemble_csv(const JitterEnsemble& ensemble) {
    std::ostringstream os;
    os << "draw_id,layer,unit,mu,sigma\n";
    for (std::size_t d = 0; d < ensemble.realizations.size(); ++d) {
        const BNState& bn = ensemble.realizations[d].bn;
        for (std::size_t li = 0; li < bn.layers.size(); ++li) {
            if (!bn.layers[li]) continue;
            for (Eigen::Index k = 0; k < bn.layers[li]->mu.size(); ++k)
                os << d << ',' << li + 1 << ',' << k + 1 << ',' << fmt(bn.layers[li]->mu(k)) << ','
                   << fmt(bn.layers[li]->sigma(k)) << '\n';
        }
    }
    return os.str();
}

std::string distribution_report_csv(const std::vector<UnitDistributionRow>& rows) {
    std::ostringstream os;
    os << "layer,unit,mu_mean,mu_var,sigma2_mean,sigma2_var,analytic_var_mu,analytic_var_sigma2,"
          "rel_gap_mu,rel_gap_sigma2\n";
    for (const auto& r : rows)
        os << r.layer << ',' << r.unit << ',' << fmt(r.mu_mean) << ',' << fmt(r.mu_var) << ','
           << fmt(r.sigma2_mean) << ',' << fmt(r.sigma2_var) << ',' << fmt(r.analytic_var_mu) << ','
           << fmt(r.analytic_var_sigma2) << ',' << fmt(r.rel_gap_mu) << ',' << fmt(r.rel_gap_sigma2)
           << '\n';
    return os.str();
}

std::string overlay_svg(const JitterEnsemble& ensemble, const Box2& box, const Matrix* points,
                        const Eigen::VectorXi* labels, int width_px) {
    const double scale = width_px / box.width();
    const int h_px = static_cast<int>(std::lround(box.height() * scale));
    auto px = [&](double x) { return fmt6((x - box.xmin) * scale); };
    auto py = [&](double y) { return fmt6((box.ymax - y) * scale); };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_px << "\" height=\"" << h_px
       << "\" viewBox=\"0 0 " << width_px << ' ' << h_px << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << width_px << "\" height=\"" << h_px
       << "\" fill=\"white\" stroke=\"black\" stroke-width=\"1\"/>\n";
    for (const auto& boundary : ensemble.boundaries)
        for (const auto& s : boundary)
            os << "<path d=\"M " << px(s.a.x()) << ' ' << py(s.a.y()) << " L " << px(s.b.x()) << ' '
               << py(s.b.y()) << "\" stroke=\"#1565c0\" stroke-width=\"0.8\" stroke-opacity=\"0.5\" "
                  "fill=\"none\"/>\n";
    if (points) {
        for (Eigen::Index i = 0; i < points->rows(); ++i) {
            const char* color = labels && (*labels)(i) != 0 ? "#d32f2f" : "#2e7d32";
            os << "<circle cx=\"" << px((*points)(i, 0)) << "\" cy=\"" << py((*points)(i, 1))
               << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace splinelens
