#include "splinelens/partition2d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace splinelens {

double ConvexPolygon::area() const {
    const std::size_t n = vertices.size();
    if (n < 3) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point2& p = vertices[i];
        const Point2& q = vertices[(i + 1) % n];
        s += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * s;
}

Point2 ConvexPolygon::centroid() const {
    Point2 c = Point2::Zero();
    for (const auto& v : vertices) c += v;
    return c / static_cast<double>(vertices.size());
}

bool ConvexPolygon::contains(const Point2& p, double tol) const {
    const std::size_t n = vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point2& a = vertices[i];
        const Point2& b = vertices[(i + 1) % n];
        const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
        if (cross < -tol) return false;
    }
    return true;
}

ClipResult clip_convex(const ConvexPolygon& poly, const Point2& grad, double offset, double tol) {
    ClipResult res;
    const std::size_t n = poly.vertices.size();
    if (n < 3) return res;
    std::vector<double> s(n);
    std::vector<int> cls(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = grad.dot(poly.vertices[i]) + offset;
        cls[i] = s[i] > tol ? 1 : (s[i] < -tol ? -1 : 0);
    }
    std::vector<Point2> chord;
    auto push_chord = [&](const Point2& p) {
        for (const auto& q : chord)
            if ((q - p).norm() < 1e-12) return;
        chord.push_back(p);
    };
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        const Point2& vi = poly.vertices[i];
        const Point2& vj = poly.vertices[j];
        if (cls[i] >= 0) res.pos.vertices.push_back(vi);
        if (cls[i] <= 0) res.neg.vertices.push_back(vi);
        if (cls[i] == 0) push_chord(vi);
        if (cls[i] * cls[j] < 0) {
            const double t = s[i] / (s[i] - s[j]);
            const Point2 p = vi + t * (vj - vi);
            res.pos.vertices.push_back(p);
            res.neg.vertices.push_back(p);
            push_chord(p);
        }
    }
    auto dedupe = [](ConvexPolygon& q) {
        std::vector<Point2> out;
        for (const auto& v : q.vertices) {
            if (out.empty() || (v - out.back()).norm() > 1e-13) out.push_back(v);
        }
        if (out.size() > 2 && (out.front() - out.back()).norm() < 1e-13) out.pop_back();
        q.vertices = std::move(out);
    };
    dedupe(res.pos);
    dedupe(res.neg);
    if (res.pos.vertices.size() >= 3 && res.neg.vertices.size() >= 3 && chord.size() >= 2) {
        // Pick the two farthest-apart chord points (duplicates collapse above).
        double best = -1.0;
        for (std::size_t i = 0; i < chord.size(); ++i)
            for (std::size_t j = i + 1; j < chord.size(); ++j) {
                const double d = (chord[i] - chord[j]).norm();
                if (d > best) {
                    best = d;
                    res.chord_a = chord[i];
                    res.chord_b = chord[j];
                }
            }
        res.cut = best > 1e-12;
    }
    return res;
}

namespace {

struct Working {
    ConvexPolygon poly;
    ActivationCode code;
    Matrix A;
    Vector b;
};

// Advance the region's affine map through layer l with the given code.
void step_affine(const NetworkSpec& net, const BNState& bn, int l, const Vector& code,
                 Matrix& A, Vector& b) {
    const Matrix& W = net.weight(l);
    Matrix A2 = W * A;
    Vector b2 = W * b;
    if (net.bn_at(l)) {
        const BNLayer& p = *bn.at(l);
        const Eigen::ArrayXd g = p.gamma.array() / p.sigma.array();
        A2.array().colwise() *= g;
        b2 = (g * (b2 - p.mu).array() + p.beta.array()).matrix();
    } else {
        b2 += net.bias(l);
    }
    if (l < net.depth()) {   // the head is linear: no activation fold
        A2.array().colwise() *= code.array();
        b2.array() *= code.array();
    }
    A = std::move(A2);
    b = std::move(b2);
}

} // namespace

Partition2D trace(const NetworkSpec& net, const BNState& bn, int upto, const Box2& box,
                  const TraceOptions& opts) {
    if (net.width(0) != 2) throw std::invalid_argument("trace: input dimension must be 2");
    if (upto < 0 || upto > net.depth()) throw std::invalid_argument("trace: layer out of range");
    if (!(box.width() > 0.0 && box.height() > 0.0)) throw std::invalid_argument("trace: degenerate box");

    Partition2D part;
    part.box = box;
    part.depth = upto;
    const double sliver_abs = opts.sliver_area_rel * box.area();

    Working root;
    root.poly.vertices = {{box.xmin, box.ymin}, {box.xmax, box.ymin},
                          {box.xmax, box.ymax}, {box.xmin, box.ymax}};
    root.A = Matrix::Identity(2, 2);
    root.b = Vector::Zero(2);
    std::vector<Working> regions{std::move(root)};

    for (int j = 1; j <= upto; ++j) {
        const Eigen::Index dj = net.width(j);
        std::vector<Working> next;
        for (auto& region : regions) {
            struct Piece {
                ConvexPolygon poly;
                Vector signs;
            };
            std::vector<Piece> pieces;
            pieces.push_back({std::move(region.poly), Vector(dj)});
            const RegionAffine to_input{j, region.A, region.b};
            for (int k = 1; k <= static_cast<int>(dj); ++k) {
                const UnitAffine u = unit_preactivation_affine(net, bn, to_input, j, k);
                const Point2 grad(u.grad(0), u.grad(1));
                std::vector<Piece> split;
                split.reserve(pieces.size());
                for (auto& piece : pieces) {
                    if (grad.norm() < 1e-14) {
                        // Unit constant on the region: no cut, sign from the offset.
                        piece.signs(k - 1) = net.activation.slope(u.offset);
                        split.push_back(std::move(piece));
                        continue;
                    }
                    ClipResult clip = clip_convex(piece.poly, grad, u.offset, opts.classify_tol);
                    const double a_neg = clip.neg.area();
                    const double a_pos = clip.pos.area();
                    if (!clip.cut || std::min(a_neg, a_pos) < sliver_abs) {
                        // Whole (or almost whole) piece on one side.
                        const double h_mid = grad.dot(piece.poly.centroid()) + u.offset;
                        piece.signs(k - 1) = net.activation.slope(h_mid);
                        split.push_back(std::move(piece));
                        continue;
                    }
                    part.segments.push_back({clip.chord_a, clip.chord_b, j, k});
                    Piece neg{std::move(clip.neg), piece.signs};
                    neg.signs(k - 1) = net.activation.alpha;
                    Piece pos{std::move(clip.pos), std::move(piece.signs)};
                    pos.signs(k - 1) = 1.0;
                    split.push_back(std::move(neg));
                    split.push_back(std::move(pos));
                }
                pieces = std::move(split);
                if (next.size() + pieces.size() > opts.region_budget)
                    throw std::runtime_error("trace: region budget exceeded; use a smaller network or box");
            }
            for (auto& piece : pieces) {
                Working w;
                w.poly = std::move(piece.poly);
                w.code = region.code;
                w.code.layers.push_back(piece.signs);
                w.A = region.A;
                w.b = region.b;
                step_affine(net, bn, j, piece.signs, w.A, w.b);
                next.push_back(std::move(w));
            }
        }
        regions = std::move(next);
        if (regions.size() > opts.region_budget)
            throw std::runtime_error("trace: region budget exceeded; use a smaller network or box");
    }

    part.regions.reserve(regions.size());
    for (auto& w : regions)
        part.regions.push_back({std::move(w.poly), std::move(w.code), std::move(w.A), std::move(w.b)});

    // Refine segments at region vertices so each piece borders exactly two
    // final regions (or the box edge).
    std::vector<Point2> verts;
    for (const auto& r : part.regions)
        verts.insert(verts.end(), r.polygon.vertices.begin(), r.polygon.vertices.end());
    const double on_tol = 1e-9 * std::max(box.width(), box.height());
    std::vector<LabeledSegment> refined;
    for (const auto& seg : part.segments) {
        const Point2 dir = seg.b - seg.a;
        const double len = dir.norm();
        if (len < 1e-12) continue;
        std::vector<double> ts{0.0, 1.0};
        for (const auto& v : verts) {
            const double t = (v - seg.a).dot(dir) / (len * len);
            if (t <= 1e-9 || t >= 1.0 - 1e-9) continue;
            const Point2 foot = seg.a + t * dir;
            if ((v - foot).norm() < on_tol) ts.push_back(t);
        }
        std::sort(ts.begin(), ts.end());
        for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
            if (ts[i + 1] - ts[i] < 1e-9) continue;
            refined.push_back({seg.a + ts[i] * dir, seg.a + ts[i + 1] * dir, seg.layer, seg.unit});
        }
    }
    part.segments = std::move(refined);
    return part;
}

std::vector<LabeledSegment> folded_hyperplane(const Partition2D& partition, int layer, int unit) {
    if (layer < 1 || layer > partition.depth)
        throw std::invalid_argument("folded_hyperplane: layer beyond traced depth");
    std::vector<LabeledSegment> out;
    for (const auto& s : partition.segments)
        if (s.layer == layer && s.unit == unit) out.push_back(s);
    return out;
}

std::vector<LabeledSegment> decision_boundary(const Partition2D& partition) {
    return folded_hyperplane(partition, partition.depth, 1);
}

namespace {

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string to_svg(const Partition2D& partition, const SvgStyle& style, const Matrix* points) {
    const Box2& box = partition.box;
    const double scale = style.width_px / box.width();
    const int h_px = static_cast<int>(std::lround(box.height() * scale));
    auto px = [&](double x) { return fmt6((x - box.xmin) * scale); };
    auto py = [&](double y) { return fmt6((box.ymax - y) * scale); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width_px
       << "\" height=\"" << h_px << "\" viewBox=\"0 0 " << style.width_px << ' ' << h_px << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << style.width_px << "\" height=\"" << h_px
       << "\" fill=\"white\" stroke=\"black\" stroke-width=\"1\"/>\n";
    for (const auto& r : partition.regions) {
        os << "<polygon points=\"";
        for (std::size_t i = 0; i < r.polygon.vertices.size(); ++i) {
            if (i) os << ' ';
            os << px(r.polygon.vertices[i].x()) << ',' << py(r.polygon.vertices[i].y());
        }
        os << "\" fill=\"none\" stroke=\"#e0e0e0\" stroke-width=\"0.5\"/>\n";
    }
    for (const auto& s : partition.segments) {
        const bool current = style.current_layer != 0 && s.layer == style.current_layer;
        os << "<path d=\"M " << px(s.a.x()) << ' ' << py(s.a.y()) << " L " << px(s.b.x()) << ' '
           << py(s.b.y()) << "\" stroke=\"" << (current ? style.current_color : style.earlier_color)
           << "\" stroke-width=\"" << (current ? "1.5" : "1") << "\" fill=\"none\"/>\n";
    }
    if (points) {
        for (Eigen::Index i = 0; i < points->rows(); ++i)
            os << "<circle cx=\"" << px((*points)(i, 0)) << "\" cy=\"" << py((*points)(i, 1))
               << "\" r=\"2.5\" fill=\"" << style.point_color << "\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string regions_csv(const Partition2D& partition) {
    std::ostringstream os;
    os << "id,code,vertices\n";
    for (std::size_t i = 0; i < partition.regions.size(); ++i) {
        const auto& r = partition.regions[i];
        os << i << ',' << r.code.to_string() << ',';
        for (std::size_t v = 0; v < r.polygon.vertices.size(); ++v) {
            if (v) os << ';';
            os << fmt17(r.polygon.vertices[v].x()) << ' ' << fmt17(r.polygon.vertices[v].y());
        }
        os << '\n';
    }
    return os.str();
}

std::string segments_csv(const Partition2D& partition) {
    std::ostringstream os;
    os << "id,x1,y1,x2,y2,layer,unit\n";
    for (std::size_t i = 0; i < partition.segments.size(); ++i) {
        const auto& s = partition.segments[i];
        os << i << ',' << fmt17(s.a.x()) << ',' << fmt17(s.a.y()) << ',' << fmt17(s.b.x()) << ','
           << fmt17(s.b.y()) << ',' << s.layer << ',' << s.unit << '\n';
    }
    return os.str();
}

} // namespace splinelens
