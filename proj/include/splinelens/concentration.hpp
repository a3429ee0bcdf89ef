#pragma once

#include "splinelens/network.hpp"
#include "splinelens/partition2d.hpp"

#include <string>
#include <vector>

namespace splinelens {

// Number of (layer, unit) pairs whose facet passes within epsilon of x,
// using the within-region local facet distance. Degenerate units (zero
// input-space normal) are not counted; their number is reported.
struct BallCount {
    int count = 0;
    int degenerate = 0;
};
BallCount ball_count(const NetworkSpec& net, const BNState& bn, const Vector& x,
                     double epsilon, const std::vector<int>& layer_set);

struct ConcentrationMap {
    Box2 box;
    int resolution = 0;
    std::vector<std::vector<int>> counts;        // [row][col], row 0 at ymin
    int max_count = 0;
    double normalized(int row, int col) const {
        return max_count > 0 ? static_cast<double>(counts[static_cast<std::size_t>(row)]
                                                         [static_cast<std::size_t>(col)]) / max_count
                             : 0.0;
    }
};

ConcentrationMap concentration_map(const NetworkSpec& net, const BNState& bn, const Box2& box,
                                   int resolution, double epsilon, const std::vector<int>& layers);

struct ConcentrationCurve {
    std::vector<double> epsilons;
    std::vector<double> mean_counts;
};

// Mean ball count over `points` (rows) for each epsilon, all hidden layers.
ConcentrationCurve concentration_curve(const NetworkSpec& net, const BNState& bn,
                                       const Matrix& points, const std::vector<double>& epsilons);

std::string concentration_map_csv(const ConcentrationMap& map);
std::string concentration_map_svg(const ConcentrationMap& map, int width_px = 512);
std::string concentration_curve_csv(const ConcentrationCurve& curve);

} // namespace splinelens
