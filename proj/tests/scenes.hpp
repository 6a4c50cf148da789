#pragma once

// Small random scenes shared by the loss, segmenter and acceptance suites.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "xmask/losses.hpp"

namespace scenes {

using namespace xmask;

struct Labeled {
    Dims dims;
    PointSet points;
    LabelMap labels;
    NnecRadii radii;
};

// Points with blob labels of radius ~0.6 r around each point (the point pixel
// always carries its own id).
inline Labeled labeled_scene(std::mt19937_64& rng, int n, Dims dims, double min_sep) {
    const auto pts = oracle::random_points(rng, n, dims, min_sep);
    Labeled s{dims, PointSet(pts, dims), LabelMap(dims), {}};
    s.radii = nnec_radii(s.points, dims);
    std::uniform_real_distribution<double> u(0.45, 0.7);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double r = u(rng) * s.radii[i];
        for (auto idx : oracle::disk_scan(pts[i].y, pts[i].x, r, dims))
            if (s.labels.values[idx] == 0) s.labels.values[idx] = pts[i].id;
        s.labels.at(round_to_grid(pts[i].y, dims.height), round_to_grid(pts[i].x, dims.width)) = pts[i].id;
    }
    return s;
}

// Smallest distance from any disk pixel's embedding distance to a hinge kink
// (tau - delta for positives, tau + delta for negatives) or to zero.
inline double kink_gap(const FeatureMap& raw, const Labeled& s, const DiscriminativeConfig& cfg) {
    const FeatureMap sm = depthwise_gaussian_smooth(raw, cfg.kernel);
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        const Point& p = s.points[i];
        const auto lab = instance_label(s.labels, p);
        if (!lab) continue;
        const auto c = oracle::bilinear(sm, 2.0 * std::clamp(p.y, 0.0, s.dims.height - 1.0) / (s.dims.height - 1) - 1.0,
                                        2.0 * std::clamp(p.x, 0.0, s.dims.width - 1.0) / (s.dims.width - 1) - 1.0);
        for (auto idx : oracle::disk_scan(p.y, p.x, s.radii[i], s.dims)) {
            const int y = static_cast<int>(idx / s.dims.width), x = static_cast<int>(idx % s.dims.width);
            const double d = oracle::pixel_distance(sm, y, x, c);
            const double kink = s.labels.values[idx] == *lab ? cfg.tau - cfg.delta : cfg.tau + cfg.delta;
            gap = std::min({gap, std::abs(d - kink), d});
        }
    }
    return gap;
}

}  // namespace scenes
