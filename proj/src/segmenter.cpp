#include "xmask/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "xmask/error.hpp"

namespace xmask {

namespace {

std::vector<std::size_t> id_order(const PointSet& points) {
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return points[a].id < points[b].id; });
    return order;
}

}  // namespace

void EnergyConfig::validate() const {
    if (!(lambda_geo >= 0.0)) throw PreconditionError("lambda_geo must be >= 0");
    if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be > 0");
    if (!(fallback_scale > 0.0 && fallback_scale <= 1.0)) throw PreconditionError("fallback_scale must lie in (0, 1]");
}

void PseudoMaskFilter::validate() const {
    if (!(low_threshold >= 0.0 && low_threshold < high_threshold && high_threshold <= 1.0)) {
        throw PreconditionError("pseudo-mask thresholds must satisfy 0 <= low < high <= 1");
    }
}

EnergyField energy_field(const FeatureMap& smoothed, const Point& point, double radius, const EnergyConfig& cfg) {
    if (!(radius > 0.0)) throw PreconditionError("radius must be positive");
    const CenterFeature center = bilinear_sample(smoothed, center_location(point, smoothed.dims));

    EnergyField e;
    e.instance_id = point.id;
    e.dims = smoothed.dims;
    e.box = disk_bounding_box(point.y, point.x, radius, smoothed.dims);
    if (e.box.empty()) return e;
    const int bh = e.box.height(), bw = e.box.width();
    const int width = smoothed.dims.width;
    std::vector<double> acc(static_cast<std::size_t>(bh) * bw, 0.0);
    for (int c = 0; c < smoothed.channels; ++c) {
        const double m = center[c];
        const auto plane = smoothed.channel(c);
        for (int y = 0; y < bh; ++y) {
            const double* src = plane.data() + static_cast<std::size_t>(y + e.box.y0) * width + e.box.x0;
            double* dst = acc.data() + static_cast<std::size_t>(y) * bw;
            for (int x = 0; x < bw; ++x) {
                const double d = src[x] - m;
                dst[x] += d * d;
            }
        }
    }

    const double norm = (radius + cfg.epsilon) * (radius + cfg.epsilon);
    e.values.resize(acc.size());
    for (int y = 0; y < bh; ++y) {
        const double dy = (y + e.box.y0) - point.y;
        for (int x = 0; x < bw; ++x) {
            const double dx = (x + e.box.x0) - point.x;
            const std::size_t i = static_cast<std::size_t>(y) * bw + x;
            e.values[i] = in_disk(dy, dx, radius) ? std::sqrt(acc[i]) + cfg.lambda_geo * (dy * dy + dx * dx) / norm
                                                  : EnergyField::kOutside;
        }
    }
    return e;
}

SegmentationLabelMap assign_labels(std::span<const EnergyField> energies, Dims dims, double tau_g) {
    SegmentationLabelMap out(dims);
    std::vector<double> best(dims.area(), EnergyField::kOutside);
    std::vector<const EnergyField*> order;
    order.reserve(energies.size());
    for (const auto& e : energies) {
        if (e.dims != dims) throw InputError("energy field dims differ");
        order.push_back(&e);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const EnergyField* a, const EnergyField* b) { return a->instance_id < b->instance_id; });
    // Ascending id order with strict '<' leaves ties with the smaller id.
    for (const EnergyField* e : order) {
        if (e->box.empty()) continue;
        const int bw = e->box.width();
        for (int y = e->box.y0; y <= e->box.y1; ++y) {
            for (int x = e->box.x0; x <= e->box.x1; ++x) {
                const double v = e->values[static_cast<std::size_t>(y - e->box.y0) * bw + (x - e->box.x0)];
                const std::size_t idx = out.index(y, x);
                if (v < tau_g && v < best[idx]) {
                    best[idx] = v;
                    out.values[idx] = e->instance_id;
                }
            }
        }
    }
    return out;
}

SegmentationLabelMap segment_smoothed(const FeatureMap& smoothed, const PointSet& points, const EnergyConfig& cfg) {
    cfg.validate();
    if (points.bounds() != smoothed.dims) throw InputError("point bounds differ from feature map dims");
    const NnecRadii radii = nnec_radii(points, smoothed.dims);

    std::vector<EnergyField> energies;
    energies.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) energies.push_back(energy_field(smoothed, points[i], radii[i], cfg));
    SegmentationLabelMap out = assign_labels(energies, smoothed.dims, cfg.tau_g);
    if (!cfg.nnec_fallback) return out;

    std::map<std::uint32_t, std::size_t> pixel_counts;
    for (std::uint32_t v : out.values) {
        if (v != 0) ++pixel_counts[v];
    }
    for (std::size_t i : id_order(points)) {
        const Point& p = points[i];
        if (pixel_counts.contains(p.id)) continue;
        for (std::size_t idx : disk_region(p, cfg.fallback_scale * radii[i], out.dims).members) {
            if (out.values[idx] == 0) out.values[idx] = p.id;
        }
    }
    return out;
}

SegmentationLabelMap segment(const FeatureMap& raw, const PointSet& points, const EnergyConfig& cfg,
                             const GaussianKernel& kernel) {
    return segment_smoothed(depthwise_gaussian_smooth(raw, kernel), points, cfg);
}

FilteredMasks filter_pseudo_masks(const PointSet& points, const SegmentationLabelMap& seg, const PseudoMaskFilter& filter) {
    filter.validate();
    std::map<std::uint32_t, double> scores;
    for (const Point& p : points.points()) scores[p.id] = p.score.value_or(1.0);

    FilteredMasks out{{}, seg};
    for (std::uint32_t id : seg.ids()) {
        if (!scores.contains(id)) throw InputError("segment id " + std::to_string(id) + " has no scored point");
    }
    std::vector<std::uint32_t> erased;
    for (const auto& [id, score] : scores) {
        if (score >= filter.high_threshold) out.valid_ids.push_back(id);
        if (score < filter.low_threshold) erased.push_back(id);
    }
    if (!erased.empty()) {
        for (std::uint32_t& v : out.labels.values) {
            if (v != 0 && std::binary_search(erased.begin(), erased.end(), v)) v = 0;
        }
    }
    return out;
}

SegmentationLabelMap rasterize_nearest(const PointSet& points, std::span<const std::vector<std::size_t>> masks, Dims dims) {
    if (masks.size() != points.size()) throw InputError("mask count differs from point count");
    SegmentationLabelMap out(dims);
    std::vector<double> best(dims.area(), EnergyField::kOutside);
    for (std::size_t i : id_order(points)) {
        const Point& p = points[i];
        for (std::size_t idx : masks[i]) {
            const double dy = static_cast<double>(idx / dims.width) - p.y;
            const double dx = static_cast<double>(idx % dims.width) - p.x;
            const double d2 = dy * dy + dx * dx;
            if (d2 < best[idx]) {
                best[idx] = d2;
                out.values[idx] = p.id;
            }
        }
    }
    return out;
}

SegmentationLabelMap circle_baseline(const PointSet& points, Dims dims) {
    const NnecRadii radii = nnec_radii(points, dims);
    std::vector<std::vector<std::size_t>> masks;
    masks.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) masks.push_back(disk_region(points[i], radii[i], dims).members);
    return rasterize_nearest(points, masks, dims);
}

}  // namespace xmask
