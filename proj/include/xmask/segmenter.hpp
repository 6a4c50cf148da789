#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "xmask/field.hpp"
#include "xmask/geometry.hpp"

namespace xmask {

struct EnergyConfig {
    double lambda_geo = 1.0;  // geometry weight
    double tau_g = 0.8;       // energy threshold
    double epsilon = 1e-6;
    bool nnec_fallback = true;
    double fallback_scale = 0.5;

    void validate() const;
};

// Joint energy of one instance over its NNEC disk. Stored on the disk's
// bounding box; every pixel outside the disk reads +inf.
struct EnergyField {
    static constexpr double kOutside = std::numeric_limits<double>::infinity();

    std::uint32_t instance_id = 0;
    Dims dims;
    PixelBox box;
    std::vector<double> values;  // box-local, row-major

    double at(int y, int x) const {
        if (y < box.y0 || y > box.y1 || x < box.x0 || x > box.x1) return kOutside;
        return values[static_cast<std::size_t>(y - box.y0) * box.width() + (x - box.x0)];
    }
};

struct PseudoMaskFilter {
    double low_threshold = 0.1;
    double high_threshold = 0.95;

    void validate() const;
};

struct FilteredMasks {
    std::vector<std::uint32_t> valid_ids;  // score >= high
    SegmentationLabelMap labels;           // instances below low erased
};

// E(y,x) = |E~(y,x) - c| + lambda |(y,x) - p|^2 / (r + eps)^2 inside the disk.
EnergyField energy_field(const FeatureMap& smoothed, const Point& point, double radius, const EnergyConfig& cfg);

// Per pixel: the id with the lowest energy among those below tau_g (ties to the
// smaller id), else 0.
SegmentationLabelMap assign_labels(std::span<const EnergyField> energies, Dims dims, double tau_g);

SegmentationLabelMap segment(const FeatureMap& raw, const PointSet& points, const EnergyConfig& cfg,
                             const GaussianKernel& kernel);

// Same pipeline on an already smoothed field.
SegmentationLabelMap segment_smoothed(const FeatureMap& smoothed, const PointSet& points, const EnergyConfig& cfg);

// Points without a score count as certain (1.0).
FilteredMasks filter_pseudo_masks(const PointSet& points, const SegmentationLabelMap& seg, const PseudoMaskFilter& filter);

// Each point's NNEC disk; contested pixels go to the nearest point, then the smaller id.
SegmentationLabelMap circle_baseline(const PointSet& points, Dims dims);

// Rasterize per-point masks (sorted pixel indices, aligned with `points`) into one
// map. Contested pixels go to the nearest point, then the smaller id.
SegmentationLabelMap rasterize_nearest(const PointSet& points, std::span<const std::vector<std::size_t>> masks, Dims dims);

}  // namespace xmask
