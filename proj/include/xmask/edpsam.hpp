#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "xmask/geometry.hpp"

namespace xmask {

// RGB image in [0, 1], interleaved: values[(y * W + x) * 3 + c].
struct Image {
    Dims dims;
    std::vector<double> values;

    Image() = default;
    explicit Image(Dims d, double fill = 0.0) : dims(d), values(d.area() * 3, fill) {}

    double at(int y, int x, int c) const { return values[(static_cast<std::size_t>(y) * dims.width + x) * 3 + c]; }
    double& at(int y, int x, int c) { return values[(static_cast<std::size_t>(y) * dims.width + x) * 3 + c]; }
};

struct SlicParams {
    int n_segments = 1000;
    double compactness = 10.0;
    int iterations = 10;
};

// SLIC: k-means in CIELAB + position, seeded on a near-square grid with about
// n_segments cells. Distance is |lab| + (compactness / s) |xy| with
// s = sqrt(H W / n_segments), searched in a 2s x 2s window around each center.
// Components are then made 4-connected; fragments smaller than s^2 / 4 merge
// into their largest already-labelled neighbour. Ids are 1..n.
SuperpixelMap slic_superpixels(const Image& img, const SlicParams& params);

// One candidate region from an external promptable segmenter.
struct CandidateMask {
    std::vector<std::size_t> pixels;  // sorted linear indices, non-empty

    std::size_t area() const { return pixels.size(); }
    bool contains(std::size_t idx) const;
};

struct CandidateMaskSet {
    Dims dims;
    std::vector<CandidateMask> masks;
};

// Each distinct nonzero value becomes one candidate, in ascending value order.
CandidateMaskSet candidates_from_label_map(const LabelMap& labels);

// Source of candidate masks for a prompt point. The superpixel id containing
// the point is passed as auxiliary prompt context.
class CandidateProvider {
public:
    virtual ~CandidateProvider() = default;
    virtual CandidateMaskSet candidates(const Point& point, std::uint32_t superpixel_id) const = 0;
};

// Returns the same candidate set for every prompt (e.g. loaded from a file).
class StaticCandidateProvider : public CandidateProvider {
public:
    explicit StaticCandidateProvider(CandidateMaskSet set) : set_(std::move(set)) {}
    CandidateMaskSet candidates(const Point&, std::uint32_t) const override { return set_; }

private:
    CandidateMaskSet set_;
};

// Smallest candidate containing the rounded point; ties keep list order.
std::optional<std::size_t> select_candidate(const Point& point, const CandidateMaskSet& candidates);

struct EdpSamMask {
    RegionMask mask;
    bool fallback = false;  // true when the mask is the bare NNEC disk
};

// Selected candidate clipped to the NNEC disk, or the disk itself when no
// candidate covers the point or the clip is empty.
EdpSamMask edp_sam_mask(const Point& point, double radius, const CandidateMaskSet& candidates);

// Rasterize per-point EDP-SAM masks; contested pixels go to the nearest point,
// then the smaller id. `candidates` is aligned with `points`.
InstanceLabelMap build_annotation(const PointSet& points, std::span<const CandidateMaskSet> candidates, Dims dims);

// Queries the provider once per point, passing the superpixel under the point.
InstanceLabelMap build_annotation(const PointSet& points, const CandidateProvider& provider,
                                  const SuperpixelMap& superpixels);

}  // namespace xmask
