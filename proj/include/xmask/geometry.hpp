#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace xmask {

struct Dims {
    int height = 0;
    int width = 0;

    std::size_t area() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
    bool operator==(const Dims&) const = default;
};

// Integer field over a pixel grid. 0 is background, k > 0 an instance (or
// superpixel) id. Used for ground-truth masks, segmentations and superpixels.
struct LabelMap {
    Dims dims;
    std::vector<std::uint32_t> values;

    LabelMap() = default;
    explicit LabelMap(Dims d, std::uint32_t fill = 0) : dims(d), values(d.area(), fill) {}

    std::uint32_t at(int y, int x) const { return values[index(y, x)]; }
    std::uint32_t& at(int y, int x) { return values[index(y, x)]; }
    std::size_t index(int y, int x) const { return static_cast<std::size_t>(y) * dims.width + x; }

    // Sorted distinct nonzero ids.
    std::vector<std::uint32_t> ids() const;
    bool operator==(const LabelMap&) const = default;
};

using InstanceLabelMap = LabelMap;
using SegmentationLabelMap = LabelMap;
using SuperpixelMap = LabelMap;

struct Point {
    std::uint32_t id = 0;
    double y = 0.0;
    double x = 0.0;
    std::optional<double> score;
};

// Ordered set of annotated or predicted head points inside a (H, W) field.
class PointSet {
public:
    PointSet() = default;
    // Throws InputError on non-positive or duplicate ids, out-of-bounds
    // coordinates or scores outside [0, 1].
    PointSet(std::vector<Point> points, Dims bounds);

    std::span<const Point> points() const { return points_; }
    const Point& operator[](std::size_t i) const { return points_[i]; }
    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    Dims bounds() const { return bounds_; }

    // Coordinates divided by `stride`, bounds mapped to the coarser grid.
    PointSet rescaled(int stride, Dims target) const;

private:
    std::vector<Point> points_;
    Dims bounds_;
};

struct DistanceMatrix {
    std::size_t n = 0;
    std::vector<double> d;  // row-major n x n

    double operator()(std::size_t i, std::size_t j) const { return d[i * n + j]; }
};

using NnecRadii = std::vector<double>;

struct CoordinateGrid {
    Dims dims;
    // (y, x) stored per pixel; entry (y, x) holds exactly (y, x).
    std::vector<double> ys;
    std::vector<double> xs;

    explicit CoordinateGrid(Dims d);
};

// Inclusive Euclidean disk test shared by every module that rasterizes NNEC
// disks, so membership is bit-consistent across them.
inline bool in_disk(double dy, double dx, double radius) { return dy * dy + dx * dx <= radius * radius; }

// Pixels in [y0, y1] x [x0, x1] possibly inside the disk, clipped to dims.
struct PixelBox {
    int y0 = 0, y1 = -1, x0 = 0, x1 = -1;
    int height() const { return y1 - y0 + 1; }
    int width() const { return x1 - x0 + 1; }
    bool empty() const { return y1 < y0 || x1 < x0; }
};
PixelBox disk_bounding_box(double py, double px, double radius, Dims dims);

struct RegionMask {
    Dims dims;
    std::vector<std::size_t> members;  // sorted linear pixel indices

    bool contains(int y, int x) const;
    std::size_t size() const { return members.size(); }
};

struct RegionPartition {
    std::uint32_t instance_id = 0;
    std::uint32_t instance_label = 0;
    std::vector<std::size_t> positive;  // disk pixels carrying the instance label
    std::vector<std::size_t> negative;  // all other disk pixels
};

DistanceMatrix pairwise_distances(const PointSet& points);

// Distance to the nearest other point; 0.5 * min(H, W) for a lone point.
NnecRadii nnec_radii(const PointSet& points, Dims dims);

RegionMask disk_region(double py, double px, double radius, Dims dims);
inline RegionMask disk_region(const Point& p, double radius, Dims dims) { return disk_region(p.y, p.x, radius, dims); }

// Label value under the rounded point position; nullopt when it is background.
std::optional<std::uint32_t> instance_label(const LabelMap& labels, const Point& p);

// nullopt marks an orphan instance (label 0), which callers skip.
std::optional<RegionPartition> partition_region(const RegionMask& region, const LabelMap& labels,
                                                std::uint32_t instance_label, std::uint32_t instance_id = 0);

// Nearest grid node to a sub-pixel coordinate, clamped to the grid.
int round_to_grid(double v, int extent);

}  // namespace xmask
