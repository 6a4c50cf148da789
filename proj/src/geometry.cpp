#include "xmask/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "xmask/error.hpp"

namespace xmask {

std::vector<std::uint32_t> LabelMap::ids() const {
    std::set<std::uint32_t> seen(values.begin(), values.end());
    seen.erase(0);
    return {seen.begin(), seen.end()};
}

PointSet::PointSet(std::vector<Point> points, Dims bounds) : points_(std::move(points)), bounds_(bounds) {
    if (bounds.height <= 0 || bounds.width <= 0) throw InputError("point bounds must be positive");
    std::set<std::uint32_t> ids;
    for (const auto& p : points_) {
        if (p.id == 0) throw InputError("point id must be positive");
        if (!ids.insert(p.id).second) throw InputError("duplicate point id " + std::to_string(p.id));
        if (!std::isfinite(p.y) || !std::isfinite(p.x) || p.y < 0.0 || p.y >= bounds.height || p.x < 0.0 ||
            p.x >= bounds.width) {
            throw InputError("point " + std::to_string(p.id) + " lies outside the " + std::to_string(bounds.height) +
                             "x" + std::to_string(bounds.width) + " field");
        }
        if (p.score && !(*p.score >= 0.0 && *p.score <= 1.0)) {
            throw InputError("point " + std::to_string(p.id) + " score outside [0, 1]");
        }
    }
}

PointSet PointSet::rescaled(int stride, Dims target) const {
    if (stride < 1) throw InputError("stride must be >= 1");
    std::vector<Point> out(points_.begin(), points_.end());
    for (auto& p : out) {
        p.y /= stride;
        p.x /= stride;
    }
    return PointSet(std::move(out), target);
}

CoordinateGrid::CoordinateGrid(Dims d) : dims(d), ys(d.area()), xs(d.area()) {
    for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * d.width + x;
            ys[i] = y;
            xs[i] = x;
        }
    }
}

PixelBox disk_bounding_box(double py, double px, double radius, Dims dims) {
    PixelBox b;
    b.y0 = std::max(0, static_cast<int>(std::ceil(py - radius)));
    b.y1 = std::min(dims.height - 1, static_cast<int>(std::floor(py + radius)));
    b.x0 = std::max(0, static_cast<int>(std::ceil(px - radius)));
    b.x1 = std::min(dims.width - 1, static_cast<int>(std::floor(px + radius)));
    return b;
}

bool RegionMask::contains(int y, int x) const {
    if (y < 0 || x < 0 || y >= dims.height || x >= dims.width) return false;
    const std::size_t idx = static_cast<std::size_t>(y) * dims.width + x;
    return std::binary_search(members.begin(), members.end(), idx);
}

DistanceMatrix pairwise_distances(const PointSet& points) {
    if (points.empty()) throw PreconditionError("no points");
    DistanceMatrix m;
    m.n = points.size();
    m.d.assign(m.n * m.n, 0.0);
    for (std::size_t i = 0; i < m.n; ++i) {
        for (std::size_t j = i + 1; j < m.n; ++j) {
            const double dy = points[i].y - points[j].y;
            const double dx = points[i].x - points[j].x;
            const double v = std::sqrt(dy * dy + dx * dx);
            m.d[i * m.n + j] = v;
            m.d[j * m.n + i] = v;
        }
    }
    return m;
}

NnecRadii nnec_radii(const PointSet& points, Dims dims) {
    if (dims.height <= 0 || dims.width <= 0) throw InputError("field dims must be positive");
    const DistanceMatrix dist = pairwise_distances(points);
    if (dist.n == 1) return {0.5 * std::min(dims.height, dims.width)};

    NnecRadii r(dist.n, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < dist.n; ++i) {
        for (std::size_t j = 0; j < dist.n; ++j) {
            if (i != j) r[i] = std::min(r[i], dist(i, j));
        }
        if (r[i] <= 0.0) {
            throw PreconditionError("coincident points (id " + std::to_string(points[i].id) + ")");
        }
    }
    return r;
}

RegionMask disk_region(double py, double px, double radius, Dims dims) {
    if (!(radius > 0.0)) throw PreconditionError("disk radius must be positive");
    RegionMask mask{dims, {}};
    const PixelBox b = disk_bounding_box(py, px, radius, dims);
    for (int y = b.y0; y <= b.y1; ++y) {
        for (int x = b.x0; x <= b.x1; ++x) {
            if (in_disk(y - py, x - px, radius)) mask.members.push_back(static_cast<std::size_t>(y) * dims.width + x);
        }
    }
    return mask;
}

int round_to_grid(double v, int extent) { return std::clamp(static_cast<int>(std::lround(v)), 0, extent - 1); }

std::optional<std::uint32_t> instance_label(const LabelMap& labels, const Point& p) {
    const std::uint32_t v = labels.at(round_to_grid(p.y, labels.dims.height), round_to_grid(p.x, labels.dims.width));
    if (v == 0) return std::nullopt;
    return v;
}

std::optional<RegionPartition> partition_region(const RegionMask& region, const LabelMap& labels,
                                                std::uint32_t label, std::uint32_t instance_id) {
    if (region.dims != labels.dims) throw InputError("region and label map dims differ");
    if (label == 0) return std::nullopt;
    RegionPartition part;
    part.instance_id = instance_id;
    part.instance_label = label;
    for (std::size_t idx : region.members) {
        (labels.values[idx] == label ? part.positive : part.negative).push_back(idx);
    }
    return part;
}

}  // namespace xmask
