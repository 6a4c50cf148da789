#include "xmask/edpsam.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "xmask/error.hpp"
#include "xmask/segmenter.hpp"

namespace xmask {

namespace {

double srgb_to_linear(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }

double lab_f(double t) {
    constexpr double eps = 216.0 / 24389.0;
    constexpr double kappa = 24389.0 / 27.0;
    return t > eps ? std::cbrt(t) : (kappa * t + 16.0) / 116.0;
}

// sRGB (D65) to CIELAB.
std::array<double, 3> rgb_to_lab(double r, double g, double b) {
    r = srgb_to_linear(r);
    g = srgb_to_linear(g);
    b = srgb_to_linear(b);
    const double x = (0.412453 * r + 0.357580 * g + 0.180423 * b) / 0.950456;
    const double y = 0.212671 * r + 0.715160 * g + 0.072169 * b;
    const double z = (0.019334 * r + 0.119193 * g + 0.950227 * b) / 1.088754;
    const double fx = lab_f(x), fy = lab_f(y), fz = lab_f(z);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

struct Center {
    double l, a, b, y, x;
};

// Relabels into 4-connected components; small fragments join their largest
// neighbour among components already labelled in raster order.
SuperpixelMap enforce_connectivity(const std::vector<int>& raw, Dims dims, std::size_t min_size) {
    const int h = dims.height, w = dims.width;
    std::vector<std::uint32_t> out(raw.size(), 0);
    std::vector<std::size_t> sizes{0};
    std::vector<std::size_t> component;
    std::vector<std::size_t> stack;
    constexpr int dy[4] = {-1, 1, 0, 0};
    constexpr int dx[4] = {0, 0, -1, 1};

    for (std::size_t start = 0; start < raw.size(); ++start) {
        if (out[start] != 0) continue;
        const auto next = static_cast<std::uint32_t>(sizes.size());
        component.clear();
        stack.assign(1, start);
        out[start] = next;
        std::uint32_t best_neighbour = 0;
        while (!stack.empty()) {
            const std::size_t idx = stack.back();
            stack.pop_back();
            component.push_back(idx);
            const int y = static_cast<int>(idx / w), x = static_cast<int>(idx % w);
            for (int k = 0; k < 4; ++k) {
                const int ny = y + dy[k], nx = x + dx[k];
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                const std::size_t n = static_cast<std::size_t>(ny) * w + nx;
                if (out[n] == 0 && raw[n] == raw[start]) {
                    out[n] = next;
                    stack.push_back(n);
                } else if (out[n] != 0 && out[n] != next) {
                    if (best_neighbour == 0 || sizes[out[n]] > sizes[best_neighbour] ||
                        (sizes[out[n]] == sizes[best_neighbour] && out[n] < best_neighbour)) {
                        best_neighbour = out[n];
                    }
                }
            }
        }
        if (component.size() < min_size && best_neighbour != 0) {
            for (std::size_t idx : component) out[idx] = best_neighbour;
            sizes[best_neighbour] += component.size();
        } else {
            sizes.push_back(component.size());
        }
    }
    SuperpixelMap map(dims);
    map.values = std::move(out);
    return map;
}

}  // namespace

SuperpixelMap slic_superpixels(const Image& img, const SlicParams& params) {
    const int h = img.dims.height, w = img.dims.width;
    if (h <= 0 || w <= 0) throw InputError("image dims must be positive");
    if (params.n_segments < 1) throw PreconditionError("n_segments must be >= 1");
    if (params.iterations < 1) throw PreconditionError("iterations must be >= 1");
    if (!(params.compactness >= 0.0)) throw PreconditionError("compactness must be >= 0");
    if (static_cast<std::size_t>(params.n_segments) > img.dims.area()) {
        throw PreconditionError("n_segments exceeds pixel count");
    }

    const std::size_t n_px = img.dims.area();
    std::vector<std::array<double, 3>> lab(n_px);
    for (std::size_t i = 0; i < n_px; ++i) {
        lab[i] = rgb_to_lab(img.values[i * 3], img.values[i * 3 + 1], img.values[i * 3 + 2]);
    }

    const double s = std::sqrt(static_cast<double>(n_px) / params.n_segments);
    const int rows = std::clamp(static_cast<int>(std::lround(std::sqrt(params.n_segments * static_cast<double>(h) / w))), 1, h);
    const int cols = std::clamp(static_cast<int>(std::lround(static_cast<double>(params.n_segments) / rows)), 1, w);
    const double step_y = static_cast<double>(h) / rows, step_x = static_cast<double>(w) / cols;

    std::vector<Center> centers;
    centers.reserve(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const double cy = (r + 0.5) * step_y, cx = (c + 0.5) * step_x;
            const auto& l = lab[static_cast<std::size_t>(cy) * w + static_cast<std::size_t>(cx)];
            centers.push_back({l[0], l[1], l[2], cy, cx});
        }
    }

    // Seed assignment: the grid cell containing each pixel.
    std::vector<int> label(n_px);
    for (int y = 0; y < h; ++y) {
        const int r = std::min(rows - 1, static_cast<int>(y / step_y));
        for (int x = 0; x < w; ++x) {
            label[static_cast<std::size_t>(y) * w + x] = r * cols + std::min(cols - 1, static_cast<int>(x / step_x));
        }
    }

    const double spatial_weight = params.compactness / s;
    std::vector<double> dist(n_px);
    for (int iter = 0; iter < params.iterations; ++iter) {
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
        for (std::size_t k = 0; k < centers.size(); ++k) {
            const Center& c = centers[k];
            const int y0 = std::max(0, static_cast<int>(std::floor(c.y - s)));
            const int y1 = std::min(h - 1, static_cast<int>(std::ceil(c.y + s)));
            const int x0 = std::max(0, static_cast<int>(std::floor(c.x - s)));
            const int x1 = std::min(w - 1, static_cast<int>(std::ceil(c.x + s)));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * w + x;
                    const double dl = lab[i][0] - c.l, da = lab[i][1] - c.a, db = lab[i][2] - c.b;
                    const double sy = y - c.y, sx = x - c.x;
                    const double d = std::sqrt(dl * dl + da * da + db * db) + spatial_weight * std::sqrt(sy * sy + sx * sx);
                    if (d < dist[i]) {
                        dist[i] = d;
                        label[i] = static_cast<int>(k);
                    }
                }
            }
        }

        std::vector<Center> sums(centers.size(), Center{0, 0, 0, 0, 0});
        std::vector<std::size_t> counts(centers.size(), 0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                Center& acc = sums[label[i]];
                acc.l += lab[i][0];
                acc.a += lab[i][1];
                acc.b += lab[i][2];
                acc.y += y;
                acc.x += x;
                ++counts[label[i]];
            }
        }
        for (std::size_t k = 0; k < centers.size(); ++k) {
            if (counts[k] == 0) continue;
            const double n = static_cast<double>(counts[k]);
            centers[k] = {sums[k].l / n, sums[k].a / n, sums[k].b / n, sums[k].y / n, sums[k].x / n};
        }
    }

    const auto min_size = static_cast<std::size_t>(std::max(1.0, std::round(0.25 * s * s)));
    return enforce_connectivity(label, img.dims, min_size);
}

bool CandidateMask::contains(std::size_t idx) const { return std::binary_search(pixels.begin(), pixels.end(), idx); }

CandidateMaskSet candidates_from_label_map(const LabelMap& labels) {
    std::map<std::uint32_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < labels.values.size(); ++i) {
        if (labels.values[i] != 0) groups[labels.values[i]].push_back(i);
    }
    CandidateMaskSet set{labels.dims, {}};
    for (auto& [id, px] : groups) set.masks.push_back({std::move(px)});
    return set;
}

std::optional<std::size_t> select_candidate(const Point& point, const CandidateMaskSet& candidates) {
    const Dims d = candidates.dims;
    const std::size_t idx =
        static_cast<std::size_t>(round_to_grid(point.y, d.height)) * d.width + round_to_grid(point.x, d.width);
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < candidates.masks.size(); ++k) {
        const CandidateMask& m = candidates.masks[k];
        if (!m.contains(idx)) continue;
        if (!best || m.area() < candidates.masks[*best].area()) best = k;
    }
    return best;
}

EdpSamMask edp_sam_mask(const Point& point, double radius, const CandidateMaskSet& candidates) {
    if (!(radius > 0.0)) throw PreconditionError("radius must be positive");
    EdpSamMask out;
    out.mask = disk_region(point, radius, candidates.dims);
    const auto chosen = select_candidate(point, candidates);
    if (!chosen) {
        out.fallback = true;
        return out;
    }
    const auto& pixels = candidates.masks[*chosen].pixels;
    std::vector<std::size_t> clipped;
    std::set_intersection(pixels.begin(), pixels.end(), out.mask.members.begin(), out.mask.members.end(),
                          std::back_inserter(clipped));
    if (clipped.empty()) {
        out.fallback = true;
        return out;
    }
    out.mask.members = std::move(clipped);
    return out;
}

InstanceLabelMap build_annotation(const PointSet& points, std::span<const CandidateMaskSet> candidates, Dims dims) {
    if (candidates.size() != points.size()) throw InputError("candidate set count differs from point count");
    for (const auto& c : candidates) {
        if (c.dims != dims) throw InputError("candidate mask dims differ from annotation dims");
    }
    const NnecRadii radii = nnec_radii(points, dims);
    std::vector<std::vector<std::size_t>> masks;
    masks.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        masks.push_back(edp_sam_mask(points[i], radii[i], candidates[i]).mask.members);
    }
    return rasterize_nearest(points, masks, dims);
}

InstanceLabelMap build_annotation(const PointSet& points, const CandidateProvider& provider,
                                  const SuperpixelMap& superpixels) {
    const Dims dims = superpixels.dims;
    std::vector<CandidateMaskSet> sets;
    sets.reserve(points.size());
    for (const Point& p : points.points()) {
        const std::uint32_t sp = superpixels.at(round_to_grid(p.y, dims.height), round_to_grid(p.x, dims.width));
        sets.push_back(provider.candidates(p, sp));
    }
    return build_annotation(points, sets, dims);
}

}  // namespace xmask
