#include "xmask/toy.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "xmask/error.hpp"

namespace xmask {

std::uint64_t SplitMix64::next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SplitMix64::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return mag * std::cos(2.0 * std::numbers::pi * u2);
}

SyntheticScene synth_scene(int n_instances, Dims dims, double min_separation, std::uint64_t seed) {
    if (n_instances < 1) throw PreconditionError("scene needs at least one instance");
    if (dims.height < 8 || dims.width < 8) throw PreconditionError("scene dims must be at least 8x8");
    const double disk = std::numbers::pi * 0.25 * min_separation * min_separation;
    if (!(n_instances * disk < static_cast<double>(dims.area()))) throw PreconditionError("infeasible packing");

    SplitMix64 rng(seed);
    constexpr int kMaxAttempts = 20000;
    const double margin = 2.0;
    std::vector<Point> pts;
    int attempts = 0;
    while (static_cast<int>(pts.size()) < n_instances) {
        if (++attempts > kMaxAttempts) {
            throw PreconditionError("packing failure: placed " + std::to_string(pts.size()) + " of " +
                                    std::to_string(n_instances) + " instances");
        }
        const double y = margin + rng.uniform() * (dims.height - 1 - 2 * margin);
        const double x = margin + rng.uniform() * (dims.width - 1 - 2 * margin);
        bool ok = true;
        for (const Point& p : pts) {
            if (std::hypot(p.y - y, p.x - x) < min_separation) {
                ok = false;
                break;
            }
        }
        if (ok) pts.push_back({static_cast<std::uint32_t>(pts.size() + 1), y, x, std::nullopt});
    }

    SyntheticScene scene{dims, PointSet(pts, dims), InstanceLabelMap(dims), seed};
    const NnecRadii radii = nnec_radii(scene.points, dims);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Point& p = pts[i];
        const double ay = (0.35 + 0.13 * rng.uniform()) * radii[i];
        const double ax = (0.35 + 0.13 * rng.uniform()) * radii[i];
        const PixelBox box = disk_bounding_box(p.y, p.x, std::max(ay, ax), dims);
        for (int y = box.y0; y <= box.y1; ++y) {
            for (int x = box.x0; x <= box.x1; ++x) {
                const double ny = (y - p.y) / ay, nx = (x - p.x) / ax;
                if (ny * ny + nx * nx < 1.0 && scene.labels.at(y, x) == 0) scene.labels.at(y, x) = p.id;
            }
        }
        // Guarantee the point's own pixel belongs to its mask.
        scene.labels.at(round_to_grid(p.y, dims.height), round_to_grid(p.x, dims.width)) = p.id;
    }
    return scene;
}

OptimizeResult optimize_embedding(const SyntheticScene& scene, const OptimizeConfig& cfg) {
    if (cfg.steps < 1) throw PreconditionError("steps must be >= 1");
    if (!(cfg.learning_rate >= 0.0)) throw PreconditionError("learning rate must be >= 0");
    if (cfg.channels < 1) throw PreconditionError("channels must be >= 1");

    OptimizeResult out{FeatureMap(cfg.channels, scene.dims), {}};
    SplitMix64 rng(cfg.seed);
    for (double& v : out.field.values) v = cfg.init_scale * rng.normal();

    const NnecRadii radii = nnec_radii(scene.points, scene.dims);
    double lr = cfg.learning_rate;
    constexpr int kMaxHalvings = 8;
    auto loss = discriminative_loss(out.field, scene.points, scene.labels, radii, cfg.disc);
    out.history.reserve(cfg.steps + 1);
    for (int step = 0; step < cfg.steps; ++step) {
        out.history.push_back(loss.value);
        int halvings = 0;
        while (true) {
            FeatureMap next = out.field;
            for (std::size_t i = 0; i < next.values.size(); ++i) next.values[i] -= lr * loss.gradient.values[i];
            auto next_loss = discriminative_loss(next, scene.points, scene.labels, radii, cfg.disc);
            if (std::isfinite(next_loss.value)) {
                out.field = std::move(next);
                loss = std::move(next_loss);
                break;
            }
            if (++halvings > kMaxHalvings) throw DivergenceError("loss diverged at step " + std::to_string(step), step);
            lr *= 0.5;
        }
    }
    out.history.push_back(loss.value);
    return out;
}

FeatureMap ideal_field(const SyntheticScene& scene, int channels, double magnitude) {
    FeatureMap f(channels, scene.dims);
    for (int y = 0; y < scene.dims.height; ++y) {
        for (int x = 0; x < scene.dims.width; ++x) {
            const std::uint32_t id = scene.labels.at(y, x);
            if (id == 0) continue;
            const int k = static_cast<int>(id - 1);
            // Code vectors e_(k mod D) scaled by 1 + floor(k / D): distinct for any count.
            f.at(k % channels, y, x) = magnitude * (1.0 + k / channels);
        }
    }
    return f;
}

MetricsReport evaluate_field(const SyntheticScene& scene, const FeatureMap& field, const OptimizeConfig& cfg) {
    std::vector<Point> scored(scene.points.points().begin(), scene.points.points().end());
    for (Point& p : scored) p.score = 1.0;
    const PointSet points(std::move(scored), scene.dims);

    const SegmentationLabelMap seg = segment(field, points, cfg.energy, cfg.disc.kernel);
    const FilteredMasks filtered = filter_pseudo_masks(points, seg, PseudoMaskFilter{});

    MetricsReport report;
    report.seg = iou_f1(match_instances(filtered.labels, scene.labels), 0.5);
    const double pred_count = static_cast<double>(filtered.labels.ids().size());
    const double gt_count = static_cast<double>(scene.points.size());
    report.counts = counting_errors(std::span(&pred_count, 1), std::span(&gt_count, 1));
    return report;
}

MetricsReport demo_pipeline(const SyntheticScene& scene, const OptimizeConfig& cfg) {
    return evaluate_field(scene, optimize_embedding(scene, cfg).field, cfg);
}

PointSet random_points(int n, Dims dims, double min_separation, std::uint64_t seed) {
    if (n < 1) throw PreconditionError("need at least one point");
    SplitMix64 rng(seed);
    constexpr int kMaxAttempts = 200000;
    std::vector<Point> pts;
    int attempts = 0;
    while (static_cast<int>(pts.size()) < n) {
        if (++attempts > kMaxAttempts) throw PreconditionError("packing failure");
        const double y = rng.uniform() * (dims.height - 1);
        const double x = rng.uniform() * (dims.width - 1);
        bool ok = true;
        for (const Point& p : pts) {
            const double dy = p.y - y, dx = p.x - x;
            if (dy * dy + dx * dx < min_separation * min_separation) {
                ok = false;
                break;
            }
        }
        if (ok) pts.push_back({static_cast<std::uint32_t>(pts.size() + 1), y, x, std::nullopt});
    }
    return PointSet(std::move(pts), dims);
}

std::vector<BenchBucket> density_benchmark(Dims dims, int channels, const std::vector<int>& point_counts,
                                           int scenes_per_bucket, std::uint64_t seed, const EnergyConfig& energy,
                                           const GaussianKernel& kernel) {
    if (scenes_per_bucket < 1) throw PreconditionError("scenes_per_bucket must be >= 1");
    auto field = std::make_shared<FeatureMap>(channels, dims);
    SplitMix64 rng(seed);
    for (double& v : field->values) v = rng.normal();

    std::vector<BenchBucket> buckets;
    for (int n : point_counts) {
        BenchBucket b{std::to_string(n) + " points", {}};
        for (int s = 0; s < scenes_per_bucket; ++s) {
            auto pts = std::make_shared<PointSet>(random_points(n, dims, 2.0, rng.next()));
            b.jobs.push_back([field, pts, energy, kernel] { (void)segment(*field, *pts, energy, kernel); });
        }
        buckets.push_back(std::move(b));
    }
    return buckets;
}

}  // namespace xmask
