#include "xmask/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "xmask/error.hpp"

namespace xmask {

namespace {

struct Supervised {
    std::size_t point_index;
    std::uint32_t id;
    RegionPartition part;
};

}  // namespace

void DiscriminativeConfig::validate() const {
    if (!(delta > 0.0 && delta < tau)) throw PreconditionError("discriminative config requires 0 < delta < tau");
}

DiscriminativeResult discriminative_loss(const FeatureMap& raw, const PointSet& points, const LabelMap& labels,
                                         const NnecRadii& radii, const DiscriminativeConfig& cfg) {
    cfg.validate();
    if (labels.dims != raw.dims) throw InputError("label map dims differ from feature map dims");
    if (radii.size() != points.size()) throw InputError("radii count differs from point count");

    DiscriminativeResult result;
    std::vector<Supervised> instances;
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return points[a].id < points[b].id; });
    for (std::size_t i : order) {
        const Point& p = points[i];
        const auto label = instance_label(labels, p);
        if (!label) {
            result.orphans.push_back(p.id);
            continue;
        }
        auto part = partition_region(disk_region(p, radii[i], labels.dims), labels, *label, p.id);
        if (part->positive.empty() && part->negative.empty()) {
            result.orphans.push_back(p.id);
            continue;
        }
        instances.push_back({i, p.id, std::move(*part)});
    }
    if (instances.empty()) throw PreconditionError("no supervisable instances");

    const FeatureMap smoothed = depthwise_gaussian_smooth(raw, cfg.kernel);
    FeatureMap grad_smoothed(raw.channels, raw.dims);
    const std::size_t plane = raw.plane();
    const double n_inst = static_cast<double>(instances.size());
    const double pull_at = cfg.tau - cfg.delta;
    const double push_at = cfg.tau + cfg.delta;

    double total = 0.0;
    std::vector<double> grad_center(raw.channels);
    for (const Supervised& inst : instances) {
        const NormalizedPoint loc = center_location(points[inst.point_index], raw.dims);
        const CenterFeature center = bilinear_sample(smoothed, loc);
        const double region_size = static_cast<double>(inst.part.positive.size() + inst.part.negative.size());
        const double w = 1.0 / (region_size * n_inst);
        std::fill(grad_center.begin(), grad_center.end(), 0.0);

        double sum = 0.0;
        auto visit = [&](std::size_t pixel, bool positive) {
            const double d = feature_distance(smoothed, pixel, center);
            const double v = positive ? d - pull_at : push_at - d;
            if (v <= 0.0) return;
            sum += v;
            // Zero distance: subgradient 0, the pixel sits on the prototype.
            if (d == 0.0) return;
            const double scale = (positive ? w : -w) / d;
            for (int c = 0; c < raw.channels; ++c) {
                const double g = scale * (smoothed.values[c * plane + pixel] - center[c]);
                grad_smoothed.values[c * plane + pixel] += g;
                grad_center[c] -= g;
            }
        };
        for (std::size_t px : inst.part.positive) visit(px, true);
        for (std::size_t px : inst.part.negative) visit(px, false);

        total += sum / region_size;
        bilinear_sample_adjoint_add(grad_smoothed, loc, grad_center);
        result.supervised.push_back(inst.id);
    }

    result.value = total / n_inst;
    result.gradient = smooth_adjoint(grad_smoothed, cfg.kernel);
    return result;
}

LossResult<ScalarField> background_penalty(const ScalarField& pred, const LabelMap& labels) {
    if (pred.dims != labels.dims) throw InputError("prediction and label map dims differ");
    LossResult<ScalarField> r{0.0, ScalarField(pred.dims)};
    const auto background = static_cast<std::size_t>(std::count(labels.values.begin(), labels.values.end(), 0u));
    if (background == 0) return r;
    const double w = 1.0 / static_cast<double>(background);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        if (labels.values[i] != 0 || !(pred.values[i] > 0.0)) continue;
        sum += pred.values[i];
        r.gradient.values[i] = w;
    }
    r.value = sum * w;
    return r;
}

LossResult<ScalarField> foreground_constraint(const ScalarField& pred, const LabelMap& labels,
                                              std::span<const std::uint32_t> valid_ids, const ForegroundConfig& cfg) {
    if (pred.dims != labels.dims) throw InputError("prediction and label map dims differ");
    const std::set<std::uint32_t> valid(valid_ids.begin(), valid_ids.end());
    if (valid.empty()) throw PreconditionError("no valid pseudo-masks");
    if (valid.contains(0)) throw PreconditionError("background id 0 cannot be a valid pseudo-mask");

    struct Accum {
        double sum = 0.0;
        std::size_t positives = 0;
        std::size_t pixels = 0;
    };
    std::vector<std::uint32_t> ids(valid.begin(), valid.end());
    std::vector<Accum> acc(ids.size());
    auto slot = [&](std::uint32_t label) -> Accum* {
        auto it = std::lower_bound(ids.begin(), ids.end(), label);
        return (it != ids.end() && *it == label) ? &acc[it - ids.begin()] : nullptr;
    };
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        Accum* a = slot(labels.values[i]);
        if (!a) continue;
        ++a->pixels;
        if (pred.values[i] > 0.0) {
            a->sum += pred.values[i];
            ++a->positives;
        }
    }

    const double inv_k = 1.0 / static_cast<double>(ids.size());
    LossResult<ScalarField> r{0.0, ScalarField(pred.dims)};
    std::vector<double> slope(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) {
        if (acc[k].pixels == 0) throw PreconditionError("valid id " + std::to_string(ids[k]) + " absent from label map");
        const double count_term = std::abs(static_cast<double>(acc[k].positives) - 1.0);
        const double sum_dev = acc[k].sum - 1.0;
        r.value += count_term + cfg.lambda_fg * std::abs(sum_dev);
        slope[k] = sum_dev > 0.0 ? cfg.lambda_fg * inv_k : (sum_dev < 0.0 ? -cfg.lambda_fg * inv_k : 0.0);
    }
    r.value *= inv_k;
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        auto it = std::lower_bound(ids.begin(), ids.end(), labels.values[i]);
        if (it == ids.end() || *it != labels.values[i]) continue;
        if (pred.values[i] > 0.0) r.gradient.values[i] = slope[it - ids.begin()];
    }
    return r;
}

std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& loss_fn,
                                         std::span<const double> x, double h) {
    if (!(h > 0.0)) throw PreconditionError("finite-difference step must be positive");
    std::vector<double> probe(x.begin(), x.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double up = loss_fn(probe);
        probe[i] = orig - h;
        const double down = loss_fn(probe);
        probe[i] = orig;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
    if (analytic.size() != numeric.size()) throw InputError("gradient sizes differ");
    double scale = 0.0;
    for (double a : analytic) scale = std::max(scale, std::abs(a));
    const double floor = std::max(1e-3 * scale, 1e-300);
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

std::vector<double> ema_update(std::span<const double> teacher, std::span<const double> student, const EmaConfig& cfg) {
    if (teacher.size() != student.size()) throw InputError("teacher and student parameter counts differ");
    if (!(cfg.momentum >= 0.0 && cfg.momentum <= 1.0)) throw PreconditionError("EMA momentum must lie in [0, 1]");
    std::vector<double> out(teacher.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = cfg.momentum * teacher[i] + (1.0 - cfg.momentum) * student[i];
    return out;
}

}  // namespace xmask
