#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "xmask/field.hpp"
#include "xmask/geometry.hpp"

namespace xmask {

struct DiscriminativeConfig {
    double tau = 0.6;    // distance threshold
    double delta = 0.1;  // margin
    GaussianKernel kernel = gaussian_kernel_1d(7, 3.0);

    void validate() const;
};

struct ForegroundConfig {
    double lambda_fg = 1.0;  // weight on the |S_k - 1| term
};

struct EmaConfig {
    double momentum = 0.999;
};

template <class Gradient>
struct LossResult {
    double value = 0.0;
    Gradient gradient;
};

struct DiscriminativeResult : LossResult<FeatureMap> {
    std::vector<std::uint32_t> supervised;  // point ids that contributed, in id order
    std::vector<std::uint32_t> orphans;     // point ids whose label under the point is background
};

// Pull/push hinge loss inside each NNEC disk. Pipeline: smooth the raw field,
// sample each instance prototype at its point, then
//   L_i = mean over disk pixels of [a (d - (tau - a delta))]_+,  a = +1 / -1
// for pixels carrying / not carrying the instance label. The value is the mean
// of L_i over supervised instances and the gradient is w.r.t. `raw`, chained
// through the pixel distances, the prototype sample and the smoothing.
DiscriminativeResult discriminative_loss(const FeatureMap& raw, const PointSet& points, const LabelMap& labels,
                                         const NnecRadii& radii, const DiscriminativeConfig& cfg);

// Mean positive response over background pixels; 0 when there is no background.
LossResult<ScalarField> background_penalty(const ScalarField& pred, const LabelMap& labels);

// Mean over valid ids of |N_k - 1| + lambda |S_k - 1|. N_k (count of positive
// pixels) is piecewise constant, so only the S_k term carries gradient.
LossResult<ScalarField> foreground_constraint(const ScalarField& pred, const LabelMap& labels,
                                              std::span<const std::uint32_t> valid_ids, const ForegroundConfig& cfg);

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every entry.
std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& loss_fn,
                                         std::span<const double> x, double h);

// Max over entries of |a - n| / max(|a|, |n|, floor), with floor = 1e-3 * max|a|
// so entries that are numerically zero in both do not dominate.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);

std::vector<double> ema_update(std::span<const double> teacher, std::span<const double> student, const EmaConfig& cfg);

}  // namespace xmask
