#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "xmask/geometry.hpp"

namespace xmask {

// D-channel dense field, stored channel-major: values[(c * H + y) * W + x].
struct FeatureMap {
    int channels = 0;
    Dims dims;
    std::vector<double> values;

    FeatureMap() = default;
    FeatureMap(int d, Dims hw, double fill = 0.0)
        : channels(d), dims(hw), values(static_cast<std::size_t>(d) * hw.area(), fill) {}

    std::size_t plane() const { return dims.area(); }
    std::size_t index(int c, int y, int x) const { return (static_cast<std::size_t>(c) * dims.height + y) * dims.width + x; }
    double at(int c, int y, int x) const { return values[index(c, y, x)]; }
    double& at(int c, int y, int x) { return values[index(c, y, x)]; }
    std::span<double> channel(int c) { return {values.data() + c * plane(), plane()}; }
    std::span<const double> channel(int c) const { return {values.data() + c * plane(), plane()}; }
    bool same_shape(const FeatureMap& o) const { return channels == o.channels && dims == o.dims; }
};

struct ScalarField {
    Dims dims;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(Dims d, double fill = 0.0) : dims(d), values(d.area(), fill) {}

    double at(int y, int x) const { return values[static_cast<std::size_t>(y) * dims.width + x]; }
    double& at(int y, int x) { return values[static_cast<std::size_t>(y) * dims.width + x]; }
};

struct GaussianKernel {
    int size = 1;
    double sigma = 1.0;
    std::vector<double> weights;

    int half() const { return size / 2; }
};

// Sub-pixel location in [-1, 1]^2 under the align-corners convention.
struct NormalizedPoint {
    double y = 0.0;
    double x = 0.0;
};

using CenterFeature = std::vector<double>;

GaussianKernel gaussian_kernel_1d(int size, double sigma);

// Horizontal then vertical depthwise pass with zero padding of size/2.
FeatureMap depthwise_gaussian_smooth(const FeatureMap& fmap, const GaussianKernel& kernel);

// The smoothing operator is self-adjoint (symmetric taps, zero padding), so
// this is the forward pass applied to the upstream gradient.
FeatureMap smooth_adjoint(const FeatureMap& grad_out, const GaussianKernel& kernel);

NormalizedPoint normalize_point(double y, double x, Dims dims);

// Prototype location of a point. Points live in [0, H) x [0, W); sampling is
// defined on the node lattice [0, H-1] x [0, W-1], so coordinates are clamped.
NormalizedPoint center_location(const Point& p, Dims dims);

CenterFeature bilinear_sample(const FeatureMap& fmap, NormalizedPoint p);

FeatureMap bilinear_sample_adjoint(int channels, Dims dims, NormalizedPoint p, std::span<const double> upstream);

// Accumulating form of the adjoint: grad += sample_adjoint(p, upstream).
void bilinear_sample_adjoint_add(FeatureMap& grad, NormalizedPoint p, std::span<const double> upstream);

ScalarField distance_field(const FeatureMap& fmap, std::span<const double> center);

// Euclidean distance between the feature at one pixel and a center vector.
double feature_distance(const FeatureMap& fmap, std::size_t pixel, std::span<const double> center);

}  // namespace xmask
