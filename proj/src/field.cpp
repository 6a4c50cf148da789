#include "xmask/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xmask/error.hpp"

namespace xmask {

namespace {

// Align-corners bilinear stencil shared by the forward and adjoint sampling.
struct BilinearTaps {
    int y0, y1, x0, x1;
    double wy, wx;
};

double to_pixel(double normalized, int extent) {
    double v = (normalized + 1.0) * 0.5 * (extent - 1);
    // Normalizing and un-normalizing an integer coordinate can land one ulp
    // off the node; snap so grid nodes read back bit-exact.
    const double nearest = std::round(v);
    if (std::abs(v - nearest) < 1e-9) v = nearest;
    return std::clamp(v, 0.0, static_cast<double>(extent - 1));
}

BilinearTaps taps_for(NormalizedPoint p, Dims dims) {
    if (!(p.y >= -1.0 && p.y <= 1.0 && p.x >= -1.0 && p.x <= 1.0)) {
        throw PreconditionError("normalized point outside [-1, 1]");
    }
    if (dims.height < 2 || dims.width < 2) throw PreconditionError("bilinear sampling needs at least 2x2 grid");
    const double fy = to_pixel(p.y, dims.height);
    const double fx = to_pixel(p.x, dims.width);
    BilinearTaps t{};
    t.y0 = static_cast<int>(std::floor(fy));
    t.x0 = static_cast<int>(std::floor(fx));
    t.y1 = std::min(t.y0 + 1, dims.height - 1);
    t.x1 = std::min(t.x0 + 1, dims.width - 1);
    t.wy = fy - t.y0;
    t.wx = fx - t.x0;
    return t;
}

void smooth_plane(std::span<const double> in, std::span<double> out, std::vector<double>& tmp, Dims dims,
                  const GaussianKernel& k) {
    const int h = dims.height, w = dims.width, r = k.half();
    tmp.assign(in.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        const double* src = in.data() + static_cast<std::size_t>(y) * w;
        double* dst = tmp.data() + static_cast<std::size_t>(y) * w;
        for (int t = -r; t <= r; ++t) {
            const double g = k.weights[t + r];
            const int x_begin = std::max(0, -t);
            const int x_end = std::min(w, w - t);
            for (int x = x_begin; x < x_end; ++x) dst[x] += g * src[x + t];
        }
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (int y = 0; y < h; ++y) {
        double* dst = out.data() + static_cast<std::size_t>(y) * w;
        for (int t = -r; t <= r; ++t) {
            const int ys = y + t;
            if (ys < 0 || ys >= h) continue;
            const double g = k.weights[t + r];
            const double* src = tmp.data() + static_cast<std::size_t>(ys) * w;
            for (int x = 0; x < w; ++x) dst[x] += g * src[x];
        }
    }
}

}  // namespace

GaussianKernel gaussian_kernel_1d(int size, double sigma) {
    if (size < 1 || size % 2 == 0) throw PreconditionError("kernel size must be odd and positive, got " + std::to_string(size));
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw PreconditionError("kernel sigma must be positive");
    GaussianKernel k;
    k.size = size;
    k.sigma = sigma;
    k.weights.resize(size);
    const int r = size / 2;
    double sum = 0.0;
    for (int u = -r; u <= r; ++u) {
        const double v = std::exp(-static_cast<double>(u * u) / (2.0 * sigma * sigma));
        k.weights[u + r] = v;
        sum += v;
    }
    for (double& v : k.weights) v /= sum;
    // Mirror so the taps are exactly symmetric after rounding.
    for (int u = 1; u <= r; ++u) k.weights[r - u] = k.weights[r + u];
    return k;
}

FeatureMap depthwise_gaussian_smooth(const FeatureMap& fmap, const GaussianKernel& kernel) {
    if (kernel.size > 2 * std::min(fmap.dims.height, fmap.dims.width)) {
        throw PreconditionError("kernel size " + std::to_string(kernel.size) + " too large for field");
    }
    FeatureMap out(fmap.channels, fmap.dims);
    std::vector<double> tmp;
    for (int c = 0; c < fmap.channels; ++c) smooth_plane(fmap.channel(c), out.channel(c), tmp, fmap.dims, kernel);
    return out;
}

FeatureMap smooth_adjoint(const FeatureMap& grad_out, const GaussianKernel& kernel) {
    return depthwise_gaussian_smooth(grad_out, kernel);
}

NormalizedPoint normalize_point(double y, double x, Dims dims) {
    if (dims.height <= 1 || dims.width <= 1) throw PreconditionError("cannot normalize on a 1-pixel axis");
    return {2.0 * y / (dims.height - 1) - 1.0, 2.0 * x / (dims.width - 1) - 1.0};
}

NormalizedPoint center_location(const Point& p, Dims dims) {
    return normalize_point(std::min(p.y, dims.height - 1.0), std::min(p.x, dims.width - 1.0), dims);
}

CenterFeature bilinear_sample(const FeatureMap& fmap, NormalizedPoint p) {
    const BilinearTaps t = taps_for(p, fmap.dims);
    const double w00 = (1.0 - t.wy) * (1.0 - t.wx), w01 = (1.0 - t.wy) * t.wx;
    const double w10 = t.wy * (1.0 - t.wx), w11 = t.wy * t.wx;
    CenterFeature c(fmap.channels);
    for (int ch = 0; ch < fmap.channels; ++ch) {
        const double v00 = fmap.at(ch, t.y0, t.x0);
        if (t.wy == 0.0 && t.wx == 0.0) {
            c[ch] = v00;
            continue;
        }
        c[ch] = w00 * v00 + w01 * fmap.at(ch, t.y0, t.x1) + w10 * fmap.at(ch, t.y1, t.x0) + w11 * fmap.at(ch, t.y1, t.x1);
    }
    return c;
}

void bilinear_sample_adjoint_add(FeatureMap& grad, NormalizedPoint p, std::span<const double> upstream) {
    if (upstream.size() != static_cast<std::size_t>(grad.channels)) throw InputError("upstream size differs from channels");
    const BilinearTaps t = taps_for(p, grad.dims);
    const double w00 = (1.0 - t.wy) * (1.0 - t.wx), w01 = (1.0 - t.wy) * t.wx;
    const double w10 = t.wy * (1.0 - t.wx), w11 = t.wy * t.wx;
    for (int ch = 0; ch < grad.channels; ++ch) {
        const double u = upstream[ch];
        grad.at(ch, t.y0, t.x0) += w00 * u;
        grad.at(ch, t.y0, t.x1) += w01 * u;
        grad.at(ch, t.y1, t.x0) += w10 * u;
        grad.at(ch, t.y1, t.x1) += w11 * u;
    }
}

FeatureMap bilinear_sample_adjoint(int channels, Dims dims, NormalizedPoint p, std::span<const double> upstream) {
    FeatureMap g(channels, dims);
    bilinear_sample_adjoint_add(g, p, upstream);
    return g;
}

double feature_distance(const FeatureMap& fmap, std::size_t pixel, std::span<const double> center) {
    const std::size_t plane = fmap.plane();
    double s = 0.0;
    for (int c = 0; c < fmap.channels; ++c) {
        const double d = fmap.values[c * plane + pixel] - center[c];
        s += d * d;
    }
    return std::sqrt(s);
}

ScalarField distance_field(const FeatureMap& fmap, std::span<const double> center) {
    if (center.size() != static_cast<std::size_t>(fmap.channels)) throw InputError("center dimension differs from channels");
    ScalarField out(fmap.dims);
    const std::size_t plane = fmap.plane();
    std::vector<double> acc(plane, 0.0);
    for (int c = 0; c < fmap.channels; ++c) {
        const double* src = fmap.values.data() + c * plane;
        const double m = center[c];
        for (std::size_t i = 0; i < plane; ++i) {
            const double d = src[i] - m;
            acc[i] += d * d;
        }
    }
    for (std::size_t i = 0; i < plane; ++i) out.values[i] = std::sqrt(acc[i]);
    return out;
}

}  // namespace xmask
