#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "xmask/eval.hpp"
#include "xmask/field.hpp"
#include "xmask/geometry.hpp"
#include "xmask/losses.hpp"
#include "xmask/segmenter.hpp"

namespace xmask {

// Synthetic stand-in for an annotated crowd image: disjoint axis-aligned
// ellipse masks, each with its head point at the ellipse center.
struct SyntheticScene {
    Dims dims;
    PointSet points;
    InstanceLabelMap labels;
    std::uint64_t seed = 0;
};

struct OptimizeConfig {
    int steps = 500;
    double learning_rate = 200.0;
    int channels = 8;
    double init_scale = 0.01;
    std::uint64_t seed = 0;
    DiscriminativeConfig disc;
    EnergyConfig energy;
};

struct OptimizeResult {
    FeatureMap field;
    std::vector<double> history;  // loss before each step, then the final loss
};

// Small portable PRNG so scenes and initial fields are identical across
// standard library implementations.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    double uniform();  // [0, 1)
    double normal();

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Ellipse semi-axes are drawn in [0.35, 0.48] x NNEC radius, which keeps masks
// disjoint and strictly inside their disks.
SyntheticScene synth_scene(int n_instances, Dims dims, double min_separation, std::uint64_t seed);

// Seeded N(0, init_scale^2) field, then plain gradient descent on the
// discriminative loss.
OptimizeResult optimize_embedding(const SyntheticScene& scene, const OptimizeConfig& cfg);

// Piecewise-constant field with a distinct code vector inside each mask and
// zero on background.
FeatureMap ideal_field(const SyntheticScene& scene, int channels, double magnitude);

// Segment a field and score it against the scene (all points scored 1.0).
MetricsReport evaluate_field(const SyntheticScene& scene, const FeatureMap& field, const OptimizeConfig& cfg);

// optimize -> segment -> filter -> score.
MetricsReport demo_pipeline(const SyntheticScene& scene, const OptimizeConfig& cfg);

// Uniform random points with a minimum separation, ids 1..n.
PointSet random_points(int n, Dims dims, double min_separation, std::uint64_t seed);

// Timing buckets for full-resolution segmentation (smoothing + energies +
// assignment). One shared N(0,1) field of `channels` x dims; each bucket holds
// `scenes_per_bucket` random point sets of the given size.
std::vector<BenchBucket> density_benchmark(Dims dims, int channels, const std::vector<int>& point_counts,
                                           int scenes_per_bucket, std::uint64_t seed, const EnergyConfig& energy,
                                           const GaussianKernel& kernel);

}  // namespace xmask
