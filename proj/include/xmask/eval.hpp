#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xmask/geometry.hpp"

namespace xmask {

struct MatchPair {
    std::uint32_t pred = 0;
    std::uint32_t gt = 0;
    double iou = 0.0;
};

struct MatchResult {
    std::vector<MatchPair> pairs;
    std::vector<std::uint32_t> unmatched_pred;
    std::vector<std::uint32_t> unmatched_gt;
};

struct IouF1 {
    double mean_iou = 0.0;  // sum of pair IoUs over the number of gt instances
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0;
};

struct CountingErrors {
    double mae = 0.0;
    double mse = 0.0;  // root of the mean squared error (crowd-counting convention)
};

struct TimingBucket {
    std::string bucket;
    double mean_s = 0.0;
    double max_s = 0.0;
};

struct MetricsReport {
    IouF1 seg;
    CountingErrors counts;
    std::vector<TimingBucket> timing;
};

// Greedy one-to-one matching on descending IoU over overlapping pairs.
// Ties: smaller gt id, then smaller pred id.
MatchResult match_instances(const LabelMap& pred, const LabelMap& gt);

// Pairs instances by identical id (point-linked pipelines), no search.
MatchResult match_by_id(const LabelMap& pred, const LabelMap& gt);

IouF1 iou_f1(const MatchResult& match, double threshold = 0.5);

CountingErrors counting_errors(std::span<const double> pred_counts, std::span<const double> gt_counts);

struct BenchBucket {
    std::string name;
    std::vector<std::function<void()>> jobs;
};

// Wall-clock mean and max per bucket. Each bucket's first job is run once
// untimed as warm-up.
std::vector<TimingBucket> timing_harness(std::span<const BenchBucket> buckets);

}  // namespace xmask
