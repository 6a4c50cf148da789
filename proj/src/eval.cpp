#include "xmask/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <utility>

#include "xmask/error.hpp"

namespace xmask {

namespace {

struct Overlaps {
    std::map<std::uint32_t, std::size_t> pred_area, gt_area;
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> inter;  // (pred, gt)
};

Overlaps count_overlaps(const LabelMap& pred, const LabelMap& gt) {
    if (pred.dims != gt.dims) throw InputError("prediction and ground truth dims differ");
    Overlaps o;
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        const std::uint32_t p = pred.values[i], g = gt.values[i];
        if (p) ++o.pred_area[p];
        if (g) ++o.gt_area[g];
        if (p && g) ++o.inter[{p, g}];
    }
    return o;
}

double iou_of(const Overlaps& o, std::uint32_t p, std::uint32_t g, std::size_t inter) {
    const std::size_t uni = o.pred_area.at(p) + o.gt_area.at(g) - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

void fill_unmatched(const Overlaps& o, MatchResult& r) {
    std::set<std::uint32_t> used_p, used_g;
    for (const auto& m : r.pairs) {
        used_p.insert(m.pred);
        used_g.insert(m.gt);
    }
    for (const auto& [id, area] : o.pred_area) {
        if (!used_p.contains(id)) r.unmatched_pred.push_back(id);
    }
    for (const auto& [id, area] : o.gt_area) {
        if (!used_g.contains(id)) r.unmatched_gt.push_back(id);
    }
}

}  // namespace

MatchResult match_instances(const LabelMap& pred, const LabelMap& gt) {
    const Overlaps o = count_overlaps(pred, gt);
    std::vector<MatchPair> cands;
    cands.reserve(o.inter.size());
    for (const auto& [key, inter] : o.inter) cands.push_back({key.first, key.second, iou_of(o, key.first, key.second, inter)});
    std::sort(cands.begin(), cands.end(), [](const MatchPair& a, const MatchPair& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.gt != b.gt) return a.gt < b.gt;
        return a.pred < b.pred;
    });

    MatchResult r;
    std::set<std::uint32_t> used_p, used_g;
    for (const MatchPair& c : cands) {
        if (used_p.contains(c.pred) || used_g.contains(c.gt)) continue;
        used_p.insert(c.pred);
        used_g.insert(c.gt);
        r.pairs.push_back(c);
    }
    fill_unmatched(o, r);
    return r;
}

MatchResult match_by_id(const LabelMap& pred, const LabelMap& gt) {
    const Overlaps o = count_overlaps(pred, gt);
    MatchResult r;
    for (const auto& [id, area] : o.gt_area) {
        if (!o.pred_area.contains(id)) continue;
        const auto it = o.inter.find({id, id});
        const std::size_t inter = it == o.inter.end() ? 0 : it->second;
        r.pairs.push_back({id, id, iou_of(o, id, id, inter)});
    }
    fill_unmatched(o, r);
    return r;
}

IouF1 iou_f1(const MatchResult& match, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw PreconditionError("IoU threshold must lie in (0, 1]");
    const std::size_t n_gt = match.pairs.size() + match.unmatched_gt.size();
    if (n_gt == 0) throw PreconditionError("no ground-truth instances");
    IouF1 r;
    double iou_sum = 0.0;
    std::size_t below = 0;
    for (const auto& p : match.pairs) {
        iou_sum += p.iou;
        if (p.iou >= threshold) {
            ++r.tp;
        } else {
            ++below;
        }
    }
    r.fp = match.unmatched_pred.size() + below;
    r.fn = match.unmatched_gt.size() + below;
    r.f1 = 2.0 * r.tp / static_cast<double>(2 * r.tp + r.fp + r.fn);
    r.mean_iou = iou_sum / static_cast<double>(n_gt);
    return r;
}

CountingErrors counting_errors(std::span<const double> pred_counts, std::span<const double> gt_counts) {
    if (pred_counts.size() != gt_counts.size()) throw InputError("count lists differ in length");
    if (pred_counts.empty()) throw PreconditionError("no counts");
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i = 0; i < pred_counts.size(); ++i) {
        const double e = pred_counts[i] - gt_counts[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
    }
    const double n = static_cast<double>(pred_counts.size());
    return {abs_sum / n, std::sqrt(sq_sum / n)};
}

std::vector<TimingBucket> timing_harness(std::span<const BenchBucket> buckets) {
    using Clock = std::chrono::steady_clock;
    std::vector<TimingBucket> out;
    for (const BenchBucket& b : buckets) {
        if (b.jobs.empty()) throw PreconditionError("timing bucket '" + b.name + "' has no scenes");
        b.jobs.front()();
        TimingBucket t{b.name, 0.0, 0.0};
        for (const auto& job : b.jobs) {
            const auto start = Clock::now();
            job();
            const double s = std::chrono::duration<double>(Clock::now() - start).count();
            t.mean_s += s;
            t.max_s = std::max(t.max_s, s);
        }
        t.mean_s /= static_cast<double>(b.jobs.size());
        out.push_back(t);
    }
    return out;
}

}  // namespace xmask
