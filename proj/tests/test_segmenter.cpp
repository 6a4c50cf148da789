#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "oracles.hpp"
#include "xmask/error.hpp"
#include "xmask/segmenter.hpp"

using namespace xmask;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<EnergyField> energies_for(const FeatureMap& sm, const PointSet& pts, const EnergyConfig& cfg) {
    const NnecRadii r = nnec_radii(pts, sm.dims);
    std::vector<EnergyField> out;
    for (std::size_t i = 0; i < pts.size(); ++i) out.push_back(energy_field(sm, pts[i], r[i], cfg));
    return out;
}

std::set<std::size_t> pixels_of(const LabelMap& m, std::uint32_t id) {
    std::set<std::size_t> s;
    for (std::size_t i = 0; i < m.values.size(); ++i)
        if (m.values[i] == id) s.insert(i);
    return s;
}

bool subset(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

TEST_CASE("EnergyConfig and PseudoMaskFilter defaults and validation") {
    EnergyConfig e;
    CHECK(e.lambda_geo == 1.0);
    CHECK(e.tau_g == 0.8);
    CHECK(e.epsilon == 1e-6);
    CHECK(e.nnec_fallback);
    CHECK(e.fallback_scale == 0.5);
    CHECK_NOTHROW(e.validate());
    e.fallback_scale = 0.0;
    CHECK_THROWS_AS(e.validate(), PreconditionError);
    e = EnergyConfig{};
    e.epsilon = 0.0;
    CHECK_THROWS_AS(e.validate(), PreconditionError);
    e = EnergyConfig{};
    e.lambda_geo = -1.0;
    CHECK_THROWS_AS(e.validate(), PreconditionError);

    PseudoMaskFilter f;
    CHECK(f.low_threshold == 0.1);
    CHECK(f.high_threshold == 0.95);
    CHECK_NOTHROW(f.validate());
    f.low_threshold = 0.95;
    CHECK_THROWS_AS(f.validate(), PreconditionError);
}

TEST_CASE("energy_field on a constant field") {
    const Dims d{12, 12};
    const FeatureMap f(2, d, 0.75);
    const PointSet pts({{1, 5, 5, {}}, {2, 5, 9, {}}}, d);
    EnergyConfig cfg;
    const EnergyField e = energy_field(f, pts[0], 4.0, cfg);
    CHECK(e.at(5, 5) == 0.0);
    const double rim = e.at(1, 5);
    CHECK(rim == doctest::Approx(16.0 / ((4.0 + 1e-6) * (4.0 + 1e-6))).epsilon(1e-15));
    CHECK(rim > cfg.tau_g);
    CHECK(e.at(0, 5) == kInf);
    CHECK(e.at(5, 11) == kInf);

    const SegmentationLabelMap seg = assign_labels(std::vector<EnergyField>{e}, d, cfg.tau_g);
    CHECK(seg.at(1, 5) == 0);
    CHECK(seg.at(5, 5) == 1);
    CHECK_THROWS_AS(energy_field(f, pts[0], 0.0, cfg), PreconditionError);
}

TEST_CASE("energy_field matches a per-pixel loop") {
    std::mt19937_64 rng(41);
    const Dims d{14, 11};
    const FeatureMap sm = oracle::random_field(rng, 3, d);
    const auto pts = oracle::random_points(rng, 4, d, 2.0);
    const PointSet ps(pts, d);
    const auto radii = oracle::nn_radii(pts, d);
    EnergyConfig cfg;
    cfg.lambda_geo = 1.7;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const EnergyField e = energy_field(sm, ps[i], radii[i], cfg);
        const double ny = 2.0 * pts[i].y / (d.height - 1) - 1.0, nx = 2.0 * pts[i].x / (d.width - 1) - 1.0;
        const auto c = oracle::bilinear(sm, std::min(ny, 1.0), std::min(nx, 1.0));
        for (int y = 0; y < d.height; ++y) {
            for (int x = 0; x < d.width; ++x) {
                const double g2 = (y - pts[i].y) * (y - pts[i].y) + (x - pts[i].x) * (x - pts[i].x);
                if (g2 > radii[i] * radii[i]) {
                    CHECK(e.at(y, x) == kInf);
                    continue;
                }
                const double want =
                    oracle::pixel_distance(sm, y, x, c) + cfg.lambda_geo * g2 / std::pow(radii[i] + cfg.epsilon, 2);
                CHECK(std::abs(e.at(y, x) - want) < 1e-12);
            }
        }
    }
}

TEST_CASE("assign_labels examples") {
    const Dims d{9, 9};
    const FeatureMap f(1, d);
    EnergyConfig cfg;
    cfg.lambda_geo = 0.0;  // energies inside the disk are all 0

    const PointSet one({{3, 4, 4, {}}}, d);
    const EnergyField e = energy_field(f, one[0], 3.0, cfg);
    const SegmentationLabelMap seg = assign_labels(std::vector<EnergyField>{e}, d, cfg.tau_g);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x) CHECK(seg.at(y, x) == (disk_region(4, 4, 3.0, d).contains(y, x) ? 3u : 0u));

    // Two overlapping disks; instance 1 has the lower energy on the overlap.
    FeatureMap g(1, d);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x) g.at(0, y, x) = x <= 4 ? 0.0 : 0.3;
    const PointSet two({{1, 4, 2, {}}, {2, 4, 6, {}}}, d);
    const auto es = energies_for(g, two, cfg);
    const SegmentationLabelMap s2 = assign_labels(es, d, cfg.tau_g);
    CHECK(s2.at(4, 4) == 1);  // energy 0 for instance 1, 0.3 for instance 2
    CHECK(s2.at(4, 5) == 2);

    // Exact tie goes to the smaller id regardless of input order.
    const auto flat = energies_for(f, two, cfg);
    const std::vector<EnergyField> reversed{flat[1], flat[0]};
    CHECK(assign_labels(reversed, d, cfg.tau_g).at(4, 4) == 1);
}

TEST_CASE("assign_labels matches an exhaustive min-scan") {
    std::mt19937_64 rng(42);
    for (int t = 0; t < 50; ++t) {
        const Dims d{10, 12};
        const FeatureMap sm = oracle::random_field(rng, 2, d, 0.3);
        const PointSet ps(oracle::random_points(rng, 2 + t % 3, d, 1.5), d);
        const EnergyConfig cfg;
        const auto es = energies_for(sm, ps, cfg);
        const SegmentationLabelMap seg = assign_labels(es, d, cfg.tau_g);
        for (int y = 0; y < d.height; ++y) {
            for (int x = 0; x < d.width; ++x) {
                double best = kInf;
                std::uint32_t id = 0;
                for (const auto& e : es) {
                    const double v = e.at(y, x);
                    if (v < cfg.tau_g && (v < best || (v == best && e.instance_id < id))) {
                        best = v;
                        id = e.instance_id;
                    }
                }
                CHECK(seg.at(y, x) == id);
            }
        }
    }
}

TEST_CASE("segment fallback behaviour") {
    std::mt19937_64 rng(43);
    const Dims d{32, 32};
    const PointSet ps(oracle::random_points(rng, 5, d, 6.0), d);
    const NnecRadii r = nnec_radii(ps, d);
    const FeatureMap f(2, d);
    const GaussianKernel k = gaussian_kernel_1d(7, 3.0);

    EnergyConfig cfg;
    cfg.tau_g = 0.0;  // nothing passes the threshold
    const SegmentationLabelMap fb = segment(f, ps, cfg, k);
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const RegionMask disk = disk_region(ps[i], 0.5 * r[i], d);
        const auto got = pixels_of(fb, ps[i].id);
        CHECK(got == std::set<std::size_t>(disk.members.begin(), disk.members.end()));
    }

    cfg.nnec_fallback = false;
    const SegmentationLabelMap none = segment(f, ps, cfg, k);
    CHECK(none.ids().empty());
}

TEST_CASE("fallback never overwrites energy-claimed pixels") {
    std::mt19937_64 rng(44);
    for (int t = 0; t < 10; ++t) {
        const Dims d{24, 24};
        const PointSet ps(oracle::random_points(rng, 6, d, 3.0), d);
        const FeatureMap f = oracle::random_field(rng, 2, d, 3.0);
        EnergyConfig on, off;
        off.nnec_fallback = false;
        const GaussianKernel k = gaussian_kernel_1d(3, 1.0);
        const auto a = segment(f, ps, on, k), b = segment(f, ps, off, k);
        for (std::size_t i = 0; i < a.values.size(); ++i)
            if (b.values[i] != 0) CHECK(a.values[i] == b.values[i]);
    }
}

TEST_CASE("segment is deterministic, exclusive and threshold-monotone") {
    std::mt19937_64 rng(45);
    const GaussianKernel k = gaussian_kernel_1d(5, 1.5);
    for (int t = 0; t < 10; ++t) {
        const Dims d{20, 26};
        const PointSet ps(oracle::random_points(rng, 5, d, 3.0), d);
        const FeatureMap f = oracle::random_field(rng, 3, d, 1.0);
        EnergyConfig lo;
        lo.nnec_fallback = false;
        lo.tau_g = 0.6;
        EnergyConfig hi = lo;
        hi.tau_g = 1.1;
        const auto a = segment(f, ps, lo, k), a2 = segment(f, ps, lo, k), b = segment(f, ps, hi, k);
        CHECK(a == a2);
        std::set<std::uint32_t> ids;
        for (const Point& p : ps.points()) ids.insert(p.id);
        for (auto v : b.ids()) CHECK(ids.contains(v));
        for (const Point& p : ps.points()) CHECK(subset(pixels_of(a, p.id), pixels_of(b, p.id)));
    }
}

TEST_CASE("raising lambda never grows a lone instance or the foreground") {
    std::mt19937_64 rng(46);
    const GaussianKernel k = gaussian_kernel_1d(3, 1.0);
    for (int t = 0; t < 10; ++t) {
        const Dims d{20, 20};
        const FeatureMap f = oracle::random_field(rng, 2, d, 0.3);
        EnergyConfig small, large;
        small.nnec_fallback = large.nnec_fallback = false;
        small.lambda_geo = 0.5;
        large.lambda_geo = 2.0;

        const PointSet one(oracle::random_points(rng, 1, d), d);
        CHECK(subset(pixels_of(segment(f, one, large, k), one[0].id), pixels_of(segment(f, one, small, k), one[0].id)));

        const PointSet many(oracle::random_points(rng, 5, d, 3.0), d);
        const auto a = segment(f, many, small, k), b = segment(f, many, large, k);
        for (std::size_t i = 0; i < a.values.size(); ++i)
            if (b.values[i] != 0) CHECK(a.values[i] != 0);
    }
}

TEST_CASE("segment rejects points declared on another grid") {
    const FeatureMap f(1, Dims{8, 8});
    const PointSet ps({{1, 2, 2, {}}}, Dims{16, 16});
    CHECK_THROWS_AS(segment(f, ps, EnergyConfig{}, gaussian_kernel_1d(3, 1.0)), InputError);
}

TEST_CASE("filter_pseudo_masks examples") {
    const Dims d{4, 6};
    LabelMap seg(d);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 6; ++x) seg.at(y, x) = static_cast<std::uint32_t>(x / 2 + 1);

    const PointSet mixed({{1, 1, 0.5, 0.96}, {2, 1, 2.5, 0.5}, {3, 1, 4.5, 0.05}}, d);
    const FilteredMasks m = filter_pseudo_masks(mixed, seg, PseudoMaskFilter{});
    CHECK(m.valid_ids == std::vector<std::uint32_t>{1});
    CHECK(m.labels.ids() == std::vector<std::uint32_t>{1, 2});
    for (int y = 0; y < 4; ++y) CHECK(m.labels.at(y, 5) == 0);

    const PointSet high({{1, 1, 0.5, 0.99}, {2, 1, 2.5, 0.95}, {3, 1, 4.5, {}}}, d);
    const FilteredMasks all = filter_pseudo_masks(high, seg, PseudoMaskFilter{});
    CHECK(all.valid_ids == std::vector<std::uint32_t>{1, 2, 3});
    CHECK(all.labels == seg);

    const PointSet low({{1, 1, 0.5, 0.0}, {2, 1, 2.5, 0.09}, {3, 1, 4.5, 0.01}}, d);
    const FilteredMasks gone = filter_pseudo_masks(low, seg, PseudoMaskFilter{});
    CHECK(gone.valid_ids.empty());
    CHECK(gone.labels.ids().empty());

    const PointSet missing({{1, 1, 0.5, 0.99}}, d);
    CHECK_THROWS_AS(filter_pseudo_masks(missing, seg, PseudoMaskFilter{}), InputError);
}

TEST_CASE("circle_baseline examples") {
    const Dims big{100, 200};
    const PointSet one({{1, 40, 90, {}}}, big);
    const auto seg = circle_baseline(one, big);
    const RegionMask disk = disk_region(40, 90, 50.0, big);
    CHECK(pixels_of(seg, 1) == std::set<std::size_t>(disk.members.begin(), disk.members.end()));

    const Dims d{20, 20};
    const PointSet two({{1, 10, 7, {}}, {2, 10, 13, {}}}, d);
    const auto s2 = circle_baseline(two, d);
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 20; ++x) {
            const double d1 = (y - 10.0) * (y - 10.0) + (x - 7.0) * (x - 7.0);
            const double d2 = (y - 10.0) * (y - 10.0) + (x - 13.0) * (x - 13.0);
            std::uint32_t want = 0;
            if (d1 <= 36.0 && (d1 <= d2 || d2 > 36.0)) want = 1;
            else if (d2 <= 36.0) want = 2;
            CHECK(s2.at(y, x) == want);
        }
    }
}

TEST_CASE("circle_baseline matches a nearest-point scan on random scenes") {
    std::mt19937_64 rng(47);
    for (int t = 0; t < 20; ++t) {
        const Dims d{15, 17};
        const auto pts = oracle::random_points(rng, 4, d, 1.0);
        const auto r = oracle::nn_radii(pts, d);
        const auto seg = circle_baseline(PointSet(pts, d), d);
        for (int y = 0; y < d.height; ++y) {
            for (int x = 0; x < d.width; ++x) {
                double best = kInf;
                std::uint32_t id = 0;
                for (std::size_t i = 0; i < pts.size(); ++i) {
                    const double g = (y - pts[i].y) * (y - pts[i].y) + (x - pts[i].x) * (x - pts[i].x);
                    if (g <= r[i] * r[i] && (g < best || (g == best && pts[i].id < id))) {
                        best = g;
                        id = pts[i].id;
                    }
                }
                CHECK(seg.at(y, x) == id);
            }
        }
    }
}
