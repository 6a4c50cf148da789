#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "xmask/error.hpp"
#include "xmask/io.hpp"

using namespace xmask;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "xmask_io_tests";
    fs::create_directories(dir);
    return dir / name;
}

io::Tensor random_tensor(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> nd(0, 4), dim(0, 6), dt(0, 1);
    io::Tensor t;
    t.dtype = dt(rng) ? io::DType::UInt32 : io::DType::Float32;
    const int n = nd(rng);
    for (int i = 0; i < n; ++i) t.dims.push_back(static_cast<std::uint32_t>(dim(rng)));
    t.words.resize(t.element_count());
    for (auto& w : t.words) w = static_cast<std::uint32_t>(rng());  // any bit pattern, NaNs included
    return t;
}

}  // namespace

TEST_CASE("tensor serialization layout") {
    io::Tensor t{io::DType::UInt32, {2, 1}, {0x01020304u, 7u}};
    const auto b = io::serialize(t);
    const std::vector<std::uint8_t> want{'X', 'T', 'F', '1', 1, 2, 2, 0, 0, 0, 1, 0, 0, 0, 4, 3, 2, 1, 7, 0, 0, 0};
    CHECK(b == want);

    io::Tensor f{io::DType::Float32, {1}, {}};
    const float v = 1.5f;
    std::uint32_t w;
    std::memcpy(&w, &v, 4);
    f.words.push_back(w);
    const auto fb = io::serialize(f);
    CHECK(fb.size() == 4 + 1 + 1 + 4 + 4);
    CHECK(io::parse(fb).float_at(0) == 1.5f);
}

TEST_CASE("tensor parse/serialize round trip is byte-exact") {
    std::mt19937_64 rng(71);
    for (int i = 0; i < 200; ++i) {
        const io::Tensor t = random_tensor(rng);
        const auto bytes = io::serialize(t);
        const io::Tensor back = io::parse(bytes);
        CHECK(back.dtype == t.dtype);
        CHECK(back.dims == t.dims);
        CHECK(back.words == t.words);
        CHECK(io::serialize(back) == bytes);
    }
    const io::Tensor t = random_tensor(rng);
    const fs::path p = temp_path("rt.xtf");
    io::write_tensor(p, t);
    CHECK(io::serialize(io::read_tensor(p)) == io::serialize(t));
}

TEST_CASE("tensor parse rejects malformed input") {
    const io::Tensor t{io::DType::Float32, {2, 2}, {0, 0, 0, 0}};
    auto b = io::serialize(t);

    auto bad = b;
    bad[0] = 'Y';
    CHECK_THROWS_AS(io::parse(bad), InputError);
    bad = b;
    bad[4] = 9;
    CHECK_THROWS_AS(io::parse(bad), InputError);
    bad = b;
    bad.pop_back();
    CHECK_THROWS_AS(io::parse(bad), InputError);
    bad = b;
    bad.push_back(0);
    CHECK_THROWS_AS(io::parse(bad), InputError);
    CHECK_THROWS_AS(io::parse(std::vector<std::uint8_t>{'X', 'T'}), InputError);
    bad = std::vector<std::uint8_t>(b.begin(), b.begin() + 8);
    CHECK_THROWS_AS(io::parse(bad), InputError);
    CHECK_THROWS_AS(io::read_tensor(temp_path("does-not-exist.xtf")), InputError);
}

TEST_CASE("typed tensor conversions") {
    FeatureMap f(2, Dims{2, 3});
    for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = 0.25 * static_cast<double>(i) - 1.0;
    const FeatureMap f2 = io::feature_map_from(io::to_tensor(f));
    CHECK(f2.channels == 2);
    CHECK(f2.dims == f.dims);
    CHECK(f2.values == f.values);  // quarter steps are exact in f32

    ScalarField s(Dims{3, 2}, 0.5);
    const FeatureMap flat = io::feature_map_from(io::to_tensor(s));
    CHECK(flat.channels == 1);
    CHECK(io::scalar_field_from(io::to_tensor(s)).values == s.values);

    LabelMap m(Dims{2, 2});
    m.values = {0, 4, 4, 9};
    CHECK(io::label_map_from(io::to_tensor(m)) == m);

    Image img(Dims{2, 2}, 0.5);
    CHECK(io::image_from(io::to_tensor(img)).values == img.values);

    CHECK_THROWS_AS(io::label_map_from(io::to_tensor(s)), InputError);
    CHECK_THROWS_AS(io::feature_map_from(io::to_tensor(m)), InputError);
    CHECK_THROWS_AS(io::image_from(io::to_tensor(s)), InputError);
    img.values[0] = 1.5;
    CHECK_THROWS_AS(io::image_from(io::to_tensor(img)), InputError);
    s.values[1] = std::nan("");
    CHECK_THROWS_AS(io::scalar_field_from(io::to_tensor(s)), InputError);
}

TEST_CASE("points JSON is strict") {
    const Dims d{10, 10};
    const auto j = nlohmann::json::parse(R"([{"id": 1, "y": 2.5, "x": 3}, {"id": 4, "y": 0, "x": 9.5, "score": 0.7}])");
    const PointSet p = io::points_from_json(j, d);
    REQUIRE(p.size() == 2);
    CHECK(p[0].y == 2.5);
    CHECK_FALSE(p[0].score.has_value());
    CHECK(p[1].score == 0.7);
    CHECK(io::points_to_json(p) == j);

    CHECK_THROWS_AS(io::points_from_json(nlohmann::json::parse(R"({"id": 1})"), d), InputError);
    CHECK_THROWS_AS(io::points_from_json(nlohmann::json::parse(R"([{"id": 1, "y": 2}])"), d), InputError);
    CHECK_THROWS_AS(io::points_from_json(nlohmann::json::parse(R"([{"id": 0, "y": 2, "x": 2}])"), d), InputError);
    CHECK_THROWS_AS(io::points_from_json(nlohmann::json::parse(R"([{"id": 1.5, "y": 2, "x": 2}])"), d), InputError);
    CHECK_THROWS_AS(io::points_from_json(nlohmann::json::parse(R"([{"id": 1, "y": "2", "x": 2}])"), d), InputError);
    CHECK_THROWS_AS(io::points_from_json(nlohmann::json::parse(R"([{"id": 1, "y": 2, "x": 2, "z": 1}])"), d), InputError);
    CHECK_THROWS_AS(io::points_from_json(nlohmann::json::parse(R"([{"id": 1, "y": 12, "x": 2}])"), d), InputError);
}

TEST_CASE("config defaults, round trip and strictness") {
    const io::RunConfig def;
    CHECK(def.disc.tau == 0.6);
    CHECK(def.disc.delta == 0.1);
    CHECK(def.disc.kernel.size == 7);
    CHECK(def.disc.kernel.sigma == 3.0);
    CHECK(def.energy.lambda_geo == 1.0);
    CHECK(def.energy.tau_g == 0.8);
    CHECK(def.pseudo_mask.low_threshold == 0.1);
    CHECK(def.pseudo_mask.high_threshold == 0.95);
    CHECK(def.slic.n_segments == 1000);
    CHECK(def.slic.compactness == 10.0);
    CHECK(def.slic.iterations == 10);
    CHECK(def.foreground.lambda_fg == 1.0);
    CHECK(def.ema.momentum == 0.999);
    CHECK(def.stride == 1);

    const nlohmann::json j = io::config_to_json(def);
    CHECK(io::config_to_json(io::config_from_json(j)) == j);
    CHECK(io::config_to_json(io::config_from_json(nlohmann::json::object())) == j);

    const auto partial = io::config_from_json(nlohmann::json::parse(R"({"energy": {"tau_g": 1.1}, "smoothing": {"kernel_size": 5, "sigma": 1.5}})"));
    CHECK(partial.energy.tau_g == 1.1);
    CHECK(partial.energy.lambda_geo == 1.0);
    CHECK(partial.disc.kernel.size == 5);
    CHECK(partial.disc.kernel.weights.size() == 5);

    CHECK_THROWS_AS(io::config_from_json(nlohmann::json::parse(R"({"bogus": 1})")), InputError);
    CHECK_THROWS_AS(io::config_from_json(nlohmann::json::parse(R"({"energy": {"tua_g": 1}})")), InputError);
    CHECK_THROWS_AS(io::config_from_json(nlohmann::json::parse(R"({"energy": {"tau_g": "high"}})")), InputError);
    CHECK_THROWS_AS(io::config_from_json(nlohmann::json::parse(R"({"slic": {"n_segments": 2.5}})")), InputError);
    CHECK_THROWS_AS(io::config_from_json(nlohmann::json::parse(R"({"energy": {"nnec_fallback": 1}})")), InputError);
    CHECK_THROWS_AS(io::config_from_json(nlohmann::json::parse(R"({"stride": 0})")), InputError);
    CHECK_THROWS_AS(io::config_from_json(nlohmann::json::parse(R"([1])")), InputError);
    CHECK_THROWS_AS(io::config_from_json(nlohmann::json::parse(R"({"discriminative": {"delta": 0.7}})")), PreconditionError);
    CHECK_THROWS_AS(io::config_from_json(nlohmann::json::parse(R"({"smoothing": {"kernel_size": 4}})")), PreconditionError);
    try {
        io::config_from_json(nlohmann::json::parse(R"({"energy": {"tua_g": 1}})"));
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("tua_g") != std::string::npos);
    }
}

TEST_CASE("metrics JSON shape") {
    MetricsReport r;
    r.seg = {0.5, 0.75, 3, 1, 1};
    r.counts = {2.0, 2.5};
    r.timing = {{"50 points", 0.1, 0.2}};
    const auto j = io::metrics_to_json(r);
    CHECK(j["mean_iou"] == 0.5);
    CHECK(j["f1"] == 0.75);
    CHECK(j["tp"] == 3);
    CHECK(j["fp"] == 1);
    CHECK(j["fn"] == 1);
    CHECK(j["mae"] == 2.0);
    CHECK(j["mse"] == 2.5);
    CHECK(j["timing"][0]["bucket"] == "50 points");
    CHECK(j["timing"][0]["mean_s"] == 0.1);
    CHECK(j["timing"][0]["max_s"] == 0.2);
    CHECK(j.size() == 8);
}

TEST_CASE("palette is a pure function of the id") {
    CHECK(io::palette_color(0) == std::array<std::uint8_t, 3>{0, 0, 0});
    for (std::uint32_t id = 1; id < 200; ++id) {
        const auto c = io::palette_color(id);
        CHECK(c == io::palette_color(id));
        for (auto v : c) CHECK(v >= 48);
    }
    CHECK(io::palette_color(1) != io::palette_color(2));
}

TEST_CASE("PNG renders are written") {
    LabelMap m(Dims{5, 7});
    m.at(2, 3) = 4;
    const fs::path p = temp_path("labels.png");
    io::write_label_png(p, m);
    std::ifstream in(p, std::ios::binary);
    char sig[8];
    in.read(sig, 8);
    CHECK(std::memcmp(sig, "\x89PNG\r\n\x1a\n", 8) == 0);

    ScalarField f(Dims{4, 4}, 1.0);
    f.at(0, 0) = -2.0;
    CHECK_NOTHROW(io::write_field_png(temp_path("field.png"), f));
    CHECK_NOTHROW(io::write_field_png(temp_path("flat.png"), ScalarField(Dims{3, 3}, 0.0)));
    CHECK_THROWS_AS(io::write_png_rgb(temp_path("bad.png"), Dims{2, 2}, std::vector<std::uint8_t>(5)), InputError);
}
