#include "xmask/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include "xmask/error.hpp"

namespace xmask::io {

namespace {

constexpr char kMagic[4] = {'X', 'T', 'F', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
           static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

std::uint32_t float_bits(double v) { return std::bit_cast<std::uint32_t>(static_cast<float>(v)); }

void expect_dtype(const Tensor& t, DType want, const char* what) {
    if (t.dtype != want) {
        throw InputError(std::string(what) + ": expected " + (want == DType::Float32 ? "float32" : "uint32") + " tensor");
    }
}

int dim_as_int(std::uint32_t d, const char* what) {
    if (d == 0 || d > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
        throw InputError(std::string(what) + ": invalid dimension " + std::to_string(d));
    }
    return static_cast<int>(d);
}

// Strict object reader: tracks consumed keys so leftovers can be rejected.
class Section {
public:
    Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw InputError(where() + " must be an object");
    }

    const nlohmann::json* find(const std::string& key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void number(const std::string& key, double& out) {
        if (const auto* v = find(key)) {
            if (!v->is_number()) throw InputError(field(key) + " must be a number");
            out = v->get<double>();
        }
    }
    void integer(const std::string& key, int& out) {
        if (const auto* v = find(key)) {
            if (!v->is_number_integer()) throw InputError(field(key) + " must be an integer");
            out = v->get<int>();
        }
    }
    void boolean(const std::string& key, bool& out) {
        if (const auto* v = find(key)) {
            if (!v->is_boolean()) throw InputError(field(key) + " must be a boolean");
            out = v->get<bool>();
        }
    }

    void reject_unknown() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.contains(key)) throw InputError("unknown config key " + field(key));
        }
    }

    std::string field(const std::string& key) const { return path_.empty() ? "'" + key + "'" : "'" + path_ + "." + key + "'"; }

private:
    std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace

std::size_t Tensor::element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

float Tensor::float_at(std::size_t i) const { return std::bit_cast<float>(words[i]); }

std::vector<std::uint8_t> serialize(const Tensor& t) {
    if (t.dims.size() > 255) throw InputError("tensor has too many dimensions");
    if (t.words.size() != t.element_count()) throw InputError("tensor payload does not match dims");
    std::vector<std::uint8_t> out;
    out.reserve(6 + 4 * t.dims.size() + 4 * t.words.size());
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    out.push_back(static_cast<std::uint8_t>(t.dtype));
    out.push_back(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put_u32(out, d);
    for (auto w : t.words) put_u32(out, w);
    return out;
}

Tensor parse(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 6 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
        throw InputError("tensor: bad magic (expected XTF1)");
    }
    Tensor t;
    if (bytes[4] > 1) throw InputError("tensor: unknown dtype " + std::to_string(bytes[4]));
    t.dtype = static_cast<DType>(bytes[4]);
    const std::size_t ndims = bytes[5];
    std::size_t at = 6;
    if (bytes.size() < at + 4 * ndims) throw InputError("tensor: truncated dims");
    for (std::size_t i = 0; i < ndims; ++i, at += 4) t.dims.push_back(get_u32(bytes, at));
    const std::size_t n = t.element_count();
    if ((bytes.size() - at) != n * 4) {
        throw InputError("tensor: payload is " + std::to_string(bytes.size() - at) + " bytes, dims need " +
                         std::to_string(n * 4));
    }
    t.words.resize(n);
    for (std::size_t i = 0; i < n; ++i, at += 4) t.words[i] = get_u32(bytes, at);
    return t;
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse(bytes);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
    const auto bytes = serialize(t);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Tensor to_tensor(const FeatureMap& f) {
    Tensor t{DType::Float32,
             {static_cast<std::uint32_t>(f.channels), static_cast<std::uint32_t>(f.dims.height),
              static_cast<std::uint32_t>(f.dims.width)},
             {}};
    t.words.reserve(f.values.size());
    for (double v : f.values) t.words.push_back(float_bits(v));
    return t;
}

Tensor to_tensor(const ScalarField& f) {
    Tensor t{DType::Float32, {static_cast<std::uint32_t>(f.dims.height), static_cast<std::uint32_t>(f.dims.width)}, {}};
    t.words.reserve(f.values.size());
    for (double v : f.values) t.words.push_back(float_bits(v));
    return t;
}

Tensor to_tensor(const LabelMap& m) {
    return {DType::UInt32, {static_cast<std::uint32_t>(m.dims.height), static_cast<std::uint32_t>(m.dims.width)}, m.values};
}

Tensor to_tensor(const Image& img) {
    Tensor t{DType::Float32,
             {static_cast<std::uint32_t>(img.dims.height), static_cast<std::uint32_t>(img.dims.width), 3u},
             {}};
    t.words.reserve(img.values.size());
    for (double v : img.values) t.words.push_back(float_bits(v));
    return t;
}

FeatureMap feature_map_from(const Tensor& t) {
    expect_dtype(t, DType::Float32, "feature map");
    if (t.dims.size() != 2 && t.dims.size() != 3) throw InputError("feature map: expected dims (D, H, W) or (H, W)");
    const bool flat = t.dims.size() == 2;
    const int d = flat ? 1 : dim_as_int(t.dims[0], "feature map");
    const Dims hw{dim_as_int(t.dims[flat ? 0 : 1], "feature map"), dim_as_int(t.dims[flat ? 1 : 2], "feature map")};
    FeatureMap f(d, hw);
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        f.values[i] = t.float_at(i);
        if (!std::isfinite(f.values[i])) throw InputError("feature map: non-finite value at element " + std::to_string(i));
    }
    return f;
}

ScalarField scalar_field_from(const Tensor& t) {
    expect_dtype(t, DType::Float32, "scalar field");
    if (t.dims.size() != 2) throw InputError("scalar field: expected dims (H, W)");
    ScalarField f(Dims{dim_as_int(t.dims[0], "scalar field"), dim_as_int(t.dims[1], "scalar field")});
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        f.values[i] = t.float_at(i);
        if (!std::isfinite(f.values[i])) throw InputError("scalar field: non-finite value at element " + std::to_string(i));
    }
    return f;
}

LabelMap label_map_from(const Tensor& t) {
    expect_dtype(t, DType::UInt32, "label map");
    if (t.dims.size() != 2) throw InputError("label map: expected dims (H, W)");
    LabelMap m(Dims{dim_as_int(t.dims[0], "label map"), dim_as_int(t.dims[1], "label map")});
    m.values = t.words;
    return m;
}

Image image_from(const Tensor& t) {
    expect_dtype(t, DType::Float32, "image");
    if (t.dims.size() != 3 || t.dims[2] != 3) throw InputError("image: expected dims (H, W, 3)");
    Image img(Dims{dim_as_int(t.dims[0], "image"), dim_as_int(t.dims[1], "image")});
    for (std::size_t i = 0; i < img.values.size(); ++i) {
        const double v = t.float_at(i);
        if (!(v >= 0.0 && v <= 1.0)) throw InputError("image: value outside [0, 1] at element " + std::to_string(i));
        img.values[i] = v;
    }
    return img;
}

PointSet points_from_json(const nlohmann::json& j, Dims bounds) {
    if (!j.is_array()) throw InputError("points: expected a JSON array");
    std::vector<Point> pts;
    pts.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        Section s(j[i], "points[" + std::to_string(i) + "]");
        Point p;
        const auto* id = s.find("id");
        if (!id || !id->is_number_integer() || id->get<std::int64_t>() <= 0 ||
            id->get<std::int64_t>() > std::numeric_limits<std::uint32_t>::max()) {
            throw InputError(s.field("id") + " must be a positive integer");
        }
        p.id = static_cast<std::uint32_t>(id->get<std::int64_t>());
        for (const char* key : {"y", "x"}) {
            const auto* v = s.find(key);
            if (!v || !v->is_number()) throw InputError(s.field(key) + " must be a number");
            (key[0] == 'y' ? p.y : p.x) = v->get<double>();
        }
        if (const auto* v = s.find("score")) {
            if (!v->is_number()) throw InputError(s.field("score") + " must be a number");
            p.score = v->get<double>();
        }
        s.reject_unknown();
        pts.push_back(p);
    }
    return PointSet(std::move(pts), bounds);
}

nlohmann::json points_to_json(const PointSet& points) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Point& p : points.points()) {
        nlohmann::json o{{"id", p.id}, {"y", p.y}, {"x", p.x}};
        if (p.score) o["score"] = *p.score;
        arr.push_back(std::move(o));
    }
    return arr;
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

PointSet read_points(const std::filesystem::path& path, Dims bounds) { return points_from_json(read_json(path), bounds); }

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    Section root(j, "");
    int kernel_size = cfg.disc.kernel.size;
    double sigma = cfg.disc.kernel.sigma;

    if (const auto* v = root.find("discriminative")) {
        Section s(*v, "discriminative");
        s.number("tau", cfg.disc.tau);
        s.number("delta", cfg.disc.delta);
        s.reject_unknown();
    }
    if (const auto* v = root.find("smoothing")) {
        Section s(*v, "smoothing");
        s.integer("kernel_size", kernel_size);
        s.number("sigma", sigma);
        s.reject_unknown();
    }
    if (const auto* v = root.find("energy")) {
        Section s(*v, "energy");
        s.number("lambda", cfg.energy.lambda_geo);
        s.number("tau_g", cfg.energy.tau_g);
        s.number("epsilon", cfg.energy.epsilon);
        s.boolean("nnec_fallback", cfg.energy.nnec_fallback);
        s.number("fallback_scale", cfg.energy.fallback_scale);
        s.reject_unknown();
    }
    if (const auto* v = root.find("foreground")) {
        Section s(*v, "foreground");
        s.number("lambda_fg", cfg.foreground.lambda_fg);
        s.reject_unknown();
    }
    if (const auto* v = root.find("pseudo_mask")) {
        Section s(*v, "pseudo_mask");
        s.number("low_threshold", cfg.pseudo_mask.low_threshold);
        s.number("high_threshold", cfg.pseudo_mask.high_threshold);
        s.reject_unknown();
    }
    if (const auto* v = root.find("ema")) {
        Section s(*v, "ema");
        s.number("momentum", cfg.ema.momentum);
        s.reject_unknown();
    }
    if (const auto* v = root.find("slic")) {
        Section s(*v, "slic");
        s.integer("n_segments", cfg.slic.n_segments);
        s.number("compactness", cfg.slic.compactness);
        s.integer("iterations", cfg.slic.iterations);
        s.reject_unknown();
    }
    root.integer("stride", cfg.stride);
    if (const auto* v = root.find("demo")) {
        Section s(*v, "demo");
        s.integer("instances", cfg.demo.instances);
        s.integer("height", cfg.demo.height);
        s.integer("width", cfg.demo.width);
        s.number("min_separation", cfg.demo.min_separation);
        s.integer("steps", cfg.demo.steps);
        s.number("learning_rate", cfg.demo.learning_rate);
        s.integer("channels", cfg.demo.channels);
        s.number("init_scale", cfg.demo.init_scale);
        s.reject_unknown();
    }
    root.reject_unknown();

    cfg.disc.kernel = gaussian_kernel_1d(kernel_size, sigma);
    cfg.disc.validate();
    cfg.energy.validate();
    cfg.pseudo_mask.validate();
    if (!(cfg.ema.momentum >= 0.0 && cfg.ema.momentum <= 1.0)) throw PreconditionError("ema.momentum must lie in [0, 1]");
    if (cfg.stride < 1) throw InputError("'stride' must be >= 1");
    return cfg;
}

nlohmann::json config_to_json(const RunConfig& cfg) {
    return {
        {"discriminative", {{"tau", cfg.disc.tau}, {"delta", cfg.disc.delta}}},
        {"smoothing", {{"kernel_size", cfg.disc.kernel.size}, {"sigma", cfg.disc.kernel.sigma}}},
        {"energy",
         {{"lambda", cfg.energy.lambda_geo},
          {"tau_g", cfg.energy.tau_g},
          {"epsilon", cfg.energy.epsilon},
          {"nnec_fallback", cfg.energy.nnec_fallback},
          {"fallback_scale", cfg.energy.fallback_scale}}},
        {"foreground", {{"lambda_fg", cfg.foreground.lambda_fg}}},
        {"pseudo_mask", {{"low_threshold", cfg.pseudo_mask.low_threshold}, {"high_threshold", cfg.pseudo_mask.high_threshold}}},
        {"ema", {{"momentum", cfg.ema.momentum}}},
        {"slic",
         {{"n_segments", cfg.slic.n_segments}, {"compactness", cfg.slic.compactness}, {"iterations", cfg.slic.iterations}}},
        {"stride", cfg.stride},
        {"demo",
         {{"instances", cfg.demo.instances},
          {"height", cfg.demo.height},
          {"width", cfg.demo.width},
          {"min_separation", cfg.demo.min_separation},
          {"steps", cfg.demo.steps},
          {"learning_rate", cfg.demo.learning_rate},
          {"channels", cfg.demo.channels},
          {"init_scale", cfg.demo.init_scale}}},
    };
}

RunConfig read_config(const std::filesystem::path& path) { return config_from_json(read_json(path)); }

nlohmann::json metrics_to_json(const MetricsReport& report) {
    nlohmann::json timing = nlohmann::json::array();
    for (const auto& t : report.timing) timing.push_back({{"bucket", t.bucket}, {"mean_s", t.mean_s}, {"max_s", t.max_s}});
    return {
        {"mean_iou", report.seg.mean_iou},
        {"f1", report.seg.f1},
        {"tp", report.seg.tp},
        {"fp", report.seg.fp},
        {"fn", report.seg.fn},
        {"mae", report.counts.mae},
        {"mse", report.counts.mse},
        {"timing", std::move(timing)},
    };
}

std::array<std::uint8_t, 3> palette_color(std::uint32_t id) {
    if (id == 0) return {0, 0, 0};
    std::uint64_t z = static_cast<std::uint64_t>(id) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    // Keep every channel above 48 so instances stay distinct from background.
    return {static_cast<std::uint8_t>(48 + (z & 0xFF) % 208), static_cast<std::uint8_t>(48 + ((z >> 8) & 0xFF) % 208),
            static_cast<std::uint8_t>(48 + ((z >> 16) & 0xFF) % 208)};
}

void write_png_rgb(const std::filesystem::path& path, Dims dims, std::span<const std::uint8_t> rgb) {
    if (rgb.size() != dims.area() * 3) throw InputError("png: buffer does not match dims");
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw InputError("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw InputError("png: encoding failed for " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(dims.width), static_cast<png_uint_32>(dims.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < dims.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * dims.width * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

void write_label_png(const std::filesystem::path& path, const LabelMap& labels) {
    std::vector<std::uint8_t> rgb(labels.dims.area() * 3);
    for (std::size_t i = 0; i < labels.values.size(); ++i) {
        const auto c = palette_color(labels.values[i]);
        std::copy(c.begin(), c.end(), rgb.begin() + static_cast<std::ptrdiff_t>(i * 3));
    }
    write_png_rgb(path, labels.dims, rgb);
}

void write_field_png(const std::filesystem::path& path, const ScalarField& field) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : field.values) {
        if (!std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    std::vector<std::uint8_t> rgb(field.dims.area() * 3);
    for (std::size_t i = 0; i < field.values.size(); ++i) {
        const double v = field.values[i];
        const auto g = std::isfinite(v) ? static_cast<std::uint8_t>(std::lround(255.0 * (v - lo) / span)) : std::uint8_t{0};
        rgb[i * 3] = rgb[i * 3 + 1] = rgb[i * 3 + 2] = g;
    }
    write_png_rgb(path, field.dims, rgb);
}

}  // namespace xmask::io
