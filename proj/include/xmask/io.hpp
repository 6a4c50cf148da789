#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "xmask/edpsam.hpp"
#include "xmask/eval.hpp"
#include "xmask/field.hpp"
#include "xmask/geometry.hpp"
#include "xmask/losses.hpp"
#include "xmask/segmenter.hpp"

namespace xmask::io {

// XTF1 tensor container:
//   "XTF1" | dtype u8 (0 = f32, 1 = u32) | ndims u8 | dims u32[ndims] | payload
// All integers and floats little-endian, payload row-major. Elements are kept
// as raw 32-bit words so parse -> serialize is byte-identical (NaN payloads too).
enum class DType : std::uint8_t { Float32 = 0, UInt32 = 1 };

struct Tensor {
    DType dtype = DType::Float32;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint32_t> words;

    std::size_t element_count() const;
    float float_at(std::size_t i) const;
};

std::vector<std::uint8_t> serialize(const Tensor& t);
Tensor parse(std::span<const std::uint8_t> bytes);

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& t);

Tensor to_tensor(const FeatureMap& f);          // f32 (D, H, W)
Tensor to_tensor(const ScalarField& f);         // f32 (H, W)
Tensor to_tensor(const LabelMap& m);            // u32 (H, W)
Tensor to_tensor(const Image& img);             // f32 (H, W, 3)
FeatureMap feature_map_from(const Tensor& t);   // accepts (D, H, W) or (H, W)
ScalarField scalar_field_from(const Tensor& t);
LabelMap label_map_from(const Tensor& t);
Image image_from(const Tensor& t);

// Points file: [{"id": int, "y": float, "x": float, "score": float?}, ...]
PointSet points_from_json(const nlohmann::json& j, Dims bounds);
nlohmann::json points_to_json(const PointSet& points);
PointSet read_points(const std::filesystem::path& path, Dims bounds);

struct DemoParams {
    int instances = 5;
    int height = 64;
    int width = 64;
    double min_separation = 16.0;
    int steps = 500;
    double learning_rate = 200.0;
    int channels = 8;
    double init_scale = 0.01;
};

struct RunConfig {
    DiscriminativeConfig disc;  // includes the smoothing kernel
    EnergyConfig energy;
    ForegroundConfig foreground;
    PseudoMaskFilter pseudo_mask;
    EmaConfig ema;
    SlicParams slic;
    int stride = 1;
    DemoParams demo;
};

// Strict: unknown keys and wrongly typed values throw InputError naming the key.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig read_config(const std::filesystem::path& path);

nlohmann::json metrics_to_json(const MetricsReport& report);

// Deterministic id -> RGB palette; id 0 is black.
std::array<std::uint8_t, 3> palette_color(std::uint32_t id);

void write_png_rgb(const std::filesystem::path& path, Dims dims, std::span<const std::uint8_t> rgb);
void write_label_png(const std::filesystem::path& path, const LabelMap& labels);
// Min-max normalized grayscale render of a scalar response.
void write_field_png(const std::filesystem::path& path, const ScalarField& field);

nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace xmask::io
