#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace chorovessel {

/// Single-channel 8-bit image, row-major. pixel_scale is the physical length of
/// one pixel; 1.0 means uncalibrated and every length is reported in pixels.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
    double pixel_scale = 1.0;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0);

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return pixels.size(); }

    bool operator==(const GrayImage&) const = default;
};

/// Binary vessel map. bits holds 0 or 1 only.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    Mask() = default;
    Mask(int w, int h, std::uint8_t fill = 0);

    std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
    std::size_t size() const { return bits.size(); }
    std::size_t count() const;

    bool operator==(const Mask&) const = default;
};

/// Per-pixel vessel probability in [0,1].
struct ProbabilityGrid {
    int width = 0;
    int height = 0;
    std::vector<float> values;

    ProbabilityGrid() = default;
    ProbabilityGrid(int w, int h, float fill = 0.0f);

    float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return values.size(); }

    bool operator==(const ProbabilityGrid&) const = default;
};

struct ClaheParams {
    int tiles = 8;       // tiles per axis
    double clip = 2.0;   // clip limit as a multiple of the mean bin height
};

GrayImage resize(const GrayImage& img, int target_w, int target_h);
GrayImage enhance_contrast(const GrayImage& img, const ClaheParams& params = {});

/// Threshold-free conversions used by the HITL server and CLI.
Mask mask_from_image(const GrayImage& img);  // nonzero -> 1
GrayImage mask_to_image(const Mask& mask);   // 1 -> 255

// PNG codec. Color and alpha inputs are reduced to luma 0.299/0.587/0.114.
GrayImage decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const GrayImage& img);
Mask decode_mask_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_mask_png(const Mask& mask);

// "VPRB1\n" + "width height\n" + row-major float32 little-endian.
ProbabilityGrid decode_probability(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_probability(const ProbabilityGrid& grid);

GrayImage read_image(const std::filesystem::path& path);
void write_image(const GrayImage& img, const std::filesystem::path& path);
Mask read_mask(const std::filesystem::path& path);
void write_mask(const Mask& mask, const std::filesystem::path& path);
ProbabilityGrid read_probability(const std::filesystem::path& path);
void write_probability(const ProbabilityGrid& grid, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Writes via a sibling temporary file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace chorovessel
