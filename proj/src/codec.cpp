#include <png.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "chorovessel/error.hpp"
#include "chorovessel/raster.hpp"

namespace chorovessel {

namespace {

constexpr long long kMaxPixels = 1LL << 28;
constexpr char kProbMagic[] = "VPRB1\n";
constexpr std::size_t kProbMagicLen = 6;

struct PngImage {
    png_image img{};
    PngImage() { img.version = PNG_IMAGE_VERSION; }
    ~PngImage() { png_image_free(&img); }
    PngImage(const PngImage&) = delete;
    PngImage& operator=(const PngImage&) = delete;
};

void check_pixel_budget(long long w, long long h, const char* what) {
    if (w <= 0 || h <= 0) input_error(std::string(what) + ": malformed header (non-positive dimensions)");
    if (w > 65536 || h > 65536 || w * h > kMaxPixels) input_error(std::string(what) + ": dimension overflow");
}

}  // namespace

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
    PngImage png;
    if (!png_image_begin_read_from_memory(&png.img, bytes.data(), bytes.size()))
        input_error(std::string("png: malformed header: ") + png.img.message);
    check_pixel_budget(png.img.width, png.img.height, "png");

    const bool color = (png.img.format & PNG_FORMAT_FLAG_COLOR) != 0;
    const int w = static_cast<int>(png.img.width);
    const int h = static_cast<int>(png.img.height);
    GrayImage out(w, h);

    if (!color) {
        png.img.format = PNG_FORMAT_GRAY;
        if (!png_image_finish_read(&png.img, nullptr, out.pixels.data(), 0, nullptr))
            input_error(std::string("png: decode failed: ") + png.img.message);
        return out;
    }

    png.img.format = PNG_FORMAT_RGBA;
    std::vector<std::uint8_t> rgba(static_cast<std::size_t>(w) * h * 4);
    if (!png_image_finish_read(&png.img, nullptr, rgba.data(), 0, nullptr))
        input_error(std::string("png: decode failed: ") + png.img.message);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const double luma = 0.299 * rgba[4 * i] + 0.587 * rgba[4 * i + 1] + 0.114 * rgba[4 * i + 2];
        out.pixels[i] = static_cast<std::uint8_t>(std::lround(std::min(255.0, luma)));
    }
    return out;
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
    PngImage png;
    png.img.width = static_cast<png_uint_32>(img.width);
    png.img.height = static_cast<png_uint_32>(img.height);
    png.img.format = PNG_FORMAT_GRAY;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png.img, nullptr, &size, 0, img.pixels.data(), 0, nullptr))
        fail(ErrorKind::Internal, std::string("png: encode failed: ") + png.img.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&png.img, out.data(), &size, 0, img.pixels.data(), 0, nullptr))
        fail(ErrorKind::Internal, std::string("png: encode failed: ") + png.img.message);
    out.resize(size);
    return out;
}

Mask decode_mask_png(std::span<const std::uint8_t> bytes) {
    const GrayImage img = decode_png(bytes);
    Mask m(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        const std::uint8_t v = img.pixels[i];
        if (v != 0 && v != 255) input_error("non-binary mask (value " + std::to_string(v) + ")");
        m.bits[i] = v ? 1 : 0;
    }
    return m;
}

std::vector<std::uint8_t> encode_mask_png(const Mask& mask) { return encode_png(mask_to_image(mask)); }

ProbabilityGrid decode_probability(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kProbMagicLen || std::memcmp(bytes.data(), kProbMagic, kProbMagicLen) != 0)
        input_error("probability: malformed header (bad magic)");

    // ASCII "width height\n"; digits and a single space only.
    std::size_t pos = kProbMagicLen;
    auto read_uint = [&](char terminator) -> long long {
        long long v = 0;
        std::size_t digits = 0;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            v = v * 10 + (bytes[pos] - '0');
            if (v > kMaxPixels) input_error("probability: dimension overflow");
            ++pos;
            ++digits;
        }
        if (digits == 0 || pos >= bytes.size() || bytes[pos] != static_cast<std::uint8_t>(terminator))
            input_error("probability: malformed header");
        ++pos;
        return v;
    };
    const long long w = read_uint(' ');
    const long long h = read_uint('\n');
    check_pixel_budget(w, h, "probability");

    const std::size_t n = static_cast<std::size_t>(w * h);
    if (bytes.size() - pos != n * 4) input_error("probability: payload size does not match header");

    ProbabilityGrid grid(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* p = bytes.data() + pos + 4 * i;
        const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                                   (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
        const float v = std::bit_cast<float>(bits);
        if (!(v >= 0.0f && v <= 1.0f)) input_error("probability out of range");
        grid.values[i] = v;
    }
    return grid;
}

std::vector<std::uint8_t> encode_probability(const ProbabilityGrid& grid) {
    for (float v : grid.values)
        if (!(v >= 0.0f && v <= 1.0f)) input_error("probability out of range");
    const std::string header =
        std::string(kProbMagic, kProbMagicLen) + std::to_string(grid.width) + " " + std::to_string(grid.height) + "\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + grid.values.size() * 4);
    for (float v : grid.values) {
        const auto bits = std::bit_cast<std::uint32_t>(v);
        for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
    return out;
}

}  // namespace chorovessel
