#include "chorovessel/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>

#include "chorovessel/error.hpp"

namespace chorovessel {

namespace {

void check_dims(int w, int h) {
    if (w <= 0 || h <= 0) input_error("image dimensions must be positive");
}

}  // namespace

GrayImage::GrayImage(int w, int h, std::uint8_t fill) : width(w), height(h) {
    check_dims(w, h);
    pixels.assign(static_cast<std::size_t>(w) * h, fill);
}

Mask::Mask(int w, int h, std::uint8_t fill) : width(w), height(h) {
    check_dims(w, h);
    bits.assign(static_cast<std::size_t>(w) * h, fill ? 1 : 0);
}

std::size_t Mask::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

ProbabilityGrid::ProbabilityGrid(int w, int h, float fill) : width(w), height(h) {
    check_dims(w, h);
    values.assign(static_cast<std::size_t>(w) * h, fill);
}

GrayImage resize(const GrayImage& img, int target_w, int target_h) {
    if (target_w <= 0 || target_h <= 0) input_error("resize: target dimensions must be positive");
    if (img.width == target_w && img.height == target_h) return img;

    GrayImage out(target_w, target_h);
    const double sx = static_cast<double>(img.width) / target_w;
    const double sy = static_cast<double>(img.height) / target_h;
    out.pixel_scale = img.pixel_scale * sx;

    // Sample positions use pixel-center alignment and clamp at the borders.
    auto source_coord = [](int dst, double scale, int src_extent, int& i0, int& i1, double& frac) {
        double s = (dst + 0.5) * scale - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(src_extent - 1));
        i0 = static_cast<int>(std::floor(s));
        i1 = std::min(i0 + 1, src_extent - 1);
        frac = s - i0;
    };

    for (int y = 0; y < target_h; ++y) {
        int y0, y1;
        double fy;
        source_coord(y, sy, img.height, y0, y1, fy);
        for (int x = 0; x < target_w; ++x) {
            int x0, x1;
            double fx;
            source_coord(x, sx, img.width, x0, x1, fx);
            const double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
            const double bottom = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
            const double v = (1.0 - fy) * top + fy * bottom;
            out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    }
    return out;
}

GrayImage enhance_contrast(const GrayImage& img, const ClaheParams& params) {
    if (params.tiles < 1) input_error("enhance_contrast: tiles must be >= 1");
    if (!(params.clip > 0.0)) input_error("enhance_contrast: clip must be > 0");

    const int tiles_x = std::min(params.tiles, img.width);
    const int tiles_y = std::min(params.tiles, img.height);
    const double tile_w = static_cast<double>(img.width) / tiles_x;
    const double tile_h = static_cast<double>(img.height) / tiles_y;

    auto tile_begin = [](int k, double extent) { return static_cast<int>(std::floor(k * extent)); };

    // One 256-entry lookup table per tile.
    std::vector<std::array<double, 256>> luts(static_cast<std::size_t>(tiles_x) * tiles_y);
    for (int ty = 0; ty < tiles_y; ++ty) {
        const int y0 = tile_begin(ty, tile_h);
        const int y1 = ty + 1 == tiles_y ? img.height : tile_begin(ty + 1, tile_h);
        for (int tx = 0; tx < tiles_x; ++tx) {
            const int x0 = tile_begin(tx, tile_w);
            const int x1 = tx + 1 == tiles_x ? img.width : tile_begin(tx + 1, tile_w);

            std::array<double, 256> hist{};
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) hist[img.at(x, y)] += 1.0;
            const double area = static_cast<double>(x1 - x0) * (y1 - y0);

            const double limit = std::max(1.0, params.clip * area / 256.0);
            double excess = 0.0;
            for (double& h : hist) {
                if (h > limit) {
                    excess += h - limit;
                    h = limit;
                }
            }
            const double share = excess / 256.0;

            auto& lut = luts[static_cast<std::size_t>(ty) * tiles_x + tx];
            double cdf = 0.0;
            for (int v = 0; v < 256; ++v) {
                cdf += hist[v] + share;
                lut[v] = std::min(255.0, 255.0 * cdf / area);
            }
        }
    }

    GrayImage out(img.width, img.height);
    out.pixel_scale = img.pixel_scale;
    for (int y = 0; y < img.height; ++y) {
        const double fy = (y + 0.5) / tile_h - 0.5;
        const int ty0 = std::clamp(static_cast<int>(std::floor(fy)), 0, tiles_y - 1);
        const int ty1 = std::clamp(static_cast<int>(std::floor(fy)) + 1, 0, tiles_y - 1);
        const double wy = std::clamp(fy - std::floor(fy), 0.0, 1.0);
        const double wy_eff = ty0 == ty1 ? 0.0 : wy;
        for (int x = 0; x < img.width; ++x) {
            const double fx = (x + 0.5) / tile_w - 0.5;
            const int tx0 = std::clamp(static_cast<int>(std::floor(fx)), 0, tiles_x - 1);
            const int tx1 = std::clamp(static_cast<int>(std::floor(fx)) + 1, 0, tiles_x - 1);
            const double wx = std::clamp(fx - std::floor(fx), 0.0, 1.0);
            const double wx_eff = tx0 == tx1 ? 0.0 : wx;
            const std::uint8_t v = img.at(x, y);
            auto lut = [&](int tx, int ty) { return luts[static_cast<std::size_t>(ty) * tiles_x + tx][v]; };
            const double top = (1.0 - wx_eff) * lut(tx0, ty0) + wx_eff * lut(tx1, ty0);
            const double bottom = (1.0 - wx_eff) * lut(tx0, ty1) + wx_eff * lut(tx1, ty1);
            const double r = (1.0 - wy_eff) * top + wy_eff * bottom;
            out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(r), 0L, 255L));
        }
    }
    return out;
}

Mask mask_from_image(const GrayImage& img) {
    Mask m(img.width, img.height);
    std::transform(img.pixels.begin(), img.pixels.end(), m.bits.begin(),
                   [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 1 : 0); });
    return m;
}

GrayImage mask_to_image(const Mask& mask) {
    GrayImage img(mask.width, mask.height);
    std::transform(mask.bits.begin(), mask.bits.end(), img.pixels.begin(),
                   [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
    return img;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::NotFound, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Internal, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) fail(ErrorKind::Internal, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

GrayImage read_image(const std::filesystem::path& path) { return decode_png(read_file_bytes(path)); }
void write_image(const GrayImage& img, const std::filesystem::path& path) { write_file_atomic(path, encode_png(img)); }
Mask read_mask(const std::filesystem::path& path) { return decode_mask_png(read_file_bytes(path)); }
void write_mask(const Mask& mask, const std::filesystem::path& path) { write_file_atomic(path, encode_mask_png(mask)); }
ProbabilityGrid read_probability(const std::filesystem::path& path) {
    return decode_probability(read_file_bytes(path));
}
void write_probability(const ProbabilityGrid& grid, const std::filesystem::path& path) {
    write_file_atomic(path, encode_probability(grid));
}

}  // namespace chorovessel
