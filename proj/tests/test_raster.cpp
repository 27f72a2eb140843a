#include <doctest.h>
#include <png.h>

#include <cmath>
#include <cstring>
#include <random>

#include "chorovessel/error.hpp"
#include "chorovessel/raster.hpp"

using namespace chorovessel;

namespace {

// Per-pixel adaptive equalization computed straight from the definition: for
// each of the (up to) four surrounding tiles, rebuild the clipped histogram and
// evaluate its CDF at the pixel's value.
double clahe_oracle(const GrayImage& img, int x, int y, int tiles, double clip) {
    const int tx_n = std::min(tiles, img.width), ty_n = std::min(tiles, img.height);
    const double tw = double(img.width) / tx_n, th = double(img.height) / ty_n;
    auto tile_value = [&](int tx, int ty, int v) {
        const int x0 = int(std::floor(tx * tw)), x1 = tx + 1 == tx_n ? img.width : int(std::floor((tx + 1) * tw));
        const int y0 = int(std::floor(ty * th)), y1 = ty + 1 == ty_n ? img.height : int(std::floor((ty + 1) * th));
        std::vector<double> hist(256, 0.0);
        for (int yy = y0; yy < y1; ++yy)
            for (int xx = x0; xx < x1; ++xx) hist[img.at(xx, yy)] += 1;
        const double area = double(x1 - x0) * (y1 - y0);
        const double limit = std::max(1.0, clip * area / 256.0);
        double excess = 0;
        for (auto& h : hist)
            if (h > limit) excess += h - limit, h = limit;
        double cdf = 0;
        for (int k = 0; k <= v; ++k) cdf += hist[k] + excess / 256.0;
        return std::min(255.0, 255.0 * cdf / area);
    };
    const double fx = (x + 0.5) / tw - 0.5, fy = (y + 0.5) / th - 0.5;
    const int ax = std::clamp(int(std::floor(fx)), 0, tx_n - 1), bx = std::clamp(int(std::floor(fx)) + 1, 0, tx_n - 1);
    const int ay = std::clamp(int(std::floor(fy)), 0, ty_n - 1), by = std::clamp(int(std::floor(fy)) + 1, 0, ty_n - 1);
    const double wx = ax == bx ? 0.0 : fx - std::floor(fx), wy = ay == by ? 0.0 : fy - std::floor(fy);
    const int v = img.at(x, y);
    return (1 - wy) * ((1 - wx) * tile_value(ax, ay, v) + wx * tile_value(bx, ay, v)) +
           wy * ((1 - wx) * tile_value(ax, by, v) + wx * tile_value(bx, by, v));
}

std::vector<std::uint8_t> rgb_png(int w, int h, const std::vector<std::uint8_t>& rgb) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = w;
    img.height = h;
    img.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    png_image_write_to_memory(&img, nullptr, &size, 0, rgb.data(), 0, nullptr);
    std::vector<std::uint8_t> out(size);
    png_image_write_to_memory(&img, out.data(), &size, 0, rgb.data(), 0, nullptr);
    out.resize(size);
    return out;
}

}  // namespace

TEST_CASE("resize keeps constant fields constant") {
    GrayImage img(768, 768, 100);
    const auto out = resize(img, 512, 512);
    CHECK(out.width == 512);
    CHECK(out.height == 512);
    for (auto v : out.pixels) REQUIRE(v == 100);
    CHECK(out.pixel_scale == doctest::Approx(1.5));
}

TEST_CASE("resize at identical dimensions is the identity") {
    std::mt19937 rng(7);
    GrayImage img(37, 21);
    for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng() & 0xff);
    CHECK(resize(img, 37, 21) == img);
}

TEST_CASE("resize of a 2x2 checkerboard matches hand-evaluated bilinear weights") {
    GrayImage img(2, 2);
    img.at(0, 0) = 0;
    img.at(1, 0) = 255;
    img.at(0, 1) = 255;
    img.at(1, 1) = 0;
    const auto out = resize(img, 4, 4);
    // Output centers land at source offsets {0, .25, .75, 1} after border clamping;
    // the bilinear blend of the checkerboard is 255 * (fx + fy - 2 fx fy).
    const double offs[4] = {0.0, 0.25, 0.75, 1.0};
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const double fx = offs[x], fy = offs[y];
            const long expect = std::lround(255.0 * (fx + fy - 2 * fx * fy));
            CHECK(out.at(x, y) == expect);
        }
    CHECK(out.at(1, 1) == 96);
    CHECK(out.at(2, 1) == 159);
}

TEST_CASE("resize rejects zero target dimension") {
    GrayImage img(4, 4, 1);
    CHECK_THROWS_AS(resize(img, 0, 4), Error);
    CHECK_THROWS_AS(resize(img, 4, 0), Error);
}

TEST_CASE("enhance_contrast keeps a flat image flat") {
    GrayImage img(100, 60, 100);
    const auto out = enhance_contrast(img);
    for (auto v : out.pixels) REQUIRE(v == out.pixels.front());
}

TEST_CASE("enhance_contrast leaves a tile-uniform full-range ramp nearly unchanged") {
    // Each 32x32 tile holds every level 0..255 exactly four times.
    GrayImage img(256, 256);
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x) img.at(x, y) = static_cast<std::uint8_t>(((y % 8) * 32 + (x % 32)) & 0xff);
    const auto out = enhance_contrast(img);
    int worst = 0;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) worst = std::max(worst, std::abs(int(out.pixels[i]) - int(img.pixels[i])));
    CHECK(worst <= 8);
}

TEST_CASE("enhance_contrast on a two-level image matches the per-tile CDF oracle") {
    GrayImage img(96, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 96; ++x) img.at(x, y) = x < 44 ? 40 : 200;
    const auto out = enhance_contrast(img);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 96; ++x) REQUIRE(std::abs(out.at(x, y) - clahe_oracle(img, x, y, 8, 2.0)) <= 0.5 + 1e-9);
    // Level order is preserved and the output stays inside the 8-bit range.
    CHECK(out.at(0, 0) < out.at(95, 0));
}

TEST_CASE("enhance_contrast matches the oracle on random content and stays in range") {
    std::mt19937 rng(11);
    GrayImage img(50, 37);
    for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng() % 120 + 40);
    const auto out = enhance_contrast(img, {4, 3.0});
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) REQUIRE(std::abs(out.at(x, y) - clahe_oracle(img, x, y, 4, 3.0)) <= 0.5 + 1e-9);
}

TEST_CASE("file formats round-trip random content exactly") {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        const int w = 1 + int(rng() % 17), h = 1 + int(rng() % 13);
        Mask m(w, h);
        for (auto& b : m.bits) b = rng() & 1;
        REQUIRE(decode_mask_png(encode_mask_png(m)) == m);

        ProbabilityGrid g(w, h);
        std::uniform_real_distribution<float> u(0.0f, 1.0f);
        for (auto& v : g.values) v = u(rng);
        if (trial % 10 == 0) g.values[0] = 1.0f;
        const auto bytes = encode_probability(g);
        const auto back = decode_probability(bytes);
        REQUIRE(back.width == w);
        REQUIRE(std::memcmp(back.values.data(), g.values.data(), g.values.size() * sizeof(float)) == 0);

        GrayImage img(w, h);
        for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng() & 0xff);
        REQUIRE(decode_png(encode_png(img)) == img);
    }
}

TEST_CASE("probability file layout is magic, ascii dims, little-endian floats") {
    ProbabilityGrid g(2, 1);
    g.values = {0.5f, 1.0f};
    const auto bytes = encode_probability(g);
    const std::string head(bytes.begin(), bytes.begin() + 10);
    CHECK(head == "VPRB1\n2 1\n");
    REQUIRE(bytes.size() == 18);
    // 0.5f = 0x3f000000
    CHECK(bytes[10] == 0x00);
    CHECK(bytes[13] == 0x3f);
}

TEST_CASE("mask files with non-binary values are rejected") {
    GrayImage img(4, 4, 0);
    img.at(1, 1) = 17;
    const auto bytes = encode_png(img);
    try {
        decode_mask_png(bytes);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("non-binary mask") != std::string::npos);
        CHECK(e.kind() == ErrorKind::Input);
    }
}

TEST_CASE("probability files with out-of-range values are rejected") {
    ProbabilityGrid g(2, 2, 0.25f);
    auto bytes = encode_probability(g);
    const float bad = 1.5f;
    std::memcpy(bytes.data() + bytes.size() - 4, &bad, 4);
    try {
        decode_probability(bytes);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("probability out of range") != std::string::npos);
    }
    ProbabilityGrid nan_grid(1, 1, std::nanf(""));
    CHECK_THROWS_AS(encode_probability(nan_grid), Error);
}

TEST_CASE("probability decoder rejects malformed headers and oversize dimensions") {
    auto as_bytes = [](const std::string& s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };
    CHECK_THROWS_AS(decode_probability(as_bytes("VPRB2\n1 1\n0000")), Error);
    CHECK_THROWS_AS(decode_probability(as_bytes("VPRB1\n1x1\n0000")), Error);
    CHECK_THROWS_AS(decode_probability(as_bytes("VPRB1\n0 1\n")), Error);
    CHECK_THROWS_AS(decode_probability(as_bytes("VPRB1\n99999999999 1\n")), Error);
    CHECK_THROWS_AS(decode_probability(as_bytes("VPRB1\n60000 60000\n")), Error);
    CHECK_THROWS_AS(decode_probability(as_bytes("VPRB1\n2 1\n0000")), Error);  // short payload
    CHECK_THROWS_AS(decode_png(as_bytes("not a png")), Error);
}

TEST_CASE("color PNGs are reduced with luma weights") {
    std::vector<std::uint8_t> rgb = {255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30};
    const auto img = decode_png(rgb_png(4, 1, rgb));
    CHECK(img.at(0, 0) == std::lround(0.299 * 255));
    CHECK(img.at(1, 0) == std::lround(0.587 * 255));
    CHECK(img.at(2, 0) == std::lround(0.114 * 255));
    CHECK(img.at(3, 0) == std::lround(0.299 * 10 + 0.587 * 20 + 0.114 * 30));
}

TEST_CASE("file helpers write atomically and read back") {
    const auto dir = std::filesystem::temp_directory_path() / "chv_raster_test";
    std::filesystem::remove_all(dir);
    Mask m(3, 2);
    m.at(2, 1) = 1;
    write_mask(m, dir / "sub" / "m.png");
    CHECK(read_mask(dir / "sub" / "m.png") == m);
    CHECK_FALSE(std::filesystem::exists(dir / "sub" / "m.png.tmp"));
    CHECK_THROWS_AS(read_mask(dir / "missing.png"), Error);
    std::filesystem::remove_all(dir);
}
