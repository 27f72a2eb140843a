#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <json.hpp>

#include "chorovessel/error.hpp"
#include "chorovessel/synth.hpp"
#include "chorovessel/vesselgraph.hpp"

using namespace chorovessel;

namespace {

double dice(const Mask& a, const Mask& b) {
    std::size_t both = 0, sa = 0, sb = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        both += a.bits[i] && b.bits[i];
        sa += a.bits[i];
        sb += b.bits[i];
    }
    return sa + sb == 0 ? 1.0 : 2.0 * double(both) / double(sa + sb);
}

// Brute-force trapezoid integration of |c'(t)| for the wiggled line, using a
// step far finer than the generator's own quadrature.
double dense_arc(const SegmentTruth& s) {
    const double k = 2.0 * M_PI / s.period;
    const int n = 200000;
    const double h = s.base_length / n;
    double total = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double t = i * h;
        const double d = s.amplitude * k * std::cos(k * t);
        const double f = std::sqrt(1.0 + d * d);
        total += (i == 0 || i == n) ? 0.5 * f : f;
    }
    return total * h;
}

}  // namespace

TEST_CASE("a single straight generation is a bar of the drawn length") {
    TreeSpec spec;
    spec.generations = 1;
    spec.length_min = spec.length_max = 100.0;
    const auto scene = generate(spec);
    REQUIRE(scene.truth.segments.size() == 1);
    const auto& s = scene.truth.segments[0];
    CHECK(s.arc_length == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(s.chord_length == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(scene.truth.junction_count == 0);
    CHECK(scene.truth.terminal_count == 1);
    // Round-capped 8 px bar from x=40 to x=140 on row 256.
    CHECK(scene.mask.at(40, 256) == 1);
    CHECK(scene.mask.at(140, 256) == 1);
    CHECK(scene.mask.at(90, 252) == 1);
    CHECK(scene.mask.at(90, 260) == 1);
    CHECK(scene.mask.at(90, 261) == 0);
    CHECK(scene.mask.at(145, 256) == 0);
}

TEST_CASE("three symmetric generations give the forced topology") {
    const auto scene = generate(TreeSpec{});
    const auto& gt = scene.truth;
    CHECK(gt.segments.size() == 7);
    CHECK(gt.junction_count == 3);
    CHECK(gt.terminal_count == 4);
    CHECK(gt.depth == 3);
    CHECK(gt.segments[0].strahler == 3);

    const auto graph = build_graph(skeletonize(scene.mask));
    int junctions = 0, tips = 0;
    for (const auto& n : graph.nodes) {
        junctions += n.degree >= 3;
        tips += n.degree == 1;
    }
    CHECK(junctions == 3);
    CHECK(tips == 5);  // four leaves plus the root start
    int root_strahler = 0, max_level = 0;
    for (const auto& e : graph.edges) {
        root_strahler = std::max(root_strahler, e.strahler);
        max_level = std::max(max_level, e.level);
    }
    CHECK(root_strahler == 3);
    CHECK(max_level == 2);
}

TEST_CASE("generation is deterministic for a fixed seed") {
    const auto spec = oracle_scene_spec(5);
    const auto a = generate(spec);
    const auto b = generate(spec);
    CHECK(a.mask == b.mask);
    CHECK(a.image == b.image);
    CHECK(a.truth.to_json() == b.truth.to_json());
    auto other = spec;
    other.seed = 6;
    CHECK_FALSE(generate(other).image == a.image);
}

TEST_CASE("ground-truth arc lengths match dense quadrature within 0.1%") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto scene = generate(oracle_scene_spec(seed));
        for (const auto& s : scene.truth.segments) REQUIRE(std::abs(s.arc_length - dense_arc(s)) <= 1e-3 * dense_arc(s));
    }
}

TEST_CASE("the rasterized mask covers every analytic polyline") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto scene = generate(oracle_scene_spec(seed));
        for (const auto& s : scene.truth.segments)
            for (const auto& p : s.polyline) REQUIRE(scene.mask.at(int(std::lround(p.x)), int(std::lround(p.y))) == 1);
    }
}

TEST_CASE("image renders bright vessels on a dark noisy background") {
    const auto scene = generate(oracle_scene_spec(3));
    double fg = 0, bg = 0, nfg = 0, nbg = 0, bg2 = 0;
    for (std::size_t i = 0; i < scene.mask.bits.size(); ++i) {
        const double v = scene.image.pixels[i];
        if (scene.mask.bits[i]) fg += v, ++nfg;
        else bg += v, bg2 += v * v, ++nbg;
    }
    CHECK(fg / nfg == doctest::Approx(200.0).epsilon(0.01));
    CHECK(bg / nbg == doctest::Approx(30.0).epsilon(0.01));
    const double sd = std::sqrt(bg2 / nbg - (bg / nbg) * (bg / nbg));
    CHECK(sd == doctest::Approx(8.0).epsilon(0.05));
}

TEST_CASE("oracle scenes recover junction and terminal counts through the graph") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto scene = generate(oracle_scene_spec(seed));
        const auto graph = build_graph(skeletonize(scene.mask));
        int junctions = 0, tips = 0;
        for (const auto& n : graph.nodes) {
            junctions += n.degree >= 3;
            tips += n.degree == 1;
        }
        CAPTURE(seed);
        CHECK(junctions == scene.truth.junction_count);
        CHECK(tips == scene.truth.endpoint_count);
    }
}

TEST_CASE("canvas clipping truncates instead of overflowing") {
    TreeSpec spec;
    spec.width = 128;
    spec.height = 128;
    spec.root_x = 20;
    spec.root_y = 64;
    spec.generations = 2;
    spec.length_min = spec.length_max = 200;
    const auto scene = generate(spec);
    REQUIRE(scene.truth.segments.size() == 1);
    CHECK(scene.truth.segments[0].truncated);
    for (int y = 0; y < 128; ++y) CHECK(scene.mask.at(127, y) == 0);
}

TEST_CASE("specs with nothing on canvas or invalid fields are rejected") {
    TreeSpec off;
    off.root_x = -50;
    CHECK_THROWS_AS(generate(off), Error);
    TreeSpec thin;
    thin.root_width = 2.0;
    thin.taper = 0.5;
    CHECK_THROWS_AS(generate(thin), Error);
    CHECK_THROWS_AS(tree_spec_from_json(R"({"generations": 2, "bogus": 1})"), Error);
}

TEST_CASE("tree spec JSON round-trips") {
    const auto spec = oracle_scene_spec(9);
    const auto back = tree_spec_from_json(tree_spec_to_json(spec));
    CHECK(tree_spec_to_json(back) == tree_spec_to_json(spec));
    CHECK(generate(back).mask == generate(spec).mask);
}

TEST_CASE("perturb is the identity at zero rates and empties at full dropout") {
    const auto mask = generate(TreeSpec{}).mask;
    CHECK(perturb(mask, {0.0, 0.0, 1}) == mask);
    CHECK(perturb(mask, {1.0, 0.0, 1}).count() == 0);
    CHECK(perturb(mask, {0.3, 0.1, 4}) == perturb(mask, {0.3, 0.1, 4}));
    CHECK_THROWS_AS(perturb(mask, {1.5, 0.0, 1}), Error);
}

TEST_CASE("dropout 0.3 lands Dice in the pinned band over 50 seeds") {
    const auto mask = generate(oracle_scene_spec(1)).mask;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const double d = dice(perturb(mask, {0.3, 0.0, seed}), mask);
        CAPTURE(seed);
        CHECK(d > 0.4);
        CHECK(d < 0.95);
    }
}

TEST_CASE("scene bundles carry image, mask and truth") {
    const auto dir = std::filesystem::temp_directory_path() / "chv_synth_bundle";
    std::filesystem::remove_all(dir);
    const auto scene = generate(TreeSpec{});
    write_scene_bundle(scene, dir);
    CHECK(read_mask(dir / "mask.png") == scene.mask);
    CHECK(read_image(dir / "image.png") == scene.image);
    const auto doc = nlohmann::json::parse(std::string(
        [&] { auto b = read_file_bytes(dir / "truth.json"); return std::string(b.begin(), b.end()); }()));
    CHECK(doc["schema"] == "gtruth/1");
    CHECK(doc["junction_count"] == 3);
    CHECK(doc["segments"].size() == 7);
    std::filesystem::remove_all(dir);
}
