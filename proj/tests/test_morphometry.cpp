#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>

#include "chorovessel/error.hpp"
#include "chorovessel/morphometry.hpp"
#include "chorovessel/synth.hpp"
#include "support/oracle_scene.hpp"
#include "support/shapes.hpp"

using namespace chorovessel;

namespace {

const GraphEdge& only_edge(const VesselGraph& g) {
    REQUIRE(g.edges.size() == 1);
    return g.edges[0];
}

TreeSpec two_child_spec(double a, double b) {
    TreeSpec s;
    s.width = 400;
    s.height = 400;
    s.root_x = 30;
    s.root_y = 200;
    s.generations = 2;
    s.length_min = 140;
    s.length_max = 140;
    s.child_angles_deg = {a, b};
    s.root_width = 8;
    s.taper = 0.75;
    return s;
}

JunctionMetrics single_junction(const Mask& mask) {
    const auto g = build_graph(skeletonize(mask));
    const auto js = branching_metrics(g);
    REQUIRE(js.size() == 1);
    REQUIRE(js[0].branching_angle);
    return js[0];
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
    return h;
}

}  // namespace

TEST_CASE("straight segment is untortuous") {
    const auto mask = oracle::straight_line();
    const auto g = build_graph(skeletonize(mask));
    const auto m = segment_metrics(g, only_edge(g));
    CHECK(m.arc_length == doctest::Approx(100.0));
    REQUIRE(m.tortuosity);
    CHECK(*m.tortuosity == doctest::Approx(1.0));
    CHECK(m.curve_angle == doctest::Approx(0.0));
    CHECK(m.inflection_count == 0);
    REQUIRE(m.tortuosity_density);
    CHECK(*m.tortuosity_density == doctest::Approx(0.0));
    REQUIRE(m.inflection_tortuosity);
    CHECK(*m.inflection_tortuosity == doctest::Approx(1.0));
}

TEST_CASE("rasterized semicircle has tortuosity pi/2") {
    const auto mask = oracle::semicircle();
    const auto g = build_graph(skeletonize(mask));
    const auto m = segment_metrics(g, only_edge(g));
    REQUIRE(m.tortuosity);
    CHECK(std::abs(*m.tortuosity - std::numbers::pi / 2) <= 0.01 * std::numbers::pi / 2);
    CHECK(m.inflection_count == 0);
    CHECK(m.curve_angle == doctest::Approx(180.0).epsilon(0.1));
}

TEST_CASE("sine curve inflections and arc length") {
    auto curve = [](double t) {
        const double x = 200 * t;
        return PointF{10 + x, 30 + 10 * std::sin(2 * std::numbers::pi * x / 100)};
    };
    // One pixel per column: slope stays below 1, so this is an 8-connected digital curve.
    Mask mask(230, 60);
    for (int x = 0; x <= 200; ++x) mask.at(10 + x, int(std::lround(curve(x / 200.0).y))) = 1;
    const auto g = build_graph(skeletonize(mask));
    const auto m = segment_metrics(g, only_edge(g));
    CHECK(std::abs(m.inflection_count - 3) <= 1);

    // Dense trapezoid integration of sqrt(1 + y'^2).
    const int n = 200000;
    double oracle = 0.0;
    for (int i = 0; i < n; ++i) {
        auto speed = [](double x) {
            const double d = 10 * 2 * std::numbers::pi / 100 * std::cos(2 * std::numbers::pi * x / 100);
            return std::sqrt(1 + d * d);
        };
        const double x0 = 200.0 * i / n, x1 = 200.0 * (i + 1) / n;
        oracle += 0.5 * (speed(x0) + speed(x1)) * (x1 - x0);
    }
    CHECK(std::abs(m.arc_length - oracle) <= 0.02 * oracle);
    REQUIRE(m.tortuosity_density);
    CHECK(*m.tortuosity_density > 0.0);
}

TEST_CASE("box-count dimension of a line and a filled square") {
    const Mask line = oracle::horizontal_line(256, 100);
    const auto d1 = box_count_dimension(line, image_box_sizes(256, 256));
    REQUIRE(d1);
    CHECK(std::abs(*d1 - 1.0) <= 0.1);

    const Mask square = oracle::filled_square(256, 64, 192);
    const auto d2 = box_count_dimension(square, image_box_sizes(256, 256));
    REQUIRE(d2);
    CHECK(std::abs(*d2 - 2.0) <= 0.1);

    CHECK_FALSE(box_count_dimension(Mask(256, 256), image_box_sizes(256, 256)));
    CHECK_THROWS_AS(box_count_dimension(line, {0, 2}), Error);
}

TEST_CASE("symmetric Y branching") {
    const auto scene = generate(two_child_spec(45, -45));
    const auto j = single_junction(scene.mask);
    CHECK(std::abs(*j.branching_angle - 90.0) <= 2.0);
    REQUIRE(j.angular_asymmetry);
    CHECK(*j.angular_asymmetry <= 2.0);
    REQUIRE(j.asymmetry_ratio);
    CHECK(std::abs(*j.asymmetry_ratio - 1.0) <= 0.05);
}

TEST_CASE("children at 30 and 60 degrees") {
    const auto scene = generate(two_child_spec(30, -60));
    REQUIRE(scene.truth.junctions.size() == 1);
    const auto& jt = scene.truth.junctions[0];
    REQUIRE(jt.child_offsets_deg.size() == 2);
    CHECK(jt.child_offsets_deg[0] == doctest::Approx(30.0));
    CHECK(jt.child_offsets_deg[1] == doctest::Approx(-60.0));
    const auto j = single_junction(scene.mask);
    REQUIRE(j.angular_asymmetry);
    CHECK(std::abs(*j.angular_asymmetry - 30.0) <= 3.0);
    REQUIRE(j.asymmetry_ratio);
    CHECK(std::abs(*j.asymmetry_ratio - 0.5) <= 0.05);
    CHECK(std::abs(*j.branching_angle - 90.0) <= 3.0);
}

TEST_CASE("a bend is not a junction") {
    Mask m(100, 100);
    for (int i = 20; i < 80; ++i) m.at(i - 10, 20) = 1, m.at(69, i) = 1;
    CHECK(branching_metrics(build_graph(skeletonize(m))).empty());
}

TEST_CASE("image scalars on trivial masks") {
    const Mask empty(64, 64);
    const auto r0 = image_metrics("empty", empty, build_graph(skeletonize(empty)));
    CHECK(*r0.get("vessel_area_density") == 0.0);
    CHECK(*r0.get("vessel_skeleton_density") == 0.0);
    CHECK(*r0.get("branching_density") == 0.0);
    CHECK_FALSE(r0.get("fractal_dimension"));
    for (const auto& name : consolidated_metric_names())
        for (const char* st : {"_mean", "_sd", "_max", "_min"}) CHECK_FALSE(r0.get(name + st));

    Mask full(64, 64);
    for (auto& b : full.bits) b = 1;
    const auto r1 = image_metrics("full", full, build_graph(skeletonize(full)));
    CHECK(*r1.get("vessel_area_density") == 1.0);
    CHECK(*r1.get("vessel_skeleton_density") > 0.0);
    CHECK(*r1.get("vessel_skeleton_density") <= 1.0);

    CHECK_THROWS_AS(image_metrics("x", Mask(10, 10), build_graph(skeletonize(full))), Error);
    CHECK_THROWS_AS(r1.get("no_such_metric"), Error);
}

TEST_CASE("branching density on a five-junction tree") {
    // Long segments on the oracle canvas get clipped, so some trees keep 5 forks.
    bool found = false;
    for (std::uint64_t seed = 1; seed <= 60 && !found; ++seed) {
        auto spec = oracle_scene_spec(seed);
        spec.length_min = 340;
        spec.length_max = 420;
        const auto scene = generate(spec);
        if (scene.truth.junction_count != 5) continue;
        found = true;
        const auto g = build_graph(skeletonize(scene.mask));
        int forks = 0;
        for (const auto& n : g.nodes) forks += n.degree >= 3;
        CHECK(forks == 5);
        const auto row = image_metrics("s", scene.mask, g);
        CHECK(*row.get("branching_density") == doctest::Approx(1e6 * 5 / (1024.0 * 1024.0)).epsilon(1e-12));
        CHECK(*row.get("branching_density") == doctest::Approx(4.768).epsilon(1e-3));
    }
    CHECK(found);
}

TEST_CASE("consolidation matches brute force") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<Value> v;
        const int n = int(rng() % 12);
        for (int i = 0; i < n; ++i) {
            if (rng() % 4 == 0) v.push_back(std::nullopt);
            else v.push_back(std::uniform_real_distribution<double>(-50, 50)(rng));
        }
        std::vector<double> present;
        for (const auto& x : v)
            if (x) present.push_back(*x);
        const auto s = consolidate(v);
        if (present.empty()) {
            CHECK_FALSE(s.mean);
            CHECK_FALSE(s.max);
            continue;
        }
        double sum = 0, lo = present[0], hi = present[0];
        for (double x : present) sum += x, lo = std::min(lo, x), hi = std::max(hi, x);
        const double mean = sum / present.size();
        CHECK(*s.mean == mean);
        CHECK(*s.min == lo);
        CHECK(*s.max == hi);
        if (present.size() < 2) {
            CHECK_FALSE(s.sd);
        } else {
            double ss = 0;
            for (double x : present) ss += (x - mean) * (x - mean);
            CHECK(*s.sd == std::sqrt(ss / (present.size() - 1)));
        }
    }
}

TEST_CASE("catalog contents and stability") {
    const auto& cat = metrics_catalog();
    auto family_of = [&](const std::string& name) -> std::string {
        for (const auto& e : cat)
            if (e.name == name) return std::string(family_name(e.family));
        return "";
    };
    CHECK(family_of("mean_caliber_mean") == "caliber");
    CHECK(family_of("strahler_mean") == "complexity");
    CHECK(family_of("arc_length_mean") == "density");
    CHECK(family_of("chord_length_max") == "density");
    CHECK(family_of("fractal_dimension") == "complexity");
    CHECK(family_of("n_terminal_points") == "complexity");
    CHECK(family_of("tortuosity_density_sd") == "tortuosity");
    CHECK(family_of("angular_asymmetry_mean") == "branching");
    CHECK(family_of("asymmetry_ratio_min") == "branching");
    CHECK(family_of("terminal_caliber_mean") == "caliber");
    CHECK(cat.size() == 6 + 4 * consolidated_metric_names().size());
    CHECK(kCatalogVersion == "morpho/1");

    std::string joined;
    for (const auto& e : cat) joined += e.name + ":" + std::string(family_name(e.family)) + "\n";
    std::string again;
    for (const auto& e : metrics_catalog()) again += e.name + ":" + std::string(family_name(e.family)) + "\n";
    CHECK(fnv1a(joined) == fnv1a(again));
    // Pinned: changing names, order or families must come with a version bump.
    CHECK(fnv1a(joined) == 10577059267470553172ull);
}

TEST_CASE("metrics csv layout") {
    ImageMetricsRow row;
    row.image_id = "img_01";
    row.values.assign(metrics_catalog().size(), std::nullopt);
    row.values[0] = 0.25;
    row.values[1] = 1.0 / 3.0;
    const auto csv = metrics_csv({row});
    CHECK(csv.find('\r') == std::string::npos);
    const auto header = csv.substr(0, csv.find('\n'));
    CHECK(header.rfind("image_id,vessel_area_density,", 0) == 0);
    CHECK(std::count(header.begin(), header.end(), ',') == int(metrics_catalog().size()));
    const auto line = csv.substr(header.size() + 1);
    CHECK(line.rfind("img_01,0.25,0.3333333333,,", 0) == 0);
    CHECK(line.back() == '\n');
    row.image_id = "a,b";
    CHECK_THROWS_AS(metrics_csv({row}), Error);
}

TEST_CASE("per-segment invariants on synth scenes") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto scene = generate(oracle_scene_spec(seed));
        const auto g = build_graph(skeletonize(scene.mask));
        for (const auto& e : g.edges) {
            const auto m = segment_metrics(g, e);
            if (m.tortuosity) CHECK(*m.tortuosity >= 1.0 - 1e-9);
            CHECK(m.caliber_range == doctest::Approx(m.max_caliber - m.min_caliber));
            CHECK(m.arc_length >= 0);
            CHECK(m.chord_length <= m.arc_length + 1e-9);
            if (m.fractal_tortuosity) {
                CHECK(*m.fractal_tortuosity >= 1.0);
                CHECK(*m.fractal_tortuosity <= 2.0);
            }
            CHECK(m.terminal_caliber.has_value() == m.is_terminal);
        }
        const auto row = image_metrics("s", scene.mask, g);
        for (const char* d : {"vessel_area_density", "vessel_skeleton_density"}) {
            CHECK(*row.get(d) >= 0.0);
            CHECK(*row.get(d) <= 1.0);
        }
    }
}

namespace {

struct ScaledPair {
    ImageMetricsRow a, b;
};

ScaledPair scaled_pair(std::uint64_t seed) {
    TreeSpec a;
    a.width = a.height = 512;
    a.root_x = 30;
    a.root_y = 256;
    a.generations = 3;
    a.length_min = 90;
    a.length_max = 120;
    a.child_angles_deg = {40, -40};
    a.angle_jitter_deg = 8;
    a.root_width = 8;
    a.taper = 0.75;
    a.wiggle_amplitude = 3;
    a.wiggle_period = 90;
    a.clearance = 6;
    a.margin = 6;
    a.seed = seed;
    TreeSpec b = a;
    for (int* v : {&b.width, &b.height}) *v *= 2;
    for (double* v : {&b.root_x, &b.root_y, &b.length_min, &b.length_max, &b.root_width, &b.wiggle_amplitude,
                      &b.wiggle_period, &b.clearance, &b.margin})
        *v *= 2;
    const auto sa = generate(a), sb = generate(b);
    REQUIRE(sa.truth.segments.size() == sb.truth.segments.size());
    return {image_metrics("a", sa.mask, build_graph(skeletonize(sa.mask))),
            image_metrics("b", sb.mask, build_graph(skeletonize(sb.mask)))};
}

ScaledPair rotated_pair(std::uint64_t seed) {
    const auto scene = generate(oracle_scene_spec(seed));
    const Mask& m = scene.mask;
    Mask r(m.height, m.width);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) r.at(m.height - 1 - y, x) = m.at(x, y);
    return {image_metrics("a", m, build_graph(skeletonize(m))), image_metrics("b", r, build_graph(skeletonize(r)))};
}

bool within_rel(double x, double y, double tol) { return std::abs(x - y) <= tol * std::max(std::abs(x), std::abs(y)); }

}  // namespace

TEST_CASE("scale covariance: lengths, mean caliber, shape and counts") {
    for (std::uint64_t seed = 3; seed <= 4; ++seed) {
        const auto [ra, rb] = scaled_pair(seed);
        CAPTURE(seed);
        for (std::string name : {"arc_length_mean", "chord_length_mean", "mean_caliber_mean"}) {
            CAPTURE(name);
            CHECK(std::abs(*rb.get(name) / *ra.get(name) - 2.0) <= 0.06);
        }
        for (std::string name : {"tortuosity_mean", "fractal_tortuosity_mean"}) {
            CAPTURE(name);
            CHECK(std::abs(*rb.get(name) - *ra.get(name)) <= 0.05);
        }
        for (std::string name : {"strahler_max", "strahler_mean", "level_max", "level_mean", "n_terminal_points"}) {
            CAPTURE(name);
            CHECK(*rb.get(name) == *ra.get(name));
        }
    }
}

// Known to fail: calibers are 2x a lattice distance, so a 4.5 px vessel reads 4 or
// 6 and its maximum does not double; branch directions use a fixed 45 px window,
// which sees a different part of a scaled wiggle.
TEST_CASE("scale covariance: max caliber and asymmetry ratio" * doctest::may_fail()) {
    for (std::uint64_t seed = 3; seed <= 4; ++seed) {
        const auto [ra, rb] = scaled_pair(seed);
        CAPTURE(seed);
        CHECK(std::abs(*rb.get("max_caliber_mean") / *ra.get("max_caliber_mean") - 2.0) <= 0.06);
        CHECK(std::abs(*rb.get("asymmetry_ratio_mean") - *ra.get("asymmetry_ratio_mean")) <= 0.05);
    }
}

TEST_CASE("rotation by 90 degrees: scalars, counts and mean geometry") {
    const auto [a, b] = rotated_pair(7);
    for (std::string name : {"n_terminal_points", "n_components", "strahler_max", "strahler_mean", "level_max",
                             "level_mean", "vessel_area_density"}) {
        CAPTURE(name);
        CHECK(*a.get(name) == *b.get(name));
    }
    for (std::string name : {"vessel_skeleton_density", "branching_density", "fractal_dimension", "arc_length_mean",
                             "chord_length_mean", "mean_caliber_mean", "tortuosity_mean", "surface_area_mean",
                             "length_diameter_ratio_mean", "branching_angle_mean"}) {
        CAPTURE(name);
        CHECK(within_rel(*a.get(name), *b.get(name), 0.02));
    }
}

// Known to fail: thinning is not 90-degree equivariant, and turn-based metrics,
// inflection counts and per-image extremes react to single-pixel skeleton changes.
TEST_CASE("rotation by 90 degrees: every catalog metric" * doctest::may_fail()) {
    const auto [a, b] = rotated_pair(7);
    const auto& cat = metrics_catalog();
    for (std::size_t i = 0; i < cat.size(); ++i) {
        CAPTURE(cat[i].name);
        CHECK(a.values[i].has_value() == b.values[i].has_value());
        if (a.values[i] && b.values[i]) CHECK(within_rel(*a.values[i], *b.values[i], 0.02));
    }
}

TEST_CASE("oracle scenes: arc, caliber, angle and counts") {
    const auto t0 = std::chrono::steady_clock::now();
    double arc = 0, cal = 0, ang = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto scene = generate(oracle_scene_spec(seed));
        const auto c = oracle::check_scene(scene);
        CAPTURE(seed);
        for (const auto& n : c.notes) MESSAGE(n);
        CHECK(c.count_mismatches == 0);
        arc = std::max(arc, c.arc_rel_error);
        cal = std::max(cal, c.worst_caliber_error);
        ang = std::max(ang, c.worst_angle_error);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    MESSAGE("worst arc " << arc << " caliber " << cal << " angle " << ang << " in " << secs << " s");
    CHECK(arc <= 0.02);
    CHECK(cal <= 1.0);
    CHECK(ang <= 3.0);
    CHECK(secs < 60.0);
}
