// One PASS/FAIL line per acceptance criterion. Tolerances are fixed here.
//
//   acceptance [--known-fail NAME]...
//
// Exit status counts failures, except criteria named with --known-fail, which
// still print FAIL but do not change the status.

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chorovessel/error.hpp"
#include "chorovessel/evaluation.hpp"
#include "chorovessel/hitl.hpp"
#include "chorovessel/morphometry.hpp"
#include "chorovessel/stats.hpp"
#include "chorovessel/synth.hpp"
#include "support/eval_oracles.hpp"
#include "support/hitl_oracles.hpp"
#include "support/oracle_scene.hpp"
#include "support/shapes.hpp"
#include "support/stats_oracles.hpp"

using namespace chorovessel;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        static int n = 0;
        path = fs::temp_directory_path() / ("chv_accept_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void morphometry_oracle(Verdict& v) {
    const auto t0 = Clock::now();
    double arc = 0, cal = 0, ang = 0;
    int mismatches = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto c = oracle::check_scene(generate(oracle_scene_spec(seed)));
        arc = std::max(arc, c.arc_rel_error);
        cal = std::max(cal, c.worst_caliber_error);
        ang = std::max(ang, c.worst_angle_error);
        mismatches += c.count_mismatches;
    }
    const double secs = seconds_since(t0);
    v.detail << "20 scenes: worst arc " << arc * 100 << "% (<= 2%), caliber " << cal << " px (<= 1), angle " << ang
             << " deg (<= 3), count mismatches " << mismatches << ", " << secs << " s (< 60)";
    v.require(arc <= 0.02, "arc");
    v.require(cal <= 1.0, "caliber");
    v.require(ang <= 3.0, "angle");
    v.require(mismatches == 0, "counts");
    v.require(secs < 60.0, "runtime");
}

SegmentMetrics single_segment(const Mask& m) {
    const auto g = build_graph(skeletonize(m));
    if (g.edges.size() != 1) fail(ErrorKind::Internal, "expected one edge, got " + std::to_string(g.edges.size()));
    return segment_metrics(g, g.edges[0]);
}

void analytic_tortuosity(Verdict& v) {
    const auto semi = single_segment(oracle::semicircle());
    const auto line = single_segment(oracle::straight_line());
    const double half_pi = std::numbers::pi / 2;
    const double t = semi.tortuosity.value_or(NAN);
    const double rel = std::abs(t - half_pi) / half_pi;
    v.detail << "semicircle " << t << " (pi/2 within 1%: " << rel * 100 << "%), line tortuosity "
             << line.tortuosity.value_or(NAN) << ", curve angle " << line.curve_angle << ", density "
             << line.tortuosity_density.value_or(NAN) << " (exact to 1e-9)";
    v.require(rel <= 0.01, "semicircle");
    v.require(line.tortuosity && std::abs(*line.tortuosity - 1.0) <= 1e-9, "line tortuosity");
    v.require(std::abs(line.curve_angle) <= 1e-9, "curve angle");
    v.require(line.tortuosity_density && std::abs(*line.tortuosity_density) <= 1e-9, "tortuosity density");
}

void fractal_sanity(Verdict& v) {
    const auto d1 = box_count_dimension(oracle::horizontal_line(256, 100), image_box_sizes(256, 256));
    const auto d2 = box_count_dimension(oracle::filled_square(256, 64, 192), image_box_sizes(256, 256));
    v.detail << "line " << d1.value_or(NAN) << " (1 +/- 0.1), square " << d2.value_or(NAN) << " (2 +/- 0.1)";
    v.require(d1 && std::abs(*d1 - 1.0) <= 0.1, "line");
    v.require(d2 && std::abs(*d2 - 2.0) <= 0.1, "square");
}

void evaluation_equivalence(Verdict& v) {
    std::mt19937 rng(2024);
    int count_mismatch = 0, ratio_mismatch = 0;
    double worst_auc = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto truth = oracle::random_mask(rng, 64, 64, 5 + int(rng() % 60));
        const auto pred = oracle::random_mask(rng, 64, 64, 5 + int(rng() % 60));
        const auto grid = oracle::random_grid(rng, 64, 64, trial % 2 ? 7 : 100000);
        const auto t = oracle::tally(pred, truth);
        const auto c = confusion(pred, truth);
        count_mismatch += c.tp != t.tp || c.fp != t.fp || c.fn != t.fn || c.tn != t.tn;
        ratio_mismatch += c.accuracy() != double(t.tp + t.tn) / double(t.tp + t.fp + t.fn + t.tn) ||
                          c.sensitivity() != double(t.tp) / double(t.tp + t.fn) ||
                          c.specificity() != double(t.tn) / double(t.tn + t.fp) ||
                          c.dice() != double(2 * t.tp) / double(2 * t.tp + t.fp + t.fn) || c.f1() != c.dice() ||
                          dice(pred, truth) != c.dice();
        worst_auc = std::max(worst_auc, std::abs(auc(grid, truth) - oracle::pairwise_auc(grid, truth)));
    }

    // report vocabulary: AUC, F1-score, accuracy, sensitivity, specificity
    std::vector<EvalPair> pairs;
    for (int i = 0; i < 3; ++i)
        pairs.push_back({"i" + std::to_string(i), oracle::random_mask(rng, 32, 32, 30), oracle::random_mask(rng, 32, 32, 30),
                         oracle::random_grid(rng, 32, 32, 50)});
    const auto doc = nlohmann::ordered_json::parse(bootstrap_report(pairs, {200, 1, 1}).to_json());
    const std::vector<std::pair<std::string, std::string>> vocab = {{"auc", "AUC"},
                                                                    {"f1_score", "F1-score"},
                                                                    {"accuracy", "accuracy"},
                                                                    {"sensitivity", "sensitivity"},
                                                                    {"specificity", "specificity"}};
    int vocab_ok = 0;
    for (const auto& [key, label] : vocab)
        vocab_ok += doc["metrics"].contains(key) && doc["metrics"][key]["label"] == label &&
                    doc["metrics"][key]["ci95"].size() == 2;

    v.detail << "100 fuzzed 64x64: count mismatches " << count_mismatch << ", ratio mismatches " << ratio_mismatch
             << " (exact), worst AUC gap " << worst_auc << " (<= 1e-9); report vocabulary " << vocab_ok << "/5";
    v.require(count_mismatch == 0, "tallies");
    v.require(ratio_mismatch == 0, "ratios");
    v.require(worst_auc <= 1e-9, "auc");
    v.require(vocab_ok == 5, "vocabulary");
}

void statistics_oracles(Verdict& v) {
    std::mt19937_64 rng(11);
    int mc_mismatch = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 3 + int(rng() % 198);
        std::vector<double> ints(static_cast<std::size_t>(n)), reals(static_cast<std::size_t>(n));
        const int spread = 1 + int(rng() % 30);
        std::lognormal_distribution<double> skew(0.0, 0.8);
        for (int i = 0; i < n; ++i) {
            ints[std::size_t(i)] = double(int(rng() % std::uint64_t(spread)));
            reals[std::size_t(i)] = skew(rng) * (trial % 3 == 0 ? -1.0 : 1.0);
        }
        mc_mismatch += medcouple(ints) != oracle::brute_medcouple(ints);
        const double b = oracle::brute_medcouple(reals);
        mc_mismatch += std::abs(medcouple(reals) - b) > 1e-12 * std::max(1.0, std::abs(b));
    }

    std::vector<double> sym;
    for (int i = 1; i <= 21; ++i) sym.push_back(i);
    const auto f = adjusted_fences(sym);
    const double q1 = quantile(sym, 0.25), q3 = quantile(sym, 0.75);
    const bool fences_ok = f.mc == 0.0 && f.lo == q1 - 3 * (q3 - q1) && f.hi == q3 + 3 * (q3 - q1);

    const auto bh = fdr_adjust({0.01, 0.02, 0.03, 0.04, 0.05});
    bool bh_ok = bh.size() == 5;
    for (double q : bh) bh_ok = bh_ok && std::abs(q - 0.05) <= 1e-15;

    const std::array<double, 4> beta{-1, 0.7, 0.01, 0.3};
    const auto rec = oracle::logistic_recovery(2000, 100, beta);
    double worst_bias = 0;
    for (double b : rec.mean_bias) worst_bias = std::max(worst_bias, std::abs(b));
    const double cov = oracle::or_coverage(400, 200, beta, 1000);
    const auto null = oracle::null_fdr(1000, 500, 0.05, 77);

    v.detail << "medcouple vs brute force (300 samples, n<=200): " << mc_mismatch << " mismatches; MC=0 fences "
             << (fences_ok ? "= 3 IQR" : "differ") << "; BH {0.01..0.05} " << (bh_ok ? "-> all 0.05" : "wrong")
             << "; recovery worst |mean bias| " << worst_bias << " (< 0.03, " << rec.failures
             << " non-converged); coverage " << cov << " (in [0.90, 0.99]); null FDR " << null.mean_fdp
             << " (<= 0.05)";
    v.require(mc_mismatch == 0, "medcouple");
    v.require(fences_ok, "fences");
    v.require(bh_ok, "bh");
    v.require(worst_bias < 0.03 && rec.failures == 0, "recovery");
    v.require(cov >= 0.90 && cov <= 0.99, "coverage");
    v.require(null.mean_fdp <= 0.05, "null fdr");
}

void association_end_to_end(Verdict& v) {
    CohortSpec spec;  // n 400, 100 noise metrics, per-SD log-odds 0.7
    const auto res = run_association(simulate_cohort(spec));
    const AssociationResult* sig = nullptr;
    for (const auto& r : res)
        if (r.metric == "signal") sig = &r;
    if (!sig) {
        v.require(false, "signal row missing");
        return;
    }
    const auto csv = association_csv(res);
    const std::regex shape(R"(\nsignal,[^\n]*,odds ratio \[OR\] = \d+\.\d\d \[95% CI: \d+\.\d\d-\d+\.\d\d\]\n)");
    std::smatch m;
    const bool shaped = std::regex_search(csv, m, shape);
    v.detail << "signal: " << format_odds_ratio(*sig) << ", p_fdr " << sig->p_fdr.value_or(NAN)
             << (sig->significant ? ", significant" : ", not significant") << " (OR in [1.6, 2.6]); CSV report field "
             << (shaped ? "matches" : "missing");
    v.require(sig->significant, "significance");
    v.require(sig->odds_ratio >= 1.6 && sig->odds_ratio <= 2.6, "odds ratio");
    v.require(shaped, "csv shape");
}

void hitl_loop(Verdict& v) {
    const auto t0 = Clock::now();
    int violations = 0;
    std::vector<std::uint64_t> bad;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        TempDir tmp("loop");
        LoopSimSpec spec;  // 3 rounds, fidelity 1
        spec.seed = seed;
        const auto r = run_loop_sim(spec, tmp.path);
        if (!r.dice_non_decreasing || !r.effort_strictly_decreasing) {
            ++violations;
            bad.push_back(seed);
        }
    }
    const double secs = seconds_since(t0);
    v.detail << "20 seeds x 3 rounds: " << violations << " violating seeds";
    if (!bad.empty()) {
        v.detail << " (";
        for (std::size_t i = 0; i < bad.size(); ++i) v.detail << (i ? "," : "") << bad[i];
        v.detail << ")";
    }
    v.detail << ", " << secs << " s (< 300)";
    v.require(violations == 0, "monotonicity");
    v.require(secs < 300.0, "runtime");
}

void replay_determinism(Verdict& v) {
    TempDir tmp("replay");
    auto p = Project::create(tmp.path, "replay");
    GrayImage img(64, 64, 20);
    Mask truth(64, 64);
    for (int x = 4; x < 60; ++x)
        for (int y = 30; y <= 32; ++y) img.at(x, y) = 220, truth.at(x, y) = 1;
    p->add_image("img0", img, "", "standard", &truth);
    p->start_round({"img0"});
    const Mask prop = p->proposal("img0");
    std::mt19937_64 rng(3);
    int mismatches = 0, oracle_mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto log = oracle::random_log(rng, 64, 64, 1 + int(rng() % 12));
        const Mask a = apply_events(prop, log);
        const Mask b = apply_events(Mask(prop), std::vector<EditEvent>(log));
        mismatches += a != b;
        if (i < 50) oracle_mismatches += a != oracle::naive_replay(prop, log);
    }
    const auto log = oracle::random_log(rng, 64, 64, 8);
    const auto rev = p->append_events("img0", log, 0);
    const Mask good = apply_events(prop, log);
    int rejected = 0;
    for (int k = 0; k < 100; ++k) {
        Mask bad = good;
        bad.bits[rng() % bad.bits.size()] ^= 1;
        try {
            p->submit_correction("img0", bad, 0, rev);
        } catch (const Error& e) {
            rejected += e.kind() == ErrorKind::Input && std::string(e.what()).find("replay mismatch") != std::string::npos;
        }
    }
    const bool accepted = p->submit_correction("img0", good, 1000, rev).status == ImageStatus::Corrected;
    v.detail << "1000 logs: " << mismatches << " replay mismatches, " << oracle_mismatches
             << " vs float oracle (first 50); tampered masks rejected " << rejected << "/100; untampered "
             << (accepted ? "accepted" : "rejected");
    v.require(mismatches == 0, "determinism");
    v.require(oracle_mismatches == 0, "oracle");
    v.require(rejected == 100, "tamper");
    v.require(accepted, "accept");
}

void persistence(Verdict& v) {
    TempDir tmp("persist");
    auto p = Project::create(tmp.path, "persist");
    int steps = 0, unequal = 0;
    std::string first_bad;
    oracle::scripted_session(*p, [&](const std::string& step) {
        ++steps;
        if (!(*Project::open(tmp.path)->snapshot() == *p->snapshot())) {
            if (!unequal++) first_bad = step;
        }
    });
    v.detail << steps << " operations over 2 rounds, reload differs after " << unequal;
    if (unequal) v.detail << " (first: " << first_bad << ")";
    v.require(steps == 14, "script");
    v.require(unequal == 0, "deep equality");
}

}  // namespace

int main(int argc, char** argv) {
    std::set<std::string> known;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--known-fail" && i + 1 < argc) {
            known.insert(argv[++i]);
        } else {
            std::fprintf(stderr, "usage: %s [--known-fail NAME]...\n", argv[0]);
            return 64;
        }
    }
    const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria = {
        {"morphometry_oracle", morphometry_oracle},
        {"analytic_tortuosity", analytic_tortuosity},
        {"fractal_sanity", fractal_sanity},
        {"evaluation_equivalence", evaluation_equivalence},
        {"statistics_oracles", statistics_oracles},
        {"association_end_to_end", association_end_to_end},
        {"hitl_loop_monotone", hitl_loop},
        {"replay_determinism", replay_determinism},
        {"persistence", persistence},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Verdict v;
        try {
            run(v);
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail << " [exception: " << e.what() << "]";
        }
        const bool excused = !v.pass && known.count(name);
        std::printf("%s %s: %s%s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.str().c_str(),
                    excused ? " (known failure, see README)" : "");
        std::fflush(stdout);
        failed += !v.pass && !excused;
    }
    return failed;
}
