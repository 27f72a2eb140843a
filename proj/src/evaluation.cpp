#include "chorovessel/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <random>

#include "chorovessel/error.hpp"
#include "chorovessel/parallel.hpp"

namespace chorovessel {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) { return den == 0 ? 1.0 : double(num) / double(den); }

void same_dims(int w1, int h1, int w2, int h2, const char* what) {
    if (w1 != w2 || h1 != h2)
        input_error(std::string(what) + ": dimension mismatch " + std::to_string(w1) + "x" + std::to_string(h1) +
                    " vs " + std::to_string(w2) + "x" + std::to_string(h2));
}

// Vessel and background probabilities of one image, each sorted ascending.
struct Ranked {
    std::vector<float> pos, neg;
};

Ranked rank(const ProbabilityGrid& grid, const Mask& truth) {
    Ranked r;
    for (std::size_t i = 0; i < truth.bits.size(); ++i) (truth.bits[i] ? r.pos : r.neg).push_back(grid.values[i]);
    std::sort(r.pos.begin(), r.pos.end());
    std::sort(r.neg.begin(), r.neg.end());
    return r;
}

// Twice the number of (pos, neg) pairs with pos ranked above neg, ties counting one.
std::uint64_t twice_concordant(const std::vector<float>& pos, const std::vector<float>& neg) {
    std::uint64_t sum = 0;
    std::size_t lt = 0, le = 0;
    for (float a : pos) {
        while (lt < neg.size() && neg[lt] < a) ++lt;
        if (le < lt) le = lt;
        while (le < neg.size() && neg[le] <= a) ++le;
        sum += 2 * lt + (le - lt);
    }
    return sum;
}

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double h = q * double(v.size() - 1);
    const auto k = static_cast<std::size_t>(std::floor(h));
    if (k + 1 >= v.size()) return v.back();
    return v[k] + (h - double(k)) * (v[k + 1] - v[k]);
}

Estimate estimate(double point, const std::vector<double>& reps) {
    Estimate e{point, point, point};
    if (reps.empty()) return e;
    // Percentile bounds can miss a skewed pooled point; widen so lo <= point <= hi.
    e.lo = std::min(percentile(reps, 0.025), point);
    e.hi = std::max(percentile(reps, 0.975), point);
    return e;
}

}  // namespace

double ConfusionCounts::sensitivity() const { return ratio(tp, tp + fn); }
double ConfusionCounts::specificity() const { return ratio(tn, tn + fp); }
double ConfusionCounts::accuracy() const { return ratio(tp + tn, total()); }
double ConfusionCounts::dice() const { return ratio(2 * tp, 2 * tp + fp + fn); }
double ConfusionCounts::f1() const { return dice(); }

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
}

ConfusionCounts confusion(const Mask& pred, const Mask& truth) {
    same_dims(pred.width, pred.height, truth.width, truth.height, "confusion");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.bits.size(); ++i) {
        const bool p = pred.bits[i], t = truth.bits[i];
        if (p && t) ++c.tp;
        else if (p) ++c.fp;
        else if (t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double dice(const Mask& a, const Mask& b) { return confusion(a, b).dice(); }

double auc(const ProbabilityGrid& grid, const Mask& truth) {
    same_dims(grid.width, grid.height, truth.width, truth.height, "auc");
    const Ranked r = rank(grid, truth);
    if (r.pos.empty() || r.neg.empty()) input_error("auc: truth needs both vessel and background pixels");
    return double(twice_concordant(r.pos, r.neg)) / (2.0 * double(r.pos.size()) * double(r.neg.size()));
}

EvalReport bootstrap_report(const std::vector<EvalPair>& pairs, const BootstrapOptions& opt) {
    if (pairs.empty()) input_error("bootstrap_report: no image pairs");
    if (opt.n_boot < 1) input_error("bootstrap_report: n_boot must be >= 1");
    const std::size_t n = pairs.size();
    const bool with_prob = pairs.front().prob.has_value();
    std::vector<ConfusionCounts> counts(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (pairs[i].prob.has_value() != with_prob)
            input_error("bootstrap_report: probability maps must be given for all pairs or none");
        counts[i] = confusion(pairs[i].pred, pairs[i].truth);
    }

    // Pairwise concordance between images: pooled AUC of any resample is a
    // weighted sum of these, so replicates never re-sort pixels.
    std::vector<std::uint64_t> cross;  // n*n, row = positives' image
    std::vector<std::uint64_t> npos(n), nneg(n);
    if (with_prob) {
        std::vector<Ranked> ranked(n);
        parallel_for(n, opt.threads, [&](std::size_t i) {
            same_dims(pairs[i].prob->width, pairs[i].prob->height, pairs[i].truth.width, pairs[i].truth.height,
                      "bootstrap_report");
            ranked[i] = rank(*pairs[i].prob, pairs[i].truth);
        });
        for (std::size_t i = 0; i < n; ++i) npos[i] = ranked[i].pos.size(), nneg[i] = ranked[i].neg.size();
        cross.assign(n * n, 0);
        parallel_for(n * n, opt.threads,
                     [&](std::size_t k) { cross[k] = twice_concordant(ranked[k / n].pos, ranked[k % n].neg); });
    }
    auto pooled_auc = [&](const std::vector<std::uint32_t>& w) -> std::optional<double> {
        double conc = 0, p = 0, q = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!w[i]) continue;
            p += double(w[i]) * double(npos[i]);
            q += double(w[i]) * double(nneg[i]);
            for (std::size_t j = 0; j < n; ++j)
                if (w[j]) conc += double(w[i]) * double(w[j]) * double(cross[i * n + j]);
        }
        if (p == 0 || q == 0) return std::nullopt;
        return conc / (2.0 * p * q);
    };

    EvalReport rep;
    rep.n_images = static_cast<int>(n);
    rep.n_boot = opt.n_boot;
    rep.seed = opt.seed;
    for (const auto& c : counts) rep.pooled += c;

    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::vector<std::uint32_t>> weights(static_cast<std::size_t>(opt.n_boot), std::vector<std::uint32_t>(n, 0));
    for (auto& w : weights)
        for (std::size_t k = 0; k < n; ++k) ++w[pick(rng)];

    const auto B = static_cast<std::size_t>(opt.n_boot);
    std::vector<double> d(B), f(B), acc(B), sen(B), spe(B), a(B);
    std::vector<std::uint8_t> a_ok(B, 0);
    parallel_for(B, opt.threads, [&](std::size_t b) {
        ConfusionCounts c;
        for (std::size_t i = 0; i < n; ++i)
            for (std::uint32_t r = 0; r < weights[b][i]; ++r) c += counts[i];
        d[b] = c.dice();
        f[b] = c.f1();
        acc[b] = c.accuracy();
        sen[b] = c.sensitivity();
        spe[b] = c.specificity();
        if (with_prob)
            if (const auto v = pooled_auc(weights[b])) a[b] = *v, a_ok[b] = 1;
    });

    rep.dice = estimate(rep.pooled.dice(), d);
    rep.f1 = estimate(rep.pooled.f1(), f);
    rep.accuracy = estimate(rep.pooled.accuracy(), acc);
    rep.sensitivity = estimate(rep.pooled.sensitivity(), sen);
    rep.specificity = estimate(rep.pooled.specificity(), spe);
    if (with_prob) {
        if (const auto point = pooled_auc(std::vector<std::uint32_t>(n, 1))) {
            std::vector<double> ok;
            for (std::size_t b = 0; b < B; ++b)
                if (a_ok[b]) ok.push_back(a[b]);
            rep.auc_replicates = static_cast<int>(ok.size());
            rep.auc = estimate(*point, ok);
        }
    }
    return rep;
}

namespace {

struct Row {
    const char* key;
    const char* label;
    const Estimate* e;
};

std::vector<Row> report_rows(const EvalReport& r) {
    std::vector<Row> rows;
    if (r.auc) rows.push_back({"auc", "AUC", &*r.auc});
    rows.push_back({"f1_score", "F1-score", &r.f1});
    rows.push_back({"accuracy", "accuracy", &r.accuracy});
    rows.push_back({"sensitivity", "sensitivity", &r.sensitivity});
    rows.push_back({"specificity", "specificity", &r.specificity});
    rows.push_back({"dice", "Dice coefficient", &r.dice});
    return rows;
}

std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

}  // namespace

std::string EvalReport::to_json() const {
    nlohmann::ordered_json doc;
    doc["schema"] = "evalreport/1";
    doc["n_images"] = n_images;
    doc["n_boot"] = n_boot;
    doc["seed"] = seed;
    doc["ci_method"] = "percentile bootstrap over images, 95%, linear interpolation";
    doc["ci_method_assumed"] = true;  // the reference results do not name their interval method
    doc["pooled_counts"] = {{"tp", pooled.tp}, {"fp", pooled.fp}, {"fn", pooled.fn}, {"tn", pooled.tn}};
    nlohmann::ordered_json metrics;
    for (const auto& row : report_rows(*this)) {
        metrics[row.key] = {{"label", row.label},
                            {"value", row.e->value},
                            {"ci95", {row.e->lo, row.e->hi}},
                            {"display", std::string(row.label) + " " + fixed3(row.e->value) + " (95%CI: " +
                                            fixed3(row.e->lo) + "-" + fixed3(row.e->hi) + ")"}};
    }
    if (auc) metrics["auc"]["replicates"] = auc_replicates;
    doc["metrics"] = metrics;
    return doc.dump(2) + "\n";
}

std::string report_svg(const EvalReport& report) {
    const auto rows = report_rows(report);
    const int row_h = 28, left = 150, plot_w = 400, top = 30;
    const int height = top + row_h * static_cast<int>(rows.size()) + 40;
    auto x_of = [&](double v) { return left + v * plot_w; };
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(left + plot_w + 140) +
                      "\" height=\"" + std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    char buf[512];
    for (int t = 0; t <= 10; t += 2) {
        const double v = t / 10.0;
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.1f\" y1=\"%d\" x2=\"%.1f\" y2=\"%d\" stroke=\"#ddd\"/>"
                      "<text x=\"%.1f\" y=\"%d\" text-anchor=\"middle\">%.1f</text>\n",
                      x_of(v), top - 10, x_of(v), height - 30, x_of(v), height - 14, v);
        svg += buf;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const int y = top + row_h * static_cast<int>(i) + row_h / 2;
        const Estimate& e = *rows[i].e;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%d\" y=\"%d\" text-anchor=\"end\">%s</text>"
                      "<line x1=\"%.1f\" y1=\"%d\" x2=\"%.1f\" y2=\"%d\" stroke=\"black\" stroke-width=\"2\"/>"
                      "<circle cx=\"%.1f\" cy=\"%d\" r=\"4\"/>"
                      "<text x=\"%d\" y=\"%d\">%s (%s-%s)</text>\n",
                      left - 10, y + 4, rows[i].label, x_of(e.lo), y, x_of(e.hi), y, x_of(e.value), y,
                      left + plot_w + 10, y + 4, fixed3(e.value).c_str(), fixed3(e.lo).c_str(), fixed3(e.hi).c_str());
        svg += buf;
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace chorovessel
