#include "chorovessel/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "chorovessel/error.hpp"
#include "chorovessel/parallel.hpp"

namespace chorovessel {

void AnalysisTable::validate() const {
    std::set<std::string> seen;
    for (const auto& n : metric_names) {
        if (n.empty()) input_error("analysis table: empty metric name");
        if (!seen.insert(n).second) input_error("analysis table: duplicate metric '" + n + "'");
    }
    for (const auto& r : rows) {
        if (r.outcome != 0 && r.outcome != 1) input_error("analysis table: row '" + r.id + "' outcome must be 0 or 1");
        if (!(r.age > 0.0) || !std::isfinite(r.age)) input_error("analysis table: row '" + r.id + "' age must be > 0");
        if (r.sex != 0 && r.sex != 1) input_error("analysis table: row '" + r.id + "' sex must be 0 or 1");
        if (r.metrics.size() != metric_names.size())
            input_error("analysis table: row '" + r.id + "' has " + std::to_string(r.metrics.size()) + " metrics, expected " +
                        std::to_string(metric_names.size()));
        for (const auto& v : r.metrics)
            if (v && !std::isfinite(*v)) input_error("analysis table: row '" + r.id + "' has a non-finite value");
    }
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cell);
            cell.clear();
        } else {
            cell += c;
        }
    }
    out.push_back(cell);
    return out;
}

double parse_number(const std::string& s, int line, const std::string& column) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
        input_error("analysis csv line " + std::to_string(line) + ": bad number '" + s + "' in column " + column);
    return v;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string num10(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

AnalysisTable read_analysis_csv(const std::string& text) {
    if (text.find('"') != std::string::npos) input_error("analysis csv: quoted fields are not supported");
    std::istringstream in(text);
    std::string line;
    AnalysisTable t;
    int lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split(line);
        if (!header) {
            if (cells.size() < 4 || cells[0] != "id" || cells[1] != "outcome" || cells[2] != "age" || cells[3] != "sex")
                input_error("analysis csv: header must start with id,outcome,age,sex");
            t.metric_names.assign(cells.begin() + 4, cells.end());
            header = true;
            continue;
        }
        if (cells.size() != t.metric_names.size() + 4)
            input_error("analysis csv line " + std::to_string(lineno) + ": expected " +
                        std::to_string(t.metric_names.size() + 4) + " cells, got " + std::to_string(cells.size()));
        AnalysisRow r;
        r.id = cells[0];
        const double outcome = parse_number(cells[1], lineno, "outcome");
        const double sex = parse_number(cells[3], lineno, "sex");
        if (outcome != 0.0 && outcome != 1.0) input_error("analysis csv line " + std::to_string(lineno) + ": outcome must be 0 or 1");
        if (sex != 0.0 && sex != 1.0) input_error("analysis csv line " + std::to_string(lineno) + ": sex must be 0 or 1");
        r.outcome = int(outcome);
        r.sex = int(sex);
        r.age = parse_number(cells[2], lineno, "age");
        for (std::size_t k = 0; k < t.metric_names.size(); ++k) {
            const auto& c = cells[k + 4];
            r.metrics.push_back(c.empty() ? Value{} : Value{parse_number(c, lineno, t.metric_names[k])});
        }
        t.rows.push_back(std::move(r));
    }
    if (!header) input_error("analysis csv: empty input");
    t.validate();
    return t;
}

std::string write_analysis_csv(const AnalysisTable& table) {
    table.validate();
    std::string out = "id,outcome,age,sex";
    for (const auto& n : table.metric_names) out += "," + n;
    out += "\n";
    for (const auto& r : table.rows) {
        if (r.id.find_first_of(",\"\n\r") != std::string::npos) input_error("analysis csv: id '" + r.id + "' needs quoting");
        out += r.id + "," + std::to_string(r.outcome) + "," + num(r.age) + "," + std::to_string(r.sex);
        for (const auto& v : r.metrics) out += "," + (v ? num(*v) : std::string());
        out += "\n";
    }
    return out;
}

std::vector<std::string> filter_metrics(const AnalysisTable& table, double max_missing, double max_modal) {
    if (table.rows.empty()) input_error("filter_metrics: no rows");
    std::vector<std::string> kept;
    const double n = double(table.rows.size());
    for (std::size_t k = 0; k < table.metric_names.size(); ++k) {
        std::vector<double> present;
        for (const auto& r : table.rows)
            if (r.metrics[k]) present.push_back(*r.metrics[k]);
        if (present.empty() || double(table.rows.size() - present.size()) / n > max_missing) continue;
        std::sort(present.begin(), present.end());
        std::size_t modal = 0;
        for (std::size_t i = 0; i < present.size();) {
            std::size_t j = i;
            while (j < present.size() && present[j] == present[i]) ++j;
            modal = std::max(modal, j - i);
            i = j;
        }
        if (double(modal) / double(present.size()) > max_modal) continue;
        kept.push_back(table.metric_names[k]);
    }
    return kept;
}

namespace {

// Kernel matrix over zplus (rows) x zminus (cols), both sorted descending, is
// non-increasing along rows and columns. select() finds its target-th largest
// entry without materializing it.
class MedcoupleKernel {
public:
    MedcoupleKernel(std::vector<double> zp, std::vector<double> zm) : zp_(std::move(zp)), zm_(std::move(zm)) {}

    long p() const { return static_cast<long>(zp_.size()); }
    long q() const { return static_cast<long>(zm_.size()); }

    double h(long i, long j) const {
        const double a = zp_[static_cast<std::size_t>(i)], b = zm_[static_cast<std::size_t>(j)];
        if (a == b) {
            const long s = p() - 1 - i - j;
            return double((s > 0) - (s < 0));
        }
        return (a + b) / (a - b);
    }

    double select(long target) const {
        const long P = p(), Q = q();
        std::vector<long> L(static_cast<std::size_t>(P), 0), R(static_cast<std::size_t>(P), Q - 1);
        long ltotal = 0, rtotal = P * Q;
        while (rtotal - ltotal > P) {
            std::vector<std::pair<double, long>> mids;
            long total_w = 0;
            for (long i = 0; i < P; ++i) {
                const auto s = static_cast<std::size_t>(i);
                if (L[s] > R[s]) continue;
                const long w = R[s] - L[s] + 1;
                mids.push_back({h(i, (L[s] + R[s]) / 2), w});
                total_w += w;
            }
            std::sort(mids.begin(), mids.end());
            double wm = mids.front().first;
            long acc = 0;
            for (const auto& [v, w] : mids) {
                acc += w;
                if (2 * acc >= total_w) {
                    wm = v;
                    break;
                }
            }
            // Per row: last column with h > wm, and first column with h < wm.
            std::vector<long> gt(static_cast<std::size_t>(P)), ge(static_cast<std::size_t>(P));
            long j = 0;
            for (long i = P - 1; i >= 0; --i) {
                while (j < Q && h(i, j) > wm) ++j;
                gt[static_cast<std::size_t>(i)] = j - 1;
            }
            j = Q - 1;
            for (long i = 0; i < P; ++i) {
                while (j >= 0 && h(i, j) < wm) --j;
                ge[static_cast<std::size_t>(i)] = j + 1;
            }
            long n_gt = 0, n_ge = 0;
            for (long i = 0; i < P; ++i) n_gt += gt[static_cast<std::size_t>(i)] + 1, n_ge += ge[static_cast<std::size_t>(i)];
            if (target < n_gt) {
                R = gt;
                rtotal = n_gt;
            } else if (target >= n_ge) {
                L = ge;
                ltotal = n_ge;
            } else {
                return wm;
            }
        }
        std::vector<double> rest;
        for (long i = 0; i < P; ++i)
            for (long c = L[static_cast<std::size_t>(i)]; c <= R[static_cast<std::size_t>(i)]; ++c) rest.push_back(h(i, c));
        const auto k = static_cast<std::size_t>(target - ltotal);
        std::nth_element(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(k), rest.end(), std::greater<>());
        return rest[k];
    }

private:
    std::vector<double> zp_, zm_;
};

}  // namespace

double medcouple(std::vector<double> x) {
    if (x.size() < 3) input_error("medcouple: need at least 3 values");
    for (double v : x)
        if (!std::isfinite(v)) input_error("medcouple: non-finite value");
    std::sort(x.begin(), x.end(), std::greater<>());
    const std::size_t n = x.size();
    const double m = n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
    std::vector<double> zp, zm;
    for (double v : x) {
        if (v >= m) zp.push_back(v - m);
        if (v <= m) zm.push_back(v - m);
    }
    const MedcoupleKernel k(std::move(zp), std::move(zm));
    const long total = k.p() * k.q();
    if (total % 2) return k.select(total / 2);
    return 0.5 * (k.select(total / 2 - 1) + k.select(total / 2));
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) input_error("quantile: empty sample");
    std::sort(v.begin(), v.end());
    const double h = q * double(v.size() - 1);
    const auto k = static_cast<std::size_t>(std::floor(h));
    if (k + 1 >= v.size()) return v.back();
    return v[k] + (h - double(k)) * (v[k + 1] - v[k]);
}

Fences adjusted_fences(const std::vector<double>& values, double range) {
    Fences f;
    f.q1 = quantile(values, 0.25);
    f.q3 = quantile(values, 0.75);
    f.mc = medcouple(values);
    const double iqr = f.q3 - f.q1;
    const double lo_k = f.mc >= 0 ? std::exp(-4.0 * f.mc) : std::exp(-3.0 * f.mc);
    const double hi_k = f.mc >= 0 ? std::exp(3.0 * f.mc) : std::exp(4.0 * f.mc);
    f.lo = f.q1 - range * lo_k * iqr;
    f.hi = f.q3 + range * hi_k * iqr;
    return f;
}

std::vector<Value> remove_outliers(const std::vector<Value>& values, double range, Fences* fences) {
    std::vector<double> present;
    for (const auto& v : values)
        if (v) present.push_back(*v);
    if (present.size() < 4) return values;
    const Fences f = adjusted_fences(present, range);
    if (fences) *fences = f;
    if (f.q3 - f.q1 <= 0.0) return values;
    std::vector<Value> out = values;
    for (auto& v : out)
        if (v && (*v < f.lo || *v > f.hi)) v.reset();
    return out;
}

std::vector<Value> standardize(const std::vector<Value>& values) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& v : values)
        if (v) sum += *v, ++n;
    if (n < 2) input_error("standardize: need at least 2 values");
    const double mean = sum / double(n);
    double ss = 0;
    for (const auto& v : values)
        if (v) ss += (*v - mean) * (*v - mean);
    const double sd = std::sqrt(ss / double(n - 1));
    if (!(sd > 0.0)) input_error("standardize: zero SD");
    std::vector<Value> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i]) out[i] = (*values[i] - mean) / sd;
    return out;
}

LogisticFit logistic_fit(std::span<const double> y, std::span<const double> x, int k) {
    if (k < 1) input_error("logistic_fit: need at least one column");
    const auto n = static_cast<Eigen::Index>(y.size());
    if (x.size() != y.size() * static_cast<std::size_t>(k)) input_error("logistic_fit: design size does not match outcome");
    std::size_t cases = 0;
    for (double v : y) {
        if (v != 0.0 && v != 1.0) input_error("logistic_fit: outcome must be 0 or 1");
        cases += v == 1.0;
    }
    if (cases == 0 || cases == y.size()) input_error("logistic_fit: single-class outcome");

    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(x.data(), n, k);
    const Eigen::Map<const Eigen::VectorXd> Y(y.data(), n);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);

    auto information = [&](const Eigen::VectorXd& b, Eigen::VectorXd* score) {
        const Eigen::VectorXd eta = X * b;
        Eigen::VectorXd p(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p[i] = eta[i] >= 0 ? 1.0 / (1.0 + std::exp(-eta[i])) : std::exp(eta[i]) / (1.0 + std::exp(eta[i]));
            w[i] = p[i] * (1.0 - p[i]);
        }
        if (score) *score = X.transpose() * (Y - p);
        return Eigen::MatrixXd(X.transpose() * w.asDiagonal() * X);
    };

    {
        // conditioning of X'X after scaling columns to unit norm
        Eigen::MatrixXd g = X.transpose() * X;
        const Eigen::VectorXd d = g.diagonal();
        if (!(d.minCoeff() > 0.0)) input_error("logistic_fit: singular design");
        const Eigen::VectorXd inv = d.cwiseSqrt().cwiseInverse();
        g = inv.asDiagonal() * g * inv.asDiagonal();
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
        if (!(eig.eigenvalues().minCoeff() > 1e-12 * eig.eigenvalues().maxCoeff())) input_error("logistic_fit: singular design");
    }
    LogisticFit fit;
    for (fit.iterations = 1; fit.iterations <= 50; ++fit.iterations) {
        Eigen::VectorXd score;
        const Eigen::LDLT<Eigen::MatrixXd> H(information(beta, &score));
        const Eigen::VectorXd delta = H.solve(score);
        if (!delta.allFinite()) break;
        beta += delta;
        if (beta.cwiseAbs().maxCoeff() > 15.0) {
            fit.separated = true;
            break;
        }
        if (delta.cwiseAbs().maxCoeff() < 1e-8) {
            fit.converged = true;
            break;
        }
    }
    fit.iterations = std::min(fit.iterations, 50);
    fit.beta.assign(beta.data(), beta.data() + k);
    const Eigen::MatrixXd info = information(beta, nullptr);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    fit.se.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
    if (ldlt.info() == Eigen::Success && ldlt.rcond() > 1e-14) {
        const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
        for (int j = 0; j < k; ++j)
            if (cov(j, j) > 0) fit.se[static_cast<std::size_t>(j)] = std::sqrt(cov(j, j));
    }
    return fit;
}

OddsRatio odds_ratio(double coef, double se) {
    const double z = 1.959963984540054;
    return {std::exp(coef), std::exp(coef - z * se), std::exp(coef + z * se)};
}

double wald_p(double coef, double se) {
    if (!(se > 0.0) || !std::isfinite(se)) return se == 0.0 && coef != 0.0 ? 0.0 : 1.0;
    return std::erfc(std::abs(coef / se) / std::sqrt(2.0));
}

std::vector<double> fdr_adjust(const std::vector<double>& p) {
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0)) input_error("fdr_adjust: p-values must lie in [0,1]");
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::vector<double> out(m);
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        const std::size_t i = order[r];
        running = std::min(running, p[i] * double(m) / double(r + 1));
        out[i] = std::min(1.0, std::max(p[i], running));
    }
    return out;
}

std::vector<AssociationResult> run_association(const AnalysisTable& table, const AssociationOptions& opt) {
    table.validate();
    const auto kept = filter_metrics(table);
    std::vector<AssociationResult> results(kept.size());
    std::vector<std::uint8_t> fitted(kept.size(), 0);
    parallel_for(kept.size(), opt.threads, [&](std::size_t idx) {
        AssociationResult& r = results[idx];
        r.metric = kept[idx];
        const auto col = static_cast<std::size_t>(
            std::find(table.metric_names.begin(), table.metric_names.end(), r.metric) - table.metric_names.begin());
        std::vector<Value> v;
        for (const auto& row : table.rows) v.push_back(row.metrics[col]);
        const auto present = std::count_if(v.begin(), v.end(), [](const Value& x) { return x.has_value(); });
        if (present < 4) {
            r.status = "too few values";
            return;
        }
        const auto cleaned = remove_outliers(v, opt.outlier_range);
        r.n_outliers = static_cast<int>(present - std::count_if(cleaned.begin(), cleaned.end(),
                                                                [](const Value& x) { return x.has_value(); }));
        try {
            const auto z = standardize(cleaned);
            std::vector<double> y, x;
            for (std::size_t i = 0; i < z.size(); ++i) {
                if (!z[i]) continue;
                const auto& row = table.rows[i];
                y.push_back(row.outcome);
                x.insert(x.end(), {1.0, *z[i], row.age, double(row.sex)});
            }
            r.n_used = static_cast<int>(y.size());
            const auto fit = logistic_fit(y, x, 4);
            const auto o = odds_ratio(fit.beta[1], fit.se[1]);
            r.odds_ratio = o.odds_ratio;
            r.ci_lo = o.lo;
            r.ci_hi = o.hi;
            r.p_value = wald_p(fit.beta[1], fit.se[1]);
            r.converged = fit.converged;
            r.status = fit.converged ? "ok" : fit.separated ? "not converged: separation" : "not converged";
            fitted[idx] = 1;
        } catch (const Error& e) {
            r.status = e.what();
        }
    });
    std::vector<double> ps;
    for (std::size_t i = 0; i < results.size(); ++i)
        if (fitted[i]) ps.push_back(results[i].p_value);
    const auto adj = fdr_adjust(ps);
    std::size_t k = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (!fitted[i]) continue;
        results[i].p_fdr = adj[k++];
        results[i].significant = results[i].converged && *results[i].p_fdr < opt.alpha;
    }
    return results;
}

std::string format_odds_ratio(const AssociationResult& r) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "odds ratio [OR] = %.2f [95%% CI: %.2f-%.2f]", r.odds_ratio, r.ci_lo, r.ci_hi);
    return buf;
}

std::string association_csv(const std::vector<AssociationResult>& results) {
    std::string out = "metric,n_used,n_outliers,odds_ratio,ci_lo,ci_hi,p_value,p_fdr,converged,significant,status,report\n";
    for (const auto& r : results) {
        if (r.metric.find_first_of(",\"\n\r") != std::string::npos) input_error("results csv: metric '" + r.metric + "' needs quoting");
        std::string status = r.status;
        std::replace(status.begin(), status.end(), ',', ';');
        out += r.metric + "," + std::to_string(r.n_used) + "," + std::to_string(r.n_outliers) + "," + num10(r.odds_ratio) +
               "," + num10(r.ci_lo) + "," + num10(r.ci_hi) + "," + num10(r.p_value) + "," +
               (r.p_fdr ? num10(*r.p_fdr) : std::string()) + "," + (r.converged ? "1" : "0") + "," +
               (r.significant ? "1" : "0") + "," + status + "," + (r.p_fdr ? format_odds_ratio(r) : std::string()) + "\n";
    }
    return out;
}

std::string forest_svg(const std::vector<AssociationResult>& results, const std::string& title) {
    std::vector<const AssociationResult*> rows;
    for (const auto& r : results)
        if (r.p_fdr && std::isfinite(r.ci_lo) && std::isfinite(r.ci_hi) && r.ci_lo > 0) rows.push_back(&r);
    double lo = 0.5, hi = 2.0;
    for (const auto* r : rows) lo = std::min(lo, r->ci_lo), hi = std::max(hi, r->ci_hi);
    const double llo = std::log(lo), lhi = std::log(hi);
    const int left = 260, plot_w = 420, row_h = 22, top = 50;
    const int height = top + row_h * static_cast<int>(rows.size()) + 50;
    auto x_of = [&](double v) { return left + (std::log(v) - llo) / (lhi - llo) * plot_w; };
    auto esc = [](std::string s) {
        std::string o;
        for (char c : s) o += c == '<' ? "&lt;" : c == '>' ? "&gt;" : c == '&' ? "&amp;" : std::string(1, c);
        return o;
    };
    char buf[768];
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(left + plot_w + 260) +
                      "\" height=\"" + std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<text x=\"10\" y=\"24\" font-size=\"15\">" + esc(title) + "</text>\n";
    std::snprintf(buf, sizeof buf, "<line x1=\"%.1f\" y1=\"%d\" x2=\"%.1f\" y2=\"%d\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n",
                  x_of(1.0), top - 10, x_of(1.0), height - 30);
    svg += buf;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = *rows[i];
        const int y = top + row_h * static_cast<int>(i) + row_h / 2;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%d\" y=\"%d\" text-anchor=\"end\">%s</text>"
                      "<line x1=\"%.1f\" y1=\"%d\" x2=\"%.1f\" y2=\"%d\" stroke=\"black\"/>"
                      "<rect x=\"%.1f\" y=\"%d\" width=\"7\" height=\"7\" fill=\"%s\"/>"
                      "<text x=\"%d\" y=\"%d\">%s</text>\n",
                      left - 10, y + 4, esc(r.metric).c_str(), x_of(r.ci_lo), y, x_of(r.ci_hi), y, x_of(r.odds_ratio) - 3.5,
                      y - 3, r.significant ? "#c0392b" : "#555", left + plot_w + 10, y + 4,
                      esc(format_odds_ratio(r)).c_str());
        svg += buf;
    }
    svg += "</svg>\n";
    return svg;
}

AnalysisTable simulate_cohort(const CohortSpec& spec) {
    if (spec.n < 4 || spec.n_noise < 0) input_error("simulate_cohort: bad size");
    if (!(spec.missing_rate >= 0.0 && spec.missing_rate < 1.0)) input_error("simulate_cohort: missing_rate must be in [0,1)");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    AnalysisTable t;
    t.metric_names.push_back("signal");
    for (int k = 1; k <= spec.n_noise; ++k) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "noise_%03d", k);
        t.metric_names.push_back(buf);
    }
    for (int i = 0; i < spec.n; ++i) {
        AnalysisRow r;
        char buf[16];
        std::snprintf(buf, sizeof buf, "p%04d", i + 1);
        r.id = buf;
        r.age = std::max(18.0, 55.0 + 12.0 * normal(rng));
        r.sex = unit(rng) < 0.5;
        const double z = normal(rng);
        const double eta = spec.intercept + spec.signal_log_odds * z + spec.age_coef * r.age + spec.sex_coef * r.sex;
        r.outcome = unit(rng) < 1.0 / (1.0 + std::exp(-eta));
        r.metrics.push_back(0.12 + 0.03 * z);
        for (int k = 0; k < spec.n_noise; ++k) {
            const double e = normal(rng);
            // alternate symmetric and right-skewed columns
            r.metrics.push_back(k % 2 ? std::exp(0.5 * e) : 10.0 + 2.0 * e);
        }
        for (auto& v : r.metrics)
            if (unit(rng) < spec.missing_rate) v.reset();
        t.rows.push_back(std::move(r));
    }
    return t;
}

}  // namespace chorovessel
