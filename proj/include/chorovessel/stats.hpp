#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace chorovessel {

using Value = std::optional<double>;

struct AnalysisRow {
    std::string id;
    int outcome = 0;  // 0 control, 1 case
    double age = 0.0;
    int sex = 0;      // 0/1
    std::vector<Value> metrics;
};

struct AnalysisTable {
    std::vector<std::string> metric_names;
    std::vector<AnalysisRow> rows;

    void validate() const;
};

/// Header "id,outcome,age,sex,<metric>..."; empty cell = missing.
AnalysisTable read_analysis_csv(const std::string& text);
std::string write_analysis_csv(const AnalysisTable& table);

/// Drops a metric when more than 90% of rows miss it, or when more than 95% of
/// its present values share one value.
std::vector<std::string> filter_metrics(const AnalysisTable& table, double max_missing = 0.90,
                                        double max_modal = 0.95);

/// Median of the kernel over pairs from the upper and lower halves around the
/// median; O(n log n). Throws on fewer than 3 values.
double medcouple(std::vector<double> values);

/// Linear-interpolation quantile (q in [0,1]) of an unsorted sample.
double quantile(std::vector<double> values, double q);

struct Fences {
    double lo = 0.0, hi = 0.0;
    double q1 = 0.0, q3 = 0.0, mc = 0.0;
};

/// Skewness-adjusted boxplot fences with coefficient `range`.
Fences adjusted_fences(const std::vector<double>& values, double range = 3.0);

/// Values outside the fences become missing. Fewer than 4 present values or a
/// zero IQR removes nothing.
std::vector<Value> remove_outliers(const std::vector<Value>& values, double range = 3.0, Fences* fences = nullptr);

/// (x - mean) / sample sd over present values; missing stays missing.
std::vector<Value> standardize(const std::vector<Value>& values);

struct LogisticFit {
    std::vector<double> beta;
    std::vector<double> se;
    int iterations = 0;
    bool converged = false;
    bool separated = false;  // some |beta| > 15 while iterating
};

/// IRLS for y ~ X (row-major n x k, intercept column supplied by the caller).
/// Stops when max |delta beta| < 1e-8 or after 50 iterations.
LogisticFit logistic_fit(std::span<const double> y, std::span<const double> x, int k);

struct OddsRatio {
    double odds_ratio = 1.0, lo = 1.0, hi = 1.0;
};
OddsRatio odds_ratio(double coef, double se);

/// Two-sided Wald p-value.
double wald_p(double coef, double se);

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
std::vector<double> fdr_adjust(const std::vector<double>& p);

struct AssociationResult {
    std::string metric;
    int n_used = 0;
    int n_outliers = 0;
    double odds_ratio = 1.0, ci_lo = 1.0, ci_hi = 1.0;
    double p_value = 1.0;
    std::optional<double> p_fdr;  // missing when the fit failed
    bool converged = false;
    bool significant = false;
    std::string status;  // "ok", "not converged", or why the fit failed
};

struct AssociationOptions {
    double outlier_range = 3.0;
    double alpha = 0.05;
    int threads = 1;
};

/// filter -> per metric: outliers, standardize, fit outcome ~ z + age + sex ->
/// FDR over every metric whose fit ran.
std::vector<AssociationResult> run_association(const AnalysisTable& table, const AssociationOptions& opt = {});

/// metric,n_used,n_outliers,odds_ratio,ci_lo,ci_hi,p_value,p_fdr,converged,significant,status,report
std::string association_csv(const std::vector<AssociationResult>& results);
/// Human form: "odds ratio [OR] = 1.72 [95% CI: 1.12-2.63]".
std::string format_odds_ratio(const AssociationResult& r);
std::string forest_svg(const std::vector<AssociationResult>& results, const std::string& title);

// Simulated case/control cohort: metric "signal" carries the given per-SD
// log-odds, "noise_NNN" columns carry none.
struct CohortSpec {
    int n = 400;
    int n_noise = 100;
    double intercept = -1.0;
    double signal_log_odds = 0.7;
    double age_coef = 0.01;
    double sex_coef = 0.3;
    double missing_rate = 0.02;
    std::uint64_t seed = 1;
};
AnalysisTable simulate_cohort(const CohortSpec& spec);

}  // namespace chorovessel
