#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chorovessel/raster.hpp"

namespace chorovessel {

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    // 0/0 reads as 1.0: nothing to find and nothing missed.
    double sensitivity() const;
    double specificity() const;
    double accuracy() const;
    double dice() const;
    double f1() const;  // 2PR/(P+R) reduces to dice on binary maps

    ConfusionCounts& operator+=(const ConfusionCounts& o);
    bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(const Mask& pred, const Mask& truth);
/// 2|A∩B| / (|A|+|B|); two empty masks score 1.0.
double dice(const Mask& a, const Mask& b);
/// Probability that a random vessel pixel outranks a random background pixel,
/// ties counting one half. Throws when truth has a single class.
double auc(const ProbabilityGrid& grid, const Mask& truth);

struct EvalPair {
    std::string id;
    Mask pred;
    Mask truth;
    std::optional<ProbabilityGrid> prob;  // all pairs or none
};

struct BootstrapOptions {
    int n_boot = 1000;
    std::uint64_t seed = 42;
    int threads = 1;
};

struct Estimate {
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

struct EvalReport {
    int n_images = 0;
    int n_boot = 0;
    std::uint64_t seed = 0;
    ConfusionCounts pooled;
    Estimate dice, f1, accuracy, sensitivity, specificity;
    std::optional<Estimate> auc;  // only when probabilities were supplied
    int auc_replicates = 0;       // replicates whose pooled truth had both classes

    std::string to_json() const;  // "evalreport/1"
};

/// Point estimates pool pixels over all images. CIs are percentile bounds
/// (2.5, 97.5; linear interpolation) over n_boot resamples of whole images.
/// Resample indices are drawn up front, so the result does not depend on threads.
EvalReport bootstrap_report(const std::vector<EvalPair>& pairs, const BootstrapOptions& opt = {});

/// Horizontal forest plot of the report, one row per metric.
std::string report_svg(const EvalReport& report);

}  // namespace chorovessel
