#pragma once

#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "chorovessel/raster.hpp"

namespace chorovessel {

/// Multiscale ridge-filter parameters. Structureness is normalized per scale by
/// half of the maximum Hessian norm in the image, so there is no free gamma.
struct VesselnessParams {
    std::vector<double> scales{2, 4, 8, 16};  // ridge widths in pixels; sigma = width / 2
    double beta = 0.5;
    double threshold = 0.10;

    void validate() const;
    bool operator==(const VesselnessParams&) const = default;
};

/// A remote proposer reached over HTTP: POST <url> with PNG bytes, expects a VPRB1 body.
struct ExternalEndpoint {
    std::string url;  // e.g. http://127.0.0.1:9000/segment (path defaults to /segment)
    std::vector<std::pair<std::string, std::string>> headers;  // passed through verbatim
    double threshold = 0.10;
    int timeout_s = 30;

    bool operator==(const ExternalEndpoint&) const = default;
};

using SegmenterBackend = std::variant<VesselnessParams, ExternalEndpoint>;

struct Proposal {
    ProbabilityGrid grid;
    Mask mask;
};

/// Bright-ridge response at one ridge width, in [0,1].
ProbabilityGrid ridge_response(const GrayImage& img, double scale, double beta);

ProbabilityGrid vesselness(const GrayImage& img, const VesselnessParams& params);

/// mask = grid >= threshold
Mask threshold_grid(const ProbabilityGrid& grid, double threshold);

Proposal propose(const GrayImage& img, const SegmenterBackend& backend);

ProbabilityGrid segment_external(const GrayImage& img, const ExternalEndpoint& endpoint);

struct FitGrid {
    std::vector<double> candidate_scales{1, 2, 4, 8, 16};
    std::size_t min_subset = 1;
    std::size_t max_subset = 4;
    std::vector<double> thresholds = default_thresholds();
    double beta = 0.5;

    static std::vector<double> default_thresholds();  // 0.05, 0.10, ..., 0.95
};

struct CorrectionPair {
    const GrayImage* image;
    const Mask* corrected;
};

struct FitResult {
    VesselnessParams params;
    double mean_dice = 0.0;
    std::size_t evaluated = 0;  // grid points scored
};

/// Exhaustive search over scale subsets x thresholds maximizing mean Dice of the
/// proposal against the corrected masks. Ties go to the lower threshold, then to
/// fewer scales, then to the lexicographically smaller scale list.
FitResult fit_on_corrections(std::span<const CorrectionPair> pairs, const FitGrid& grid = {}, int threads = 1);

/// Every scale subset the grid enumerates, in search order.
std::vector<std::vector<double>> enumerate_scale_subsets(const FitGrid& grid);

}  // namespace chorovessel
