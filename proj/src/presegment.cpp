#include "chorovessel/presegment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "chorovessel/error.hpp"
#include "chorovessel/parallel.hpp"

namespace chorovessel {

namespace {

using Plane = std::vector<double>;

int mirror(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

Plane gaussian_smooth(const GrayImage& img, double sigma) {
    const int w = img.width;
    const int h = img.height;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
        sum += kernel[k + radius];
    }
    for (double& k : kernel) k /= sum;

    Plane tmp(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * img.at(mirror(x + k, w), y);
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    Plane out(tmp.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * tmp[static_cast<std::size_t>(mirror(y + k, h)) * w + x];
            out[static_cast<std::size_t>(y) * w + x] = acc;
        }
    return out;
}

}  // namespace

void VesselnessParams::validate() const {
    if (scales.empty()) input_error("vesselness: scales must be nonempty");
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (!(scales[i] >= 1.0)) input_error("vesselness: scales must be >= 1");
        if (i > 0 && !(scales[i] > scales[i - 1])) input_error("vesselness: scales must be strictly increasing");
    }
    if (!(beta > 0.0)) input_error("vesselness: beta must be > 0");
    if (!(threshold >= 0.0 && threshold <= 1.0)) input_error("vesselness: threshold must be in [0,1]");
}

ProbabilityGrid ridge_response(const GrayImage& img, double scale, double beta) {
    if (img.width < 3 || img.height < 3) input_error("vesselness: image must be at least 3x3");
    const int w = img.width;
    const int h = img.height;
    const double sigma = scale / 2.0;
    const Plane s = gaussian_smooth(img, sigma);
    auto at = [&](int x, int y) { return s[static_cast<std::size_t>(mirror(y, h)) * w + mirror(x, w)]; };

    const double norm = sigma * sigma;
    std::vector<double> l1(s.size()), l2(s.size()), structure(s.size());
    double max_structure = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double dxx = norm * (at(x + 1, y) - 2.0 * at(x, y) + at(x - 1, y));
            const double dyy = norm * (at(x, y + 1) - 2.0 * at(x, y) + at(x, y - 1));
            const double dxy =
                norm * 0.25 * (at(x + 1, y + 1) - at(x - 1, y + 1) - at(x + 1, y - 1) + at(x - 1, y - 1));
            const double disc = std::sqrt((dxx - dyy) * (dxx - dyy) + 4.0 * dxy * dxy);
            double a = 0.5 * (dxx + dyy + disc);
            double b = 0.5 * (dxx + dyy - disc);
            if (std::abs(a) > std::abs(b)) std::swap(a, b);  // |l1| <= |l2|
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            l1[i] = a;
            l2[i] = b;
            structure[i] = std::sqrt(a * a + b * b);
            max_structure = std::max(max_structure, structure[i]);
        }
    }

    ProbabilityGrid out(w, h);
    const double c = 0.5 * max_structure;
    if (!(c > 0.0)) return out;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        // Bright ridges on dark background curve downward across the vessel.
        if (l2[i] >= 0.0) continue;
        const double rb = l1[i] / l2[i];
        const double v = std::exp(-rb * rb / (2.0 * beta * beta)) *
                         (1.0 - std::exp(-structure[i] * structure[i] / (2.0 * c * c)));
        out.values[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return out;
}

ProbabilityGrid vesselness(const GrayImage& img, const VesselnessParams& params) {
    params.validate();
    ProbabilityGrid out(img.width, img.height);
    for (double scale : params.scales) {
        const ProbabilityGrid r = ridge_response(img, scale, params.beta);
        for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = std::max(out.values[i], r.values[i]);
    }
    return out;
}

Mask threshold_grid(const ProbabilityGrid& grid, double threshold) {
    Mask m(grid.width, grid.height);
    for (std::size_t i = 0; i < grid.values.size(); ++i) m.bits[i] = grid.values[i] >= threshold ? 1 : 0;
    return m;
}

Proposal propose(const GrayImage& img, const SegmenterBackend& backend) {
    return std::visit(
        [&](const auto& b) -> Proposal {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, VesselnessParams>) {
                ProbabilityGrid grid = vesselness(img, b);
                Mask mask = threshold_grid(grid, b.threshold);
                return {std::move(grid), std::move(mask)};
            } else {
                if (!(b.threshold >= 0.0 && b.threshold <= 1.0)) input_error("external backend: threshold out of [0,1]");
                ProbabilityGrid grid = segment_external(img, b);
                Mask mask = threshold_grid(grid, b.threshold);
                return {std::move(grid), std::move(mask)};
            }
        },
        backend);
}

std::vector<double> FitGrid::default_thresholds() {
    std::vector<double> t;
    for (int k = 1; k <= 19; ++k) t.push_back(k * 0.05);
    return t;
}

std::vector<std::vector<double>> enumerate_scale_subsets(const FitGrid& grid) {
    std::vector<double> candidates = grid.candidate_scales;
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    const std::size_t n = candidates.size();
    if (n > 20) input_error("fit: too many candidate scales");

    std::vector<std::vector<double>> subsets;
    for (std::size_t size = std::max<std::size_t>(1, grid.min_subset); size <= std::min(grid.max_subset, n); ++size) {
        // Lexicographic combinations of the sorted candidates.
        std::vector<std::size_t> idx(size);
        for (std::size_t i = 0; i < size; ++i) idx[i] = i;
        while (true) {
            std::vector<double> s;
            for (std::size_t i : idx) s.push_back(candidates[i]);
            subsets.push_back(std::move(s));
            std::size_t k = size;
            while (k > 0 && idx[k - 1] == n - size + (k - 1)) --k;
            if (k == 0) break;
            ++idx[k - 1];
            for (std::size_t j = k; j < size; ++j) idx[j] = idx[j - 1] + 1;
        }
    }
    return subsets;
}

FitResult fit_on_corrections(std::span<const CorrectionPair> pairs, const FitGrid& grid, int threads) {
    if (pairs.empty()) input_error("fit: empty training set");
    if (grid.thresholds.empty()) input_error("fit: no thresholds to search");
    std::vector<double> thresholds = grid.thresholds;
    if (!std::is_sorted(thresholds.begin(), thresholds.end()))
        input_error("fit: thresholds must be ascending");
    for (const auto& p : pairs) {
        if (!p.image || !p.corrected) input_error("fit: null pair");
        if (p.image->width != p.corrected->width || p.image->height != p.corrected->height)
            input_error("fit: image and corrected mask dimensions differ");
    }

    const auto subsets = enumerate_scale_subsets(grid);
    if (subsets.empty()) input_error("fit: grid has no scale subsets");
    std::vector<double> scales;
    for (const auto& s : subsets) scales.insert(scales.end(), s.begin(), s.end());
    std::sort(scales.begin(), scales.end());
    scales.erase(std::unique(scales.begin(), scales.end()), scales.end());

    // responses[pair][scale index]
    std::vector<std::vector<ProbabilityGrid>> responses(pairs.size(), std::vector<ProbabilityGrid>(scales.size()));
    parallel_for(pairs.size() * scales.size(), threads, [&](std::size_t job) {
        const std::size_t p = job / scales.size();
        const std::size_t s = job % scales.size();
        responses[p][s] = ridge_response(*pairs[p].image, scales[s], grid.beta);
    });

    const std::size_t nt = thresholds.size();
    // score[subset][threshold] = mean Dice
    std::vector<std::vector<double>> score(subsets.size(), std::vector<double>(nt, 0.0));
    parallel_for(subsets.size(), threads, [&](std::size_t si) {
        std::vector<std::size_t> which;
        for (double sc : subsets[si])
            which.push_back(static_cast<std::size_t>(std::lower_bound(scales.begin(), scales.end(), sc) - scales.begin()));
        std::vector<double> sum(nt, 0.0);
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            const Mask& truth = *pairs[p].corrected;
            // bucket[k] counts pixels passing exactly thresholds[0..k-1]
            std::vector<std::size_t> pred_at(nt + 1, 0), overlap_at(nt + 1, 0);
            for (std::size_t i = 0; i < truth.bits.size(); ++i) {
                float v = 0.0f;
                for (std::size_t w : which) v = std::max(v, responses[p][w].values[i]);
                std::size_t passed = 0;
                while (passed < nt && v >= thresholds[passed]) ++passed;
                ++pred_at[passed];
                if (truth.bits[i]) ++overlap_at[passed];
            }
            const std::size_t truth_count = truth.count();
            std::size_t pred = 0, overlap = 0;
            for (std::size_t k = nt; k-- > 0;) {
                pred += pred_at[k + 1];
                overlap += overlap_at[k + 1];
                const std::size_t denom = pred + truth_count;
                sum[k] += denom == 0 ? 1.0 : 2.0 * static_cast<double>(overlap) / static_cast<double>(denom);
            }
        }
        for (std::size_t k = 0; k < nt; ++k) score[si][k] = sum[k] / static_cast<double>(pairs.size());
    });

    // Sequential selection keeps the tie-break independent of scheduling.
    FitResult best;
    best.mean_dice = -1.0;
    std::size_t best_subset = 0, best_threshold = 0;
    for (std::size_t k = 0; k < nt; ++k) {
        for (std::size_t si = 0; si < subsets.size(); ++si) {
            if (score[si][k] > best.mean_dice) {
                best.mean_dice = score[si][k];
                best_subset = si;
                best_threshold = k;
            }
        }
    }
    best.params.scales = subsets[best_subset];
    best.params.beta = grid.beta;
    best.params.threshold = thresholds[best_threshold];
    best.evaluated = subsets.size() * nt;
    return best;
}

}  // namespace chorovessel
