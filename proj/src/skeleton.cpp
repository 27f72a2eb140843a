#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "chorovessel/vesselgraph.hpp"

namespace chorovessel {

namespace {

// Felzenszwalb-Huttenlocher lower envelope of parabolas, squared distances.
void distance_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    constexpr double inf = std::numeric_limits<double>::infinity();
    int k = 0;
    v[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    for (int q = 1; q < n; ++q) {
        if (f[q] == inf) continue;
        if (f[v[k]] == inf) {
            v[k] = q;
            continue;
        }
        double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
        while (k > 0 && s <= z[k]) {
            --k;
            s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double diff = q - v[k];
        d[q] = f[v[k]] == inf ? inf : diff * diff + f[v[k]];
    }
}

// Neighbor order P2..P9: N, NE, E, SE, S, SW, W, NW.
constexpr std::array<int, 8> kDx{0, 1, 1, 1, 0, -1, -1, -1};
constexpr std::array<int, 8> kDy{-1, -1, 0, 1, 1, 1, 0, -1};

struct Grid {
    int w, h;
    std::vector<std::uint8_t>& b;
    std::uint8_t get(int x, int y) const {
        return (x < 0 || y < 0 || x >= w || y >= h) ? 0 : b[static_cast<std::size_t>(y) * w + x];
    }
    std::array<std::uint8_t, 8> ring(int x, int y) const {
        std::array<std::uint8_t, 8> r{};
        for (int k = 0; k < 8; ++k) r[k] = get(x + kDx[k], y + kDy[k]);
        return r;
    }
};

int count_on(const std::array<std::uint8_t, 8>& p) {
    int n = 0;
    for (auto v : p) n += v;
    return n;
}

int transitions(const std::array<std::uint8_t, 8>& p) {
    int a = 0;
    for (int k = 0; k < 8; ++k) a += (p[k] == 0 && p[(k + 1) % 8] == 1);
    return a;
}

// Yokoi connectivity number for 8-connected foreground; a pixel is simple
// (deletable without changing topology) iff this equals 1.
int yokoi8(const std::array<std::uint8_t, 8>& p) {
    // Re-index to x1=E, x2=NE, x3=N, x4=NW, x5=W, x6=SW, x7=S, x8=SE.
    const std::array<int, 8> x{p[2], p[1], p[0], p[7], p[6], p[5], p[4], p[3]};
    auto nx = [&](int k) { return 1 - x[k % 8]; };
    int n = 0;
    for (int k = 0; k < 8; k += 2) n += nx(k) - nx(k) * nx(k + 1) * nx(k + 2);
    return n;
}

}  // namespace

std::size_t Skeleton::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::vector<double> distance_to_background(const Mask& mask) {
    // Pad by one pixel of background so the exterior counts as background.
    const int w = mask.width + 2;
    const int h = mask.height + 2;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> g(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) g[static_cast<std::size_t>(y + 1) * w + (x + 1)] = inf;

    const int n = std::max(w, h);
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> v(n);
    for (int x = 0; x < w; ++x) {
        f.resize(h);
        d.resize(h);
        for (int y = 0; y < h; ++y) f[y] = g[static_cast<std::size_t>(y) * w + x];
        distance_1d(f, d, v, z);
        for (int y = 0; y < h; ++y) g[static_cast<std::size_t>(y) * w + x] = d[y];
    }
    for (int y = 0; y < h; ++y) {
        f.resize(w);
        d.resize(w);
        for (int x = 0; x < w; ++x) f[x] = g[static_cast<std::size_t>(y) * w + x];
        distance_1d(f, d, v, z);
        for (int x = 0; x < w; ++x) g[static_cast<std::size_t>(y) * w + x] = d[x];
    }

    std::vector<double> out(mask.size(), 0.0);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y))
                out[static_cast<std::size_t>(y) * mask.width + x] =
                    std::sqrt(g[static_cast<std::size_t>(y + 1) * w + (x + 1)]);
    return out;
}

Skeleton skeletonize(const Mask& mask) {
    Skeleton sk;
    sk.width = mask.width;
    sk.height = mask.height;
    sk.bits = mask.bits;
    sk.dt = distance_to_background(mask);
    Grid grid{sk.width, sk.height, sk.bits};

    // Two-subcycle thinning. Candidates are chosen on a snapshot, then removed
    // one at a time only while they are still simple, non-end pixels; this keeps
    // the component count intact where plain parallel thinning would not.
    std::vector<std::size_t> candidates;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            candidates.clear();
            for (int y = 0; y < sk.height; ++y) {
                for (int x = 0; x < sk.width; ++x) {
                    if (!grid.get(x, y)) continue;
                    const auto p = grid.ring(x, y);
                    const int b = count_on(p);
                    if (b < 2 || b > 6 || transitions(p) != 1) continue;
                    const bool ok = pass == 0 ? (p[0] * p[2] * p[4] == 0 && p[2] * p[4] * p[6] == 0)
                                              : (p[0] * p[2] * p[6] == 0 && p[0] * p[4] * p[6] == 0);
                    if (ok) candidates.push_back(static_cast<std::size_t>(y) * sk.width + x);
                }
            }
            for (std::size_t i : candidates) {
                const int x = static_cast<int>(i % sk.width);
                const int y = static_cast<int>(i / sk.width);
                const auto p = grid.ring(x, y);
                if (count_on(p) >= 2 && yokoi8(p) == 1) {
                    sk.bits[i] = 0;
                    changed = true;
                }
            }
        }
    }

    // Remove staircase corners so every path pixel has exactly two 8-neighbors.
    changed = true;
    while (changed) {
        changed = false;
        for (int y = 0; y < sk.height; ++y) {
            for (int x = 0; x < sk.width; ++x) {
                if (!grid.get(x, y)) continue;
                const auto p = grid.ring(x, y);
                if (count_on(p) < 2 || yokoi8(p) != 1) continue;
                const bool corner = (p[0] && p[2]) || (p[2] && p[4]) || (p[4] && p[6]) || (p[6] && p[0]);
                if (!corner) continue;
                sk.bits[static_cast<std::size_t>(y) * sk.width + x] = 0;
                changed = true;
            }
        }
    }
    return sk;
}

}  // namespace chorovessel
