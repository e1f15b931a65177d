#include "netsight/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace netsight {

namespace {

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

// Column window [lo, hi] per row; contiguous because windows are unions of
// boxes around a monotone path.
struct Band {
    std::vector<int> lo, hi;
};

Band full_band(int rows, int cols) {
    Band b;
    b.lo.assign(static_cast<size_t>(rows), 0);
    b.hi.assign(static_cast<size_t>(rows), cols - 1);
    return b;
}

// Banded DP with path recovery. Cells outside the band cost infinity.
DtwAlignment banded_dtw(const Sequence& a, const Sequence& b, const Band& band) {
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());
    Matrix cost = Matrix::Constant(n, m, kInf);
    for (int i = 0; i < n; ++i) {
        for (int j = band.lo[static_cast<size_t>(i)]; j <= band.hi[static_cast<size_t>(i)]; ++j) {
            const Scalar local = std::abs(a[static_cast<size_t>(i)] - b[static_cast<size_t>(j)]);
            Scalar best;
            if (i == 0 && j == 0) {
                best = 0.0;
            } else {
                best = kInf;
                if (i > 0 && j > 0) best = std::min(best, cost(i - 1, j - 1));
                if (i > 0) best = std::min(best, cost(i - 1, j));
                if (j > 0) best = std::min(best, cost(i, j - 1));
            }
            cost(i, j) = best + local;
        }
    }
    DtwAlignment out;
    out.cost = cost(n - 1, m - 1);
    int i = n - 1, j = m - 1;
    out.path.emplace_back(i, j);
    while (i > 0 || j > 0) {
        Scalar best = kInf;
        int bi = i, bj = j;
        // Diagonal preferred on ties so recovered paths are deterministic.
        if (i > 0 && j > 0 && cost(i - 1, j - 1) < best) {
            best = cost(i - 1, j - 1);
            bi = i - 1;
            bj = j - 1;
        }
        if (i > 0 && cost(i - 1, j) < best) {
            best = cost(i - 1, j);
            bi = i - 1;
            bj = j;
        }
        if (j > 0 && cost(i, j - 1) < best) {
            best = cost(i, j - 1);
            bi = i;
            bj = j - 1;
        }
        i = bi;
        j = bj;
        out.path.emplace_back(i, j);
    }
    std::reverse(out.path.begin(), out.path.end());
    return out;
}

Sequence halve(const Sequence& x) {
    Sequence out;
    out.reserve(x.size() / 2);
    for (size_t i = 0; i + 1 < x.size(); i += 2) out.push_back(0.5 * (x[i] + x[i + 1]));
    return out;
}

// Projects a coarse path onto the doubled grid and widens it by `radius`
// (Chebyshev box per cell), clamped to the fine matrix.
Band expand_window(const std::vector<std::pair<int, int>>& coarse_path, int rows, int cols,
                   int radius) {
    Band band;
    band.lo.assign(static_cast<size_t>(rows), cols);
    band.hi.assign(static_cast<size_t>(rows), -1);
    auto touch = [&](int r, int clo, int chi) {
        const int rl = std::max(0, r - radius);
        const int rh = std::min(rows - 1, r + radius);
        for (int rr = rl; rr <= rh; ++rr) {
            band.lo[static_cast<size_t>(rr)] =
                std::min(band.lo[static_cast<size_t>(rr)], std::max(0, clo - radius));
            band.hi[static_cast<size_t>(rr)] =
                std::max(band.hi[static_cast<size_t>(rr)], std::min(cols - 1, chi + radius));
        }
    };
    for (auto [ci, cj] : coarse_path) {
        const int r0 = 2 * ci;
        const int c0 = 2 * cj;
        touch(std::min(r0, rows - 1), std::min(c0, cols - 1), std::min(c0 + 1, cols - 1));
        if (r0 + 1 < rows)
            touch(r0 + 1, std::min(c0, cols - 1), std::min(c0 + 1, cols - 1));
    }
    // Both corners must be reachable even when halving dropped a tail point.
    band.lo[0] = 0;
    band.hi[static_cast<size_t>(rows - 1)] = cols - 1 < band.hi[static_cast<size_t>(rows - 1)]
                                                 ? band.hi[static_cast<size_t>(rows - 1)]
                                                 : cols - 1;
    for (size_t r = 0; r < band.lo.size(); ++r) {
        if (band.hi[r] < band.lo[r]) {
            // Row untouched by the projection: fall back to its neighbors.
            band.lo[r] = r > 0 ? band.lo[r - 1] : 0;
            band.hi[r] = cols - 1;
        }
    }
    return band;
}

DtwAlignment fast_dtw_rec(const Sequence& a, const Sequence& b, int radius) {
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());
    if (std::min(n, m) <= radius + 2) return banded_dtw(a, b, full_band(n, m));
    const Sequence ca = halve(a);
    const Sequence cb = halve(b);
    const DtwAlignment coarse = fast_dtw_rec(ca, cb, radius);
    const Band band = expand_window(coarse.path, n, m, radius);
    return banded_dtw(a, b, band);
}

}  // namespace

Scalar exact_dtw(const Sequence& a, const Sequence& b) {
    return exact_dtw_alignment(a, b).cost;
}

DtwAlignment exact_dtw_alignment(const Sequence& a, const Sequence& b) {
    require(!a.empty() && !b.empty(), "dtw: empty sequence");
    return banded_dtw(a, b, full_band(static_cast<int>(a.size()), static_cast<int>(b.size())));
}

Scalar fast_dtw(const Sequence& a, const Sequence& b, int radius) {
    require(!a.empty() && !b.empty(), "dtw: empty sequence");
    require(radius >= 1, "fast_dtw: radius must be >= 1");
    return fast_dtw_rec(a, b, radius).cost;
}

Sequence block_average(const Sequence& x, size_t max_len) {
    require(max_len >= 1, "block_average: max_len must be >= 1");
    if (x.size() <= max_len) return x;
    const size_t block = (x.size() + max_len - 1) / max_len;
    Sequence out;
    out.reserve((x.size() + block - 1) / block);
    for (size_t i = 0; i < x.size(); i += block) {
        const size_t end = std::min(x.size(), i + block);
        Scalar s = 0.0;
        for (size_t k = i; k < end; ++k) s += x[k];
        out.push_back(s / static_cast<Scalar>(end - i));
    }
    return out;
}

}  // namespace netsight
