#pragma once

#include <utility>
#include <vector>

#include "netsight/common.hpp"

namespace netsight {

using Sequence = std::vector<Scalar>;

/// Alignment cost together with one optimal warping path (cell coordinates
/// from (0,0) to (L1-1, L2-1), monotone in both indices).
struct DtwAlignment {
    Scalar cost = 0.0;
    std::vector<std::pair<int, int>> path;
};

/// Classic O(L1·L2) dynamic program with absolute-difference local cost and
/// steps {down, right, diagonal}. Returns the cumulative cost of the optimal
/// warping path. Throws on empty input.
Scalar exact_dtw(const Sequence& a, const Sequence& b);

/// Full dynamic program with path recovery (diagonal-preferring tie break).
DtwAlignment exact_dtw_alignment(const Sequence& a, const Sequence& b);

/// Coarsen-project-refine approximation: solves a halved instance
/// recursively, projects its optimal path to the fine grid and restricts the
/// dynamic program to a band of half-width `radius` around it. Never below
/// the exact cost; equal to it whenever the band covers the full matrix
/// (in particular for radius >= max(L1, L2)).
Scalar fast_dtw(const Sequence& a, const Sequence& b, int radius);

/// Averages consecutive blocks so the result has at most max_len points.
Sequence block_average(const Sequence& x, size_t max_len);

}  // namespace netsight
