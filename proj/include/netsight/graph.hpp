#pragma once

#include <functional>
#include <string>
#include <vector>

#include "netsight/common.hpp"
#include "netsight/dtw.hpp"

namespace netsight {

/// Physical topology: binary, symmetric for undirected inputs, zero diagonal.
struct SpatialAdjacency {
    int n = 0;
    Matrix a;
};

/// Pairwise traffic-pattern similarity 1/D, symmetric, zero diagonal (the
/// diagonal never enters percentile statistics).
struct TemporalAdjacency {
    int n = 0;
    Matrix a;
};

/// Binary fusion of the two, thresholded at the top-p percentile of the
/// off-diagonal mass, diagonal forced to one.
struct FusedAdjacency {
    int n = 0;
    Matrix a;
    Scalar p = 0.0;
    Scalar threshold = 0.0;
};

struct GraphConfig {
    int dtw_radius = 8;
    size_t max_dtw_len = 2048;   // sequences block-averaged down to this length
    Scalar distance_floor = 1e-8;
    bool rescale_temporal = false;  // max-normalize A_T before fusion
    bool normalize_inputs = true;   // per-node min-max scaling before DTW
};

/// Builds the temporal similarity matrix from per-interval N×d measurement
/// matrices (training split only). Per node and channel the sequence is
/// block-averaged, min-max scaled, then compared channel-wise with fast DTW;
/// channel distances are averaged and inverted with a floor.
TemporalAdjacency temporal_adjacency(const std::vector<Matrix>& series,
                                     const GraphConfig& cfg = {}, int threads = 1);

/// raw = A_S + A_T elementwise; entries at or above the (100−p)-th percentile
/// of the off-diagonal raw values become one. Diagonal forced to one,
/// symmetry enforced by OR. Requires 0 < p < 100.
FusedAdjacency fuse_and_filter(const SpatialAdjacency& spatial, const TemporalAdjacency& temporal,
                               Scalar p, bool rescale_temporal = false);

/// q-th percentile (0..100) with linear interpolation between order
/// statistics.
Scalar percentile(std::vector<Scalar> values, Scalar q);

/// Probe log entry of the percentile search.
struct ProbeRecord {
    Scalar p = 0.0;
    Scalar error = 0.0;
};

struct SelectPResult {
    Scalar p = 50.0;
    std::vector<ProbeRecord> probes;
};

/// Mixed binary-search/descent over a quasi-convex error curve: shrinks
/// [p_L, p_R] toward the lower probe side, stops when the two probe errors
/// agree within `threshold`, verifies with ±eps probes and restarts from
/// randomly shifted bounds when verification fails.
SelectPResult select_p(const std::function<Scalar(Scalar)>& eval, Scalar threshold = 1.0,
                       Scalar probe_eps = 0.5, uint64_t seed = 1, int max_iters = 64);

/// Text cache: header "N p threshold" then N rows of 0/1.
void save_adjacency(const FusedAdjacency& adj, const std::string& path);
FusedAdjacency load_adjacency(const std::string& path);

}  // namespace netsight
