#include "netsight/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "netsight/rng.hpp"

namespace netsight {

namespace {

Sequence node_channel_sequence(const std::vector<Matrix>& series, Eigen::Index node,
                               Eigen::Index channel, const GraphConfig& cfg) {
    Sequence s;
    s.reserve(series.size());
    for (const Matrix& interval : series) s.push_back(interval(node, channel));
    s = block_average(s, cfg.max_dtw_len);
    if (cfg.normalize_inputs) {
        // Min-max per node/channel so high-volume nodes do not dominate.
        const auto [mn, mx] = std::minmax_element(s.begin(), s.end());
        const Scalar span = *mx - *mn;
        if (span > 0.0)
            for (Scalar& v : s) v = (v - *mn) / span;
        else
            for (Scalar& v : s) v = 0.0;
    }
    return s;
}

}  // namespace

TemporalAdjacency temporal_adjacency(const std::vector<Matrix>& series, const GraphConfig& cfg,
                                     int threads) {
    require(!series.empty(), "temporal_adjacency: empty series");
    const Eigen::Index n = series.front().rows();
    const Eigen::Index d = series.front().cols();
    require(n >= 2, "temporal_adjacency: need at least 2 nodes");

    std::vector<std::vector<Sequence>> seqs(static_cast<size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index c = 0; c < d; ++c)
            seqs[static_cast<size_t>(j)].push_back(node_channel_sequence(series, j, c, cfg));

    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = j + 1; k < n; ++k) pairs.emplace_back(j, k);

    TemporalAdjacency out;
    out.n = static_cast<int>(n);
    out.a = Matrix::Zero(n, n);

    auto compute = [&](size_t pi) {
        const auto [j, k] = pairs[pi];
        Scalar dist = 0.0;
        for (Eigen::Index c = 0; c < d; ++c)
            dist += fast_dtw(seqs[static_cast<size_t>(j)][static_cast<size_t>(c)],
                             seqs[static_cast<size_t>(k)][static_cast<size_t>(c)],
                             cfg.dtw_radius);
        dist /= static_cast<Scalar>(d);
        const Scalar sim = 1.0 / std::max(dist, cfg.distance_floor);
        out.a(j, k) = sim;
        out.a(k, j) = sim;
    };

    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(pairs.size())));
    if (workers == 1) {
        for (size_t pi = 0; pi < pairs.size(); ++pi) compute(pi);
    } else {
        // Pairs write disjoint cells, so parallel fill is race free and the
        // result is independent of scheduling.
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (size_t pi = static_cast<size_t>(w); pi < pairs.size();
                     pi += static_cast<size_t>(workers))
                    compute(pi);
            });
        for (auto& th : pool) th.join();
    }
    return out;
}

Scalar percentile(std::vector<Scalar> values, Scalar q) {
    require(!values.empty(), "percentile: empty input");
    require(q >= 0.0 && q <= 100.0, "percentile: q out of range");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    const Scalar rank = q / 100.0 * static_cast<Scalar>(values.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(rank));
    const size_t hi = static_cast<size_t>(std::ceil(rank));
    const Scalar frac = rank - static_cast<Scalar>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

FusedAdjacency fuse_and_filter(const SpatialAdjacency& spatial, const TemporalAdjacency& temporal,
                               Scalar p, bool rescale_temporal) {
    require(p > 0.0 && p < 100.0, "fuse_and_filter: p must lie in (0, 100)");
    require(spatial.n == temporal.n && spatial.n >= 2, "fuse_and_filter: size mismatch");
    const Eigen::Index n = spatial.n;
    require(spatial.a.rows() == n && temporal.a.rows() == n, "fuse_and_filter: bad matrices");
    require(temporal.a.allFinite(), "fuse_and_filter: temporal similarities must be finite");

    Matrix at = temporal.a;
    if (rescale_temporal) {
        Scalar mx = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index k = 0; k < n; ++k)
                if (j != k) mx = std::max(mx, at(j, k));
        if (mx > 0.0) at /= mx;
    }
    const Matrix raw = spatial.a + at;

    std::vector<Scalar> off_diag;
    off_diag.reserve(static_cast<size_t>(n * (n - 1)));
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k)
            if (j != k) off_diag.push_back(raw(j, k));
    const Scalar threshold = percentile(off_diag, 100.0 - p);

    FusedAdjacency out;
    out.n = spatial.n;
    out.p = p;
    out.threshold = threshold;
    out.a = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k)
            if (j != k && raw(j, k) >= threshold) out.a(j, k) = 1.0;  // ties retained
    // Symmetry by OR, self-loops so every node attends to itself.
    for (Eigen::Index j = 0; j < n; ++j) {
        out.a(j, j) = 1.0;
        for (Eigen::Index k = j + 1; k < n; ++k) {
            const Scalar v = std::max(out.a(j, k), out.a(k, j));
            out.a(j, k) = v;
            out.a(k, j) = v;
        }
    }
    return out;
}

SelectPResult select_p(const std::function<Scalar(Scalar)>& eval, Scalar threshold,
                       Scalar probe_eps, uint64_t seed, int max_iters) {
    require(threshold > 0.0 && probe_eps > 0.0, "select_p: bad thresholds");
    Rng rng(seed);
    SelectPResult out;
    auto probe = [&](Scalar p) {
        const Scalar clamped = std::clamp(p, 0.5, 99.5);
        const Scalar e = eval(clamped);
        out.probes.push_back({clamped, e});
        return e;
    };

    Scalar p_lo = 0.0, p_hi = 100.0;
    Scalar p = 50.0;
    for (int it = 0; it < max_iters; ++it) {
        p = 0.5 * (p_lo + p_hi);
        const Scalar e_right = probe(0.5 * (p + p_hi));
        const Scalar e_left = probe(0.5 * (p_lo + p));
        if (std::abs(e_right - e_left) < threshold) {
            const Scalar v_plus = probe(p + probe_eps);
            const Scalar v_minus = probe(p - probe_eps);
            if (std::abs(v_plus - v_minus) < threshold) {
                out.p = p;
                return out;
            }
            // Likely a noise-induced plateau: shift the bracket randomly
            // (offsets in [0, 50)) and search again.
            p_lo = std::min(p_lo + rng.uniform(0.0, 50.0), 99.0);
            p_hi = std::min(p_hi + rng.uniform(0.0, 50.0), 100.0);
            if (p_lo >= p_hi) p_lo = std::max(0.0, p_hi - 1.0);
        } else if (e_right < e_left) {
            p_lo = p;
        } else {
            p_hi = p;
        }
    }
    out.p = p;
    return out;
}

void save_adjacency(const FusedAdjacency& adj, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open adjacency file for writing: " + path);
    char head[128];
    std::snprintf(head, sizeof(head), "%d %.17g %.17g\n", adj.n, adj.p, adj.threshold);
    f << head;
    for (Eigen::Index j = 0; j < adj.n; ++j) {
        for (Eigen::Index k = 0; k < adj.n; ++k) {
            if (k) f << ' ';
            f << (adj.a(j, k) != 0.0 ? 1 : 0);
        }
        f << '\n';
    }
    if (!f) throw DataError("failed writing adjacency file: " + path);
}

FusedAdjacency load_adjacency(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open adjacency file: " + path);
    FusedAdjacency adj;
    if (!(f >> adj.n >> adj.p >> adj.threshold) || adj.n <= 0)
        throw DataError("malformed adjacency header in " + path);
    adj.a = Matrix::Zero(adj.n, adj.n);
    for (Eigen::Index j = 0; j < adj.n; ++j)
        for (Eigen::Index k = 0; k < adj.n; ++k) {
            int v = 0;
            if (!(f >> v) || (v != 0 && v != 1))
                throw DataError("malformed adjacency row " + std::to_string(j) + " in " + path);
            adj.a(j, k) = v;
        }
    return adj;
}

}  // namespace netsight
