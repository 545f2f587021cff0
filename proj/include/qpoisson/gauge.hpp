#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qpoisson/mrp.hpp"
#include "qpoisson/structure.hpp"

namespace qpoisson {

/// Phase-offset absorption weights b_{i,k}: column (i,k) holds, for each
/// state, the probability of entering class i at relative phase offset k.
/// Rows are one-hot indicators on recurrent states and lie on the probability
/// simplex everywhere.
struct PhaseWeights {
    enum class Kind { exact, estimated };

    ChainStructure structure;
    std::vector<double> w;  // n x N, row-major
    Kind kind = Kind::exact;
    int episodes = 0;        // estimation budget M (estimated only)
    std::uint64_t seed = 0;  // estimation seed (estimated only)

    int states() const { return structure.n; }
    int columns() const { return structure.peripheral_dim(); }
    double at(int s, int col) const {
        return w[static_cast<std::size_t>(s) * columns() + col];
    }
};

/// Anchor-based projection v -> v - sum_c v(anchor_c) * column_c.
/// Its kernel is the span of the weight columns; for exact weights that span
/// is the peripheral subspace of P.
struct GaugeMap {
    int n = 0;
    std::vector<int> anchors;  // one per column, in column order
    std::vector<double> w;     // n x N, row-major
    std::optional<ChainStructure> structure;

    int columns() const { return static_cast<int>(anchors.size()); }
    double weight(int s, int col) const {
        return w[static_cast<std::size_t>(s) * anchors.size() + col];
    }

    static GaugeMap from_weights(const PhaseWeights& weights);

    /// Degenerate single-anchor gauge v -> v - v(anchor) * ones; the gauge of
    /// classical relative-value iteration.
    static GaugeMap single_anchor(int n, StateIndex anchor);
};

/// Exact weights by linear solve: per class, the transient unknowns satisfy
/// b_{i,k}(s) = sum_{s'} P(s,s') b_{i,(k+1) mod d}(s') with recurrent rows
/// fixed to indicators. Unique because the transient block is substochastic.
/// Throws NumericError if the system is singular (broken classification).
PhaseWeights exact_weights(const StochasticMatrix& p, const ChainStructure& st);

/// Monte-Carlo weights: per transient state, `episodes` absorption runs;
/// entry = hit count / episodes. Recurrent rows are set to indicators.
PhaseWeights estimate_weights(const Mrp& mrp, const ChainStructure& st, int episodes,
                              std::uint64_t seed, int threads = 0);

std::vector<double> apply_gauge(const GaugeMap& gauge, const std::vector<double>& v);
void apply_gauge(const GaugeMap& gauge, const std::vector<double>& v, std::vector<double>& out);

/// Episode budget sufficient for max-entry weight error <= eps_b with
/// probability 1 - delta: ceil(log(2 |T| N / delta) / (2 eps_b^2)).
int required_m(double eps_b, int transient_count, int peripheral_dim, double delta);

/// Exact infinity-operator norm of the difference of two gauge maps with the
/// same anchors: max_s sum_c |w_hat(s,c) - w(s,c)|.
double gauge_deviation(const GaugeMap& g_hat, const GaugeMap& g_exact);

}  // namespace qpoisson
