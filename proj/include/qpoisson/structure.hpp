#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "qpoisson/mrp.hpp"

namespace qpoisson {

/// Directed support graph: edge s -> t iff a transition s -> t was observed
/// (learned variant) or has positive probability (exact variant).
struct SupportGraph {
    int n = 0;
    std::vector<std::vector<int>> adj;  // per state, sorted unique successors

    std::size_t edge_count() const;
    bool has_edge(int u, int v) const;
    bool is_subgraph_of(const SupportGraph& other) const;

    bool operator==(const SupportGraph&) const = default;
};

/// Communication structure of a chain: recurrent classes, transient set,
/// periods, cyclic partitions, and one anchor per (class, phase).
///
/// Labeling is canonical: classes are ordered by their minimum state index,
/// phase 0 is the cyclic set containing the class's minimum state, and each
/// anchor is the minimum state of its phase set. This makes recovered
/// structures directly comparable.
struct ChainStructure {
    int n = 0;
    std::vector<std::vector<int>> classes;             // F_i, sorted states
    std::vector<int> transient;                        // sorted states
    std::vector<int> periods;                          // d_i
    std::vector<std::vector<std::vector<int>>> cyclic; // [i][k] sorted phase sets
    std::vector<std::vector<int>> anchors;             // [i][k] anchor state
    std::vector<int> cls_of;                           // size n, -1 on transient states
    std::vector<int> phase_of;                         // size n, -1 on transient states

    /// N = sum of periods = dimension of the peripheral subspace.
    int peripheral_dim() const;

    /// Column index of (class i, phase k) in the flattened (i,k) ordering.
    int column_of(int cls, int phase) const;

    /// Flattened index set [(0,0), (0,1), ..., (1,0), ...].
    std::vector<std::pair<int, int>> index_set() const;

    /// Anchors in flattened column order.
    std::vector<int> flat_anchors() const;

    bool operator==(const ChainStructure&) const = default;
};

/// Support graph from samples: K successor draws per state, edges are the
/// union of observed transitions. Never contains a false positive.
SupportGraph learn_support_graph(const Mrp& mrp, int budget, std::uint64_t seed, int threads = 0);

/// Support graph read off the matrix: edge iff entry > 0.
SupportGraph exact_support_graph(const StochasticMatrix& p);

/// Classifies states and cyclic structure from a support graph:
/// closed strongly connected components are the recurrent classes, the period
/// is the gcd of BFS level defects over in-class edges, and cyclic sets are
/// BFS levels mod period.
///
/// Throws NumericError if some state has no outgoing edge (cannot happen for
/// graphs derived from a stochastic matrix with budget >= 1).
ChainStructure analyze_structure(const SupportGraph& g);

/// Sample budget sufficient for exact support recovery with probability
/// 1 - delta: ceil(log(n^2/delta) / p_min).
int required_k(double p_min, int n, double delta);

/// Smallest positive transition probability of the matrix.
double min_positive_probability(const StochasticMatrix& p);

}  // namespace qpoisson
