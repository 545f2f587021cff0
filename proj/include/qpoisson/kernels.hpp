#pragma once

#include <cstdint>
#include <vector>

#include "qpoisson/mrp.hpp"

namespace qpoisson {

struct ChainStructure;

/// Data-parallel inner loops of the pipeline. Every kernel comes in a serial
/// reference variant and an OpenMP variant; the dispatcher picks by thread
/// count (0 = runtime default, 1 = serial). All kernels write disjoint
/// per-state outputs from counter-based streams, so serial and parallel runs
/// produce bitwise-identical results.
namespace kernels {

/// y = P x.
void matvec_serial(const StochasticMatrix& p, const std::vector<double>& x, std::vector<double>& y);
void matvec_parallel(const StochasticMatrix& p, const std::vector<double>& x, std::vector<double>& y,
                     int threads);
void matvec(const StochasticMatrix& p, const std::vector<double>& x, std::vector<double>& y,
            int threads = 0);

/// One synchronous TD sweep: out(s) = r(s) + v(s~) with one successor draw
/// per state from stream (sa_sweep, s, iteration).
void sa_sweep_serial(const Mrp& mrp, const std::vector<double>& v, std::uint64_t seed,
                     long iteration, std::vector<double>& out);
void sa_sweep_parallel(const Mrp& mrp, const std::vector<double>& v, std::uint64_t seed,
                       long iteration, std::vector<double>& out, int threads);
void sa_sweep(const Mrp& mrp, const std::vector<double>& v, std::uint64_t seed, long iteration,
              std::vector<double>& out, int threads = 0);

/// Support-graph sampling: adj[s] = sorted unique successors over `budget`
/// draws from stream (support_graph, s, 0).
void support_sweep_serial(const Mrp& mrp, int budget, std::uint64_t seed,
                          std::vector<std::vector<int>>& adj);
void support_sweep_parallel(const Mrp& mrp, int budget, std::uint64_t seed,
                            std::vector<std::vector<int>>& adj, int threads);
void support_sweep(const Mrp& mrp, int budget, std::uint64_t seed,
                   std::vector<std::vector<int>>& adj, int threads = 0);

/// Absorption episodes for every transient state: counts[j][c] is the number
/// of the `episodes` runs from transient state j that entered class/phase
/// column c. Episode e of state s uses stream (absorption, s, e). Throws
/// NumericError if an episode exceeds kEpisodeCap steps.
void absorption_sweep_serial(const Mrp& mrp, const ChainStructure& st, int episodes,
                             std::uint64_t seed, std::vector<std::vector<long>>& counts);
void absorption_sweep_parallel(const Mrp& mrp, const ChainStructure& st, int episodes,
                               std::uint64_t seed, std::vector<std::vector<long>>& counts,
                               int threads);
void absorption_sweep(const Mrp& mrp, const ChainStructure& st, int episodes, std::uint64_t seed,
                      std::vector<std::vector<long>>& counts, int threads = 0);

/// Effective worker count for a requested thread setting.
int resolve_threads(int threads);

}  // namespace kernels

}  // namespace qpoisson
