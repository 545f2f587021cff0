#include "qpoisson/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>

#include <omp.h>

#include "qpoisson/structure.hpp"

namespace qpoisson::kernels {

int resolve_threads(int threads) {
    if (threads < 0) throw std::invalid_argument("threads must be >= 0");
    return threads == 0 ? omp_get_max_threads() : threads;
}

void matvec_serial(const StochasticMatrix& p, const std::vector<double>& x,
                   std::vector<double>& y) {
    const int n = p.size();
    y.resize(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        const double* row = p.row(s);
        double acc = 0.0;
        for (int t = 0; t < n; ++t) acc += row[t] * x[static_cast<std::size_t>(t)];
        y[static_cast<std::size_t>(s)] = acc;
    }
}

void matvec_parallel(const StochasticMatrix& p, const std::vector<double>& x,
                     std::vector<double>& y, int threads) {
    const int n = p.size();
    y.resize(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int s = 0; s < n; ++s) {
        const double* row = p.row(s);
        double acc = 0.0;
        for (int t = 0; t < n; ++t) acc += row[t] * x[static_cast<std::size_t>(t)];
        y[static_cast<std::size_t>(s)] = acc;
    }
}

void matvec(const StochasticMatrix& p, const std::vector<double>& x, std::vector<double>& y,
            int threads) {
    int workers = resolve_threads(threads);
    if (workers <= 1)
        matvec_serial(p, x, y);
    else
        matvec_parallel(p, x, y, workers);
}

void sa_sweep_serial(const Mrp& mrp, const std::vector<double>& v, std::uint64_t seed,
                     long iteration, std::vector<double>& out) {
    const int n = mrp.size();
    out.resize(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        SamplerState stream(seed, {StreamPurpose::sa_sweep, static_cast<std::uint64_t>(s),
                                   static_cast<std::uint64_t>(iteration)});
        StateIndex next = mrp.transition.sample_row(s, stream.next_unit());
        out[static_cast<std::size_t>(s)] =
            mrp.reward.values[static_cast<std::size_t>(s)] + v[static_cast<std::size_t>(next)];
    }
}

void sa_sweep_parallel(const Mrp& mrp, const std::vector<double>& v, std::uint64_t seed,
                       long iteration, std::vector<double>& out, int threads) {
    const int n = mrp.size();
    out.resize(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int s = 0; s < n; ++s) {
        SamplerState stream(seed, {StreamPurpose::sa_sweep, static_cast<std::uint64_t>(s),
                                   static_cast<std::uint64_t>(iteration)});
        StateIndex next = mrp.transition.sample_row(s, stream.next_unit());
        out[static_cast<std::size_t>(s)] =
            mrp.reward.values[static_cast<std::size_t>(s)] + v[static_cast<std::size_t>(next)];
    }
}

void sa_sweep(const Mrp& mrp, const std::vector<double>& v, std::uint64_t seed, long iteration,
              std::vector<double>& out, int threads) {
    int workers = resolve_threads(threads);
    if (workers <= 1)
        sa_sweep_serial(mrp, v, seed, iteration, out);
    else
        sa_sweep_parallel(mrp, v, seed, iteration, out, workers);
}

namespace {

void sample_successors(const Mrp& mrp, int s, int budget, std::uint64_t seed,
                       std::vector<int>& successors) {
    SamplerState stream(seed, {StreamPurpose::support_graph, static_cast<std::uint64_t>(s), 0});
    std::vector<char> seen(static_cast<std::size_t>(mrp.size()), 0);
    for (int k = 0; k < budget; ++k) {
        StateIndex next = mrp.transition.sample_row(s, stream.next_unit());
        seen[static_cast<std::size_t>(next)] = 1;
    }
    successors.clear();
    for (int t = 0; t < mrp.size(); ++t)
        if (seen[static_cast<std::size_t>(t)]) successors.push_back(t);
}

}  // namespace

void support_sweep_serial(const Mrp& mrp, int budget, std::uint64_t seed,
                          std::vector<std::vector<int>>& adj) {
    const int n = mrp.size();
    adj.assign(static_cast<std::size_t>(n), {});
    for (int s = 0; s < n; ++s) sample_successors(mrp, s, budget, seed, adj[static_cast<std::size_t>(s)]);
}

void support_sweep_parallel(const Mrp& mrp, int budget, std::uint64_t seed,
                            std::vector<std::vector<int>>& adj, int threads) {
    const int n = mrp.size();
    adj.assign(static_cast<std::size_t>(n), {});
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int s = 0; s < n; ++s) sample_successors(mrp, s, budget, seed, adj[static_cast<std::size_t>(s)]);
}

void support_sweep(const Mrp& mrp, int budget, std::uint64_t seed,
                   std::vector<std::vector<int>>& adj, int threads) {
    int workers = resolve_threads(threads);
    if (workers <= 1)
        support_sweep_serial(mrp, budget, seed, adj);
    else
        support_sweep_parallel(mrp, budget, seed, adj, workers);
}

namespace {

// One absorption run from transient state s: walk until the recurrent set is
// hit, then report the flattened (class, phase offset) column.
int absorption_episode_column(const Mrp& mrp, const ChainStructure& st, int s,
                              SamplerState& stream) {
    StateIndex x = s;
    long tau = 0;
    while (st.cls_of[static_cast<std::size_t>(x)] == -1) {
        if (tau >= kEpisodeCap)
            throw NumericError("absorption episode from state " + std::to_string(s) +
                               " exceeded " + std::to_string(kEpisodeCap) +
                               " steps; transient classification looks wrong");
        x = mrp.transition.sample_row(x, stream.next_unit());
        ++tau;
    }
    int cls = st.cls_of[static_cast<std::size_t>(x)];
    int d = st.periods[static_cast<std::size_t>(cls)];
    long offset = (st.phase_of[static_cast<std::size_t>(x)] - tau) % d;
    if (offset < 0) offset += d;
    return st.column_of(cls, static_cast<int>(offset));
}

void count_state_episodes(const Mrp& mrp, const ChainStructure& st, int s, int episodes,
                          std::uint64_t seed, std::vector<long>& counts) {
    counts.assign(static_cast<std::size_t>(st.peripheral_dim()), 0);
    for (int e = 0; e < episodes; ++e) {
        SamplerState stream(seed, {StreamPurpose::absorption, static_cast<std::uint64_t>(s),
                                   static_cast<std::uint64_t>(e)});
        ++counts[static_cast<std::size_t>(absorption_episode_column(mrp, st, s, stream))];
    }
}

}  // namespace

void absorption_sweep_serial(const Mrp& mrp, const ChainStructure& st, int episodes,
                             std::uint64_t seed, std::vector<std::vector<long>>& counts) {
    counts.assign(st.transient.size(), {});
    for (std::size_t j = 0; j < st.transient.size(); ++j)
        count_state_episodes(mrp, st, st.transient[j], episodes, seed, counts[j]);
}

void absorption_sweep_parallel(const Mrp& mrp, const ChainStructure& st, int episodes,
                               std::uint64_t seed, std::vector<std::vector<long>>& counts,
                               int threads) {
    counts.assign(st.transient.size(), {});
    // Exceptions cannot unwind out of the parallel region; capture and rethrow.
    std::atomic<bool> failed{false};
    std::string message;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (long j = 0; j < static_cast<long>(st.transient.size()); ++j) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            count_state_episodes(mrp, st, st.transient[static_cast<std::size_t>(j)], episodes, seed,
                                 counts[static_cast<std::size_t>(j)]);
        } catch (const std::exception& e) {
            bool expected = false;
            if (failed.compare_exchange_strong(expected, true)) {
#pragma omp critical(qpoisson_absorption_error)
                message = e.what();
            }
        }
    }
    if (failed.load()) throw NumericError(message);
}

void absorption_sweep(const Mrp& mrp, const ChainStructure& st, int episodes, std::uint64_t seed,
                      std::vector<std::vector<long>>& counts, int threads) {
    int workers = resolve_threads(threads);
    if (workers <= 1)
        absorption_sweep_serial(mrp, st, episodes, seed, counts);
    else
        absorption_sweep_parallel(mrp, st, episodes, seed, counts, workers);
}

}  // namespace qpoisson::kernels
