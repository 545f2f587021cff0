#pragma once

#include <sys/wait.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qpoisson/bench.hpp"
#include "qpoisson/gauge.hpp"
#include "qpoisson/mrp.hpp"
#include "qpoisson/rng.hpp"
#include "qpoisson/structure.hpp"

namespace fixtures {

using namespace qpoisson;

/// Two-state period-2 swap chain, rewards (1, 0).
inline Mrp swap2() {
    return Mrp(StochasticMatrix(2, {0.0, 1.0, 1.0, 0.0}), RewardVector{{1.0, 0.0}, 1.0});
}

/// Four states: 0 and 1 absorbing with rewards 1 and 0; 2 -> {0 w.p. 0.5,
/// 3 w.p. 0.5}; 3 -> {1 w.p. 0.3, 2 w.p. 0.7}; zero reward on 2 and 3.
inline Mrp abs4() {
    return Mrp(StochasticMatrix(4,
                                {
                                    1.0, 0.0, 0.0, 0.0,  //
                                    0.0, 1.0, 0.0, 0.0,  //
                                    0.5, 0.0, 0.0, 0.5,  //
                                    0.0, 0.3, 0.7, 0.0,  //
                                }),
               RewardVector{{1.0, 0.0, 0.0, 0.0}, 1.0});
}

inline ChainStructure exact_structure(const Mrp& mrp) {
    return analyze_structure(exact_support_graph(mrp.transition));
}

inline GaugeMap exact_gauge(const Mrp& mrp) {
    ChainStructure st = exact_structure(mrp);
    return GaugeMap::from_weights(exact_weights(mrp.transition, st));
}

/// Random reducible/periodic chain: 1-3 recurrent classes with random periods
/// and phase sizes, a few transient states with random substochastic rows and
/// exits into random class entries. Entries are continuous random values, so
/// equal-modulus spectral ties (beyond conjugate pairs) do not occur.
inline Mrp random_reducible_chain(std::uint64_t seed, int max_states = 12) {
    SamplerState rng(seed, {StreamPurpose::generic, 0, 0});
    auto uniform_int = [&](int lo, int hi) {
        return lo + static_cast<int>(rng.next_unit() * (hi - lo + 1));
    };

    struct Phase {
        int begin;
        int size;
    };
    std::vector<std::vector<Phase>> classes;
    int next_state = 0;
    const int class_budget = max_states - 2;  // leave room for transients
    const int class_count = uniform_int(1, 3);
    for (int i = 0; i < class_count; ++i) {
        int period = uniform_int(1, 3);
        if (next_state + 2 * period > class_budget && !classes.empty()) break;
        if (next_state + 2 * period > class_budget) period = 1;
        std::vector<Phase> phases;
        for (int k = 0; k < period; ++k) {
            int size = uniform_int(1, 2);
            phases.push_back({next_state, size});
            next_state += size;
        }
        classes.push_back(std::move(phases));
    }
    const int transient_count = uniform_int(1, max_states - next_state);
    const int n = next_state + transient_count;

    std::vector<double> rows(static_cast<std::size_t>(n) * n, 0.0);
    auto entry = [&](int s, int t) -> double& { return rows[static_cast<std::size_t>(s) * n + t]; };

    for (const auto& phases : classes) {
        const int d = static_cast<int>(phases.size());
        for (int k = 0; k < d; ++k) {
            const Phase& from = phases[static_cast<std::size_t>(k)];
            const Phase& to = phases[static_cast<std::size_t>((k + 1) % d)];
            for (int u = 0; u < from.size; ++u) {
                const int s = from.begin + u;
                double total = 0.0;
                for (int w = 0; w < to.size; ++w) {
                    double mass = 0.1 + rng.next_unit();
                    entry(s, to.begin + w) = mass;
                    total += mass;
                }
                for (int w = 0; w < to.size; ++w) entry(s, to.begin + w) /= total;
            }
        }
    }
    for (int j = 0; j < transient_count; ++j) {
        const int s = next_state + j;
        double total = 0.0;
        // Mass on later transient states keeps the block substochastic.
        for (int t = next_state; t < n; ++t) {
            if (t == s && transient_count == 1) continue;
            double mass = rng.next_unit() * 0.5;
            if (t == s) mass *= 0.5;
            entry(s, t) = mass;
            total += mass;
        }
        double exit_mass = 0.3 + rng.next_unit();  // guaranteed positive exit
        const auto& target = classes[static_cast<std::size_t>(uniform_int(0, static_cast<int>(classes.size()) - 1))];
        entry(s, target.front().begin) += exit_mass;
        total += exit_mass;
        for (int t = 0; t < n; ++t) entry(s, t) /= total;
    }

    std::vector<double> rewards(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) rewards[static_cast<std::size_t>(s)] = rng.next_unit();
    return Mrp(StochasticMatrix(n, std::move(rows)), RewardVector{std::move(rewards), 1.0});
}

inline std::vector<double> random_vector(std::uint64_t seed, int n, double scale = 1.0) {
    SamplerState rng(seed, {StreamPurpose::generic, 1, 0});
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = scale * (2.0 * rng.next_unit() - 1.0);
    return v;
}

inline double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

inline double sup_norm(const std::vector<double>& a) {
    double worst = 0.0;
    for (double x : a) worst = std::max(worst, std::abs(x));
    return worst;
}

/// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("qpoisson_test_" + std::to_string(counter.fetch_add(1)) + "_" +
                std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

/// Runs a command line, capturing stdout/stderr; returns the exit code.
struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline RunResult run_process(const std::string& command, const TempDir& dir) {
    static std::atomic<int> counter{0};
    int id = counter.fetch_add(1);
    std::string out_path = dir.file("cmd_out_" + std::to_string(id));
    std::string err_path = dir.file("cmd_err_" + std::to_string(id));
    std::string full = command + " >" + out_path + " 2>" + err_path;
    int status = std::system(full.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    return result;
}

}  // namespace fixtures
