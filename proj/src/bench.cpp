#include "qpoisson/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <omp.h>

#include "qpoisson/gauge.hpp"
#include "qpoisson/kernels.hpp"
#include "qpoisson/oracle.hpp"

namespace qpoisson {

ExitSchedule ExitSchedule::two_class_linear(double p_lo, double p_hi) {
    ExitSchedule e;
    e.kind = Kind::two_class_linear;
    e.p_lo = p_lo;
    e.p_hi = p_hi;
    return e;
}

ExitSchedule ExitSchedule::three_class(double a) {
    ExitSchedule e;
    e.kind = Kind::three_class;
    e.a = a;
    return e;
}

int MrpSpec::state_count() const {
    int n = transient_len;
    for (const auto& cls : classes) n += cls.phase_size * cls.period;
    return n;
}

namespace {

void check_spec(const MrpSpec& spec) {
    auto bad = [&](const std::string& msg) {
        throw std::invalid_argument("build_mrp(" + spec.name + "): " + msg);
    };
    if (spec.classes.empty()) bad("at least one recurrent class is required");
    if (spec.transient_len < 1) bad("transient length must be >= 1");
    if (!(spec.eta > 0.0 && spec.eta < 1.0)) bad("eta must be in (0, 1)");
    if (!(spec.epsilon >= 0.0 && spec.epsilon < 1.0)) bad("epsilon must be in [0, 1)");
    for (const auto& cls : spec.classes) {
        if (cls.phase_size < 1 || cls.period < 1) bad("phase sizes and periods must be >= 1");
        if (cls.phase_rewards.size() != static_cast<std::size_t>(cls.period))
            bad("phase reward count must equal the period");
        for (double r : cls.phase_rewards)
            if (!(r >= 0.0 && r <= 1.0)) bad("phase rewards must lie in [0, 1]");
    }
    switch (spec.exits.kind) {
        case ExitSchedule::Kind::two_class_linear:
            if (spec.classes.size() != 2) bad("two-class schedule needs exactly two classes");
            if (!(spec.exits.p_lo > 0.0 && spec.exits.p_lo < 1.0 && spec.exits.p_hi > 0.0 &&
                  spec.exits.p_hi < 1.0))
                bad("schedule endpoints must lie in (0, 1)");
            break;
        case ExitSchedule::Kind::three_class:
            if (spec.classes.size() != 3) bad("three-class schedule needs exactly three classes");
            if (!(spec.exits.a > 0.0 && spec.exits.a < 1.0)) bad("a must lie in (0, 1)");
            break;
    }
}

std::vector<double> exit_split(const MrpSpec& spec, int j) {
    const double xi = spec.transient_len > 1
                          ? static_cast<double>(j) / (spec.transient_len - 1)
                          : 0.0;
    switch (spec.exits.kind) {
        case ExitSchedule::Kind::two_class_linear: {
            double q = spec.exits.p_lo + (spec.exits.p_hi - spec.exits.p_lo) * xi;
            return {q, 1.0 - q};
        }
        case ExitSchedule::Kind::three_class:
            return {spec.exits.a * (1.0 - xi), spec.exits.a * xi, 1.0 - spec.exits.a};
    }
    return {};
}

}  // namespace

BuiltMrp build_mrp(const MrpSpec& spec) {
    check_spec(spec);
    const int n = spec.state_count();
    const int class_count = static_cast<int>(spec.classes.size());

    ChainStructure st;
    st.n = n;
    st.cls_of.assign(static_cast<std::size_t>(n), -1);
    st.phase_of.assign(static_cast<std::size_t>(n), -1);

    std::vector<double> rows(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> rewards(static_cast<std::size_t>(n), 0.0);
    auto entry = [&](int s, int t) -> double& { return rows[static_cast<std::size_t>(s) * n + t]; };

    int base = 0;
    std::vector<int> entry_states;
    for (int i = 0; i < class_count; ++i) {
        const auto& cls = spec.classes[static_cast<std::size_t>(i)];
        const int m = cls.phase_size;
        const int d = cls.period;
        entry_states.push_back(base);

        std::vector<int> members;
        std::vector<std::vector<int>> phases(static_cast<std::size_t>(d));
        std::vector<int> anchors;
        for (int k = 0; k < d; ++k) {
            const int phase_base = base + k * m;
            for (int u = 0; u < m; ++u) {
                const int s = phase_base + u;
                members.push_back(s);
                phases[static_cast<std::size_t>(k)].push_back(s);
                st.cls_of[static_cast<std::size_t>(s)] = i;
                st.phase_of[static_cast<std::size_t>(s)] = k;
                rewards[static_cast<std::size_t>(s)] = cls.phase_rewards[static_cast<std::size_t>(k)];
                const int next_base = base + ((k + 1) % d) * m;
                for (int w = 0; w < m; ++w) entry(s, next_base + w) = 1.0 / m;
            }
            anchors.push_back(phase_base);
        }
        st.classes.push_back(std::move(members));
        st.periods.push_back(d);
        st.cyclic.push_back(std::move(phases));
        st.anchors.push_back(std::move(anchors));
        base += m * d;
    }

    const int t_base = base;
    const int len = spec.transient_len;
    for (int j = 0; j < len; ++j) {
        const int s = t_base + j;
        st.transient.push_back(s);
        if (j < len - 1) {
            entry(s, s) = (1.0 - spec.eta) * spec.epsilon;
            entry(s, s + 1) = (1.0 - spec.eta) * (1.0 - spec.epsilon);
        } else {
            entry(s, s) = 1.0 - spec.eta;
        }
        std::vector<double> split = exit_split(spec, j);
        double mass = 0.0;
        for (double q : split) mass += q;
        if (std::abs(mass - 1.0) > 1e-12)
            throw NumericError("build_mrp(" + spec.name + "): exit schedule sums to " +
                               std::to_string(mass) + " at transient " + std::to_string(j));
        for (int i = 0; i < class_count; ++i)
            entry(s, entry_states[static_cast<std::size_t>(i)]) +=
                spec.eta * split[static_cast<std::size_t>(i)];
    }

    StochasticMatrix p(n, std::move(rows));
    RewardVector r{std::move(rewards), 1.0};
    return BuiltMrp{Mrp(std::move(p), std::move(r)), std::move(st)};
}

std::vector<MrpSpec> suite() {
    std::vector<MrpSpec> specs;

    specs.push_back({"aperiodic_multichain",
                     {{50, 1, {0.15}}, {50, 1, {0.85}}},
                     60, 0.25, 0.08,
                     ExitSchedule::two_class_linear(0.15, 0.85)});
    specs.push_back({"hard_gain_gap",
                     {{20, 3, {0.0, 0.10, 0.20}}, {16, 5, {0.90, 0.95, 1.00, 0.85, 0.90}}},
                     60, 0.22, 0.07,
                     ExitSchedule::two_class_linear(0.10, 0.90)});
    specs.push_back({"safety",
                     {{35, 2, {0.80, 1.00}}, {1, 1, {0.0}}},
                     60, 0.18, 0.10,
                     ExitSchedule::two_class_linear(0.10, 0.95)});
    specs.push_back({"three_class_var_branch",
                     {{20, 2, {0.0, 0.20}}, {18, 3, {0.30, 0.50, 0.70}}, {40, 1, {0.95}}},
                     60, 0.22, 0.08,
                     ExitSchedule::three_class(0.90)});
    specs.push_back({"var_branch_2v3",
                     {{30, 2, {0.20, 0.80}}, {24, 3, {0.05, 0.05, 0.80}}},
                     60, 0.20, 0.07,
                     ExitSchedule::two_class_linear(0.15, 0.85)});
    specs.push_back({"var_branch_2v4",
                     {{28, 2, {0.20, 0.80}}, {20, 4, {0.0, 0.0, 0.80, 0.80}}},
                     60, 0.20, 0.07,
                     ExitSchedule::two_class_linear(0.15, 0.85)});
    return specs;
}

MrpSpec scaled(const MrpSpec& spec, int divisor) {
    if (divisor < 1) throw std::invalid_argument("scaled: divisor must be >= 1");
    MrpSpec out = spec;
    for (auto& cls : out.classes) cls.phase_size = std::max(1, cls.phase_size / divisor);
    return out;
}

namespace {

double sup_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

struct SeedCurves {
    ErrorCurve projected;
    ErrorCurve anchor_only;
    ErrorCurve unprojected;
};

template <typename Fn>
auto with_stage_label(const char* stage, Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw NumericError(std::string(stage) + ": " + e.what());
    }
}

SeedCurves run_one_seed(const Mrp& mrp, const std::vector<double>& true_gain,
                        const MrpSpec& spec, const ExperimentConfig& cfg, std::uint64_t seed,
                        int threads) {
    SeedCurves out;

    SupportGraph graph = with_stage_label("structure learning", [&] {
        return learn_support_graph(mrp, cfg.support_budget, seed, threads);
    });
    ChainStructure st = with_stage_label("structure analysis", [&] {
        return analyze_structure(graph);
    });
    PhaseWeights weights = with_stage_label("weight estimation", [&] {
        return estimate_weights(mrp, st, cfg.weight_episodes, seed, threads);
    });
    GaugeMap gauge = GaugeMap::from_weights(weights);

    SaConfig sa;
    sa.schedule = cfg.schedule;
    sa.iterations = cfg.td_iterations;
    sa.log_every = cfg.log_every;
    sa.seed = seed;
    sa.threads = threads;

    auto curve_points = [](const SolveTrace& trace) {
        std::vector<CurvePoint> points;
        for (const auto& pt : trace.points)
            if (pt.err) points.push_back({pt.iteration, *pt.err});
        return points;
    };

    LogHook projected_hook = [&](long t, const std::vector<double>& v) {
        ResidualEstimate res =
            estimate_residual(mrp, v, gauge, cfg.anchor_samples, seed, static_cast<std::uint64_t>(t));
        std::vector<double> profile = gain_profile(res, weights, st);
        return std::optional<double>(sup_distance(profile, true_gain));
    };
    SolveResult main_run = with_stage_label("projected SA", [&] {
        return projected_sa(mrp, gauge, sa, std::vector<double>(mrp.size(), 0.0), projected_hook);
    });
    out.projected = {spec.name, "projected", seed, curve_points(main_run.trace)};

    // Baselines share the seed and the per-iteration sample budget; their
    // scalar estimates use the same J at the same anchor.
    int anchor = mrp.size() - 1;
    for (const auto& cls : st.classes) anchor = std::min(anchor, cls.front());

    LogHook scalar_hook = [&](long t, const std::vector<double>& v) {
        double g = scalar_gain_estimate(mrp, v, anchor, cfg.anchor_samples, seed,
                                        static_cast<std::uint64_t>(t));
        std::vector<double> profile(static_cast<std::size_t>(mrp.size()), g);
        return std::optional<double>(sup_distance(profile, true_gain));
    };
    BaselineResult anchor_run = with_stage_label("anchor-only baseline", [&] {
        return anchor_only_td(mrp, sa, anchor, cfg.anchor_samples, scalar_hook);
    });
    out.anchor_only = {spec.name, "anchor_only", seed, curve_points(anchor_run.trace)};

    BaselineResult unprojected_run = with_stage_label("unprojected baseline", [&] {
        return unprojected_td(mrp, sa, anchor, cfg.anchor_samples, scalar_hook);
    });
    out.unprojected = {spec.name, "unprojected", seed, curve_points(unprojected_run.trace)};
    return out;
}

}  // namespace

std::vector<ErrorCurve> run_experiment(const MrpSpec& spec, const ExperimentConfig& cfg) {
    BuiltMrp built = build_mrp(spec);
    PhaseWeights exact = exact_weights(built.mrp.transition, built.structure);
    GaugeMap exact_gauge = GaugeMap::from_weights(exact);
    ExactSolution truth = exact_solve(built.mrp, exact_gauge);

    const int seed_count = static_cast<int>(cfg.seeds.size());
    std::vector<SeedCurves> per_seed(static_cast<std::size_t>(seed_count));

    // Seeds are independent; parallelize across them and keep stages serial
    // inside (nested regions fall back to one thread anyway).
    int workers = std::min(kernels::resolve_threads(cfg.threads), std::max(seed_count, 1));
    if (workers <= 1) {
        for (int i = 0; i < seed_count; ++i) {
            try {
                per_seed[static_cast<std::size_t>(i)] = run_one_seed(
                    built.mrp, truth.gain, spec, cfg, cfg.seeds[static_cast<std::size_t>(i)],
                    cfg.threads);
            } catch (const std::exception& e) {
                throw NumericError("instance " + spec.name + ": " + e.what());
            }
        }
    } else {
        std::atomic<bool> failed{false};
        std::string message;
#pragma omp parallel for schedule(dynamic) num_threads(workers)
        for (int i = 0; i < seed_count; ++i) {
            if (failed.load(std::memory_order_relaxed)) continue;
            try {
                per_seed[static_cast<std::size_t>(i)] = run_one_seed(
                    built.mrp, truth.gain, spec, cfg, cfg.seeds[static_cast<std::size_t>(i)], 1);
            } catch (const std::exception& e) {
                bool expected = false;
                if (failed.compare_exchange_strong(expected, true)) {
#pragma omp critical(qpoisson_experiment_error)
                    message = e.what();
                }
            }
        }
        if (failed.load()) throw NumericError("instance " + spec.name + ": " + message);
    }

    std::vector<ErrorCurve> curves;
    for (const auto& seed_curves : per_seed) {
        curves.push_back(seed_curves.projected);
        curves.push_back(seed_curves.anchor_only);
        curves.push_back(seed_curves.unprojected);
    }
    return curves;
}

namespace {

void sort_curves(std::vector<ErrorCurve>& curves) {
    std::sort(curves.begin(), curves.end(), [](const ErrorCurve& a, const ErrorCurve& b) {
        return std::tie(a.instance, a.method, a.seed) < std::tie(b.instance, b.method, b.seed);
    });
}

std::string format_real(double x) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", x);
    return buffer;
}

}  // namespace

void write_curves(const std::vector<ErrorCurve>& curves, const std::string& path) {
    std::vector<ErrorCurve> sorted = curves;
    sort_curves(sorted);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "instance,method,seed,iteration,err_linf\n";
    for (const auto& curve : sorted)
        for (const auto& pt : curve.points)
            out << curve.instance << ',' << curve.method << ',' << curve.seed << ','
                << pt.iteration << ',' << format_real(pt.err) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<ErrorCurve> read_curves(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "instance,method,seed,iteration,err_linf")
        throw std::runtime_error("unexpected curve CSV header in " + path);

    std::vector<ErrorCurve> curves;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string instance, method, seed_text, iter_text, err_text;
        if (!std::getline(row, instance, ',') || !std::getline(row, method, ',') ||
            !std::getline(row, seed_text, ',') || !std::getline(row, iter_text, ',') ||
            !std::getline(row, err_text))
            throw std::runtime_error("malformed curve row: " + line);
        std::uint64_t seed = std::stoull(seed_text);
        CurvePoint pt{std::stol(iter_text), std::stod(err_text)};
        if (curves.empty() || curves.back().instance != instance ||
            curves.back().method != method || curves.back().seed != seed)
            curves.push_back({instance, method, seed, {}});
        curves.back().points.push_back(pt);
    }
    return curves;
}

std::vector<SummaryRow> summarize(const std::vector<ErrorCurve>& curves) {
    struct Key {
        std::string instance;
        std::string method;
        long iteration;
        bool operator<(const Key& other) const {
            return std::tie(instance, method, iteration) <
                   std::tie(other.instance, other.method, other.iteration);
        }
    };
    std::map<Key, std::vector<double>> buckets;
    for (const auto& curve : curves)
        for (const auto& pt : curve.points)
            buckets[{curve.instance, curve.method, pt.iteration}].push_back(pt.err);

    std::vector<SummaryRow> rows;
    for (const auto& [key, values] : buckets) {
        SummaryRow row;
        row.instance = key.instance;
        row.method = key.method;
        row.iteration = key.iteration;
        row.seeds = static_cast<int>(values.size());
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        row.mean_err = mean;
        if (values.size() > 1) {
            double ss = 0.0;
            for (double v : values) ss += (v - mean) * (v - mean);
            row.std_err = std::sqrt(ss / static_cast<double>(values.size() - 1));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_summary(const std::vector<SummaryRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "instance,method,iteration,mean_err,std_err,seeds\n";
    for (const auto& row : rows)
        out << row.instance << ',' << row.method << ',' << row.iteration << ','
            << format_real(row.mean_err) << ',' << format_real(row.std_err) << ',' << row.seeds
            << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace qpoisson
