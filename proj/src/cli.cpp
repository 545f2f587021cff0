#include "qpoisson/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qpoisson/bench.hpp"
#include "qpoisson/gauge.hpp"
#include "qpoisson/io.hpp"
#include "qpoisson/oracle.hpp"
#include "qpoisson/solver.hpp"
#include "qpoisson/structure.hpp"

namespace qpoisson {

namespace {

std::vector<std::string> split_list(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : text) {
        if (c == sep) {
            parts.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    parts.push_back(current);
    return parts;
}

// Relative output paths land in $QPOISSON_OUT_DIR when it is set.
std::string resolve_output(const std::string& path) {
    const char* dir = std::getenv("QPOISSON_OUT_DIR");
    if (!dir || *dir == '\0') return path;
    std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(dir) / p).string();
}

struct StageSettings {
    std::uint64_t seed = 0;
    int threads = 0;
};

struct ScheduleFlags {
    std::string kind = "polynomial";
    double alpha = 1.0;
    double gamma_exp = 0.65;
    double offset = 500.0;
    double t0 = 1.0;

    StepSchedule build() const {
        if (kind == "polynomial") return StepSchedule::polynomial(alpha, gamma_exp, offset);
        if (kind == "inverse-linear") return StepSchedule::inverse_linear(alpha, t0);
        throw std::invalid_argument("unknown schedule kind: " + kind);
    }
};

void add_schedule_flags(CLI::App* cmd, ScheduleFlags& flags) {
    cmd->add_option("--schedule", flags.kind, "Step schedule: polynomial | inverse-linear")
        ->check(CLI::IsMember({"polynomial", "inverse-linear"}))
        ->capture_default_str();
    cmd->add_option("--alpha", flags.alpha, "Schedule scale alpha")->capture_default_str();
    cmd->add_option("--gamma-exp", flags.gamma_exp, "Polynomial decay exponent in (0.5, 1]")
        ->capture_default_str();
    cmd->add_option("--offset", flags.offset, "Polynomial schedule offset (>= 1)")
        ->capture_default_str();
    cmd->add_option("--t0", flags.t0, "Inverse-linear schedule offset (>= alpha)")
        ->capture_default_str();
}

ChainStructure structure_for(const Mrp& mrp, const std::string& mode, int budget,
                             const StageSettings& stage) {
    if (mode == "exact") return analyze_structure(exact_support_graph(mrp.transition));
    if (budget < 1) throw std::invalid_argument("learned structure needs --budget >= 1");
    return analyze_structure(learn_support_graph(mrp, budget, stage.seed, stage.threads));
}

std::vector<double> vector_from_json_file(const std::string& path) {
    nlohmann::json j = load_json(path);
    if (j.is_array()) return j.get<std::vector<double>>();
    for (const char* key : {"v", "v_T", "values"})
        if (j.contains(key)) return j.at(key).get<std::vector<double>>();
    throw std::runtime_error("no vector found in " + path + " (expected array or v/v_T key)");
}

int cmd_validate(const std::string& chain_path, double tol) {
    nlohmann::json j = load_json(chain_path);
    const int n = j.at("n").get<int>();
    std::vector<double> flat;
    for (const auto& row : j.at("P"))
        for (const auto& value : row) flat.push_back(value.get<double>());
    std::vector<double> rewards = j.at("r").get<std::vector<double>>();
    ValidationReport report = validate_chain(n, flat, rewards, j.at("R").get<double>(), tol);
    std::cout << report.to_string() << '\n';
    return report.ok ? kExitOk : kExitValidation;
}

int cmd_plan(int n, double p_min, int t_count, int peripheral_dim, double eps, double delta,
             const std::string& chain_path) {
    const int k = required_k(p_min, n, delta);
    const double eps_b = eps / (3.0 * peripheral_dim);
    const int m = t_count > 0 ? required_m(eps_b, t_count, peripheral_dim, delta) : 0;
    const long t = static_cast<long>(std::ceil(1.0 / (eps * eps)));

    std::optional<double> h_abs;
    if (!chain_path.empty()) {
        Mrp mrp = load_chain(chain_path);
        ChainStructure st = analyze_structure(exact_support_graph(mrp.transition));
        h_abs = expected_absorption_times(mrp, st).h_abs;
    }

    std::cout << "budget plan (target eps = " << eps << ", delta = " << delta << ")\n";
    std::cout << "  K  support samples per state      = " << k << '\n';
    std::cout << "  M  episodes per transient state   = " << m << "  (eps_b = eps/(3N) = " << eps_b
              << ")\n";
    std::cout << "  T  SA iterations                  = " << t << '\n';
    if (h_abs) {
        std::cout << "  H_abs expected absorption time    = " << *h_abs << '\n';
        double total = static_cast<double>(n) * k +
                       static_cast<double>(t_count) * m * (*h_abs) +
                       static_cast<double>(n) * t;
        std::cout << "  expected queries nK + |T|MH + nT  = " << total << '\n';
    } else {
        std::cout << "  H_abs not computed (pass --chain to include the absorption term)\n";
        double total = static_cast<double>(n) * k + static_cast<double>(n) * t;
        std::cout << "  expected queries nK + nT          = " << total
                  << "  (absorption term omitted)\n";
    }
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Generalized Poisson equation solver for finite Markov reward processes"};
    app.name("qpoisson");
    app.require_subcommand(1);
    app.fallthrough();  // global --seed/--threads may follow the subcommand

    StageSettings stage;
    app.add_option("--seed", stage.seed, "Seed deriving every sample stream")->capture_default_str();
    app.add_option("--threads", stage.threads, "Worker threads (0 = runtime default, 1 = serial)")
        ->capture_default_str();

    std::string chain_path, structure_path, weights_path, solution_path, in_path;
    std::string out_path, trace_path;
    double tol = kRowSumTol;

    auto* validate_cmd = app.add_subcommand("validate", "Check a chain file against the invariants");
    validate_cmd->add_option("--chain", chain_path, "Chain JSON file")->required();
    validate_cmd->add_option("--tol", tol, "Row-sum tolerance")->capture_default_str();

    std::string structure_mode = "exact";
    int support_budget = 0;
    auto* structure_cmd = app.add_subcommand("structure", "Recover classes, periods, and anchors");
    structure_cmd->add_option("--chain", chain_path, "Chain JSON file")->required();
    structure_cmd->add_option("--mode", structure_mode, "exact | learned")
        ->check(CLI::IsMember({"exact", "learned"}))
        ->capture_default_str();
    structure_cmd->add_option("--budget", support_budget, "Samples per state (learned mode)");
    structure_cmd->add_option("--out", out_path, "Structure JSON output")->required();

    std::string weights_mode = "exact";
    int weight_episodes = 0;
    auto* weights_cmd = app.add_subcommand("weights", "Compute phase-offset absorption weights");
    weights_cmd->add_option("--chain", chain_path, "Chain JSON file")->required();
    weights_cmd->add_option("--structure", structure_path, "Structure JSON file")->required();
    weights_cmd->add_option("--mode", weights_mode, "exact | estimated")
        ->check(CLI::IsMember({"exact", "estimated"}))
        ->capture_default_str();
    weights_cmd->add_option("--episodes", weight_episodes, "Absorption episodes per transient state");
    weights_cmd->add_option("--out", out_path, "Weights JSON output")->required();

    auto* gauge_cmd = app.add_subcommand("gauge", "Apply the anchor gauge map to a vector");
    gauge_cmd->add_option("--chain", chain_path, "Chain JSON file")->required();
    gauge_cmd->add_option("--weights", weights_path, "Weights JSON file")->required();
    gauge_cmd->add_option("--in", in_path, "Vector JSON input (array or v/v_T key)");
    gauge_cmd->add_option("--out", out_path, "Output JSON")->required();

    std::string gauge_source = "exact";
    long sa_iterations = 12000;
    long log_every = 120;
    int anchor_samples = 220;
    int solve_support_budget = 150;
    int solve_weight_episodes = 4000;
    ScheduleFlags schedule_flags;
    auto* solve_cmd = app.add_subcommand("solve", "Projected stochastic approximation");
    solve_cmd->add_option("--chain", chain_path, "Chain JSON file")->required();
    solve_cmd->add_option("--weights", weights_path, "Weights JSON file (overrides --gauge)");
    solve_cmd->add_option("--gauge", gauge_source,
                          "Gauge source when no weights file is given: exact | estimated")
        ->check(CLI::IsMember({"exact", "estimated"}))
        ->capture_default_str();
    solve_cmd->add_option("--K", solve_support_budget,
                          "Support samples per state (estimated gauge)")->capture_default_str();
    solve_cmd->add_option("--M", solve_weight_episodes,
                          "Absorption episodes per transient state (estimated gauge)")
        ->capture_default_str();
    solve_cmd->add_option("--T", sa_iterations, "SA iterations")->capture_default_str();
    solve_cmd->add_option("--log-every", log_every, "Trace logging stride")->capture_default_str();
    solve_cmd->add_option("--J", anchor_samples, "Samples per anchor for the final residual")
        ->capture_default_str();
    solve_cmd->add_option("--v0", in_path, "Initial iterate JSON (defaults to zero)");
    solve_cmd->add_option("--out", out_path, "Solution JSON output")->required();
    solve_cmd->add_option("--trace", trace_path, "Trace CSV output");
    add_schedule_flags(solve_cmd, schedule_flags);

    auto* residual_cmd = app.add_subcommand("residual", "Estimate and reconstruct the residual");
    residual_cmd->add_option("--chain", chain_path, "Chain JSON file")->required();
    residual_cmd->add_option("--weights", weights_path, "Weights JSON file")->required();
    residual_cmd->add_option("--solution", solution_path, "Solution JSON with v_T")->required();
    residual_cmd->add_option("--J", anchor_samples, "Samples per anchor")->capture_default_str();
    residual_cmd->add_option("--out", out_path, "Residual JSON output")->required();

    auto* oracle_cmd = app.add_subcommand("oracle", "Exact solution and spectral diagnostics");
    oracle_cmd->add_option("--chain", chain_path, "Chain JSON file")->required();
    oracle_cmd->add_option("--out", out_path, "Oracle JSON output")->required();

    std::string instance = "all";
    int scale = 1;
    std::string seeds_text = "1,2,3,4,5";
    ExperimentConfig bench_cfg;
    ScheduleFlags bench_schedule;
    auto* bench_cmd = app.add_subcommand("bench", "Run the benchmark suite protocol");
    bench_cmd->add_option("--instance", instance, "Instance name or 'all'")->capture_default_str();
    bench_cmd->add_option("--scale", scale, "Divide phase sizes by this factor (CI profile)")
        ->capture_default_str();
    bench_cmd->add_option("--seeds", seeds_text, "Comma-separated seed list")->capture_default_str();
    auto* td_opt = bench_cmd->add_option("--td-iterations", bench_cfg.td_iterations,
                                         "SA iterations per run")->capture_default_str();
    bench_cmd->add_option("--log-every", bench_cfg.log_every, "Error logging stride")
        ->capture_default_str();
    bench_cmd->add_option("--K", bench_cfg.support_budget, "Support samples per state")
        ->capture_default_str();
    bench_cmd->add_option("--M", bench_cfg.weight_episodes, "Episodes per transient state")
        ->capture_default_str();
    bench_cmd->add_option("--J", bench_cfg.anchor_samples, "Samples per anchor")
        ->capture_default_str();
    bench_cmd->add_option("--out", out_path, "Curve CSV output");
    add_schedule_flags(bench_cmd, bench_schedule);

    std::string summarize_in, summarize_out;
    auto* summarize_cmd = bench_cmd->add_subcommand("summarize", "Aggregate curves to mean/std CSV");
    summarize_cmd->add_option("--in", summarize_in, "Curve CSV input")->required();
    summarize_cmd->add_option("--out", summarize_out, "Summary CSV output")->required();

    int plan_n = 0, plan_t_count = 0, plan_dim = 1;
    double plan_p_min = 0.0, plan_eps = 0.1, plan_delta = 0.05;
    auto* plan_cmd = app.add_subcommand("plan", "Print sample budgets for a target accuracy");
    plan_cmd->add_option("--n", plan_n, "State count")->required();
    plan_cmd->add_option("--p-min", plan_p_min, "Smallest positive transition probability")
        ->required();
    plan_cmd->add_option("--t-count", plan_t_count, "Transient state count")->required();
    plan_cmd->add_option("--peripheral-dim,--N", plan_dim, "Peripheral dimension N")->required();
    plan_cmd->add_option("--eps", plan_eps, "Target accuracy")->capture_default_str();
    plan_cmd->add_option("--delta", plan_delta, "Failure probability")->capture_default_str();
    plan_cmd->add_option("--chain", chain_path, "Chain JSON for the absorption-time term");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*validate_cmd) return cmd_validate(chain_path, tol);

        if (*structure_cmd) {
            Mrp mrp = load_chain(chain_path);
            ChainStructure st = structure_for(mrp, structure_mode, support_budget, stage);
            save_json(structure_to_json(st), resolve_output(out_path));
            return kExitOk;
        }

        if (*weights_cmd) {
            Mrp mrp = load_chain(chain_path);
            ChainStructure st = structure_from_json(load_json(structure_path));
            PhaseWeights weights;
            if (weights_mode == "exact") {
                weights = exact_weights(mrp.transition, st);
            } else {
                if (weight_episodes < 1)
                    throw std::invalid_argument("estimated weights need --episodes >= 1");
                weights = estimate_weights(mrp, st, weight_episodes, stage.seed, stage.threads);
            }
            save_json(weights_to_json(weights), resolve_output(out_path));
            return kExitOk;
        }

        if (*gauge_cmd) {
            Mrp mrp = load_chain(chain_path);
            PhaseWeights weights = weights_from_json(load_json(weights_path));
            GaugeMap gauge = GaugeMap::from_weights(weights);
            if (gauge.n != mrp.size()) throw std::invalid_argument("gauge dimension mismatch");
            nlohmann::json out;
            if (!in_path.empty()) {
                std::vector<double> v = vector_from_json_file(in_path);
                out = nlohmann::json{{"v", apply_gauge(gauge, v)}};
            } else {
                out = nlohmann::json{{"anchors", gauge.anchors}, {"w", weights_to_json(weights)["w"]}};
            }
            save_json(out, resolve_output(out_path));
            return kExitOk;
        }

        if (*solve_cmd) {
            Mrp mrp = load_chain(chain_path);
            PhaseWeights weights;
            if (!weights_path.empty()) {
                weights = weights_from_json(load_json(weights_path));
            } else if (gauge_source == "exact") {
                ChainStructure st = analyze_structure(exact_support_graph(mrp.transition));
                weights = exact_weights(mrp.transition, st);
            } else {
                ChainStructure st = analyze_structure(
                    learn_support_graph(mrp, solve_support_budget, stage.seed, stage.threads));
                weights = estimate_weights(mrp, st, solve_weight_episodes, stage.seed,
                                           stage.threads);
            }
            GaugeMap gauge = GaugeMap::from_weights(weights);

            SaConfig cfg;
            cfg.schedule = schedule_flags.build();
            cfg.iterations = sa_iterations;
            cfg.log_every = log_every;
            cfg.seed = stage.seed;
            cfg.threads = stage.threads;

            std::vector<double> v0(static_cast<std::size_t>(mrp.size()), 0.0);
            if (!in_path.empty()) v0 = vector_from_json_file(in_path);

            SolveResult result = projected_sa(mrp, gauge, cfg, std::move(v0));
            ResidualEstimate residual =
                estimate_residual(mrp, result.v, gauge, anchor_samples, stage.seed,
                                  static_cast<std::uint64_t>(cfg.iterations));
            save_json(solution_to_json(result.v, residual), resolve_output(out_path));
            if (!trace_path.empty()) write_trace_csv(result.trace, resolve_output(trace_path));
            return kExitOk;
        }

        if (*residual_cmd) {
            Mrp mrp = load_chain(chain_path);
            PhaseWeights weights = weights_from_json(load_json(weights_path));
            GaugeMap gauge = GaugeMap::from_weights(weights);
            std::vector<double> v = vector_from_json_file(solution_path);
            ResidualEstimate residual = estimate_residual(mrp, v, gauge, anchor_samples, stage.seed);
            std::vector<double> profile = gain_profile(residual, weights, weights.structure);
            save_json(residual_to_json(residual, profile), resolve_output(out_path));
            return kExitOk;
        }

        if (*oracle_cmd) {
            Mrp mrp = load_chain(chain_path);
            ChainStructure st = analyze_structure(exact_support_graph(mrp.transition));
            PhaseWeights weights = exact_weights(mrp.transition, st);
            GaugeMap gauge = GaugeMap::from_weights(weights);
            ExactSolution sol = exact_solve(mrp, gauge);
            QuotientDiagnostics diag = quotient_diagnostics(mrp, gauge, st);
            save_json(oracle_to_json(sol, diag), resolve_output(out_path));
            return kExitOk;
        }

        if (*bench_cmd) {
            if (*summarize_cmd) {
                std::vector<ErrorCurve> curves = read_curves(summarize_in);
                write_summary(summarize(curves), resolve_output(summarize_out));
                return kExitOk;
            }
            if (out_path.empty()) throw std::invalid_argument("bench needs --out");

            bench_cfg.schedule = bench_schedule.build();
            bench_cfg.threads = stage.threads;
            bench_cfg.seeds.clear();
            for (const auto& token : split_list(seeds_text, ','))
                bench_cfg.seeds.push_back(std::stoull(token));
            if (bench_cfg.seeds.empty()) throw std::invalid_argument("bench needs at least one seed");
            // CI profile: scaled-down instances default to the short run.
            if (scale > 1 && td_opt->count() == 0) bench_cfg.td_iterations = 4000;

            std::vector<ErrorCurve> curves;
            for (const MrpSpec& spec : suite()) {
                if (instance != "all" && spec.name != instance) continue;
                MrpSpec run_spec = scale > 1 ? scaled(spec, scale) : spec;
                std::vector<ErrorCurve> one = run_experiment(run_spec, bench_cfg);
                curves.insert(curves.end(), one.begin(), one.end());
            }
            if (curves.empty()) throw std::invalid_argument("unknown instance: " + instance);
            write_curves(curves, resolve_output(out_path));
            return kExitOk;
        }

        if (*plan_cmd)
            return cmd_plan(plan_n, plan_p_min, plan_t_count, plan_dim, plan_eps, plan_delta,
                            chain_path);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const NumericError& e) {
        std::cerr << "numeric fault: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    }
    return kExitUsage;
}

}  // namespace qpoisson
