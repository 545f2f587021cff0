#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "fixtures.hpp"
#include "qpoisson/bench.hpp"
#include "qpoisson/gauge.hpp"
#include "qpoisson/oracle.hpp"

using namespace qpoisson;

namespace {

using fixtures::TempDir;

double p_min_lower_bound(const MrpSpec& spec) {
    double q_min = 1.0;
    for (int j = 0; j < spec.transient_len; ++j) {
        // smallest positive per-class share at this transient state
        double xi = spec.transient_len > 1 ? static_cast<double>(j) / (spec.transient_len - 1) : 0.0;
        if (spec.exits.kind == ExitSchedule::Kind::two_class_linear) {
            double q = spec.exits.p_lo + (spec.exits.p_hi - spec.exits.p_lo) * xi;
            q_min = std::min({q_min, q, 1.0 - q});
        } else {
            for (double q : {spec.exits.a * (1.0 - xi), spec.exits.a * xi, 1.0 - spec.exits.a})
                if (q > 0.0) q_min = std::min(q_min, q);
        }
    }
    double bound = spec.eta * q_min;
    bound = std::min(bound, (1.0 - spec.eta) * (1.0 - spec.epsilon));
    for (const auto& cls : spec.classes) bound = std::min(bound, 1.0 / cls.phase_size);
    return bound;
}

}  // namespace

TEST_CASE("block construction hits the published sizes") {
    std::vector<MrpSpec> specs = suite();
    REQUIRE(specs.size() == 6);
    CHECK(specs[0].name == "aperiodic_multichain");
    CHECK(specs[0].state_count() == 160);
    CHECK(specs[1].name == "hard_gain_gap");
    CHECK(specs[1].state_count() == 200);
    CHECK(specs[2].name == "safety");
    CHECK(specs[2].state_count() == 131);
    CHECK(specs[3].name == "three_class_var_branch");
    CHECK(specs[3].state_count() == 194);
    CHECK(specs[4].name == "var_branch_2v3");
    CHECK(specs[4].state_count() == 192);
    CHECK(specs[5].name == "var_branch_2v4");
    CHECK(specs[5].state_count() == 196);
}

TEST_CASE("every suite instance builds, validates, and matches its declared structure") {
    for (const MrpSpec& spec : suite()) {
        BuiltMrp built = build_mrp(spec);
        CHECK(built.mrp.size() == spec.state_count());
        CHECK(validate(built.mrp, 1e-12).ok);
        // Declared ground truth agrees with a fresh structural analysis.
        CHECK(built.structure == fixtures::exact_structure(built.mrp));
    }
}

TEST_CASE("hard gain gap class gains are 0.10 and 0.92") {
    const MrpSpec spec = suite()[1];
    double g1 = 0.0, g2 = 0.0;
    for (double r : spec.classes[0].phase_rewards) g1 += r;
    for (double r : spec.classes[1].phase_rewards) g2 += r;
    CHECK(g1 / spec.classes[0].period == doctest::Approx(0.10).epsilon(1e-12));
    CHECK(g2 / spec.classes[1].period == doctest::Approx(0.92).epsilon(1e-12));

    BuiltMrp built = build_mrp(spec);
    GaugeMap gauge = GaugeMap::from_weights(exact_weights(built.mrp.transition, built.structure));
    ExactSolution sol = exact_solve(built.mrp, gauge);
    CHECK(sol.gain[0] == doctest::Approx(0.10).epsilon(1e-10));
    const int class2_start = spec.classes[0].phase_size * spec.classes[0].period;
    CHECK(sol.gain[static_cast<std::size_t>(class2_start)] == doctest::Approx(0.92).epsilon(1e-10));
}

TEST_CASE("three-class schedule routes the fixed share to the third class") {
    const MrpSpec spec = suite()[3];
    CHECK(spec.exits.kind == ExitSchedule::Kind::three_class);
    CHECK(spec.exits.a == doctest::Approx(0.90));
    BuiltMrp built = build_mrp(spec);
    const int t0 = spec.state_count() - spec.transient_len;
    const int entry3 = spec.classes[0].phase_size * spec.classes[0].period +
                       spec.classes[1].phase_size * spec.classes[1].period;
    CHECK(built.mrp.transition(t0, entry3) ==
          doctest::Approx(spec.eta * (1.0 - spec.exits.a)).epsilon(1e-12));
}

TEST_CASE("a single transient state degenerates the schedule to its left endpoint") {
    MrpSpec spec{"tiny", {{1, 1, {0.0}}, {1, 1, {1.0}}}, 1, 0.3, 0.2,
                 ExitSchedule::two_class_linear(0.4, 0.9)};
    BuiltMrp built = build_mrp(spec);
    const int t0 = 2;
    CHECK(built.mrp.transition(t0, t0) == doctest::Approx(0.8).epsilon(1e-12));   // 1 - eta
    CHECK(built.mrp.transition(t0, 0) == doctest::Approx(0.2 * 0.4).epsilon(1e-12));
    CHECK(built.mrp.transition(t0, 1) == doctest::Approx(0.2 * 0.6).epsilon(1e-12));
}

TEST_CASE("invalid specs are rejected") {
    MrpSpec bad_eta{"x", {{1, 1, {0.0}}, {1, 1, {0.0}}}, 2, 0.1, 0.0,
                    ExitSchedule::two_class_linear(0.2, 0.8)};
    CHECK_THROWS_AS(build_mrp(bad_eta), std::invalid_argument);
    MrpSpec bad_arity{"x", {{1, 1, {0.0}}}, 2, 0.1, 0.2, ExitSchedule::two_class_linear(0.2, 0.8)};
    CHECK_THROWS_AS(build_mrp(bad_arity), std::invalid_argument);
    MrpSpec bad_rewards{"x", {{1, 2, {0.0}}, {1, 1, {0.0}}}, 2, 0.1, 0.2,
                        ExitSchedule::two_class_linear(0.2, 0.8)};
    CHECK_THROWS_AS(build_mrp(bad_rewards), std::invalid_argument);
}

TEST_CASE("exact gain agrees with a long time average on every suite instance") {
    // Desk scale keeps the hundred-thousand-step time average affordable.
    for (const MrpSpec& base : suite()) {
        MrpSpec spec = scaled(base, 5);
        BuiltMrp built = build_mrp(spec);
        GaugeMap gauge = GaugeMap::from_weights(exact_weights(built.mrp.transition, built.structure));
        ExactSolution sol = exact_solve(built.mrp, gauge);
        INFO(spec.name);
        CHECK(fixtures::sup_diff(sol.gain, cesaro_gain(built.mrp, 100000)) <= 1e-3);
    }
}

TEST_CASE("structure recovery at the benchmark budget succeeds on nearly every seed") {
    for (const MrpSpec& spec : suite()) {
        CHECK(p_min_lower_bound(spec) >= 1e-3);  // instance is not degenerate
        BuiltMrp built = build_mrp(spec);
        const int trials = 40;
        int hits = 0;
        for (std::uint64_t seed = 0; seed < trials; ++seed) {
            SupportGraph g = learn_support_graph(built.mrp, 150, seed);
            try {
                if (analyze_structure(g) == built.structure) ++hits;
            } catch (const NumericError&) {
            }
        }
        INFO(spec.name);
        CHECK(hits >= trials * 95 / 100);
    }
}

TEST_CASE("zero-iteration experiments log only the initial point") {
    MrpSpec spec = scaled(suite()[0], 10);
    ExperimentConfig cfg;
    cfg.td_iterations = 0;
    cfg.seeds = {4};
    cfg.support_budget = 150;
    cfg.weight_episodes = 200;
    cfg.anchor_samples = 16;
    std::vector<ErrorCurve> curves = run_experiment(spec, cfg);
    REQUIRE(curves.size() == 3);
    for (const auto& curve : curves) {
        REQUIRE(curve.points.size() == 1);
        CHECK(curve.points[0].iteration == 0);
    }
}

TEST_CASE("experiments are bitwise reproducible") {
    MrpSpec spec = scaled(suite()[0], 10);
    ExperimentConfig cfg;
    cfg.td_iterations = 600;
    cfg.log_every = 200;
    cfg.weight_episodes = 300;
    cfg.seeds = {1, 2};
    std::vector<ErrorCurve> first = run_experiment(spec, cfg);
    std::vector<ErrorCurve> second = run_experiment(spec, cfg);
    CHECK(first == second);
    cfg.threads = 1;
    std::vector<ErrorCurve> serial = run_experiment(spec, cfg);
    CHECK(first == serial);
}

TEST_CASE("projected runs dominate the baselines on a desk multichain") {
    MrpSpec spec = scaled(suite()[0], 5);
    ExperimentConfig cfg;
    cfg.td_iterations = 2000;
    cfg.log_every = 200;
    cfg.seeds = {1, 2};
    std::vector<ErrorCurve> curves = run_experiment(spec, cfg);
    REQUIRE(curves.size() == 6);

    auto final_mean = [&](const std::string& method) {
        double acc = 0.0;
        int count = 0;
        for (const auto& curve : curves)
            if (curve.method == method) {
                acc += curve.points.back().err;
                ++count;
            }
        return acc / count;
    };
    double projected = final_mean("projected");
    CHECK(projected < final_mean("anchor_only"));
    CHECK(projected < final_mean("unprojected"));

    for (const auto& curve : curves)
        if (curve.method == "projected") CHECK(curve.points.back().err <= curve.points.front().err);
}

TEST_CASE("curve files round-trip and keep canonical order") {
    TempDir dir;
    SUBCASE("empty list gives a header-only file") {
        write_curves({}, dir.file("empty.csv"));
        std::ifstream in(dir.file("empty.csv"));
        std::string line;
        CHECK(std::getline(in, line));
        CHECK(line == "instance,method,seed,iteration,err_linf");
        CHECK_FALSE(std::getline(in, line));
        CHECK(read_curves(dir.file("empty.csv")).empty());
    }
    SUBCASE("one curve with two points is three lines") {
        ErrorCurve curve{"demo", "projected", 9, {{0, 0.5}, {100, 0.25}}};
        write_curves({curve}, dir.file("one.csv"));
        std::ifstream in(dir.file("one.csv"));
        int lines = 0;
        std::string line;
        while (std::getline(in, line)) ++lines;
        CHECK(lines == 3);
    }
    SUBCASE("write then read is the identity on sorted curves") {
        std::vector<ErrorCurve> curves{
            {"a", "anchor_only", 1, {{0, 1.0 / 3.0}, {10, 0.1234567890123456789}}},
            {"a", "projected", 1, {{0, 0.7}, {10, 1e-17}}},
            {"b", "projected", 2, {{0, 0.9}}},
        };
        write_curves(curves, dir.file("rt.csv"));
        CHECK(read_curves(dir.file("rt.csv")) == curves);
    }
}

TEST_CASE("summaries aggregate seeds with sample standard deviation") {
    std::vector<ErrorCurve> curves{
        {"a", "projected", 1, {{0, 0.4}, {10, 0.2}}},
        {"a", "projected", 2, {{0, 0.6}, {10, 0.4}}},
    };
    std::vector<SummaryRow> rows = summarize(curves);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].iteration == 0);
    CHECK(rows[0].mean_err == doctest::Approx(0.5));
    CHECK(rows[0].std_err == doctest::Approx(std::sqrt(0.02)));  // sd of {0.4, 0.6}
    CHECK(rows[0].seeds == 2);
    CHECK(rows[1].mean_err == doctest::Approx(0.3));
}
