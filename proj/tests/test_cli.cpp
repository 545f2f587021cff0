#include <doctest.h>

#include <json.hpp>

#include "fixtures.hpp"
#include "qpoisson/cli.hpp"
#include "qpoisson/io.hpp"

using namespace qpoisson;
using fixtures::RunResult;
using fixtures::TempDir;

namespace {

const std::string cli = QPOISSON_CLI_PATH;

std::string write_abs4(const TempDir& dir) {
    std::string path = dir.file("abs4.json");
    save_chain(fixtures::abs4(), path);
    return path;
}

}  // namespace

TEST_CASE("validate accepts a valid chain and rejects a broken one") {
    TempDir dir;
    std::string chain = write_abs4(dir);
    CHECK(fixtures::run_process(cli + " validate --chain " + chain, dir).exit_code == kExitOk);

    std::ofstream bad(dir.file("bad.json"));
    bad << R"({"n": 2, "P": [[0.5, 0.5], [0.3, 0.6]], "r": [0, 0], "R": 1})";
    bad.close();
    RunResult res = fixtures::run_process(cli + " validate --chain " + dir.file("bad.json"), dir);
    CHECK(res.exit_code == kExitValidation);
    CHECK(res.out.find("row 1") != std::string::npos);
}

TEST_CASE("missing input files exit with the i/o code") {
    TempDir dir;
    RunResult res = fixtures::run_process(cli + " validate --chain " + dir.file("nope.json"), dir);
    CHECK(res.exit_code == kExitIo);
}

TEST_CASE("usage errors name the missing flag") {
    TempDir dir;
    RunResult res = fixtures::run_process(
        cli + " plan --n 4 --t-count 2 --peripheral-dim 2 --eps 0.1 --delta 0.05", dir);
    CHECK(res.exit_code == kExitUsage);
    CHECK(res.err.find("--p-min") != std::string::npos);
}

TEST_CASE("plan reproduces the budget formulas") {
    TempDir dir;
    std::string chain = write_abs4(dir);
    RunResult res = fixtures::run_process(cli +
                                              " plan --n 4 --p-min 0.3 --t-count 2 "
                                              "--peripheral-dim 2 --eps 0.1 --delta 0.05 --chain " +
                                              chain,
                                          dir);
    REQUIRE(res.exit_code == kExitOk);
    CHECK(res.out.find("= 20") != std::string::npos);    // required_k(0.3, 4, 0.05)
    CHECK(res.out.find("= 9136") != std::string::npos);  // required_m(0.1/6, 2, 2, 0.05)
    CHECK(res.out.find("= 100") != std::string::npos);   // ceil(1/eps^2)
    CHECK(res.out.find("2.615") != std::string::npos);   // H_abs = 34/13
}

TEST_CASE("plan handles the unit point") {
    TempDir dir;
    RunResult res = fixtures::run_process(
        cli + " plan --n 1 --p-min 1 --t-count 1 --peripheral-dim 1 --eps 1e-1 --delta 0.5", dir);
    REQUIRE(res.exit_code == kExitOk);
    CHECK(res.out.find("per state      = 1\n") != std::string::npos);
}

TEST_CASE("pipeline stages hand off through files") {
    TempDir dir;
    std::string chain = write_abs4(dir);
    std::string st = dir.file("structure.json");
    std::string w = dir.file("weights.json");
    std::string sol = dir.file("solution.json");
    std::string res_path = dir.file("residual.json");

    CHECK(fixtures::run_process(
              cli + " structure --chain " + chain + " --mode exact --out " + st, dir)
              .exit_code == kExitOk);
    CHECK(fixtures::run_process(
              cli + " weights --chain " + chain + " --structure " + st + " --mode exact --out " + w,
              dir)
              .exit_code == kExitOk);

    // Gauge application through files: e_0 maps to the negated first column.
    std::ofstream vec(dir.file("probe.json"));
    vec << "[1, 0, 0, 0]";
    vec.close();
    std::string gauged = dir.file("gauged.json");
    CHECK(fixtures::run_process(cli + " gauge --chain " + chain + " --weights " + w + " --in " +
                                    dir.file("probe.json") + " --out " + gauged,
                                dir)
              .exit_code == kExitOk);
    nlohmann::json gauged_json = load_json(gauged);
    CHECK(gauged_json.at("v")[2].get<double>() == doctest::Approx(-10.0 / 13.0));

    CHECK(fixtures::run_process(cli + " solve --chain " + chain + " --weights " + w +
                                    " --T 20000 --seed 7 --schedule inverse-linear --alpha 4 --t0 8" +
                                    " --out " + sol + " --trace " + dir.file("trace.csv"),
                                dir)
              .exit_code == kExitOk);
    nlohmann::json sol_json = load_json(sol);
    CHECK(sol_json.at("v_T").size() == 4);
    CHECK(sol_json.at("theta")[0].get<double>() == doctest::Approx(1.0));

    CHECK(fixtures::run_process(cli + " residual --chain " + chain + " --weights " + w +
                                    " --solution " + sol + " --J 64 --seed 3 --out " + res_path,
                                dir)
              .exit_code == kExitOk);
    nlohmann::json res_json = load_json(res_path);
    CHECK(res_json.at("gain_profile")[2].get<double>() ==
          doctest::Approx(10.0 / 13.0).epsilon(0.05));
}

TEST_CASE("learned-structure and estimated-weight stages run from files") {
    TempDir dir;
    std::string chain = write_abs4(dir);
    std::string st = dir.file("learned.json");
    std::string w = dir.file("est_weights.json");
    CHECK(fixtures::run_process(cli + " structure --chain " + chain +
                                    " --mode learned --budget 40 --seed 5 --out " + st,
                                dir)
              .exit_code == kExitOk);
    CHECK(fixtures::run_process(cli + " weights --chain " + chain + " --structure " + st +
                                    " --mode estimated --episodes 500 --seed 5 --out " + w,
                                dir)
              .exit_code == kExitOk);
    PhaseWeights weights = weights_from_json(load_json(w));
    CHECK(weights.kind == PhaseWeights::Kind::estimated);
    CHECK(weights.at(2, 0) == doctest::Approx(10.0 / 13.0).epsilon(0.15));
}

TEST_CASE("solve can learn its gauge in-process") {
    TempDir dir;
    std::string chain = write_abs4(dir);
    std::string sol = dir.file("estimated.json");
    CHECK(fixtures::run_process(cli + " solve --chain " + chain +
                                    " --gauge estimated --K 40 --M 2000 --T 20000 --seed 2" +
                                    " --schedule inverse-linear --alpha 4 --t0 8 --out " + sol,
                                dir)
              .exit_code == kExitOk);
    nlohmann::json j = load_json(sol);
    CHECK(j.at("g_hat")[2].get<double>() == doctest::Approx(10.0 / 13.0).epsilon(0.1));
}

TEST_CASE("a broken transient classification faults with the numeric exit code") {
    TempDir dir;
    save_chain(Mrp(StochasticMatrix(2, {1, 0, 0, 1}), RewardVector{{0, 0}, 0}),
               dir.file("identity.json"));
    std::ofstream st(dir.file("broken.json"));
    st << R"({"n": 2, "classes": [[0]], "transient": [1], "periods": [1],
              "cyclic": [[[0]]], "anchors": [[0]]})";
    st.close();
    RunResult res = fixtures::run_process(cli + " weights --chain " + dir.file("identity.json") +
                                              " --structure " + dir.file("broken.json") +
                                              " --mode estimated --episodes 1 --out " +
                                              dir.file("w.json"),
                                          dir);
    CHECK(res.exit_code == kExitNumeric);
    CHECK(res.err.find("transient") != std::string::npos);
}

TEST_CASE("oracle emits the exact solution and diagnostics") {
    TempDir dir;
    std::string chain = write_abs4(dir);
    std::string out = dir.file("oracle.json");
    CHECK(fixtures::run_process(cli + " oracle --chain " + chain + " --out " + out, dir).exit_code ==
          kExitOk);
    nlohmann::json j = load_json(out);
    CHECK(j.at("rho_q").get<double>() == doctest::Approx(std::sqrt(0.35)).epsilon(1e-6));
    CHECK(j.at("v_star")[2].get<double>() == doctest::Approx(-270.0 / 169.0));
}

TEST_CASE("identical seeds give identical files regardless of threads") {
    TempDir dir;
    std::string chain = write_abs4(dir);
    std::string base = cli + " solve --chain " + chain + " --T 4000 --seed 11 --out ";
    CHECK(fixtures::run_process(base + dir.file("a.json") + " --trace " + dir.file("a.csv") +
                                    " --threads 1",
                                dir)
              .exit_code == kExitOk);
    CHECK(fixtures::run_process(base + dir.file("b.json") + " --trace " + dir.file("b.csv") +
                                    " --threads 2",
                                dir)
              .exit_code == kExitOk);
    CHECK(fixtures::slurp(dir.file("a.json")) == fixtures::slurp(dir.file("b.json")));
    CHECK(fixtures::slurp(dir.file("a.csv")) == fixtures::slurp(dir.file("b.csv")));
}

TEST_CASE("bench emits the expected row grid and summarize aggregates it") {
    TempDir dir;
    std::string curves = dir.file("curves.csv");
    RunResult res = fixtures::run_process(
        cli + " bench --instance aperiodic_multichain --scale 8 --seeds 1,2,3 --td-iterations 240" +
            " --log-every 120 --K 80 --M 200 --J 16 --out " + curves,
        dir);
    REQUIRE(res.exit_code == kExitOk);
    std::istringstream in(fixtures::slurp(curves));
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 1 + 3 * 3 * 3);  // header + seeds x methods x points

    std::string summary = dir.file("summary.csv");
    CHECK(fixtures::run_process(cli + " bench summarize --in " + curves + " --out " + summary, dir)
              .exit_code == kExitOk);
    std::istringstream sin(fixtures::slurp(summary));
    lines = 0;
    while (std::getline(sin, line)) ++lines;
    CHECK(lines == 1 + 3 * 3);  // header + methods x points
}

TEST_CASE("relative outputs land in the directory named by the environment") {
    TempDir dir;
    std::string chain = write_abs4(dir);
    RunResult res = fixtures::run_process("QPOISSON_OUT_DIR=" + dir.path.string() + " " + cli +
                                              " oracle --chain " + chain + " --out env_oracle.json",
                                          dir);
    CHECK(res.exit_code == kExitOk);
    CHECK(std::filesystem::exists(dir.file("env_oracle.json")));
}

TEST_CASE("inconsistent structure files are rejected before use") {
    TempDir dir;
    std::string chain = write_abs4(dir);
    for (const char* body : {
             // anchor outside its phase set
             R"({"n": 4, "classes": [[0],[1]], "transient": [2,3], "periods": [1,1],
                 "cyclic": [[[0]],[[1]]], "anchors": [[1],[1]]})",
             // state index out of range
             R"({"n": 4, "classes": [[0],[9]], "transient": [2,3], "periods": [1,1],
                 "cyclic": [[[0]],[[9]]], "anchors": [[0],[9]]})",
             // state 3 never covered
             R"({"n": 4, "classes": [[0],[1]], "transient": [2], "periods": [1,1],
                 "cyclic": [[[0]],[[1]]], "anchors": [[0],[1]]})",
         }) {
        std::ofstream st(dir.file("st.json"));
        st << body;
        st.close();
        RunResult res = fixtures::run_process(cli + " weights --chain " + chain + " --structure " +
                                                  dir.file("st.json") + " --mode exact --out " +
                                                  dir.file("w.json"),
                                              dir);
        CHECK(res.exit_code == kExitIo);
        CHECK(res.err.find("inconsistent") != std::string::npos);
    }
}

TEST_CASE("stage files round-trip through JSON") {
    for (std::uint64_t seed : {811ull, 812ull, 813ull}) {
        Mrp mrp = fixtures::random_reducible_chain(seed);
        nlohmann::json chain = chain_to_json(mrp);
        Mrp reloaded = chain_from_json(chain);
        CHECK(reloaded.transition.data() == mrp.transition.data());
        CHECK(reloaded.reward.values == mrp.reward.values);

        ChainStructure st = fixtures::exact_structure(mrp);
        CHECK(structure_from_json(structure_to_json(st)) == st);

        PhaseWeights exact = exact_weights(mrp.transition, st);
        PhaseWeights exact_back = weights_from_json(weights_to_json(exact));
        CHECK(exact_back.structure == st);
        CHECK(exact_back.w == exact.w);
        CHECK(exact_back.kind == PhaseWeights::Kind::exact);

        PhaseWeights est = estimate_weights(mrp, st, 64, seed);
        PhaseWeights est_back = weights_from_json(weights_to_json(est));
        CHECK(est_back.w == est.w);
        CHECK(est_back.episodes == 64);
        CHECK(est_back.seed == seed);
    }
}

TEST_CASE("--help documents every subcommand") {
    TempDir dir;
    RunResult res = fixtures::run_process(cli + " --help", dir);
    CHECK(res.exit_code == kExitOk);
    for (const char* name : {"validate", "structure", "weights", "gauge", "solve", "residual",
                             "oracle", "bench", "plan", "--seed", "--threads"})
        CHECK(res.out.find(name) != std::string::npos);
}

TEST_CASE("help text snapshot") {
    TempDir dir;
    RunResult res = fixtures::run_process(cli + " --help", dir);
    CHECK(res.out == fixtures::slurp(std::string(QPOISSON_TEST_DATA) + "/cli_help.txt"));
}
