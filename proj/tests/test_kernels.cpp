#include <doctest.h>

#include "fixtures.hpp"
#include "qpoisson/bench.hpp"
#include "qpoisson/kernels.hpp"

using namespace qpoisson;

// The serial variants are the reference; the OpenMP variants must agree
// bitwise because every state draws from its own counter-based stream.

TEST_CASE("matvec: serial and parallel agree bitwise") {
    BuiltMrp built = build_mrp(scaled(suite()[1], 2));
    std::vector<double> x = fixtures::random_vector(3, built.mrp.size(), 2.0);
    std::vector<double> serial, parallel;
    kernels::matvec_serial(built.mrp.transition, x, serial);
    kernels::matvec_parallel(built.mrp.transition, x, parallel, 2);
    CHECK(serial == parallel);
    std::vector<double> dispatched;
    kernels::matvec(built.mrp.transition, x, dispatched, 0);
    CHECK(serial == dispatched);
}

TEST_CASE("sa_sweep: serial and parallel agree bitwise") {
    BuiltMrp built = build_mrp(scaled(suite()[0], 4));
    std::vector<double> v = fixtures::random_vector(5, built.mrp.size(), 1.0);
    for (long iteration : {0L, 7L}) {
        std::vector<double> serial, parallel;
        kernels::sa_sweep_serial(built.mrp, v, 11, iteration, serial);
        kernels::sa_sweep_parallel(built.mrp, v, 11, iteration, parallel, 2);
        CHECK(serial == parallel);
    }
}

TEST_CASE("support_sweep: serial and parallel agree exactly") {
    BuiltMrp built = build_mrp(scaled(suite()[2], 4));
    std::vector<std::vector<int>> serial, parallel;
    kernels::support_sweep_serial(built.mrp, 40, 13, serial);
    kernels::support_sweep_parallel(built.mrp, 40, 13, parallel, 2);
    CHECK(serial == parallel);
}

TEST_CASE("absorption_sweep: serial and parallel agree exactly") {
    BuiltMrp built = build_mrp(scaled(suite()[0], 8));
    std::vector<std::vector<long>> serial, parallel;
    kernels::absorption_sweep_serial(built.mrp, built.structure, 50, 17, serial);
    kernels::absorption_sweep_parallel(built.mrp, built.structure, 50, 17, parallel, 2);
    CHECK(serial == parallel);
}

TEST_CASE("episodes that cannot absorb hit the cap and fault") {
    // Claim state 1 of a two-state identity chain is transient; its episodes
    // can never reach the "recurrent" set.
    Mrp mrp(StochasticMatrix(2, {1, 0, 0, 1}), RewardVector{{0, 0}, 0});
    ChainStructure st;
    st.n = 2;
    st.classes = {{0}};
    st.transient = {1};
    st.periods = {1};
    st.cyclic = {{{0}}};
    st.anchors = {{0}};
    st.cls_of = {0, -1};
    st.phase_of = {0, -1};
    std::vector<std::vector<long>> counts;
    CHECK_THROWS_AS(kernels::absorption_sweep_serial(mrp, st, 1, 1, counts), NumericError);
    CHECK_THROWS_AS(kernels::absorption_sweep_parallel(mrp, st, 1, 1, counts, 2), NumericError);
}

TEST_CASE("thread-count resolution validates its input") {
    CHECK(kernels::resolve_threads(1) == 1);
    CHECK(kernels::resolve_threads(3) == 3);
    CHECK(kernels::resolve_threads(0) >= 1);
    CHECK_THROWS_AS(kernels::resolve_threads(-1), std::invalid_argument);
}
