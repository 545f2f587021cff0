#pragma once

#include <cstdint>
#include <vector>

#include "qpoisson/gauge.hpp"
#include "qpoisson/mrp.hpp"

namespace qpoisson {

/// Reference solution of the gauge-fixed equation v = Pi(r + Pv).
struct ExactSolution {
    std::vector<double> v_star;      // zero at anchors
    std::vector<double> g_star;      // r + P v_star - v_star, peripheral
    std::vector<double> theta_star;  // g_star at anchors, column order
    std::vector<double> gain;        // true long-run average-reward profile
};

/// Spectral diagnostics of the projected operator restricted to the anchored
/// subspace W = {v : v(anchor) = 0}.
struct QuotientDiagnostics {
    double rho_q = 0.0;  // spectral radius of Pi P on W
    double gamma = 0.5;  // contraction target (1 + rho_q) / 2
    double h_abs = 0.0;  // max expected absorption time over transient states
    long power_iterations = 0;

    std::vector<int> free_states;      // non-anchor states, coordinates of W
    std::vector<double> seminorm_h;    // dim x dim Lyapunov form on W
    int dim = 0;
};

/// Solves (I - Pi P) v = Pi r exactly, derives the residual and its anchor
/// coordinates, and computes the true gain profile from per-class stationary
/// distributions and absorption masses. Requires an exact gauge (one built
/// from exact weights, carrying the chain structure).
ExactSolution exact_solve(const Mrp& mrp, const GaugeMap& gauge);

/// Quotient spectral radius via block power iteration on the anchored
/// subspace (tolerance 1e-8, cap 1e5 iterations), Lyapunov seminorm matrix of
/// the rescaled operator, and expected absorption times.
QuotientDiagnostics quotient_diagnostics(const Mrp& mrp, const GaugeMap& gauge,
                                         const ChainStructure& st);

/// Pullback quotient seminorm sqrt(x^T H x) of the gauge image of v.
double quotient_seminorm(const QuotientDiagnostics& diag, const GaugeMap& gauge,
                         const std::vector<double>& v);

struct AbsorptionTimes {
    std::vector<double> per_transient;  // aligned with the structure's transient list
    double h_abs = 0.0;                 // max entry, 0 when there are no transients
};

/// Expected steps to reach the recurrent set: solves (I - Q) x = 1 on the
/// transient block.
AbsorptionTimes expected_absorption_times(const Mrp& mrp, const ChainStructure& st);

struct CostCheckRow {
    int state = 0;
    double estimate = 0.0;
    double std_error = 0.0;
    double exact = 0.0;
    bool flagged = false;  // |estimate - exact| > 3 standard errors
};

/// Monte-Carlo check of the transient-cost identity: v_star(s) equals the
/// expected sum of r - g_star until the anchor set is first hit. One row per
/// non-anchor state.
std::vector<CostCheckRow> transient_cost_check(const Mrp& mrp, const ExactSolution& sol,
                                               const GaugeMap& gauge, long episodes,
                                               std::uint64_t seed, int threads = 0);

/// Deterministic check of the finite-horizon return identity
///   sum_{t<T} (P^t r)(s) = sum_{t<T} (P^t g_v)(s) + v(s) - (P^T v)(s)
/// with g_v = r + Pv - v; returns the absolute difference of the two sides.
double return_identity_check(const Mrp& mrp, const std::vector<double>& v, long horizon,
                             StateIndex start, int threads = 0);

/// Largest per-state variance of one TD target sample r(s) + v(s~); an
/// empirical stand-in for the oracle second-moment bound.
double td_noise_bound(const Mrp& mrp, const std::vector<double>& v);

}  // namespace qpoisson
