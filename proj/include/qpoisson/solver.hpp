#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "qpoisson/gauge.hpp"
#include "qpoisson/mrp.hpp"

namespace qpoisson {

/// Step-size schedule. inverse_linear: alpha / (t + t0) with t0 >= alpha > 0.
/// polynomial: alpha * (t + offset)^(-exponent) with exponent in (0.5, 1].
struct StepSchedule {
    enum class Kind { inverse_linear, polynomial };

    Kind kind = Kind::polynomial;
    double alpha = 1.0;
    double t0 = 1.0;        // inverse_linear
    double exponent = 0.65; // polynomial
    double offset = 500.0;  // polynomial

    static StepSchedule inverse_linear(double alpha, double t0);
    static StepSchedule polynomial(double alpha, double exponent, double offset);

    double at(long t) const;
};

struct SaConfig {
    StepSchedule schedule = StepSchedule::polynomial(1.0, 0.65, 500.0);
    long iterations = 12000;
    long log_every = 120;
    std::uint64_t seed = 0;
    int threads = 0;
};

struct TracePoint {
    long iteration = 0;
    double v_sup = 0.0;  // sup norm of the iterate
    std::optional<double> err;
};

struct SolveTrace {
    std::vector<TracePoint> points;
};

/// Called at each logged iteration with (t, v_t); a returned value is stored
/// in the trace as that point's error.
using LogHook = std::function<std::optional<double>(long, const std::vector<double>&)>;

struct SolveResult {
    std::vector<double> v;
    SolveTrace trace;
};

/// Projected quotient stochastic approximation: synchronous sweeps with one
/// successor sample per state per iteration, blended by the step size and
/// re-projected through the gauge each iteration. The iterate stays in the
/// anchored subspace. Throws NumericError on a non-finite iterate.
SolveResult projected_sa(const Mrp& mrp, const GaugeMap& gauge, const SaConfig& cfg,
                         std::vector<double> v0, const LogHook& hook = {});

struct ResidualEstimate {
    std::vector<double> theta;  // per anchor, in column order
    std::vector<double> g_hat;  // weights * theta
    int samples_per_anchor = 0;
};

/// Residual coordinates at the anchors: theta_c = r(a_c) + mean of v over
/// `samples_per_anchor` sampled successors of a_c - v(a_c), reconstructed
/// state-wise through the weight columns. `epoch` separates the sample
/// streams of repeated calls (e.g. one call per logged iteration).
ResidualEstimate estimate_residual(const Mrp& mrp, const std::vector<double>& v,
                                   const GaugeMap& gauge, int samples_per_anchor,
                                   std::uint64_t seed, std::uint64_t epoch = 0);

/// Gain profile from residual coordinates: class gains are phase averages of
/// theta, spread over states by the per-class absorption mass
/// p_i(s) = sum_k b_{i,k}(s).
std::vector<double> gain_profile(const ResidualEstimate& residual, const PhaseWeights& weights,
                                 const ChainStructure& st);

/// Scalar gain estimate at one state: r(s) + mean of v over J sampled
/// successors - v(s).
double scalar_gain_estimate(const Mrp& mrp, const std::vector<double>& v, StateIndex state,
                            int samples, std::uint64_t seed, std::uint64_t epoch = 0);

struct BaselineResult {
    double gain = 0.0;             // scalar estimate at the anchor
    std::vector<double> profile;   // gain broadcast to all states
    std::vector<double> v;         // final iterate
    SolveTrace trace;
};

/// TD-style updates with no projection at all; estimates a scalar gain at
/// `anchor` afterwards. Cannot represent state-dependent gain.
BaselineResult unprojected_td(const Mrp& mrp, const SaConfig& cfg, StateIndex anchor,
                              int samples_per_anchor, const LogHook& hook = {});

/// Projected SA under the degenerate single-anchor gauge (classical
/// relative-value iteration), followed by a scalar gain estimate at `anchor`.
BaselineResult anchor_only_td(const Mrp& mrp, const SaConfig& cfg, StateIndex anchor,
                              int samples_per_anchor, const LogHook& hook = {});

}  // namespace qpoisson
