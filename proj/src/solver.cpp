#include "qpoisson/solver.hpp"

#include <cmath>
#include <stdexcept>

#include "qpoisson/kernels.hpp"

namespace qpoisson {

StepSchedule StepSchedule::inverse_linear(double alpha, double t0) {
    if (!(alpha > 0.0) || !(t0 >= alpha))
        throw std::invalid_argument("inverse_linear schedule needs t0 >= alpha > 0");
    StepSchedule s;
    s.kind = Kind::inverse_linear;
    s.alpha = alpha;
    s.t0 = t0;
    return s;
}

StepSchedule StepSchedule::polynomial(double alpha, double exponent, double offset) {
    if (!(alpha > 0.0)) throw std::invalid_argument("polynomial schedule needs alpha > 0");
    if (!(exponent > 0.5 && exponent <= 1.0))
        throw std::invalid_argument("polynomial schedule needs exponent in (0.5, 1]");
    if (!(offset >= 1.0)) throw std::invalid_argument("polynomial schedule needs offset >= 1");
    StepSchedule s;
    s.kind = Kind::polynomial;
    s.alpha = alpha;
    s.exponent = exponent;
    s.offset = offset;
    return s;
}

double StepSchedule::at(long t) const {
    switch (kind) {
        case Kind::inverse_linear:
            return alpha / (static_cast<double>(t) + t0);
        case Kind::polynomial:
            return alpha * std::pow(static_cast<double>(t) + offset, -exponent);
    }
    return 0.0;
}

namespace {

double sup_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

void check_finite(const std::vector<double>& v, long t) {
    for (double x : v)
        if (!std::isfinite(x))
            throw NumericError("non-finite iterate at iteration " + std::to_string(t));
}

bool is_log_point(long t, long log_every) { return log_every > 0 && t % log_every == 0; }

void record(SolveTrace& trace, long t, const std::vector<double>& v, const LogHook& hook) {
    TracePoint point;
    point.iteration = t;
    point.v_sup = sup_norm(v);
    if (hook) point.err = hook(t, v);
    trace.points.push_back(std::move(point));
}

// Shared synchronous TD loop; `project` is applied to the blended iterate
// each step (identity for the unprojected baseline).
template <typename Project>
SolveResult run_sa_loop(const Mrp& mrp, const SaConfig& cfg, std::vector<double> v0,
                        const LogHook& hook, Project&& project) {
    const int n = mrp.size();
    if (v0.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("projected_sa: v0 dimension mismatch");
    if (cfg.iterations < 0) throw std::invalid_argument("projected_sa: iterations must be >= 0");
    if (cfg.log_every < 1) throw std::invalid_argument("projected_sa: log_every must be >= 1");
    check_finite(v0, -1);

    SolveResult result;
    result.v = std::move(v0);
    std::vector<double> target(static_cast<std::size_t>(n));
    std::vector<double> blended(static_cast<std::size_t>(n));

    record(result.trace, 0, result.v, hook);
    for (long t = 0; t < cfg.iterations; ++t) {
        kernels::sa_sweep(mrp, result.v, cfg.seed, t, target, cfg.threads);
        const double alpha = cfg.schedule.at(t);
        for (int s = 0; s < n; ++s)
            blended[static_cast<std::size_t>(s)] =
                (1.0 - alpha) * result.v[static_cast<std::size_t>(s)] +
                alpha * target[static_cast<std::size_t>(s)];
        project(blended, result.v);
        check_finite(result.v, t + 1);
        if (is_log_point(t + 1, cfg.log_every)) record(result.trace, t + 1, result.v, hook);
    }
    if (!result.trace.points.empty() && result.trace.points.back().iteration != cfg.iterations)
        record(result.trace, cfg.iterations, result.v, hook);
    return result;
}

}  // namespace

SolveResult projected_sa(const Mrp& mrp, const GaugeMap& gauge, const SaConfig& cfg,
                         std::vector<double> v0, const LogHook& hook) {
    if (gauge.n != mrp.size()) throw std::invalid_argument("projected_sa: gauge dimension mismatch");
    std::vector<double> projected;
    apply_gauge(gauge, v0, projected);
    return run_sa_loop(mrp, cfg, std::move(projected), hook,
                       [&gauge](const std::vector<double>& in, std::vector<double>& out) {
                           apply_gauge(gauge, in, out);
                       });
}

ResidualEstimate estimate_residual(const Mrp& mrp, const std::vector<double>& v,
                                   const GaugeMap& gauge, int samples_per_anchor,
                                   std::uint64_t seed, std::uint64_t epoch) {
    if (samples_per_anchor < 1)
        throw std::invalid_argument("estimate_residual: samples_per_anchor must be >= 1");
    if (v.size() != static_cast<std::size_t>(mrp.size()))
        throw std::invalid_argument("estimate_residual: dimension mismatch");

    const int cols = gauge.columns();
    ResidualEstimate est;
    est.samples_per_anchor = samples_per_anchor;
    est.theta.resize(static_cast<std::size_t>(cols));
    for (int c = 0; c < cols; ++c) {
        const StateIndex a = gauge.anchors[static_cast<std::size_t>(c)];
        SamplerState stream(seed, {StreamPurpose::residual, static_cast<std::uint64_t>(a), epoch});
        double acc = 0.0;
        for (int j = 0; j < samples_per_anchor; ++j) {
            StateIndex next = mrp.transition.sample_row(a, stream.next_unit());
            acc += v[static_cast<std::size_t>(next)];
        }
        est.theta[static_cast<std::size_t>(c)] = mrp.reward.values[static_cast<std::size_t>(a)] +
                                                 acc / samples_per_anchor -
                                                 v[static_cast<std::size_t>(a)];
    }

    est.g_hat.assign(static_cast<std::size_t>(mrp.size()), 0.0);
    for (int s = 0; s < mrp.size(); ++s) {
        double acc = 0.0;
        for (int c = 0; c < cols; ++c) acc += est.theta[static_cast<std::size_t>(c)] * gauge.weight(s, c);
        est.g_hat[static_cast<std::size_t>(s)] = acc;
    }
    return est;
}

std::vector<double> gain_profile(const ResidualEstimate& residual, const PhaseWeights& weights,
                                 const ChainStructure& st) {
    if (residual.theta.size() != static_cast<std::size_t>(st.peripheral_dim()))
        throw std::invalid_argument("gain_profile: theta dimension mismatch");
    const int n = st.n;
    const std::size_t class_count = st.periods.size();

    std::vector<double> class_gain(class_count, 0.0);
    for (std::size_t i = 0; i < class_count; ++i) {
        const int d = st.periods[i];
        double acc = 0.0;
        for (int k = 0; k < d; ++k)
            acc += residual.theta[static_cast<std::size_t>(st.column_of(static_cast<int>(i), k))];
        class_gain[i] = acc / d;
    }

    std::vector<double> profile(static_cast<std::size_t>(n), 0.0);
    for (int s = 0; s < n; ++s) {
        double acc = 0.0;
        for (std::size_t i = 0; i < class_count; ++i) {
            const int d = st.periods[i];
            double mass = 0.0;
            for (int k = 0; k < d; ++k) mass += weights.at(s, st.column_of(static_cast<int>(i), k));
            acc += mass * class_gain[i];
        }
        profile[static_cast<std::size_t>(s)] = acc;
    }
    return profile;
}

double scalar_gain_estimate(const Mrp& mrp, const std::vector<double>& v, StateIndex state,
                            int samples, std::uint64_t seed, std::uint64_t epoch) {
    if (samples < 1) throw std::invalid_argument("scalar_gain_estimate: samples must be >= 1");
    SamplerState stream(seed, {StreamPurpose::residual, static_cast<std::uint64_t>(state), epoch});
    double acc = 0.0;
    for (int j = 0; j < samples; ++j) {
        StateIndex next = mrp.transition.sample_row(state, stream.next_unit());
        acc += v[static_cast<std::size_t>(next)];
    }
    return mrp.reward.values[static_cast<std::size_t>(state)] + acc / samples -
           v[static_cast<std::size_t>(state)];
}

BaselineResult unprojected_td(const Mrp& mrp, const SaConfig& cfg, StateIndex anchor,
                              int samples_per_anchor, const LogHook& hook) {
    std::vector<double> v0(static_cast<std::size_t>(mrp.size()), 0.0);
    SolveResult sa = run_sa_loop(mrp, cfg, std::move(v0), hook,
                                 [](const std::vector<double>& in, std::vector<double>& out) {
                                     out = in;
                                 });
    BaselineResult result;
    result.v = std::move(sa.v);
    result.trace = std::move(sa.trace);
    result.gain = scalar_gain_estimate(mrp, result.v, anchor, samples_per_anchor, cfg.seed,
                                       static_cast<std::uint64_t>(cfg.iterations));
    result.profile.assign(static_cast<std::size_t>(mrp.size()), result.gain);
    return result;
}

BaselineResult anchor_only_td(const Mrp& mrp, const SaConfig& cfg, StateIndex anchor,
                              int samples_per_anchor, const LogHook& hook) {
    GaugeMap gauge = GaugeMap::single_anchor(mrp.size(), anchor);
    std::vector<double> v0(static_cast<std::size_t>(mrp.size()), 0.0);
    SolveResult sa = projected_sa(mrp, gauge, cfg, std::move(v0), hook);
    BaselineResult result;
    result.v = std::move(sa.v);
    result.trace = std::move(sa.trace);
    result.gain = scalar_gain_estimate(mrp, result.v, anchor, samples_per_anchor, cfg.seed,
                                       static_cast<std::uint64_t>(cfg.iterations));
    result.profile.assign(static_cast<std::size_t>(mrp.size()), result.gain);
    return result;
}

}  // namespace qpoisson
