#include "qpoisson/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "qpoisson/kernels.hpp"

namespace qpoisson {

namespace {

Eigen::MatrixXd dense_matrix(const StochasticMatrix& p) {
    const int n = p.size();
    Eigen::MatrixXd m(n, n);
    for (int s = 0; s < n; ++s)
        for (int t = 0; t < n; ++t) m(s, t) = p(s, t);
    return m;
}

// Pi as a dense matrix: identity minus weight columns placed at anchor
// coordinates.
Eigen::MatrixXd gauge_matrix(const GaugeMap& gauge) {
    const int n = gauge.n;
    const int cols = gauge.columns();
    Eigen::MatrixXd pi = Eigen::MatrixXd::Identity(n, n);
    for (int s = 0; s < n; ++s)
        for (int c = 0; c < cols; ++c)
            pi(s, gauge.anchors[static_cast<std::size_t>(c)]) -= gauge.weight(s, c);
    return pi;
}

const ChainStructure& required_structure(const GaugeMap& gauge, const char* who) {
    if (!gauge.structure)
        throw std::invalid_argument(std::string(who) + ": gauge carries no chain structure");
    return *gauge.structure;
}

// Stationary distribution of an irreducible class block: solve pi^T P = pi^T
// with the normalization sum(pi) = 1 replacing the last equation.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& block) {
    const int m = static_cast<int>(block.rows());
    Eigen::MatrixXd a = block.transpose() - Eigen::MatrixXd::Identity(m, m);
    a.row(m - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    b(m - 1) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible())
        throw NumericError("stationary distribution solve is singular; class is not irreducible");
    return lu.solve(b);
}

std::vector<int> non_anchor_states(const GaugeMap& gauge) {
    std::vector<char> is_anchor(static_cast<std::size_t>(gauge.n), 0);
    for (int a : gauge.anchors) is_anchor[static_cast<std::size_t>(a)] = 1;
    std::vector<int> free_states;
    for (int s = 0; s < gauge.n; ++s)
        if (!is_anchor[static_cast<std::size_t>(s)]) free_states.push_back(s);
    return free_states;
}

// Pi P restricted to W in non-anchor coordinates:
// A(r, c) = P(f_r, f_c) - sum_{c'} w(f_r, c') P(a_{c'}, f_c).
Eigen::MatrixXd anchored_operator(const StochasticMatrix& p, const GaugeMap& gauge,
                                  const std::vector<int>& free_states) {
    const int dim = static_cast<int>(free_states.size());
    const int cols = gauge.columns();
    Eigen::MatrixXd a(dim, dim);
    for (int r = 0; r < dim; ++r) {
        const int s = free_states[static_cast<std::size_t>(r)];
        for (int c = 0; c < dim; ++c) {
            const int t = free_states[static_cast<std::size_t>(c)];
            double value = p(s, t);
            for (int k = 0; k < cols; ++k)
                value -= gauge.weight(s, k) * p(gauge.anchors[static_cast<std::size_t>(k)], t);
            a(r, c) = value;
        }
    }
    return a;
}

// Block power iteration; returns the dominant spectral radius. A block of
// four vectors keeps equal-modulus pairs (complex or +/- real) from stalling
// the single-vector ratio.
double block_power_spectral_radius(const Eigen::MatrixXd& a, double tol, long cap,
                                   long& iterations_used) {
    const int dim = static_cast<int>(a.rows());
    iterations_used = 0;
    if (dim == 0) return 0.0;

    const int block = std::min(4, dim);
    Eigen::MatrixXd x(dim, block);
    SamplerState stream(0x9e3779b9u, {StreamPurpose::generic, 0, 0});
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < block; ++c) x(r, c) = stream.next_unit() - 0.5;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    x = qr.householderQ() * Eigen::MatrixXd::Identity(dim, block);

    double estimate = 0.0;
    int stable = 0;
    for (long it = 1; it <= cap; ++it) {
        iterations_used = it;
        Eigen::MatrixXd y = a * x;
        if (y.norm() < 1e-300) return 0.0;  // (numerically) nilpotent operator
        Eigen::MatrixXd small = x.transpose() * y;  // Rayleigh block
        Eigen::EigenSolver<Eigen::MatrixXd> eig(small);
        double rho = 0.0;
        for (int i = 0; i < small.rows(); ++i) rho = std::max(rho, std::abs(eig.eigenvalues()(i)));

        double delta = std::abs(rho - estimate);
        estimate = rho;
        if (delta <= tol * std::max(1.0, rho)) {
            if (++stable >= 3) return estimate;
        } else {
            stable = 0;
        }

        Eigen::HouseholderQR<Eigen::MatrixXd> step(y);
        x = step.householderQ() * Eigen::MatrixXd::Identity(dim, block);
    }
    throw NumericError("power iteration did not converge within " + std::to_string(cap) +
                       " iterations; last estimate " + std::to_string(estimate));
}

// Lyapunov series H = sum_t (B^T)^t B^t by doubling:
//   S <- S + C^T S C,  C <- C^2
// doubles the number of summed terms each step. Stops once the appended tail
// falls below 1e-12; the result satisfies H - B^T H B = I.
Eigen::MatrixXd lyapunov_series(const Eigen::MatrixXd& b) {
    const int dim = static_cast<int>(b.rows());
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(dim, dim);
    Eigen::MatrixXd c = b;
    for (int step = 0; step < 200; ++step) {
        Eigen::MatrixXd tail = c.transpose() * s * c;
        if (tail.cwiseAbs().maxCoeff() < 1e-12) return s;
        s += tail;
        c = c * c;
    }
    throw NumericError("Lyapunov series did not converge; operator is too close to the unit circle");
}

}  // namespace

ExactSolution exact_solve(const Mrp& mrp, const GaugeMap& gauge) {
    const ChainStructure& st = required_structure(gauge, "exact_solve");
    const int n = mrp.size();
    if (gauge.n != n) throw std::invalid_argument("exact_solve: gauge dimension mismatch");

    Eigen::MatrixXd p = dense_matrix(mrp.transition);
    Eigen::MatrixXd pi = gauge_matrix(gauge);
    Eigen::Map<const Eigen::VectorXd> r(mrp.reward.values.data(), n);

    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - pi * p;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible())
        throw NumericError("exact_solve: (I - Pi P) is singular; gauge kernel is wrong");
    Eigen::VectorXd v = lu.solve(pi * r);
    Eigen::VectorXd g = r + p * v - v;

    ExactSolution sol;
    sol.v_star.assign(v.data(), v.data() + n);
    sol.g_star.assign(g.data(), g.data() + n);
    for (int anchor : gauge.anchors) sol.theta_star.push_back(g(anchor));

    // True gain: per-class stationary averages spread by absorption mass.
    const std::size_t class_count = st.classes.size();
    std::vector<double> class_gain(class_count, 0.0);
    for (std::size_t i = 0; i < class_count; ++i) {
        const auto& cls = st.classes[i];
        const int m = static_cast<int>(cls.size());
        Eigen::MatrixXd block(m, m);
        for (int a_row = 0; a_row < m; ++a_row)
            for (int a_col = 0; a_col < m; ++a_col)
                block(a_row, a_col) = mrp.transition(cls[static_cast<std::size_t>(a_row)],
                                                     cls[static_cast<std::size_t>(a_col)]);
        Eigen::VectorXd dist = stationary_distribution(block);
        double acc = 0.0;
        for (int j = 0; j < m; ++j)
            acc += dist(j) * mrp.reward.values[static_cast<std::size_t>(cls[static_cast<std::size_t>(j)])];
        class_gain[i] = acc;
    }
    sol.gain.assign(static_cast<std::size_t>(n), 0.0);
    for (int s = 0; s < n; ++s) {
        double acc = 0.0;
        for (std::size_t i = 0; i < class_count; ++i) {
            double mass = 0.0;
            for (int k = 0; k < st.periods[i]; ++k)
                mass += gauge.weight(s, st.column_of(static_cast<int>(i), k));
            acc += mass * class_gain[i];
        }
        sol.gain[static_cast<std::size_t>(s)] = acc;
    }
    return sol;
}

QuotientDiagnostics quotient_diagnostics(const Mrp& mrp, const GaugeMap& gauge,
                                         const ChainStructure& st) {
    if (gauge.n != mrp.size())
        throw std::invalid_argument("quotient_diagnostics: gauge dimension mismatch");

    QuotientDiagnostics diag;
    diag.free_states = non_anchor_states(gauge);
    diag.dim = static_cast<int>(diag.free_states.size());

    if (diag.dim > 0) {
        Eigen::MatrixXd a = anchored_operator(mrp.transition, gauge, diag.free_states);
        diag.rho_q = block_power_spectral_radius(a, 1e-8, 100000, diag.power_iterations);
        diag.gamma = 0.5 * (1.0 + diag.rho_q);
        Eigen::MatrixXd h = lyapunov_series(a / diag.gamma);
        diag.seminorm_h.assign(h.data(), h.data() + static_cast<std::size_t>(diag.dim) * diag.dim);
    } else {
        diag.rho_q = 0.0;  // empty operator
        diag.gamma = 0.5;
    }

    diag.h_abs = expected_absorption_times(mrp, st).h_abs;
    return diag;
}

AbsorptionTimes expected_absorption_times(const Mrp& mrp, const ChainStructure& st) {
    AbsorptionTimes result;
    const auto& transient = st.transient;
    if (transient.empty()) return result;

    const int t_count = static_cast<int>(transient.size());
    Eigen::MatrixXd q(t_count, t_count);
    for (int i = 0; i < t_count; ++i)
        for (int j = 0; j < t_count; ++j)
            q(i, j) = mrp.transition(transient[static_cast<std::size_t>(i)],
                                     transient[static_cast<std::size_t>(j)]);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(t_count, t_count) - q;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible())
        throw NumericError("expected_absorption_times: (I - Q) singular on the transient block");
    Eigen::VectorXd times = lu.solve(Eigen::VectorXd::Ones(t_count));
    result.per_transient.assign(times.data(), times.data() + t_count);
    result.h_abs = times.maxCoeff();
    return result;
}

double quotient_seminorm(const QuotientDiagnostics& diag, const GaugeMap& gauge,
                         const std::vector<double>& v) {
    if (diag.dim == 0) return 0.0;
    std::vector<double> anchored = apply_gauge(gauge, v);
    Eigen::VectorXd x(diag.dim);
    for (int i = 0; i < diag.dim; ++i)
        x(i) = anchored[static_cast<std::size_t>(diag.free_states[static_cast<std::size_t>(i)])];
    Eigen::Map<const Eigen::MatrixXd> h(diag.seminorm_h.data(), diag.dim, diag.dim);
    return std::sqrt(std::max(0.0, x.dot(h * x)));
}

namespace {

CostCheckRow cost_check_state(const Mrp& mrp, const ExactSolution& sol,
                              const std::vector<char>& is_anchor, int s, long episodes,
                              std::uint64_t seed) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (long e = 0; e < episodes; ++e) {
        SamplerState stream(seed, {StreamPurpose::transient_cost, static_cast<std::uint64_t>(s),
                                   static_cast<std::uint64_t>(e)});
        double total = 0.0;
        StateIndex x = s;
        long steps = 0;
        while (!is_anchor[static_cast<std::size_t>(x)]) {
            if (steps >= kEpisodeCap)
                throw NumericError("transient_cost_check episode from state " + std::to_string(s) +
                                   " exceeded " + std::to_string(kEpisodeCap) + " steps");
            total += mrp.reward.values[static_cast<std::size_t>(x)] -
                     sol.g_star[static_cast<std::size_t>(x)];
            x = mrp.transition.sample_row(x, stream.next_unit());
            ++steps;
        }
        sum += total;
        sum_sq += total * total;
    }
    CostCheckRow row;
    row.state = s;
    row.exact = sol.v_star[static_cast<std::size_t>(s)];
    row.estimate = sum / static_cast<double>(episodes);
    double variance = std::max(0.0, sum_sq / episodes - row.estimate * row.estimate);
    if (episodes > 1) variance *= static_cast<double>(episodes) / (episodes - 1);
    row.std_error = std::sqrt(variance / static_cast<double>(episodes));
    row.flagged = std::abs(row.estimate - row.exact) > 3.0 * row.std_error;
    return row;
}

}  // namespace

std::vector<CostCheckRow> transient_cost_check(const Mrp& mrp, const ExactSolution& sol,
                                               const GaugeMap& gauge, long episodes,
                                               std::uint64_t seed, int threads) {
    if (episodes < 1) throw std::invalid_argument("transient_cost_check: episodes must be >= 1");
    std::vector<char> is_anchor(static_cast<std::size_t>(mrp.size()), 0);
    for (int a : gauge.anchors) is_anchor[static_cast<std::size_t>(a)] = 1;
    std::vector<int> targets = non_anchor_states(gauge);

    std::vector<CostCheckRow> rows(targets.size());
    int workers = kernels::resolve_threads(threads);
    std::atomic<bool> failed{false};
    std::string message;
#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (long i = 0; i < static_cast<long>(targets.size()); ++i) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            rows[static_cast<std::size_t>(i)] = cost_check_state(
                mrp, sol, is_anchor, targets[static_cast<std::size_t>(i)], episodes, seed);
        } catch (const std::exception& e) {
            bool expected = false;
            if (failed.compare_exchange_strong(expected, true)) {
#pragma omp critical(qpoisson_cost_check_error)
                message = e.what();
            }
        }
    }
    if (failed.load()) throw NumericError(message);
    return rows;
}

double return_identity_check(const Mrp& mrp, const std::vector<double>& v, long horizon,
                             StateIndex start, int threads) {
    const int n = mrp.size();
    if (v.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("return_identity_check: dimension mismatch");
    if (horizon < 1) throw std::invalid_argument("return_identity_check: horizon must be >= 1");

    // g_v = r + Pv - v
    std::vector<double> pv(static_cast<std::size_t>(n));
    kernels::matvec(mrp.transition, v, pv, threads);
    std::vector<double> g_v(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s)
        g_v[static_cast<std::size_t>(s)] = mrp.reward.values[static_cast<std::size_t>(s)] +
                                           pv[static_cast<std::size_t>(s)] - v[static_cast<std::size_t>(s)];

    std::vector<double> xr = mrp.reward.values;
    std::vector<double> xg = g_v;
    std::vector<double> xv = v;
    std::vector<double> scratch(static_cast<std::size_t>(n));
    double lhs = 0.0;
    double rhs_sum = 0.0;
    for (long t = 0; t < horizon; ++t) {
        lhs += xr[static_cast<std::size_t>(start)];
        rhs_sum += xg[static_cast<std::size_t>(start)];
        kernels::matvec(mrp.transition, xr, scratch, threads);
        xr.swap(scratch);
        kernels::matvec(mrp.transition, xg, scratch, threads);
        xg.swap(scratch);
        kernels::matvec(mrp.transition, xv, scratch, threads);
        xv.swap(scratch);
    }
    double rhs = rhs_sum + v[static_cast<std::size_t>(start)] - xv[static_cast<std::size_t>(start)];
    return std::abs(lhs - rhs);
}

double td_noise_bound(const Mrp& mrp, const std::vector<double>& v) {
    const int n = mrp.size();
    if (v.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("td_noise_bound: dimension mismatch");
    double worst = 0.0;
    for (int s = 0; s < n; ++s) {
        double mean = 0.0;
        double second = 0.0;
        for (int t = 0; t < n; ++t) {
            double p = mrp.transition(s, t);
            if (p <= 0.0) continue;
            mean += p * v[static_cast<std::size_t>(t)];
            second += p * v[static_cast<std::size_t>(t)] * v[static_cast<std::size_t>(t)];
        }
        worst = std::max(worst, second - mean * mean);
    }
    return worst;
}

}  // namespace qpoisson
