#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "qpoisson/rng.hpp"

namespace qpoisson {

/// State identifier, always in {0, ..., n-1}.
using StateIndex = int;

/// Row-sum tolerance used by constructors and the default validation.
inline constexpr double kRowSumTol = 1e-9;

/// Hard cap on the length of a single absorption episode. Exceeding it means
/// the transient classification is broken, which is a fault, not a retry.
inline constexpr long kEpisodeCap = 1000000;

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> issues;

    std::string to_string() const;
};

/// Invalid chain data (non-stochastic rows, reward bound violations, ...).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(ValidationReport report)
        : std::runtime_error(report.to_string()), report_(std::move(report)) {}
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

/// Numerical fault: divergence, singular solve, episode cap, non-convergence.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-stochastic transition matrix with per-row sampling tables.
///
/// Sampling uses the inverse CDF over precomputed cumulative row sums; the
/// last positive-probability bucket absorbs any floating-point slack at the
/// top of the row.
class StochasticMatrix {
public:
    StochasticMatrix(int n, std::vector<double> rows);

    int size() const { return n_; }
    double operator()(StateIndex s, StateIndex t) const { return p_[static_cast<std::size_t>(s) * n_ + t]; }
    const double* row(StateIndex s) const { return p_.data() + static_cast<std::size_t>(s) * n_; }
    const std::vector<double>& data() const { return p_; }

    /// Maps a uniform u in [0,1) to a successor of s by inverse CDF.
    StateIndex sample_row(StateIndex s, double u) const;

private:
    int n_ = 0;
    std::vector<double> p_;     // n*n, row-major
    std::vector<double> cdf_;   // n*n cumulative row sums
    std::vector<int> last_pos_; // per row, last index with positive mass
};

struct RewardVector {
    std::vector<double> values;
    double bound = 0.0;  // declared sup bound R, |values[s]| <= bound
};

/// Markov reward process (P, r).
struct Mrp {
    StochasticMatrix transition;
    RewardVector reward;

    Mrp(StochasticMatrix p, RewardVector r);

    int size() const { return transition.size(); }
};

/// Checks raw chain data against the row-stochasticity and reward-bound
/// invariants at tolerance `tol`. Violations are reported, not thrown.
ValidationReport validate_chain(int n, const std::vector<double>& rows,
                                const std::vector<double>& rewards, double bound, double tol);

ValidationReport validate(const Mrp& mrp, double tol = kRowSumTol);

/// Draws one successor of s, advancing the sampler deterministically.
StateIndex sample_next(const Mrp& mrp, StateIndex s, SamplerState& sampler);

/// Truncated Cesaro average (1/T) sum_{t<T} P^t r; converges to the gain
/// profile at rate O(1/T).
std::vector<double> cesaro_gain(const Mrp& mrp, long horizon, int threads = 0);

}  // namespace qpoisson
