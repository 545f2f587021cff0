#include "qpoisson/mrp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qpoisson/kernels.hpp"

namespace qpoisson {

std::string ValidationReport::to_string() const {
    if (ok) return "ok";
    std::ostringstream os;
    os << "validation failed (" << issues.size() << " issue(s)):";
    for (const auto& issue : issues) os << "\n  - " << issue;
    return os.str();
}

ValidationReport validate_chain(int n, const std::vector<double>& rows,
                                const std::vector<double>& rewards, double bound, double tol) {
    ValidationReport report;
    auto fail = [&](std::string msg) {
        report.ok = false;
        report.issues.push_back(std::move(msg));
    };

    if (n <= 0) fail("state count must be positive, got " + std::to_string(n));
    if (rows.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(std::max(n, 0)))
        fail("transition matrix has " + std::to_string(rows.size()) + " entries, expected " +
             std::to_string(static_cast<long long>(n) * n));
    if (rewards.size() != static_cast<std::size_t>(std::max(n, 0)))
        fail("reward vector has " + std::to_string(rewards.size()) + " entries, expected " +
             std::to_string(n));
    if (!report.ok) return report;

    for (int s = 0; s < n; ++s) {
        double sum = 0.0;
        for (int t = 0; t < n; ++t) {
            double p = rows[static_cast<std::size_t>(s) * n + t];
            if (!std::isfinite(p))
                fail("non-finite entry at (" + std::to_string(s) + "," + std::to_string(t) + ")");
            else if (p < 0.0)
                fail("negative entry at (" + std::to_string(s) + "," + std::to_string(t) + "): " +
                     std::to_string(p));
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol)
            fail("row " + std::to_string(s) + " sums to " + std::to_string(sum));
    }
    for (int s = 0; s < n; ++s) {
        double r = rewards[static_cast<std::size_t>(s)];
        if (!std::isfinite(r))
            fail("non-finite reward at state " + std::to_string(s));
        else if (std::abs(r) > bound)
            fail("reward at state " + std::to_string(s) + " exceeds declared bound " +
                 std::to_string(bound) + ": " + std::to_string(r));
    }
    return report;
}

ValidationReport validate(const Mrp& mrp, double tol) {
    return validate_chain(mrp.size(), mrp.transition.data(), mrp.reward.values,
                          mrp.reward.bound, tol);
}

StochasticMatrix::StochasticMatrix(int n, std::vector<double> rows) : n_(n), p_(std::move(rows)) {
    // Constructors only admit valid rows; arbitrary data goes through
    // validate_chain first.
    ValidationReport rowcheck;
    {
        std::vector<double> zero(static_cast<std::size_t>(std::max(n, 0)), 0.0);
        rowcheck = validate_chain(n, p_, zero, 0.0, kRowSumTol);
    }
    if (!rowcheck.ok) throw ValidationError(std::move(rowcheck));

    cdf_.resize(p_.size());
    last_pos_.resize(n_);
    for (int s = 0; s < n_; ++s) {
        double acc = 0.0;
        int last = -1;
        for (int t = 0; t < n_; ++t) {
            double p = (*this)(s, t);
            acc += p;
            cdf_[static_cast<std::size_t>(s) * n_ + t] = acc;
            if (p > 0.0) last = t;
        }
        last_pos_[s] = last;
    }
}

StateIndex StochasticMatrix::sample_row(StateIndex s, double u) const {
    const double* begin = cdf_.data() + static_cast<std::size_t>(s) * n_;
    const double* end = begin + n_;
    const double* it = std::upper_bound(begin, end, u);
    int idx = static_cast<int>(it - begin);
    // Top-of-row rounding slack lands in the last positive bucket.
    if (idx > last_pos_[s]) idx = last_pos_[s];
    return idx;
}

Mrp::Mrp(StochasticMatrix p, RewardVector r) : transition(std::move(p)), reward(std::move(r)) {
    if (reward.values.size() != static_cast<std::size_t>(transition.size())) {
        ValidationReport report;
        report.ok = false;
        report.issues.push_back("reward length " + std::to_string(reward.values.size()) +
                                " does not match state count " + std::to_string(transition.size()));
        throw ValidationError(std::move(report));
    }
}

StateIndex sample_next(const Mrp& mrp, StateIndex s, SamplerState& sampler) {
    return mrp.transition.sample_row(s, sampler.next_unit());
}

std::vector<double> cesaro_gain(const Mrp& mrp, long horizon, int threads) {
    if (horizon < 1) throw std::invalid_argument("cesaro_gain: horizon must be >= 1");
    const int n = mrp.size();
    std::vector<double> x = mrp.reward.values;  // P^t r, starting at t = 0
    std::vector<double> acc(x);
    std::vector<double> next(static_cast<std::size_t>(n));
    for (long t = 1; t < horizon; ++t) {
        kernels::matvec(mrp.transition, x, next, threads);
        x.swap(next);
        for (int s = 0; s < n; ++s) acc[static_cast<std::size_t>(s)] += x[static_cast<std::size_t>(s)];
    }
    for (int s = 0; s < n; ++s) acc[static_cast<std::size_t>(s)] /= static_cast<double>(horizon);
    return acc;
}

}  // namespace qpoisson
