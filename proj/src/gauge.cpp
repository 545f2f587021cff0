#include "qpoisson/gauge.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "qpoisson/kernels.hpp"

namespace qpoisson {

GaugeMap GaugeMap::from_weights(const PhaseWeights& weights) {
    GaugeMap gauge;
    gauge.n = weights.states();
    gauge.anchors = weights.structure.flat_anchors();
    gauge.w = weights.w;
    gauge.structure = weights.structure;
    return gauge;
}

GaugeMap GaugeMap::single_anchor(int n, StateIndex anchor) {
    if (anchor < 0 || anchor >= n) throw std::invalid_argument("single_anchor: anchor out of range");
    GaugeMap gauge;
    gauge.n = n;
    gauge.anchors = {anchor};
    gauge.w.assign(static_cast<std::size_t>(n), 1.0);
    return gauge;
}

namespace {

void fill_recurrent_indicator_rows(const ChainStructure& st, std::vector<double>& w) {
    const int cols = st.peripheral_dim();
    for (std::size_t i = 0; i < st.classes.size(); ++i)
        for (int s : st.classes[i]) {
            int col = st.column_of(static_cast<int>(i), st.phase_of[static_cast<std::size_t>(s)]);
            w[static_cast<std::size_t>(s) * cols + col] = 1.0;
        }
}

}  // namespace

PhaseWeights exact_weights(const StochasticMatrix& p, const ChainStructure& st) {
    const int n = st.n;
    const int cols = st.peripheral_dim();
    PhaseWeights weights;
    weights.structure = st;
    weights.kind = PhaseWeights::Kind::exact;
    weights.w.assign(static_cast<std::size_t>(n) * cols, 0.0);
    fill_recurrent_indicator_rows(st, weights.w);

    const auto& transient = st.transient;
    const int t_count = static_cast<int>(transient.size());
    if (t_count == 0) return weights;

    std::vector<int> transient_index(static_cast<std::size_t>(n), -1);
    for (int j = 0; j < t_count; ++j)
        transient_index[static_cast<std::size_t>(transient[static_cast<std::size_t>(j)])] = j;

    // One coupled solve per class over the stacked (transient, phase-offset)
    // unknowns: x(j,k) = sum_{t'} P(s_j, t') x(t',(k+1) mod d) + mass into
    // C_{i,(k+1) mod d}.
    for (std::size_t i = 0; i < st.classes.size(); ++i) {
        const int d = st.periods[i];
        const int dim = t_count * d;
        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(dim, dim);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
        auto unknown = [&](int j, int k) { return j * d + k; };

        for (int j = 0; j < t_count; ++j) {
            const int s = transient[static_cast<std::size_t>(j)];
            for (int k = 0; k < d; ++k) {
                const int next_k = (k + 1) % d;
                const int row = unknown(j, k);
                for (int t = 0; t < n; ++t) {
                    const double prob = p(s, t);
                    if (prob <= 0.0) continue;
                    int jt = transient_index[static_cast<std::size_t>(t)];
                    if (jt >= 0) {
                        a(row, unknown(jt, next_k)) -= prob;
                    } else if (st.cls_of[static_cast<std::size_t>(t)] == static_cast<int>(i) &&
                               st.phase_of[static_cast<std::size_t>(t)] == next_k) {
                        b(row) += prob;
                    }
                }
            }
        }

        Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        if (!lu.isInvertible())
            throw NumericError("exact_weights: singular absorption system for class " +
                               std::to_string(i) + "; structure looks misclassified");
        Eigen::VectorXd x = lu.solve(b);

        for (int j = 0; j < t_count; ++j) {
            const int s = transient[static_cast<std::size_t>(j)];
            for (int k = 0; k < d; ++k) {
                int col = st.column_of(static_cast<int>(i), k);
                weights.w[static_cast<std::size_t>(s) * cols + col] = x(unknown(j, k));
            }
        }
    }
    return weights;
}

PhaseWeights estimate_weights(const Mrp& mrp, const ChainStructure& st, int episodes,
                              std::uint64_t seed, int threads) {
    if (episodes < 1) throw std::invalid_argument("estimate_weights: episodes must be >= 1");
    const int n = st.n;
    const int cols = st.peripheral_dim();
    PhaseWeights weights;
    weights.structure = st;
    weights.kind = PhaseWeights::Kind::estimated;
    weights.episodes = episodes;
    weights.seed = seed;
    weights.w.assign(static_cast<std::size_t>(n) * cols, 0.0);
    fill_recurrent_indicator_rows(st, weights.w);

    std::vector<std::vector<long>> counts;
    kernels::absorption_sweep(mrp, st, episodes, seed, counts, threads);
    for (std::size_t j = 0; j < st.transient.size(); ++j) {
        const int s = st.transient[j];
        for (int c = 0; c < cols; ++c)
            weights.w[static_cast<std::size_t>(s) * cols + c] =
                static_cast<double>(counts[j][static_cast<std::size_t>(c)]) / episodes;
    }
    return weights;
}

void apply_gauge(const GaugeMap& gauge, const std::vector<double>& v, std::vector<double>& out) {
    const int n = gauge.n;
    const int cols = gauge.columns();
    if (v.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("apply_gauge: dimension mismatch");
    // Anchor values are read up front so out may alias v.
    std::vector<double> anchor_values(static_cast<std::size_t>(cols));
    for (int c = 0; c < cols; ++c)
        anchor_values[static_cast<std::size_t>(c)] = v[static_cast<std::size_t>(gauge.anchors[static_cast<std::size_t>(c)])];
    out.resize(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        const double* row = gauge.w.data() + static_cast<std::size_t>(s) * cols;
        double acc = 0.0;
        for (int c = 0; c < cols; ++c) acc += anchor_values[static_cast<std::size_t>(c)] * row[c];
        out[static_cast<std::size_t>(s)] = v[static_cast<std::size_t>(s)] - acc;
    }
}

std::vector<double> apply_gauge(const GaugeMap& gauge, const std::vector<double>& v) {
    std::vector<double> out;
    apply_gauge(gauge, v, out);
    return out;
}

int required_m(double eps_b, int transient_count, int peripheral_dim, double delta) {
    if (!(eps_b > 0.0 && eps_b < 1.0))
        throw std::invalid_argument("required_m: eps_b must be in (0, 1)");
    if (transient_count < 1) throw std::invalid_argument("required_m: transient count must be >= 1");
    if (peripheral_dim < 1) throw std::invalid_argument("required_m: peripheral dim must be >= 1");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("required_m: delta must be in (0, 1)");
    double m = std::log(2.0 * transient_count * peripheral_dim / delta) / (2.0 * eps_b * eps_b);
    return std::max(1, static_cast<int>(std::ceil(m)));
}

double gauge_deviation(const GaugeMap& g_hat, const GaugeMap& g_exact) {
    if (g_hat.n != g_exact.n || g_hat.anchors != g_exact.anchors)
        throw std::invalid_argument("gauge_deviation: anchor sets differ");
    const int n = g_hat.n;
    const int cols = g_hat.columns();
    double worst = 0.0;
    for (int s = 0; s < n; ++s) {
        double row_sum = 0.0;
        for (int c = 0; c < cols; ++c) row_sum += std::abs(g_hat.weight(s, c) - g_exact.weight(s, c));
        worst = std::max(worst, row_sum);
    }
    return worst;
}

}  // namespace qpoisson
