#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qpoisson/mrp.hpp"
#include "qpoisson/solver.hpp"
#include "qpoisson/structure.hpp"

namespace qpoisson {

/// One recurrent class of a block-built instance: `period` phases of
/// `phase_size` states each, with one reward per phase.
struct ClassSpec {
    int phase_size = 1;
    int period = 1;
    std::vector<double> phase_rewards;  // length == period, values in [0, 1]
};

/// How transient exit mass is split across classes.
struct ExitSchedule {
    enum class Kind { two_class_linear, three_class };

    Kind kind = Kind::two_class_linear;
    double p_lo = 0.0;  // two_class_linear: q_j ramps linearly from p_lo to p_hi
    double p_hi = 0.0;
    double a = 0.0;     // three_class: q1 = a(1-xi), q2 = a xi, q3 = 1-a

    static ExitSchedule two_class_linear(double p_lo, double p_hi);
    static ExitSchedule three_class(double a);
};

/// Declarative block instance: block-cyclic recurrent classes, a linear chain
/// of transient states with self-loop mass epsilon and exit mass eta, and a
/// schedule splitting exits across class entry states.
struct MrpSpec {
    std::string name;
    std::vector<ClassSpec> classes;
    int transient_len = 1;
    double epsilon = 0.0;  // transient self-loop parameter, in [0, 1)
    double eta = 0.1;      // exit mass, in (0, 1)
    ExitSchedule exits;

    int state_count() const;
};

struct BuiltMrp {
    Mrp mrp;
    ChainStructure structure;  // analytically known, used as ground truth
};

/// Builds the instance. Layout: classes in order, phases contiguous, then
/// transients. Entry state of class i is the first state of its phase 0.
BuiltMrp build_mrp(const MrpSpec& spec);

/// The six fixed benchmark instances.
std::vector<MrpSpec> suite();

/// Desk-scale variant: divides every phase size by `divisor` (floor 1).
MrpSpec scaled(const MrpSpec& spec, int divisor);

struct ExperimentConfig {
    long td_iterations = 12000;
    long log_every = 120;
    int support_budget = 150;     // K, draws per state for structure learning
    int weight_episodes = 4000;   // M, absorption episodes per transient state
    int anchor_samples = 220;     // J, samples per anchor for residuals
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    StepSchedule schedule = StepSchedule::polynomial(1.0, 0.65, 500.0);
    int threads = 0;
};

struct CurvePoint {
    long iteration = 0;
    double err = 0.0;  // sup-norm distance of the gain estimate to the truth

    bool operator==(const CurvePoint&) const = default;
};

struct ErrorCurve {
    std::string instance;
    std::string method;  // projected | anchor_only | unprojected
    std::uint64_t seed = 0;
    std::vector<CurvePoint> points;

    bool operator==(const ErrorCurve&) const = default;
};

/// Full protocol on one instance: per seed, learn structure (budget K),
/// estimate weights (budget M), build the gauge, run projected SA, and log
/// the gain-profile error at every logged iteration (residual budget J);
/// both baselines run with the same seeds and per-iteration sample counts.
/// Returns three curves per seed. Errors are measured against the exact gain
/// of the constructed instance.
std::vector<ErrorCurve> run_experiment(const MrpSpec& spec, const ExperimentConfig& cfg);

/// CSV with header instance,method,seed,iteration,err_linf, rows sorted by
/// (instance, method, seed, iteration), reals with 17 significant digits.
void write_curves(const std::vector<ErrorCurve>& curves, const std::string& path);
std::vector<ErrorCurve> read_curves(const std::string& path);

struct SummaryRow {
    std::string instance;
    std::string method;
    long iteration = 0;
    double mean_err = 0.0;
    double std_err = 0.0;  // sample standard deviation over seeds
    int seeds = 0;
};

/// Per-(instance, method, iteration) mean and standard deviation over seeds.
std::vector<SummaryRow> summarize(const std::vector<ErrorCurve>& curves);
void write_summary(const std::vector<SummaryRow>& rows, const std::string& path);

}  // namespace qpoisson
