#include "qpoisson/io.hpp"

#include <cstdio>
#include <fstream>

namespace qpoisson {

using nlohmann::json;

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    json j;
    in >> j;
    return j;
}

void save_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

json chain_to_json(const Mrp& mrp) {
    const int n = mrp.size();
    json rows = json::array();
    for (int s = 0; s < n; ++s) {
        json row = json::array();
        for (int t = 0; t < n; ++t) row.push_back(mrp.transition(s, t));
        rows.push_back(std::move(row));
    }
    return json{{"n", n}, {"P", std::move(rows)}, {"r", mrp.reward.values}, {"R", mrp.reward.bound}};
}

Mrp chain_from_json(const json& j) {
    const int n = j.at("n").get<int>();
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(n) * std::max(n, 0));
    for (const auto& row : j.at("P"))
        for (const auto& value : row) flat.push_back(value.get<double>());
    std::vector<double> rewards = j.at("r").get<std::vector<double>>();
    double bound = j.at("R").get<double>();

    ValidationReport report = validate_chain(n, flat, rewards, bound, kRowSumTol);
    if (!report.ok) throw ValidationError(std::move(report));
    return Mrp(StochasticMatrix(n, std::move(flat)), RewardVector{std::move(rewards), bound});
}

Mrp load_chain(const std::string& path) { return chain_from_json(load_json(path)); }

void save_chain(const Mrp& mrp, const std::string& path) { save_json(chain_to_json(mrp), path); }

json structure_to_json(const ChainStructure& st) {
    return json{{"n", st.n},           {"classes", st.classes}, {"transient", st.transient},
                {"periods", st.periods}, {"cyclic", st.cyclic},  {"anchors", st.anchors}};
}

ChainStructure structure_from_json(const json& j) {
    ChainStructure st;
    st.n = j.at("n").get<int>();
    st.classes = j.at("classes").get<std::vector<std::vector<int>>>();
    st.transient = j.at("transient").get<std::vector<int>>();
    st.periods = j.at("periods").get<std::vector<int>>();
    st.cyclic = j.at("cyclic").get<std::vector<std::vector<std::vector<int>>>>();
    st.anchors = j.at("anchors").get<std::vector<std::vector<int>>>();

    // The file is untrusted; reject anything that is not a consistent
    // partition before it reaches array indexing.
    auto broken = [](const std::string& what) {
        throw std::runtime_error("structure file is inconsistent: " + what);
    };
    if (st.n < 1) broken("state count must be positive");
    if (st.classes.size() != st.periods.size() || st.classes.size() != st.cyclic.size() ||
        st.classes.size() != st.anchors.size())
        broken("class, period, cyclic, and anchor counts disagree");

    std::vector<int> seen(static_cast<std::size_t>(st.n), 0);
    auto touch = [&](int s) {
        if (s < 0 || s >= st.n) broken("state index " + std::to_string(s) + " out of range");
        ++seen[static_cast<std::size_t>(s)];
    };
    st.cls_of.assign(static_cast<std::size_t>(st.n), -1);
    st.phase_of.assign(static_cast<std::size_t>(st.n), -1);
    for (std::size_t i = 0; i < st.cyclic.size(); ++i) {
        if (st.periods[i] < 1 || st.cyclic[i].size() != static_cast<std::size_t>(st.periods[i]) ||
            st.anchors[i].size() != static_cast<std::size_t>(st.periods[i]))
            broken("period of class " + std::to_string(i) + " does not match its partition");
        std::size_t class_size = 0;
        for (std::size_t k = 0; k < st.cyclic[i].size(); ++k) {
            if (st.cyclic[i][k].empty()) broken("empty phase set");
            bool anchor_in_phase = false;
            for (int s : st.cyclic[i][k]) {
                touch(s);
                st.cls_of[static_cast<std::size_t>(s)] = static_cast<int>(i);
                st.phase_of[static_cast<std::size_t>(s)] = static_cast<int>(k);
                anchor_in_phase |= s == st.anchors[i][k];
            }
            if (!anchor_in_phase) broken("anchor outside its phase set");
            class_size += st.cyclic[i][k].size();
        }
        if (class_size != st.classes[i].size())
            broken("cyclic sets of class " + std::to_string(i) + " do not cover the class");
        for (int s : st.classes[i])
            if (s < 0 || s >= st.n || st.cls_of[static_cast<std::size_t>(s)] != static_cast<int>(i))
                broken("class member missing from the cyclic partition");
    }
    for (int s : st.transient) touch(s);
    for (int s = 0; s < st.n; ++s)
        if (seen[static_cast<std::size_t>(s)] != 1)
            broken("state " + std::to_string(s) + " is not covered exactly once");
    return st;
}

json weights_to_json(const PhaseWeights& weights) {
    const int n = weights.states();
    const int cols = weights.columns();
    json rows = json::array();
    for (int s = 0; s < n; ++s) {
        json row = json::array();
        for (int c = 0; c < cols; ++c) row.push_back(weights.at(s, c));
        rows.push_back(std::move(row));
    }
    json j{{"structure", structure_to_json(weights.structure)},
           {"w", std::move(rows)},
           {"kind", weights.kind == PhaseWeights::Kind::exact ? "exact" : "estimated"}};
    if (weights.kind == PhaseWeights::Kind::estimated) {
        j["episodes"] = weights.episodes;
        j["seed"] = weights.seed;
    }
    return j;
}

PhaseWeights weights_from_json(const json& j) {
    PhaseWeights weights;
    weights.structure = structure_from_json(j.at("structure"));
    const int cols = weights.structure.peripheral_dim();
    weights.w.reserve(static_cast<std::size_t>(weights.structure.n) * cols);
    for (const auto& row : j.at("w"))
        for (const auto& value : row) weights.w.push_back(value.get<double>());
    if (weights.w.size() != static_cast<std::size_t>(weights.structure.n) * cols)
        throw std::runtime_error("weights file has wrong matrix shape");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "exact") {
        weights.kind = PhaseWeights::Kind::exact;
    } else if (kind == "estimated") {
        weights.kind = PhaseWeights::Kind::estimated;
        weights.episodes = j.value("episodes", 0);
        weights.seed = j.value("seed", static_cast<std::uint64_t>(0));
    } else {
        throw std::runtime_error("unknown weights kind: " + kind);
    }
    return weights;
}

json solution_to_json(const std::vector<double>& v, const ResidualEstimate& residual) {
    return json{{"v_T", v}, {"theta", residual.theta}, {"g_hat", residual.g_hat}};
}

json residual_to_json(const ResidualEstimate& residual, const std::vector<double>& gain_profile) {
    return json{{"theta", residual.theta},
                {"g_hat", residual.g_hat},
                {"gain_profile", gain_profile},
                {"samples_per_anchor", residual.samples_per_anchor}};
}

json oracle_to_json(const ExactSolution& sol, const QuotientDiagnostics& diag) {
    return json{{"v_star", sol.v_star},   {"g_star", sol.g_star}, {"theta_star", sol.theta_star},
                {"gain", sol.gain},       {"rho_q", diag.rho_q},  {"gamma", diag.gamma},
                {"h_abs", diag.h_abs},    {"quotient_dim", diag.dim}};
}

void write_trace_csv(const SolveTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "iteration,v_sup,err\n";
    char buffer[64];
    for (const auto& pt : trace.points) {
        std::snprintf(buffer, sizeof(buffer), "%.17g", pt.v_sup);
        out << pt.iteration << ',' << buffer << ',';
        if (pt.err) {
            std::snprintf(buffer, sizeof(buffer), "%.17g", *pt.err);
            out << buffer;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace qpoisson
