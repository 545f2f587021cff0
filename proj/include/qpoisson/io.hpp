#pragma once

#include <string>

#include <json.hpp>

#include "qpoisson/bench.hpp"
#include "qpoisson/gauge.hpp"
#include "qpoisson/mrp.hpp"
#include "qpoisson/oracle.hpp"
#include "qpoisson/solver.hpp"
#include "qpoisson/structure.hpp"

namespace qpoisson {

/// Chain files are JSON objects {"n": int, "P": [[...]], "r": [...], "R": real};
/// loading validates at tolerance 1e-9 and throws ValidationError on failure.
Mrp load_chain(const std::string& path);
void save_chain(const Mrp& mrp, const std::string& path);
nlohmann::json chain_to_json(const Mrp& mrp);
Mrp chain_from_json(const nlohmann::json& j);

nlohmann::json structure_to_json(const ChainStructure& st);
ChainStructure structure_from_json(const nlohmann::json& j);

/// Weights files embed their structure so later stages need only the chain
/// file and the weights file.
nlohmann::json weights_to_json(const PhaseWeights& weights);
PhaseWeights weights_from_json(const nlohmann::json& j);

nlohmann::json solution_to_json(const std::vector<double>& v, const ResidualEstimate& residual);
nlohmann::json residual_to_json(const ResidualEstimate& residual,
                                const std::vector<double>& gain_profile);
nlohmann::json oracle_to_json(const ExactSolution& sol, const QuotientDiagnostics& diag);

void write_trace_csv(const SolveTrace& trace, const std::string& path);

nlohmann::json load_json(const std::string& path);
void save_json(const nlohmann::json& j, const std::string& path);

}  // namespace qpoisson
