#pragma once

// JSON views of results and ledgers (artifact files).

#include "json.hpp"

#include "mfnn/ledger.hpp"
#include "mfnn/result.hpp"

namespace mfnn {

nlohmann::json ledger_to_json(const analysis::CostLedger& l);
analysis::CostLedger ledger_from_json(const nlohmann::json& j);

nlohmann::json result_to_json(const pipeline::EstimatorResult& r);
pipeline::EstimatorResult result_from_json(const nlohmann::json& j);

/// FNV-1a 64 of the compact dump, as 16 hex digits.
std::string content_hash(const nlohmann::json& j);

}  // namespace mfnn
