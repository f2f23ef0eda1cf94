#pragma once
// JSON documents for designs, fit results, cohort analyses, power tables and
// method comparisons. Emission preserves insertion order so output bytes are
// stable for identical inputs.

#include <cstdint>
#include <span>

#include <json.hpp>

#include "maxdiff/design.hpp"
#include "maxdiff/domain.hpp"
#include "maxdiff/estimator.hpp"
#include "maxdiff/simulator.hpp"

namespace maxdiff::json {

using Json = nlohmann::ordered_json;

// {"tool": ..., "version": ..., "seed": ...}
Json run_metadata(std::uint64_t seed);

Json to_json(const DesignSpec& spec);
DesignSpec design_spec_from_json(const Json& j);

// Screens are written as item ids.
Json to_json(const Design& design, std::span<const Item> items);
Design design_from_json(const Json& j, std::span<const Item> items);

Json to_json(const DesignDiagnostics& diagnostics, std::span<const Item> items);

Json to_json(const ShareReport& report);
Json to_json(const FitResult& result);
FitResult fit_result_from_json(const Json& j);

Json to_json(const CohortAnalysis& analysis);

Json to_json(const PowerTable& table);
PowerTable power_table_from_json(const Json& j);

Json to_json(const MethodComparison& comparison);
MethodComparison method_comparison_from_json(const Json& j);

Json to_json(const Item& item);
Json to_json(const ChoiceObservation& obs);
ChoiceObservation observation_from_json(const Json& j);

// Parses text; throws invalid-input on malformed JSON.
Json parse(std::string_view text);

}  // namespace maxdiff::json
