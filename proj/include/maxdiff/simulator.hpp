#pragma once
// Synthetic respondents and choice data, sample-size power analysis and
// response-mode efficiency comparison.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maxdiff/domain.hpp"
#include "maxdiff/estimator.hpp"

namespace maxdiff {

enum class ResponseMode { best_only, best_worst, top_choice };

std::string_view to_string(ResponseMode mode);
// Throws invalid-input for unknown names.
ResponseMode parse_response_mode(std::string_view name);

struct PopulationSpec {
    PopulationSpec() = default;
    // Centers mean_utilities to sum zero.
    PopulationSpec(std::vector<double> mean_utilities, double heterogeneity_sd,
                   std::size_t n_respondents,
                   ResponseMode response_mode = ResponseMode::best_only,
                   std::uint64_t rng_seed = 0);

    std::vector<double> mean_utilities;
    double heterogeneity_sd = 0.0;
    std::size_t n_respondents = 1;
    ResponseMode response_mode = ResponseMode::best_only;
    std::uint64_t rng_seed = 0;

    void validate() const;
    // Percent shares implied by mean_utilities.
    std::vector<double> true_shares() const;
};

// Evenly spaced utilities from -spread/2 to +spread/2, ascending by index.
std::vector<double> linear_utilities(std::size_t n_items, double spread);

// Items "item01".."itemNN" so that id order equals index order.
std::vector<Item> synthetic_items(std::size_t n_items);

// Respondent r: mean + N(0, sd) per item, re-centered; draws only from
// derive_seed(rng_seed, {r}).
std::vector<UtilityVector> draw_population(const PopulationSpec& population);

struct SimulationOptions {
    ResponseMode mode = ResponseMode::best_only;
    std::uint64_t seed = 0;
    std::string id_prefix = "r";
    std::size_t id_offset = 0;  // first respondent number
    Attributes attributes;      // tagged on every observation
};

// best_only / best_worst require a design (versions assigned round-robin by
// respondent index); top_choice ignores it and asks one all-items question.
Dataset simulate_dataset(std::span<const Item> items,
                         std::span<const UtilityVector> population,
                         const Design* design, const SimulationOptions& options);

// Spearman correlation with average ranks for ties; 0 when either side is
// constant.
double spearman_correlation(std::span<const double> a, std::span<const double> b);

struct PowerRequest {
    PopulationSpec population;  // n_respondents is replaced by each grid value
    DesignSpec design;
    std::vector<std::size_t> n_grid;
    std::size_t replications = 50;
    std::uint64_t seed = 0;
    std::size_t top_set_size = 4;
    FitOptions fit;
};

struct PowerRow {
    std::size_t n_respondents = 0;
    std::size_t replications = 0;
    double mean_abs_share_error = 0.0;  // percentage points
    double rank_correlation = 0.0;
    // nullopt when the true top set is not unique (tied at the boundary).
    std::optional<double> top_set_recovery;

    bool operator==(const PowerRow&) const = default;
};

struct PowerTable {
    std::vector<PowerRow> rows;  // ascending n_respondents
    std::uint64_t seed = 0;
    std::size_t top_set_size = 4;
    ResponseMode mode = ResponseMode::best_only;

    bool operator==(const PowerTable&) const = default;
};

// Replicate r at grid value N draws only from derive_seed(seed, {r, N}).
PowerTable power_analysis(const PowerRequest& request);

struct CompareRequest {
    PopulationSpec population;  // n_respondents is the fixed N
    DesignSpec design;
    std::size_t replications = 50;
    std::uint64_t seed = 0;
    FitOptions fit;
};

struct MethodRow {
    ResponseMode mode = ResponseMode::best_only;
    double mean_abs_share_error = 0.0;
    double mean_share_se = 0.0;  // across-replicate SD of shares, averaged over items

    bool operator==(const MethodRow&) const = default;
};

struct MethodComparison {
    std::vector<MethodRow> rows;  // best_only, best_worst, top_choice
    std::size_t n_respondents = 0;
    std::size_t replications = 0;
    std::uint64_t seed = 0;

    bool operator==(const MethodComparison&) const = default;
    const MethodRow& row(ResponseMode mode) const;
};

// Each replicate draws one population and replays it under every mode.
MethodComparison compare_methods(const CompareRequest& request);

}  // namespace maxdiff
