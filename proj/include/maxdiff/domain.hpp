#pragma once
// Core vocabulary shared by the design, estimator, simulator and service
// layers: items, designs, choice observations, datasets and share reports.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace maxdiff {

struct Item {
    std::string id;
    std::string label;
    std::string description;

    bool operator==(const Item&) const = default;
};

// Throws invalid-input on empty/duplicate ids or empty labels.
void validate_items(std::span<const Item> items);

// id -> position lookup over an item list.
class ItemIndex {
public:
    ItemIndex() = default;
    explicit ItemIndex(std::span<const Item> items);

    std::optional<std::size_t> find(std::string_view id) const;
    // Throws undefined-item when the id is unknown.
    std::size_t at(std::string_view id) const;
    std::size_t size() const { return index_.size(); }

private:
    std::unordered_map<std::string, std::size_t> index_;
};

struct DesignSpec {
    std::size_t n_items = 0;
    std::size_t items_per_screen = 3;
    std::size_t screens_per_respondent = 10;
    std::size_t n_versions = 1;
    std::uint64_t rng_seed = 0;
    // Hill-climb budget per version for co-occurrence balancing.
    std::size_t swap_attempts = 2000;

    bool operator==(const DesignSpec&) const = default;

    // Throws invalid-spec when K < 2, k < 2, k > K, T < 1 or V < 1.
    void validate() const;
    // Non-fatal findings: k outside 3..5, T*k < K.
    std::vector<std::string> warnings() const;
};

struct Screen {
    std::vector<std::size_t> item_indices;  // display order

    bool operator==(const Screen&) const = default;
};

struct DesignMetadata {
    std::vector<std::string> warnings;
    // Per-version sum of squared pair co-occurrence counts before and after
    // the swap phase (the hill-climb objective).
    std::vector<double> score_before_swaps;
    std::vector<double> score_after_swaps;

    bool operator==(const DesignMetadata&) const = default;
};

struct Design {
    DesignSpec spec;
    std::vector<std::vector<Screen>> versions;  // V x T
    DesignMetadata metadata;

    bool operator==(const Design&) const = default;
};

using Attributes = std::map<std::string, std::string>;

struct ChoiceObservation {
    std::string respondent_id;
    std::size_t version_index = 0;
    std::size_t screen_index = 0;
    std::vector<std::string> shown;
    std::string best;
    std::optional<std::string> worst;
    Attributes attributes;

    bool operator==(const ChoiceObservation&) const = default;
};

struct Dataset {
    std::vector<Item> items;
    std::vector<ChoiceObservation> observations;

    bool operator==(const Dataset&) const = default;

    std::size_t n_respondents() const;
    bool has_worst_picks() const;
};

struct CohortSpec {
    std::string name;
    Attributes required_attributes;

    // Exact match on every required key.
    bool matches(const Attributes& attributes) const;
};

// One problem found by validate_dataset. screen_index is absent for
// item-list problems.
struct Violation {
    std::string respondent_id;
    std::optional<std::size_t> screen_index;
    std::string message;

    std::string to_string() const;
};

// Share of a uniform chooser over K items, in percent.
double chance_cutoff(std::size_t n_items);

// Lists every violated invariant; empty means valid. When a design is given,
// version/screen indices are range-checked and the shown ids must match the
// design screen.
std::vector<Violation> validate_dataset(const Dataset& dataset,
                                        const Design* design = nullptr);

// Decisions recorded per respondent: one per best pick, one per worst pick.
std::map<std::string, std::size_t> decision_counts(const Dataset& dataset);

// Observations whose attributes satisfy the cohort.
Dataset filter_cohort(const Dataset& dataset, const CohortSpec& cohort);

struct ShareRow {
    std::string id;
    std::string label;
    double share = 0.0;  // percent
    std::optional<double> ci_low;
    std::optional<double> ci_high;
    int rank = 0;
    bool above_chance = false;
    // Separate CI-based flag: ci_low >= chance_cutoff. Set only with CIs.
    std::optional<bool> ci_above_chance;

    bool operator==(const ShareRow&) const = default;
};

struct ShareReport {
    std::vector<ShareRow> rows;  // item order
    double chance_cutoff = 0.0;
    std::size_t n_respondents = 0;
    std::size_t n_observations = 0;

    bool operator==(const ShareReport&) const = default;

    // Row indices sorted by rank.
    std::vector<std::size_t> order_by_rank() const;
    double total_share() const;
};

// Builds rows with ranks (descending share, ties by ascending item id) and
// the point-estimate chance flag.
ShareReport make_share_report(std::span<const Item> items,
                              std::span<const double> shares,
                              std::size_t n_respondents,
                              std::size_t n_observations);

// Attaches interval bounds. Bounds are widened to contain the point estimate.
void attach_intervals(ShareReport& report, std::span<const double> lows,
                      std::span<const double> highs);

// 1-based ranks for shares using the report tie-break rule.
std::vector<int> rank_shares(std::span<const double> shares,
                             std::span<const Item> items);

}  // namespace maxdiff
