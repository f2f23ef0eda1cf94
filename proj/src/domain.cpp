#include "maxdiff/domain.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "maxdiff/error.hpp"

namespace maxdiff {

void validate_items(std::span<const Item> items) {
    std::unordered_set<std::string> seen;
    for (const auto& item : items) {
        if (item.id.empty())
            throw Error(ErrorKind::invalid_input, "item with empty id");
        if (item.label.empty())
            throw Error(ErrorKind::invalid_input,
                        "item '" + item.id + "' has an empty label");
        if (!seen.insert(item.id).second)
            throw Error(ErrorKind::invalid_input,
                        "duplicate item id '" + item.id + "'");
    }
}

ItemIndex::ItemIndex(std::span<const Item> items) {
    index_.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) index_.emplace(items[i].id, i);
}

std::optional<std::size_t> ItemIndex::find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t ItemIndex::at(std::string_view id) const {
    auto found = find(id);
    if (!found)
        throw Error(ErrorKind::undefined_item,
                    "unknown item id '" + std::string(id) + "'");
    return *found;
}

void DesignSpec::validate() const {
    auto fail = [](const std::string& msg) {
        throw Error(ErrorKind::invalid_spec, msg);
    };
    if (n_items < 2) fail("n_items must be >= 2");
    if (items_per_screen < 2) fail("items_per_screen must be >= 2");
    if (items_per_screen > n_items)
        fail("items_per_screen (" + std::to_string(items_per_screen) +
             ") exceeds n_items (" + std::to_string(n_items) + ")");
    if (screens_per_respondent < 1) fail("screens_per_respondent must be >= 1");
    if (n_versions < 1) fail("n_versions must be >= 1");
}

std::vector<std::string> DesignSpec::warnings() const {
    std::vector<std::string> out;
    if (items_per_screen < 3 || items_per_screen > 5)
        out.push_back("nonstandard items_per_screen " +
                      std::to_string(items_per_screen) + " (typical range 3-5)");
    if (items_per_screen * screens_per_respondent < n_items)
        out.push_back("screens_per_respondent * items_per_screen < n_items; "
                      "not every item is shown in each version");
    return out;
}

std::size_t Dataset::n_respondents() const {
    std::set<std::string_view> ids;
    for (const auto& obs : observations) ids.insert(obs.respondent_id);
    return ids.size();
}

bool Dataset::has_worst_picks() const {
    return std::any_of(observations.begin(), observations.end(),
                       [](const auto& obs) { return obs.worst.has_value(); });
}

bool CohortSpec::matches(const Attributes& attributes) const {
    for (const auto& [key, value] : required_attributes) {
        auto it = attributes.find(key);
        if (it == attributes.end() || it->second != value) return false;
    }
    return true;
}

std::string Violation::to_string() const {
    std::ostringstream os;
    if (!respondent_id.empty()) os << "respondent " << respondent_id;
    if (screen_index) os << " screen " << *screen_index;
    if (!respondent_id.empty() || screen_index) os << ": ";
    os << message;
    return os.str();
}

double chance_cutoff(std::size_t n_items) {
    if (n_items < 2)
        throw Error(ErrorKind::invalid_spec,
                    "chance cutoff needs at least 2 items");
    return 100.0 / static_cast<double>(n_items);
}

std::vector<Violation> validate_dataset(const Dataset& dataset,
                                        const Design* design) {
    std::vector<Violation> out;
    std::unordered_set<std::string> seen_items;
    for (const auto& item : dataset.items) {
        if (item.id.empty()) out.push_back({"", std::nullopt, "item with empty id"});
        else if (!seen_items.insert(item.id).second)
            out.push_back({"", std::nullopt, "duplicate item id '" + item.id + "'"});
        if (item.label.empty())
            out.push_back({"", std::nullopt, "item '" + item.id + "' has an empty label"});
    }
    const ItemIndex index(dataset.items);

    for (const auto& obs : dataset.observations) {
        auto report = [&](std::string message) {
            out.push_back({obs.respondent_id, obs.screen_index, std::move(message)});
        };
        if (obs.respondent_id.empty()) report("empty respondent_id");
        if (obs.shown.size() < 2) report("fewer than 2 items shown");

        std::unordered_set<std::string_view> shown;
        bool duplicate = false;
        for (const auto& id : obs.shown) {
            if (!index.find(id)) report("unknown item id '" + id + "' in shown");
            if (!shown.insert(id).second) duplicate = true;
        }
        if (duplicate) report("duplicate ids in shown");

        if (!index.find(obs.best))
            report("unknown best item id '" + obs.best + "'");
        else if (!shown.contains(obs.best))
            report("best '" + obs.best + "' not in shown");

        if (obs.worst) {
            if (*obs.worst == obs.best)
                report("worst equals best '" + obs.best + "'");
            else if (!index.find(*obs.worst))
                report("unknown worst item id '" + *obs.worst + "'");
            else if (!shown.contains(*obs.worst))
                report("worst '" + *obs.worst + "' not in shown");
        }

        if (design) {
            if (obs.version_index >= design->versions.size()) {
                report("version " + std::to_string(obs.version_index) +
                       " out of range");
                continue;
            }
            const auto& version = design->versions[obs.version_index];
            if (obs.screen_index >= version.size()) {
                report("screen index out of range");
                continue;
            }
            const auto& screen = version[obs.screen_index].item_indices;
            bool same = screen.size() == obs.shown.size();
            for (std::size_t i = 0; same && i < screen.size(); ++i) {
                auto idx = index.find(obs.shown[i]);
                same = idx && *idx == screen[i];
            }
            if (!same) report("shown items do not match the design screen");
        }
    }
    return out;
}

std::map<std::string, std::size_t> decision_counts(const Dataset& dataset) {
    std::map<std::string, std::size_t> counts;
    for (const auto& obs : dataset.observations)
        counts[obs.respondent_id] += obs.worst ? 2 : 1;
    return counts;
}

Dataset filter_cohort(const Dataset& dataset, const CohortSpec& cohort) {
    Dataset out{dataset.items, {}};
    for (const auto& obs : dataset.observations)
        if (cohort.matches(obs.attributes)) out.observations.push_back(obs);
    return out;
}

std::vector<std::size_t> ShareReport::order_by_rank() const {
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rows[a].rank < rows[b].rank;
    });
    return order;
}

double ShareReport::total_share() const {
    double total = 0.0;
    for (const auto& row : rows) total += row.share;
    return total;
}

std::vector<int> rank_shares(std::span<const double> shares,
                             std::span<const Item> items) {
    std::vector<std::size_t> order(shares.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (shares[a] != shares[b]) return shares[a] > shares[b];
        return items[a].id < items[b].id;
    });
    std::vector<int> ranks(shares.size());
    for (std::size_t r = 0; r < order.size(); ++r)
        ranks[order[r]] = static_cast<int>(r + 1);
    return ranks;
}

ShareReport make_share_report(std::span<const Item> items,
                              std::span<const double> shares,
                              std::size_t n_respondents,
                              std::size_t n_observations) {
    if (items.size() != shares.size())
        throw Error(ErrorKind::invalid_input, "share vector length mismatch");
    ShareReport report;
    report.chance_cutoff = chance_cutoff(items.size());
    report.n_respondents = n_respondents;
    report.n_observations = n_observations;
    const auto ranks = rank_shares(shares, items);
    report.rows.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        ShareRow row;
        row.id = items[i].id;
        row.label = items[i].label;
        row.share = shares[i];
        row.rank = ranks[i];
        row.above_chance = shares[i] >= report.chance_cutoff;
        report.rows.push_back(std::move(row));
    }
    return report;
}

void attach_intervals(ShareReport& report, std::span<const double> lows,
                      std::span<const double> highs) {
    if (lows.size() != report.rows.size() || highs.size() != report.rows.size())
        throw Error(ErrorKind::invalid_input, "interval vector length mismatch");
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        auto& row = report.rows[i];
        row.ci_low = std::min(lows[i], row.share);
        row.ci_high = std::max(highs[i], row.share);
        row.ci_above_chance = *row.ci_low >= report.chance_cutoff;
    }
}

}  // namespace maxdiff
