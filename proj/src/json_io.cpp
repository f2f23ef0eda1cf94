#include "maxdiff/json_io.hpp"

#include "maxdiff/error.hpp"
#include "maxdiff/version.hpp"

namespace maxdiff::json {

namespace {

template <class T>
T field(const Json& j, const char* key) {
    if (!j.contains(key))
        throw Error(ErrorKind::invalid_input,
                    std::string("missing JSON field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::invalid_input,
                    std::string("bad JSON field '") + key + "': " + e.what());
    }
}

template <class T>
std::optional<T> optional_field(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return field<T>(j, key);
}

Json optional_value(const std::optional<double>& v) {
    return v ? Json(*v) : Json(nullptr);
}

}  // namespace

Json run_metadata(std::uint64_t seed) {
    Json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["seed"] = seed;
    return j;
}

Json parse(std::string_view text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::invalid_input, std::string("malformed JSON: ") + e.what());
    }
}

Json to_json(const DesignSpec& spec) {
    Json j;
    j["n_items"] = spec.n_items;
    j["items_per_screen"] = spec.items_per_screen;
    j["screens_per_respondent"] = spec.screens_per_respondent;
    j["n_versions"] = spec.n_versions;
    j["rng_seed"] = spec.rng_seed;
    j["swap_attempts"] = spec.swap_attempts;
    return j;
}

DesignSpec design_spec_from_json(const Json& j) {
    DesignSpec spec;
    spec.n_items = field<std::size_t>(j, "n_items");
    spec.items_per_screen = field<std::size_t>(j, "items_per_screen");
    spec.screens_per_respondent = field<std::size_t>(j, "screens_per_respondent");
    spec.n_versions = field<std::size_t>(j, "n_versions");
    spec.rng_seed = field<std::uint64_t>(j, "rng_seed");
    spec.swap_attempts = optional_field<std::size_t>(j, "swap_attempts").value_or(2000);
    return spec;
}

Json to_json(const Design& design, std::span<const Item> items) {
    Json j;
    j["spec"] = to_json(design.spec);
    Json versions = Json::array();
    for (const auto& version : design.versions) {
        Json screens = Json::array();
        for (const auto& screen : version) {
            Json ids = Json::array();
            for (auto idx : screen.item_indices) ids.push_back(items[idx].id);
            screens.push_back(std::move(ids));
        }
        versions.push_back(std::move(screens));
    }
    j["versions"] = std::move(versions);
    Json meta;
    meta["warnings"] = design.metadata.warnings;
    meta["score_before_swaps"] = design.metadata.score_before_swaps;
    meta["score_after_swaps"] = design.metadata.score_after_swaps;
    j["metadata"] = std::move(meta);
    return j;
}

Design design_from_json(const Json& j, std::span<const Item> items) {
    Design design;
    design.spec = design_spec_from_json(field<Json>(j, "spec"));
    if (design.spec.n_items != items.size())
        throw Error(ErrorKind::invalid_input,
                    "design n_items (" + std::to_string(design.spec.n_items) +
                        ") does not match the item list (" +
                        std::to_string(items.size()) + ")");
    const ItemIndex index(items);
    for (const auto& version : field<Json>(j, "versions")) {
        std::vector<Screen> screens;
        for (const auto& ids : version) {
            Screen screen;
            for (const auto& id : ids)
                screen.item_indices.push_back(index.at(id.get<std::string>()));
            screens.push_back(std::move(screen));
        }
        design.versions.push_back(std::move(screens));
    }
    if (j.contains("metadata")) {
        const auto& meta = j.at("metadata");
        design.metadata.warnings =
            optional_field<std::vector<std::string>>(meta, "warnings").value_or(std::vector<std::string>{});
        design.metadata.score_before_swaps =
            optional_field<std::vector<double>>(meta, "score_before_swaps").value_or(std::vector<double>{});
        design.metadata.score_after_swaps =
            optional_field<std::vector<double>>(meta, "score_after_swaps").value_or(std::vector<double>{});
    }
    return design;
}

Json to_json(const DesignDiagnostics& diagnostics, std::span<const Item> items) {
    Json j;
    Json ids = Json::array();
    for (const auto& item : items) ids.push_back(item.id);
    j["item_ids"] = std::move(ids);
    j["frequency"] = diagnostics.frequency;
    j["cooccurrence"] = diagnostics.cooccurrence;
    j["positions"] = diagnostics.positions;
    j["violations"] = diagnostics.violations;
    j["balance_score"] = diagnostics.balance_score;
    return j;
}

Json to_json(const ShareReport& report) {
    Json rows = Json::array();
    for (const auto& row : report.rows) {
        Json r;
        r["id"] = row.id;
        r["label"] = row.label;
        r["share"] = row.share;
        if (row.ci_low) r["ci_low"] = *row.ci_low;
        if (row.ci_high) r["ci_high"] = *row.ci_high;
        r["rank"] = row.rank;
        r["above_chance"] = row.above_chance;
        if (row.ci_above_chance) r["ci_above_chance"] = *row.ci_above_chance;
        rows.push_back(std::move(r));
    }
    return rows;
}

Json to_json(const FitResult& result) {
    Json j;
    Json utilities = Json::object();
    for (std::size_t i = 0; i < result.shares.rows.size(); ++i)
        utilities[result.shares.rows[i].id] = result.utilities.values.at(i);
    j["utilities"] = std::move(utilities);
    j["shares"] = to_json(result.shares);
    j["log_likelihood"] = result.log_likelihood;
    j["objective"] = result.objective;
    j["gradient_norm"] = result.gradient_norm;
    j["converged"] = result.converged;
    j["iterations"] = result.iterations;
    j["lambda"] = result.lambda;
    j["worst_model"] = result.worst_model;
    j["n_respondents"] = result.n_respondents;
    j["n_observations"] = result.n_observations;
    j["chance_cutoff"] = result.shares.chance_cutoff;
    return j;
}

FitResult fit_result_from_json(const Json& j) {
    FitResult result;
    const auto utilities = field<Json>(j, "utilities");
    for (const auto& r : field<Json>(j, "shares")) {
        ShareRow row;
        row.id = field<std::string>(r, "id");
        row.label = optional_field<std::string>(r, "label").value_or("");
        row.share = field<double>(r, "share");
        row.ci_low = optional_field<double>(r, "ci_low");
        row.ci_high = optional_field<double>(r, "ci_high");
        row.rank = field<int>(r, "rank");
        row.above_chance = field<bool>(r, "above_chance");
        row.ci_above_chance = optional_field<bool>(r, "ci_above_chance");
        result.utilities.values.push_back(field<double>(utilities, row.id.c_str()));
        result.shares.rows.push_back(std::move(row));
    }
    result.log_likelihood = field<double>(j, "log_likelihood");
    result.objective = optional_field<double>(j, "objective").value_or(0.0);
    result.gradient_norm = optional_field<double>(j, "gradient_norm").value_or(0.0);
    result.converged = field<bool>(j, "converged");
    result.iterations = field<std::size_t>(j, "iterations");
    result.lambda = field<double>(j, "lambda");
    result.worst_model = optional_field<bool>(j, "worst_model").value_or(false);
    result.n_respondents = field<std::size_t>(j, "n_respondents");
    result.n_observations = field<std::size_t>(j, "n_observations");
    result.shares.chance_cutoff = field<double>(j, "chance_cutoff");
    result.shares.n_respondents = result.n_respondents;
    result.shares.n_observations = result.n_observations;
    return result;
}

Json to_json(const CohortAnalysis& analysis) {
    Json j;
    j["pooled"] = to_json(analysis.pooled);
    Json cohorts = Json::array();
    for (const auto& cohort : analysis.cohorts) {
        Json c;
        c["name"] = cohort.name;
        c["fit"] = to_json(cohort.fit);
        Json comparison = Json::array();
        for (const auto& item : cohort.comparison) {
            Json row;
            row["id"] = item.id;
            row["share_delta"] = item.share_delta;
            row["rank_shift"] = item.rank_shift;
            comparison.push_back(std::move(row));
        }
        c["comparison"] = std::move(comparison);
        cohorts.push_back(std::move(c));
    }
    j["cohorts"] = std::move(cohorts);
    return j;
}

Json to_json(const PowerTable& table) {
    Json j;
    j["metadata"] = run_metadata(table.seed);
    j["mode"] = std::string(to_string(table.mode));
    j["top_set_size"] = table.top_set_size;
    Json rows = Json::array();
    for (const auto& row : table.rows) {
        Json r;
        r["n_respondents"] = row.n_respondents;
        r["replications"] = row.replications;
        r["mean_abs_share_error"] = row.mean_abs_share_error;
        r["rank_correlation"] = row.rank_correlation;
        r["top_set_recovery"] = optional_value(row.top_set_recovery);
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    return j;
}

PowerTable power_table_from_json(const Json& j) {
    PowerTable table;
    table.seed = field<std::uint64_t>(field<Json>(j, "metadata"), "seed");
    table.mode = parse_response_mode(field<std::string>(j, "mode"));
    table.top_set_size = field<std::size_t>(j, "top_set_size");
    for (const auto& r : field<Json>(j, "rows")) {
        PowerRow row;
        row.n_respondents = field<std::size_t>(r, "n_respondents");
        row.replications = field<std::size_t>(r, "replications");
        row.mean_abs_share_error = field<double>(r, "mean_abs_share_error");
        row.rank_correlation = field<double>(r, "rank_correlation");
        row.top_set_recovery = optional_field<double>(r, "top_set_recovery");
        table.rows.push_back(row);
    }
    return table;
}

Json to_json(const MethodComparison& comparison) {
    Json j;
    j["metadata"] = run_metadata(comparison.seed);
    j["n_respondents"] = comparison.n_respondents;
    j["replications"] = comparison.replications;
    Json rows = Json::array();
    for (const auto& row : comparison.rows) {
        Json r;
        r["mode"] = std::string(to_string(row.mode));
        r["mean_abs_share_error"] = row.mean_abs_share_error;
        r["mean_share_se"] = row.mean_share_se;
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    return j;
}

MethodComparison method_comparison_from_json(const Json& j) {
    MethodComparison comparison;
    comparison.seed = field<std::uint64_t>(field<Json>(j, "metadata"), "seed");
    comparison.n_respondents = field<std::size_t>(j, "n_respondents");
    comparison.replications = field<std::size_t>(j, "replications");
    for (const auto& r : field<Json>(j, "rows")) {
        MethodRow row;
        row.mode = parse_response_mode(field<std::string>(r, "mode"));
        row.mean_abs_share_error = field<double>(r, "mean_abs_share_error");
        row.mean_share_se = field<double>(r, "mean_share_se");
        comparison.rows.push_back(row);
    }
    return comparison;
}

Json to_json(const Item& item) {
    Json j;
    j["id"] = item.id;
    j["label"] = item.label;
    j["description"] = item.description;
    return j;
}

Json to_json(const ChoiceObservation& obs) {
    Json j;
    j["respondent_id"] = obs.respondent_id;
    j["version"] = obs.version_index;
    j["screen"] = obs.screen_index;
    j["shown"] = obs.shown;
    j["best"] = obs.best;
    j["worst"] = obs.worst ? Json(*obs.worst) : Json(nullptr);
    Json attributes = Json::object();
    for (const auto& [k, v] : obs.attributes) attributes[k] = v;
    j["attributes"] = std::move(attributes);
    return j;
}

ChoiceObservation observation_from_json(const Json& j) {
    ChoiceObservation obs;
    obs.respondent_id = field<std::string>(j, "respondent_id");
    obs.version_index = field<std::size_t>(j, "version");
    obs.screen_index = field<std::size_t>(j, "screen");
    obs.shown = field<std::vector<std::string>>(j, "shown");
    obs.best = field<std::string>(j, "best");
    obs.worst = optional_field<std::string>(j, "worst");
    if (j.contains("attributes"))
        for (const auto& [k, v] : j.at("attributes").items())
            obs.attributes[k] = v.get<std::string>();
    return obs;
}

}  // namespace maxdiff::json
