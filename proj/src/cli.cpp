#include "maxdiff/cli.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>
#include <sstream>

#include "maxdiff/csv.hpp"
#include "maxdiff/design.hpp"
#include "maxdiff/error.hpp"
#include "maxdiff/estimator.hpp"
#include "maxdiff/http_server.hpp"
#include "maxdiff/json_io.hpp"
#include "maxdiff/report.hpp"
#include "maxdiff/rng.hpp"
#include "maxdiff/service.hpp"
#include "maxdiff/simulator.hpp"
#include "maxdiff/version.hpp"

namespace maxdiff::cli {

namespace {

using json::Json;

struct RunConfig {
    std::string items_path;
    std::string responses_path;
    std::string design_path;
    std::string fit_path;
    std::string utilities_path;
    std::string output_path;
    std::string format;

    std::size_t n_items = 18;
    std::size_t items_per_screen = 3;
    std::size_t screens = 10;
    std::size_t versions = 10;
    std::size_t swaps = 2000;
    std::uint64_t seed = kDefaultSeed;

    std::size_t n_respondents = 300;
    std::string mode = "best_only";
    double spread = 2.0;
    double sd = 0.0;
    std::vector<std::string> attributes;
    std::string id_prefix = "r";

    double lambda = 0.001;
    std::size_t bootstrap = 0;
    std::vector<std::string> cohorts;

    std::vector<std::size_t> n_grid;
    std::size_t replications = 50;
    std::size_t top_set = 4;

    std::string data_dir = "studies";
    std::string host = "127.0.0.1";
    int port = 8080;
};

std::string seed_comment(std::uint64_t seed) {
    return std::string("tool=") + kToolName + " version=" + kToolVersion +
           " seed=" + std::to_string(seed);
}

void emit(const RunConfig& cfg, std::ostream& out, const std::string& content) {
    if (cfg.output_path.empty() || cfg.output_path == "-") out << content;
    else csv::write_file(cfg.output_path, content);
}

std::vector<Item> load_items(const RunConfig& cfg) {
    if (cfg.items_path.empty()) return synthetic_items(cfg.n_items);
    return csv::parse_items(csv::read_file(cfg.items_path));
}

DesignSpec design_spec(const RunConfig& cfg, std::size_t n_items) {
    DesignSpec spec;
    spec.n_items = n_items;
    spec.items_per_screen = cfg.items_per_screen;
    spec.screens_per_respondent = cfg.screens;
    spec.n_versions = cfg.versions;
    spec.rng_seed = cfg.seed;
    spec.swap_attempts = cfg.swaps;
    return spec;
}

Design load_or_generate_design(const RunConfig& cfg, const std::vector<Item>& items) {
    if (!cfg.design_path.empty())
        return json::design_from_json(json::parse(csv::read_file(cfg.design_path)), items);
    return generate_design(design_spec(cfg, items.size()));
}

std::vector<double> mean_utilities(const RunConfig& cfg, const std::vector<Item>& items) {
    if (cfg.utilities_path.empty()) return linear_utilities(items.size(), cfg.spread);
    const auto rows = csv::parse(csv::read_file(cfg.utilities_path));
    if (rows.empty() || rows[0] != csv::Row{"id", "utility"})
        throw Error(ErrorKind::invalid_input, "utilities file must have header 'id,utility'");
    const ItemIndex index(items);
    std::vector<double> u(items.size(), 0.0);
    std::vector<char> seen(items.size(), 0);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() == 1 && rows[r][0].empty()) continue;
        if (rows[r].size() != 2)
            throw Error(ErrorKind::invalid_input, "utilities row " + std::to_string(r) +
                                                      ": expected 2 fields");
        const auto i = index.at(rows[r][0]);
        try {
            u[i] = std::stod(rows[r][1]);
        } catch (const std::logic_error&) {
            throw Error(ErrorKind::invalid_input, "bad utility '" + rows[r][1] + "'");
        }
        seen[i] = 1;
    }
    for (std::size_t i = 0; i < items.size(); ++i)
        if (!seen[i])
            throw Error(ErrorKind::invalid_input, "no utility for item '" + items[i].id + "'");
    return u;
}

Attributes parse_attribute_flags(const std::vector<std::string>& flags) {
    Attributes out;
    for (const auto& flag : flags) {
        const auto decoded = csv::decode_attributes(flag);
        out.insert(decoded.begin(), decoded.end());
    }
    return out;
}

FitOptions fit_options(const RunConfig& cfg) {
    FitOptions options;
    options.l2_penalty = cfg.lambda;
    return options;
}

// --- subcommands -----------------------------------------------------------

void cmd_design(const RunConfig& cfg, std::ostream& out) {
    const auto items = load_items(cfg);
    const auto design = generate_design(design_spec(cfg, items.size()));
    auto j = json::to_json(design, items);
    j["run"] = json::run_metadata(cfg.seed);
    emit(cfg, out, j.dump(2) + "\n");
}

void cmd_diagnose(const RunConfig& cfg, std::ostream& out) {
    const auto items = load_items(cfg);
    const auto design = load_or_generate_design(cfg, items);
    const auto diagnostics = design_diagnostics(design);
    Json j = json::to_json(diagnostics, items);
    if (!cfg.responses_path.empty()) {
        const auto dataset =
            csv::parse_responses(csv::read_file(cfg.responses_path), items);
        Json problems = Json::array();
        for (const auto& v : validate_dataset(dataset, &design))
            problems.push_back(v.to_string());
        j["dataset_violations"] = std::move(problems);
    }
    j["run"] = json::run_metadata(design.spec.rng_seed);
    if (cfg.format == "text") {
        std::ostringstream os;
        os << "#" << seed_comment(design.spec.rng_seed) << "\n";
        os << "balance_score: " << diagnostics.balance_score << "\n";
        os << "violations: " << diagnostics.violations.size() << "\n";
        for (const auto& v : diagnostics.violations) os << "  " << v << "\n";
        if (j.contains("dataset_violations")) {
            os << "dataset_violations: " << j["dataset_violations"].size() << "\n";
            for (const auto& v : j["dataset_violations"])
                os << "  " << v.get<std::string>() << "\n";
        }
        emit(cfg, out, os.str());
        return;
    }
    emit(cfg, out, j.dump(2) + "\n");
}

void cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    const auto items = load_items(cfg);
    const auto mode = parse_response_mode(cfg.mode);
    PopulationSpec pop(mean_utilities(cfg, items), cfg.sd, cfg.n_respondents, mode,
                       derive_seed(cfg.seed, {1}));
    const auto respondents = draw_population(pop);
    std::optional<Design> design;
    if (mode != ResponseMode::top_choice) design = load_or_generate_design(cfg, items);
    SimulationOptions sim{mode, derive_seed(cfg.seed, {2}), cfg.id_prefix, 0,
                          parse_attribute_flags(cfg.attributes)};
    const auto dataset =
        simulate_dataset(items, respondents, design ? &*design : nullptr, sim);
    const std::string comments[] = {seed_comment(cfg.seed)};
    emit(cfg, out, csv::format_responses(dataset, comments));
}

void cmd_fit(const RunConfig& cfg, std::ostream& out) {
    const auto items = load_items(cfg);
    const auto dataset = csv::parse_responses(csv::read_file(cfg.responses_path), items);
    const auto options = fit_options(cfg);

    std::vector<CohortSpec> cohorts;
    for (const auto& text : cfg.cohorts) cohorts.push_back(service::parse_cohort(text));
    CohortAnalysis analysis;
    if (cohorts.empty()) analysis.pooled = fit(dataset, options);
    else analysis = fit_by_cohort(dataset, cohorts, options);
    if (cfg.bootstrap > 0) {
        const auto intervals = bootstrap_shares(dataset, options, cfg.bootstrap, cfg.seed);
        attach_intervals(analysis.pooled.shares, intervals.low, intervals.high);
    }

    const auto format = parse_report_format(cfg.format.empty() ? "json" : cfg.format);
    if (format != ReportFormat::json) {
        std::string text = "#" + seed_comment(cfg.seed) + "\n";
        text += render_report(analysis.pooled, analysis.pooled.shares.chance_cutoff, format);
        for (const auto& cohort : analysis.cohorts) {
            text += "\n# cohort " + cohort.name + "\n";
            text += render_report(cohort.fit, cohort.fit.shares.chance_cutoff, format);
        }
        emit(cfg, out, text);
        return;
    }
    Json j = json::to_json(analysis.pooled);
    if (!analysis.cohorts.empty()) j["cohorts"] = json::to_json(analysis)["cohorts"];
    if (cfg.bootstrap > 0) j["bootstrap_replicates"] = cfg.bootstrap;
    j["metadata"] = json::run_metadata(cfg.seed);
    emit(cfg, out, j.dump(2) + "\n");
}

void cmd_report(const RunConfig& cfg, std::ostream& out) {
    if (cfg.fit_path.empty()) throw Error(ErrorKind::invalid_input, "report needs --fit");
    const auto j = json::parse(csv::read_file(cfg.fit_path));
    const auto result = json::fit_result_from_json(j);
    std::uint64_t seed = cfg.seed;
    if (j.contains("metadata") && j["metadata"].contains("seed"))
        seed = j["metadata"]["seed"].get<std::uint64_t>();
    const auto format = parse_report_format(cfg.format.empty() ? "text" : cfg.format);
    std::string text = render_report(result, result.shares.chance_cutoff, format);
    if (format != ReportFormat::json) text = "#" + seed_comment(seed) + "\n" + text;
    emit(cfg, out, text);
}

PopulationSpec population_template(const RunConfig& cfg) {
    const auto items = load_items(cfg);
    return PopulationSpec(mean_utilities(cfg, items), cfg.sd, cfg.n_respondents,
                          parse_response_mode(cfg.mode), cfg.seed);
}

std::string number(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

void cmd_power(const RunConfig& cfg, std::ostream& out) {
    PowerRequest request;
    request.population = population_template(cfg);
    request.design = design_spec(cfg, request.population.mean_utilities.size());
    request.n_grid = cfg.n_grid;
    request.replications = cfg.replications;
    request.seed = cfg.seed;
    request.top_set_size = cfg.top_set;
    request.fit = fit_options(cfg);
    const auto table = power_analysis(request);
    if (cfg.format == "json") {
        emit(cfg, out, json::to_json(table).dump(2) + "\n");
        return;
    }
    std::string text = "#" + seed_comment(cfg.seed) + " mode=" +
                       std::string(to_string(table.mode)) + "\n";
    text += "n_respondents,replications,mean_abs_share_error,rank_correlation,top_set_recovery\n";
    for (const auto& row : table.rows) {
        const std::string fields[] = {
            std::to_string(row.n_respondents), std::to_string(row.replications),
            number(row.mean_abs_share_error), number(row.rank_correlation),
            row.top_set_recovery ? number(*row.top_set_recovery) : "NA"};
        text += csv::format_row(fields);
    }
    emit(cfg, out, text);
}

void cmd_compare(const RunConfig& cfg, std::ostream& out) {
    CompareRequest request;
    request.population = population_template(cfg);
    request.design = design_spec(cfg, request.population.mean_utilities.size());
    request.replications = cfg.replications;
    request.seed = cfg.seed;
    request.fit = fit_options(cfg);
    const auto comparison = compare_methods(request);
    if (cfg.format == "json") {
        emit(cfg, out, json::to_json(comparison).dump(2) + "\n");
        return;
    }
    std::string text = "#" + seed_comment(cfg.seed) + " n_respondents=" +
                       std::to_string(comparison.n_respondents) +
                       " replications=" + std::to_string(comparison.replications) + "\n";
    text += "mode,mean_abs_share_error,mean_share_se\n";
    for (const auto& row : comparison.rows) {
        const std::string fields[] = {std::string(to_string(row.mode)),
                                      number(row.mean_abs_share_error),
                                      number(row.mean_share_se)};
        text += csv::format_row(fields);
    }
    emit(cfg, out, text);
}

void cmd_serve(const RunConfig& cfg, std::ostream& out) {
    service::SurveyService svc(cfg.data_dir);
    service::HttpServer server(svc);
    const int port = server.bind(cfg.host, cfg.port);
    out << "listening on http://" << cfg.host << ":" << port << std::endl;
    server.listen();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"MaxDiff / best-only feature prioritization toolkit", "maxdiff"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    auto add_items = [&](CLI::App* sub) {
        sub->add_option("--items", cfg.items_path, "Items CSV (id,label,description)");
        sub->add_option("-K,--n-items", cfg.n_items,
                        "Synthetic item count when --items is absent")
            ->check(CLI::Range(2, 100000));
    };
    auto add_design = [&](CLI::App* sub) {
        sub->add_option("-k,--k,--items-per-screen", cfg.items_per_screen, "Items per screen");
        sub->add_option("-T,--screens", cfg.screens, "Screens per respondent");
        sub->add_option("-V,--versions", cfg.versions, "Design versions");
        sub->add_option("--swaps", cfg.swaps, "Swap attempts per version");
    };
    auto add_seed = [&](CLI::App* sub) {
        sub->add_option("--seed", cfg.seed, "RNG seed (default 20250224)");
    };
    auto add_output = [&](CLI::App* sub) {
        sub->add_option("-o,--output", cfg.output_path, "Output file (default stdout)");
    };
    auto add_population = [&](CLI::App* sub) {
        sub->add_option("--utilities", cfg.utilities_path, "True utilities CSV (id,utility)");
        sub->add_option("--spread", cfg.spread,
                        "Span of linearly spaced true utilities when --utilities is absent");
        sub->add_option("--sd", cfg.sd, "Per-respondent utility noise SD");
        sub->add_option("--mode", cfg.mode, "best_only | best_worst | top_choice");
    };
    auto add_fit = [&](CLI::App* sub) {
        sub->add_option("--lambda", cfg.lambda, "Ridge penalty")->check(CLI::NonNegativeNumber);
    };

    auto* design = app.add_subcommand("design", "Generate a balanced design");
    add_items(design);
    add_design(design);
    add_seed(design);
    add_output(design);

    auto* diagnose = app.add_subcommand("diagnose", "Design diagnostics and dataset validation");
    add_items(diagnose);
    add_design(diagnose);
    add_seed(diagnose);
    add_output(diagnose);
    diagnose->add_option("--design", cfg.design_path, "Design JSON");
    diagnose->add_option("--responses", cfg.responses_path, "Responses CSV to validate");
    diagnose->add_option("--format", cfg.format, "json | text")
        ->check(CLI::IsMember({"json", "text"}));

    auto* simulate = app.add_subcommand("simulate", "Simulate respondents and choices");
    add_items(simulate);
    add_design(simulate);
    add_seed(simulate);
    add_output(simulate);
    add_population(simulate);
    simulate->add_option("--design", cfg.design_path, "Design JSON");
    simulate->add_option("-N,--respondents", cfg.n_respondents, "Respondents");
    simulate->add_option("--attr", cfg.attributes, "key=value tag for every respondent");
    simulate->add_option("--id-prefix", cfg.id_prefix, "Respondent id prefix");

    auto* fit_cmd = app.add_subcommand("fit", "Fit the choice model and report shares");
    add_items(fit_cmd);
    add_seed(fit_cmd);
    add_output(fit_cmd);
    add_fit(fit_cmd);
    fit_cmd->add_option("--responses", cfg.responses_path, "Responses CSV")->required();
    fit_cmd->add_option("--bootstrap", cfg.bootstrap, "Bootstrap replicates for 95% CIs");
    fit_cmd->add_option("--cohort", cfg.cohorts, "name:key=value;key2=value2");
    fit_cmd->add_option("--format", cfg.format, "json | csv | text")
        ->check(CLI::IsMember({"json", "csv", "text"}));

    auto* report = app.add_subcommand("report", "Render a fit result");
    add_output(report);
    report->add_option("--fit", cfg.fit_path, "Fit JSON")->required();
    report->add_option("--format", cfg.format, "text | csv | json")
        ->check(CLI::IsMember({"json", "csv", "text"}));

    auto* power = app.add_subcommand("power", "Simulation-based sample size analysis");
    add_items(power);
    add_design(power);
    add_seed(power);
    add_output(power);
    add_population(power);
    add_fit(power);
    power->add_option("--n-grid", cfg.n_grid, "Respondent counts, ascending")
        ->delimiter(',')
        ->required();
    power->add_option("--reps", cfg.replications, "Replications per grid point");
    power->add_option("--top", cfg.top_set, "Top-set size for recovery");
    power->add_option("--format", cfg.format, "csv | json")->check(CLI::IsMember({"json", "csv"}));

    auto* compare = app.add_subcommand("compare", "Compare response modes at fixed N");
    add_items(compare);
    add_design(compare);
    add_seed(compare);
    add_output(compare);
    add_population(compare);
    add_fit(compare);
    compare->add_option("-N,--respondents", cfg.n_respondents, "Respondents");
    compare->add_option("--reps", cfg.replications, "Replications");
    compare->add_option("--format", cfg.format, "csv | json")->check(CLI::IsMember({"json", "csv"}));

    auto* serve = app.add_subcommand("serve", "Field studies over HTTP");
    serve->add_option("--data-dir", cfg.data_dir, "Study storage directory");
    serve->add_option("--host", cfg.host, "Bind address");
    serve->add_option("--port", cfg.port, "Port (0 picks a free one)");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (*design) cmd_design(cfg, out);
        else if (*diagnose) cmd_diagnose(cfg, out);
        else if (*simulate) cmd_simulate(cfg, out);
        else if (*fit_cmd) cmd_fit(cfg, out);
        else if (*report) cmd_report(cfg, out);
        else if (*power) cmd_power(cfg, out);
        else if (*compare) cmd_compare(cfg, out);
        else if (*serve) cmd_serve(cfg, out);
    } catch (const Error& e) {
        Json j;
        j["error"] = to_string(e.kind());
        j["message"] = e.what();
        err << j.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        Json j;
        j["error"] = "internal";
        j["message"] = e.what();
        err << j.dump() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace maxdiff::cli
