#include "maxdiff/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "maxdiff/design.hpp"
#include "maxdiff/error.hpp"
#include "maxdiff/rng.hpp"

namespace maxdiff {

namespace {

std::string respondent_id(const SimulationOptions& options, std::size_t r) {
    std::ostringstream os;
    os << options.id_prefix << std::setw(5) << std::setfill('0')
       << (options.id_offset + r);
    return os.str();
}

// Index into `set` drawn with probability proportional to exp(sign * u).
std::size_t draw_choice(std::span<const double> u,
                        std::span<const std::size_t> set, double sign, Rng& rng,
                        std::vector<double>& weights) {
    double top = -std::numeric_limits<double>::infinity();
    for (auto j : set) top = std::max(top, sign * u[j]);
    weights.resize(set.size());
    double total = 0.0;
    for (std::size_t a = 0; a < set.size(); ++a) {
        weights[a] = std::exp(sign * u[set[a]] - top);
        total += weights[a];
    }
    double target = std::uniform_real_distribution<double>(0.0, total)(rng);
    for (std::size_t a = 0; a + 1 < set.size(); ++a) {
        if (target < weights[a]) return a;
        target -= weights[a];
    }
    return set.size() - 1;
}

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = rank;
        i = j + 1;
    }
    return ranks;
}

double mean_abs_error(std::span<const double> a, std::span<const double> b) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
    return total / static_cast<double>(a.size());
}

std::vector<std::size_t> top_set(std::span<const double> shares,
                                 std::span<const Item> items, std::size_t size) {
    const auto ranks = rank_shares(shares, items);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ranks.size(); ++i)
        if (static_cast<std::size_t>(ranks[i]) <= size) out.push_back(i);
    return out;
}

// The true top set is ambiguous when the last member ties the first outsider.
bool top_set_unique(std::span<const double> shares, std::size_t size) {
    if (size == 0 || size >= shares.size()) return true;
    std::vector<double> sorted(shares.begin(), shares.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    return sorted[size - 1] - sorted[size] > 1e-9;
}

std::vector<double> estimate_shares(const Dataset& dataset, ResponseMode mode,
                                    const FitOptions& options) {
    if (mode == ResponseMode::top_choice) return count_shares(dataset);
    const auto result = fit(dataset, options);
    std::vector<double> shares;
    for (const auto& row : result.shares.rows) shares.push_back(row.share);
    return shares;
}

void validate_common(const PopulationSpec& population, const DesignSpec& design,
                     std::size_t replications) {
    population.validate();
    design.validate();
    if (replications == 0)
        throw Error(ErrorKind::invalid_input, "replications must be >= 1");
    if (design.n_items != population.mean_utilities.size())
        throw Error(ErrorKind::invalid_input,
                    "design n_items does not match the utility vector length");
}

}  // namespace

std::string_view to_string(ResponseMode mode) {
    switch (mode) {
        case ResponseMode::best_only: return "best_only";
        case ResponseMode::best_worst: return "best_worst";
        case ResponseMode::top_choice: return "top_choice";
    }
    return "unknown";
}

ResponseMode parse_response_mode(std::string_view name) {
    if (name == "best_only") return ResponseMode::best_only;
    if (name == "best_worst") return ResponseMode::best_worst;
    if (name == "top_choice") return ResponseMode::top_choice;
    throw Error(ErrorKind::invalid_input,
                "unknown response mode '" + std::string(name) + "'");
}

PopulationSpec::PopulationSpec(std::vector<double> mean_utilities_,
                               double heterogeneity_sd_, std::size_t n_respondents_,
                               ResponseMode response_mode_, std::uint64_t rng_seed_)
    : mean_utilities(UtilityVector{std::move(mean_utilities_)}.centered().values),
      heterogeneity_sd(heterogeneity_sd_),
      n_respondents(n_respondents_),
      response_mode(response_mode_),
      rng_seed(rng_seed_) {}

void PopulationSpec::validate() const {
    if (mean_utilities.size() < 2)
        throw Error(ErrorKind::invalid_spec, "population needs at least 2 items");
    if (n_respondents < 1)
        throw Error(ErrorKind::invalid_spec, "population needs at least 1 respondent");
    if (!(heterogeneity_sd >= 0.0) || !std::isfinite(heterogeneity_sd))
        throw Error(ErrorKind::invalid_spec, "heterogeneity_sd must be >= 0");
    for (auto u : mean_utilities)
        if (!std::isfinite(u))
            throw Error(ErrorKind::invalid_spec, "mean utilities must be finite");
}

std::vector<double> PopulationSpec::true_shares() const {
    return shares_from_utilities(mean_utilities);
}

std::vector<double> linear_utilities(std::size_t n_items, double spread) {
    std::vector<double> u(n_items, 0.0);
    if (n_items < 2) return u;
    for (std::size_t i = 0; i < n_items; ++i)
        u[i] = -0.5 * spread +
               spread * static_cast<double>(i) / static_cast<double>(n_items - 1);
    return u;
}

std::vector<Item> synthetic_items(std::size_t n_items) {
    std::vector<Item> items;
    const int width = std::max<int>(2, static_cast<int>(std::to_string(n_items).size()));
    for (std::size_t i = 0; i < n_items; ++i) {
        std::ostringstream id;
        id << "item" << std::setw(width) << std::setfill('0') << (i + 1);
        items.push_back({id.str(), "Item " + std::to_string(i + 1), ""});
    }
    return items;
}

std::vector<UtilityVector> draw_population(const PopulationSpec& population) {
    population.validate();
    std::vector<UtilityVector> out(population.n_respondents,
                                   UtilityVector{population.mean_utilities});
    if (population.heterogeneity_sd == 0.0) return out;
    for (std::size_t r = 0; r < out.size(); ++r) {
        Rng rng(derive_seed(population.rng_seed, {r}));
        std::normal_distribution<double> noise(0.0, population.heterogeneity_sd);
        for (auto& u : out[r].values) u += noise(rng);
        out[r] = out[r].centered();
    }
    return out;
}

Dataset simulate_dataset(std::span<const Item> items,
                         std::span<const UtilityVector> population,
                         const Design* design, const SimulationOptions& options) {
    validate_items(items);
    const std::size_t K = items.size();
    for (const auto& u : population)
        if (u.size() != K)
            throw Error(ErrorKind::invalid_input,
                        "respondent utility length does not match the item count");
    const bool top_choice = options.mode == ResponseMode::top_choice;
    if (!top_choice) {
        if (!design)
            throw Error(ErrorKind::invalid_input,
                        std::string(to_string(options.mode)) + " mode requires a design");
        if (design->spec.n_items != K)
            throw Error(ErrorKind::invalid_input,
                        "design n_items does not match the item count");
    }

    Dataset dataset{{items.begin(), items.end()}, {}};
    std::vector<double> weights;
    std::vector<std::size_t> all(K);
    std::iota(all.begin(), all.end(), std::size_t{0});

    auto record = [&](const std::string& id, std::size_t version, std::size_t screen,
                      std::span<const std::size_t> shown, const UtilityVector& u,
                      Rng& rng) {
        ChoiceObservation obs;
        obs.respondent_id = id;
        obs.version_index = version;
        obs.screen_index = screen;
        for (auto j : shown) obs.shown.push_back(items[j].id);
        const auto best = draw_choice(u.values, shown, +1.0, rng, weights);
        obs.best = items[shown[best]].id;
        if (options.mode == ResponseMode::best_worst) {
            std::vector<std::size_t> rest;
            for (std::size_t a = 0; a < shown.size(); ++a)
                if (a != best) rest.push_back(shown[a]);
            const auto worst = draw_choice(u.values, rest, -1.0, rng, weights);
            obs.worst = items[rest[worst]].id;
        }
        obs.attributes = options.attributes;
        dataset.observations.push_back(std::move(obs));
    };

    for (std::size_t r = 0; r < population.size(); ++r) {
        Rng rng(derive_seed(options.seed, {r}));
        const auto id = respondent_id(options, r);
        if (top_choice) {
            auto order = all;
            std::shuffle(order.begin(), order.end(), rng);
            record(id, 0, 0, order, population[r], rng);
            continue;
        }
        const std::size_t version = r % design->versions.size();
        const auto& screens = design->versions[version];
        for (std::size_t t = 0; t < screens.size(); ++t)
            record(id, version, t, screens[t].item_indices, population[r], rng);
    }
    return dataset;
}

double spearman_correlation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) return 0.0;
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double mean = (n + 1.0) / 2.0;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - mean) * (rb[i] - mean);
        saa += (ra[i] - mean) * (ra[i] - mean);
        sbb += (rb[i] - mean) * (rb[i] - mean);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

PowerTable power_analysis(const PowerRequest& request) {
    validate_common(request.population, request.design, request.replications);
    if (request.n_grid.empty())
        throw Error(ErrorKind::invalid_input, "n_grid must not be empty");
    for (std::size_t g = 0; g < request.n_grid.size(); ++g) {
        if (request.n_grid[g] == 0)
            throw Error(ErrorKind::invalid_input, "n_grid values must be >= 1");
        if (g > 0 && request.n_grid[g] <= request.n_grid[g - 1])
            throw Error(ErrorKind::invalid_input, "n_grid must be strictly ascending");
    }

    const auto design = generate_design(request.design);
    const auto items = synthetic_items(request.design.n_items);
    const auto truth = request.population.true_shares();
    const bool unique_top = top_set_unique(truth, request.top_set_size);
    const auto true_top = top_set(truth, items, request.top_set_size);
    const auto mode = request.population.response_mode;

    struct Outcome {
        double error = 0.0;
        double correlation = 0.0;
        bool recovered = false;
    };
    const std::size_t R = request.replications;
    std::vector<Outcome> outcomes(request.n_grid.size() * R);
    const auto tasks = static_cast<long>(outcomes.size());
#pragma omp parallel for schedule(dynamic)
    for (long task = 0; task < tasks; ++task) {
        const std::size_t g = static_cast<std::size_t>(task) / R;
        const std::size_t r = static_cast<std::size_t>(task) % R;
        const std::size_t N = request.n_grid[g];
        const auto rep_seed = derive_seed(request.seed, {r, N});
        PopulationSpec pop = request.population;
        pop.n_respondents = N;
        pop.rng_seed = derive_seed(rep_seed, {1});
        const auto respondents = draw_population(pop);
        SimulationOptions sim{mode, derive_seed(rep_seed, {2}), "r", 0, {}};
        const auto dataset = simulate_dataset(items, respondents, &design, sim);
        const auto shares = estimate_shares(dataset, mode, request.fit);
        auto& out = outcomes[static_cast<std::size_t>(task)];
        out.error = mean_abs_error(shares, truth);
        out.correlation = spearman_correlation(shares, truth);
        out.recovered = top_set(shares, items, request.top_set_size) == true_top;
    }

    PowerTable table;
    table.seed = request.seed;
    table.top_set_size = request.top_set_size;
    table.mode = mode;
    for (std::size_t g = 0; g < request.n_grid.size(); ++g) {
        PowerRow row;
        row.n_respondents = request.n_grid[g];
        row.replications = R;
        double error = 0.0, correlation = 0.0, recovered = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
            const auto& o = outcomes[g * R + r];
            error += o.error;
            correlation += o.correlation;
            recovered += o.recovered ? 1.0 : 0.0;
        }
        row.mean_abs_share_error = error / static_cast<double>(R);
        row.rank_correlation = correlation / static_cast<double>(R);
        if (unique_top) row.top_set_recovery = recovered / static_cast<double>(R);
        table.rows.push_back(row);
    }
    return table;
}

const MethodRow& MethodComparison::row(ResponseMode mode) const {
    for (const auto& r : rows)
        if (r.mode == mode) return r;
    throw Error(ErrorKind::not_found,
                "no comparison row for mode " + std::string(to_string(mode)));
}

MethodComparison compare_methods(const CompareRequest& request) {
    validate_common(request.population, request.design, request.replications);
    const auto design = generate_design(request.design);
    const auto items = synthetic_items(request.design.n_items);
    const auto truth = request.population.true_shares();
    const std::size_t K = truth.size();
    constexpr ResponseMode modes[] = {ResponseMode::best_only,
                                      ResponseMode::best_worst,
                                      ResponseMode::top_choice};
    constexpr std::size_t M = std::size(modes);
    const std::size_t R = request.replications;

    // estimates[r][m] = share vector
    std::vector<std::vector<std::vector<double>>> estimates(
        R, std::vector<std::vector<double>>(M));
    const auto reps = static_cast<long>(R);
#pragma omp parallel for schedule(dynamic)
    for (long rep = 0; rep < reps; ++rep) {
        const auto r = static_cast<std::size_t>(rep);
        const auto rep_seed =
            derive_seed(request.seed, {r, request.population.n_respondents});
        PopulationSpec pop = request.population;
        pop.rng_seed = derive_seed(rep_seed, {1});
        const auto respondents = draw_population(pop);
        for (std::size_t m = 0; m < M; ++m) {
            SimulationOptions sim{modes[m], derive_seed(rep_seed, {2, m}), "r", 0, {}};
            const auto dataset = simulate_dataset(items, respondents, &design, sim);
            estimates[r][m] = estimate_shares(dataset, modes[m], request.fit);
        }
    }

    MethodComparison out;
    out.n_respondents = request.population.n_respondents;
    out.replications = R;
    out.seed = request.seed;
    for (std::size_t m = 0; m < M; ++m) {
        MethodRow row;
        row.mode = modes[m];
        double error = 0.0;
        for (std::size_t r = 0; r < R; ++r) error += mean_abs_error(estimates[r][m], truth);
        row.mean_abs_share_error = error / static_cast<double>(R);
        double se_total = 0.0;
        if (R > 1) {
            for (std::size_t i = 0; i < K; ++i) {
                double mean = 0.0;
                for (std::size_t r = 0; r < R; ++r) mean += estimates[r][m][i];
                mean /= static_cast<double>(R);
                double ss = 0.0;
                for (std::size_t r = 0; r < R; ++r) {
                    const double d = estimates[r][m][i] - mean;
                    ss += d * d;
                }
                se_total += std::sqrt(ss / static_cast<double>(R - 1));
            }
        }
        row.mean_share_se = se_total / static_cast<double>(K);
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace maxdiff
