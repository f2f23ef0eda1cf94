#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "maxdiff/design.hpp"
#include "maxdiff/error.hpp"
#include "maxdiff/estimator.hpp"
#include "maxdiff/simulator.hpp"
#include "oracles.hpp"

using namespace maxdiff;

namespace {

ChoiceObservation obs(std::string rid, std::vector<std::string> shown, std::string best,
                      std::optional<std::string> worst = std::nullopt) {
    ChoiceObservation o;
    o.respondent_id = std::move(rid);
    o.shown = std::move(shown);
    o.best = std::move(best);
    o.worst = std::move(worst);
    return o;
}

// Every item chosen best equally often from full screens.
Dataset symmetric_dataset(std::size_t K, std::size_t rounds) {
    Dataset ds{oracle::items(K), {}};
    std::vector<std::string> all;
    for (const auto& it : ds.items) all.push_back(it.id);
    for (std::size_t r = 0; r < rounds; ++r)
        for (std::size_t i = 0; i < K; ++i)
            ds.observations.push_back(obs("r" + std::to_string(r), all, all[i]));
    return ds;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

Dataset simulated(std::size_t K, std::size_t N, double spread, double sd, ResponseMode mode,
                  std::uint64_t seed) {
    DesignSpec spec;
    spec.n_items = K;
    spec.items_per_screen = 3;
    spec.screens_per_respondent = 10;
    spec.n_versions = 10;
    spec.rng_seed = seed;
    auto design = generate_design(spec);
    PopulationSpec pop(linear_utilities(K, spread), sd, N, mode, seed);
    auto people = draw_population(pop);
    auto items = synthetic_items(K);
    SimulationOptions opts;
    opts.mode = mode;
    opts.seed = seed + 1;
    return simulate_dataset(items, people, &design, opts);
}

}  // namespace

TEST_CASE("log-likelihood examples") {
    Dataset ds{oracle::items(3), {obs("r", {"i0", "i1", "i2"}, "i0")}};
    UtilityVector zero{{0, 0, 0}};
    CHECK(log_likelihood(zero, ds, 0.0) == doctest::Approx(std::log(1.0 / 3)).epsilon(1e-12));
    ds.observations[0].worst = "i2";
    CHECK(log_likelihood(zero, ds, 0.0) ==
          doctest::Approx(std::log(1.0 / 3) + std::log(0.5)).epsilon(1e-12));
    CHECK(log_likelihood(zero, ds, 0.0) == doctest::Approx(-1.7918).epsilon(1e-4));
}

TEST_CASE("log-likelihood matches direct summation oracle") {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 200; ++t) {
        auto ds = oracle::random_dataset(rng, 3 + t % 6, 5, 0.5);
        auto u = oracle::random_utilities(rng, ds.items.size(), 1.5);
        const double lambda = (t % 3) * 0.01;
        const double expected = oracle::direct_log_likelihood(u, ds, lambda);
        CHECK(log_likelihood(UtilityVector{u}, ds, lambda) ==
              doctest::Approx(expected).epsilon(1e-12));
        CHECK(log_likelihood(UtilityVector{u}, ds, lambda, false) ==
              doctest::Approx(oracle::direct_log_likelihood(u, ds, lambda, false)).epsilon(1e-12));
    }
}

TEST_CASE("gradient examples") {
    Dataset ds{oracle::items(4), {obs("r", {"i0", "i1", "i2"}, "i1")}};
    auto g = log_likelihood_gradient(UtilityVector{{0, 0, 0, 0}}, ds, 0.0);
    CHECK(g[1] == doctest::Approx(2.0 / 3));
    CHECK(g[0] == doctest::Approx(-1.0 / 3));
    CHECK(g[2] == doctest::Approx(-1.0 / 3));
    CHECK(g[3] == 0.0);

    auto sym = symmetric_dataset(5, 3);
    CHECK(max_abs(log_likelihood_gradient(UtilityVector{std::vector<double>(5, 0.0)}, sym, 0.0)) <
          1e-12);
}

TEST_CASE("gradient matches central finite differences") {
    std::mt19937_64 rng(23);
    for (int t = 0; t < 100; ++t) {
        const std::size_t K = 2 + t % 7;
        auto ds = oracle::random_dataset(rng, K, 1 + rng() % 50, t % 2 ? 0.7 : 0.0);
        auto u = oracle::random_utilities(rng, K, 1.0);
        const double lambda = (t % 4) * 0.005;
        auto f = [&](const std::vector<double>& x) { return log_likelihood(UtilityVector{x}, ds, lambda); };
        auto fd = oracle::central_difference(f, u);
        auto g = log_likelihood_gradient(UtilityVector{u}, ds, lambda);
        double err = 0.0;
        for (std::size_t j = 0; j < K; ++j) err = std::max(err, std::abs(g[j] - fd[j]));
        CHECK(err / std::max(1.0, max_abs(fd)) < 1e-6);
    }
}

TEST_CASE("translation invariance of the unpenalized objective") {
    std::mt19937_64 rng(29);
    for (int t = 0; t < 100; ++t) {
        auto ds = oracle::random_dataset(rng, 2 + t % 7, 20, 0.5);
        auto u = oracle::random_utilities(rng, ds.items.size(), 2.0);
        const double c = std::uniform_real_distribution<double>(-50, 50)(rng);
        auto shifted = u;
        for (auto& x : shifted) x += c;
        CHECK(std::abs(log_likelihood(UtilityVector{u}, ds, 0.0) -
                       log_likelihood(UtilityVector{shifted}, ds, 0.0)) < 1e-9);
    }
}

TEST_CASE("symmetric data gives uniform shares") {
    auto fit_result = fit(symmetric_dataset(6, 4));
    CHECK(fit_result.converged);
    for (const auto& row : fit_result.shares.rows) CHECK(std::abs(row.share - 100.0 / 6) < 1e-6);
}

TEST_CASE("separation case agrees with the grid-search oracle") {
    Dataset ds{oracle::items(3), {}};
    for (int i = 0; i < 8; ++i) ds.observations.push_back(obs("r" + std::to_string(i), {"i0", "i1", "i2"}, "i0"));
    for (int i = 0; i < 4; ++i) ds.observations.push_back(obs("s" + std::to_string(i), {"i0", "i1"}, "i0"));
    ds.observations.push_back(obs("t", {"i1", "i2"}, "i1"));
    ds.observations.push_back(obs("t", {"i1", "i2"}, "i2"));
    ds.observations.push_back(obs("t", {"i1", "i2"}, "i2"));

    auto result = fit(ds);
    CHECK(result.converged);
    for (double u : result.utilities.values) CHECK(std::isfinite(u));
    CHECK(result.shares.rows[0].share > 90.0);

    auto penalized = [&](const std::vector<double>& u) {
        return oracle::direct_log_likelihood(u, ds, 0.001);
    };
    auto grid = oracle::grid_search_3(penalized);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(result.utilities.values[j] == doctest::Approx(grid[j]).epsilon(1e-5));
    CHECK(result.objective == doctest::Approx(penalized(grid)).epsilon(1e-10));
}

TEST_CASE("objective never decreases and starting point does not matter") {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 60; ++t) {
        auto ds = oracle::random_dataset(rng, 2 + t % 7, 40, 0.5);
        FitTrace trace;
        FitOptions options;
        options.l2_penalty = 0.01;
        auto a = fit(ds, options, &trace);
        REQUIRE(trace.objective.size() >= 1);
        for (std::size_t i = 1; i < trace.objective.size(); ++i)
            CHECK(trace.objective[i] >= trace.objective[i - 1]);
        // re-centering can only shrink the penalty
        CHECK(a.objective >= trace.objective.back() - 1e-9 * std::abs(a.objective));
        CHECK(a.objective == doctest::Approx(log_likelihood(a.utilities, ds, 0.01)).epsilon(1e-12));
        CHECK(a.converged);
        options.initial_utilities = oracle::random_utilities(rng, ds.items.size(), 0.3);
        auto b = fit(ds, options);
        for (std::size_t j = 0; j < ds.items.size(); ++j)
            CHECK(std::abs(a.utilities.values[j] - b.utilities.values[j]) < 1e-6);
    }
}

TEST_CASE("fit centers utilities and reports sums to 100") {
    std::mt19937_64 rng(37);
    for (int t = 0; t < 60; ++t) {
        auto ds = oracle::random_dataset(rng, 2 + t % 9, 30, 0.3);
        auto r = fit(ds);
        double s = std::accumulate(r.utilities.values.begin(), r.utilities.values.end(), 0.0);
        CHECK(std::abs(s) < 1e-9);
        CHECK(std::abs(r.shares.total_share() - 100.0) < 1e-9);
        CHECK(r.log_likelihood >= r.objective);
    }
}

TEST_CASE("best-only reduction") {
    std::mt19937_64 rng(41);
    for (int t = 0; t < 20; ++t) {
        auto with_worst = oracle::random_dataset(rng, 3 + t % 5, 40, 0.8);
        auto stripped = with_worst;
        for (auto& o : stripped.observations) o.worst.reset();
        FitOptions off;
        off.worst_model_enabled = false;
        auto a = fit(with_worst, off);
        auto b = fit(stripped, off);
        CHECK(a == b);
        CHECK(!a.worst_model);
    }
}

TEST_CASE("shares from utilities") {
    auto s = shares_from_utilities(UtilityVector{{0, 0, 0, 0}});
    for (double x : s) CHECK(x == doctest::Approx(25.0));

    UtilityVector u{{std::log(2.0), 0, 0}};
    auto t = shares_from_utilities(u.centered());
    CHECK(t[0] == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(t[1] == doctest::Approx(25.0).epsilon(1e-12));
    CHECK(t[0] / t[1] == doctest::Approx(2.0).epsilon(1e-12));

    std::mt19937_64 rng(43);
    for (int i = 0; i < 200; ++i) {
        auto v = oracle::random_utilities(rng, 2 + i % 20, 3.0);
        auto base = shares_from_utilities(v);
        auto shifted = v;
        const double c = std::uniform_real_distribution<double>(-100, 100)(rng);
        for (auto& x : shifted) x += c;
        auto moved = shares_from_utilities(shifted);
        for (std::size_t j = 0; j < v.size(); ++j) CHECK(std::abs(base[j] - moved[j]) < 1e-12);
        CHECK(std::abs(std::accumulate(base.begin(), base.end(), 0.0) - 100.0) < 1e-9);
        for (std::size_t a = 0; a + 1 < v.size(); ++a)
            CHECK(std::abs(base[a] / base[a + 1] - std::exp(v[a] - v[a + 1])) <=
                  1e-9 * std::exp(v[a] - v[a + 1]));
    }
}

TEST_CASE("count shares") {
    Dataset ds{oracle::items(4), {}};
    for (int r = 0; r < 10; ++r) {
        ds.observations.push_back(obs("r", {"i0", "i1"}, r % 2 ? "i0" : "i1"));
        ds.observations.push_back(obs("r", {"i2", "i3"}, r % 2 ? "i2" : "i3"));
    }
    for (double s : count_shares(ds)) CHECK(s == doctest::Approx(25.0));

    Dataset unseen{oracle::items(3), {obs("r", {"i0", "i1"}, "i0")}};
    try {
        count_shares(unseen);
        FAIL("expected undefined-item");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::undefined_item);
        CHECK(std::string(e.what()).find("i2") != std::string::npos);
    }
}

TEST_CASE("full screens: count shares equal the unpenalized MLE") {
    std::mt19937_64 rng(47);
    for (int t = 0; t < 20; ++t) {
        const std::size_t K = 3 + t % 5;
        Dataset ds{oracle::items(K), {}};
        std::vector<std::string> all;
        for (const auto& it : ds.items) all.push_back(it.id);
        for (std::size_t i = 0; i < K; ++i) ds.observations.push_back(obs("r", all, all[i]));
        for (int n = 0; n < 30; ++n) ds.observations.push_back(obs("r", all, all[rng() % K]));
        FitOptions options;
        options.l2_penalty = 0.0;
        auto mle = fit(ds, options);
        auto counts = count_shares(ds);
        for (std::size_t j = 0; j < K; ++j)
            CHECK(std::abs(mle.shares.rows[j].share - counts[j]) < 1e-6);
    }
}

TEST_CASE("count shares and fit agree on ranking for well-separated utilities") {
    auto ds = simulated(8, 2000, 6.0, 0.0, ResponseMode::best_only, 5);
    auto counts = count_shares(ds);
    auto fitted = fit(ds);
    auto count_ranks = rank_shares(counts, ds.items);
    for (std::size_t j = 0; j < 8; ++j) CHECK(count_ranks[j] == fitted.shares.rows[j].rank);
}

// At N=500 the +-1.5 point band holds for every item in 171 of 200 seeds of
// the simulation oracle, so it is checked as a rate over fixed seeds.
TEST_CASE("simulated recovery at case-study scale") {
    auto truth = shares_from_utilities(linear_utilities(18, 2.0));
    int within = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto ds = simulated(18, 500, 2.0, 0.0, ResponseMode::best_only, seed);
        auto r = fit(ds);
        CHECK(r.converged);
        double worst = 0.0;
        for (std::size_t j = 0; j < 18; ++j)
            worst = std::max(worst, std::abs(r.shares.rows[j].share - truth[j]));
        within += worst <= 1.5;
    }
    CHECK(within >= 40);
}

TEST_CASE("bootstrap") {
    auto ds = simulated(6, 400, 2.0, 0.5, ResponseMode::best_only, 11);
    FitOptions options;
    auto a = bootstrap_shares(ds, options, 200, 3);
    auto b = bootstrap_shares(ds, options, 200, 3);
    CHECK(a.low == b.low);
    CHECK(a.high == b.high);
    CHECK(a.replicates == 200);
    auto point = fit(ds, options);
    for (std::size_t j = 0; j < 6; ++j) {
        CHECK(a.low[j] <= point.shares.rows[j].share);
        CHECK(point.shares.rows[j].share <= a.high[j]);
    }

    auto sym = symmetric_dataset(4, 30);
    auto s = bootstrap_shares(sym, options, 200, 9);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(s.low[i] <= s.high[j]);

    CHECK_THROWS_AS(bootstrap_shares(ds, options, 0, 1), Error);
    Dataset one{oracle::items(3), {obs("only", {"i0", "i1", "i2"}, "i0")}};
    CHECK_THROWS_AS(bootstrap_shares(one, options, 10, 1), Error);
}

TEST_CASE("cohorts") {
    auto ds = simulated(6, 60, 2.0, 0.5, ResponseMode::best_only, 13);
    std::vector<CohortSpec> everyone{{"everyone", {}}};
    auto analysis = fit_by_cohort(ds, everyone);
    REQUIRE(analysis.cohorts.size() == 1);
    CHECK(analysis.cohorts[0].fit == analysis.pooled);
    for (const auto& c : analysis.cohorts[0].comparison) {
        CHECK(c.share_delta == 0.0);
        CHECK(c.rank_shift == 0);
    }

    std::vector<CohortSpec> nobody{{"martians", {{"planet", "mars"}}}};
    try {
        fit_by_cohort(ds, nobody);
        FAIL("expected insufficient-data");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::insufficient_data);
        CHECK(std::string(e.what()).find("martians") != std::string::npos);
    }
}

TEST_CASE("fit input errors") {
    Dataset empty{oracle::items(3), {}};
    CHECK_THROWS_AS(fit(empty), Error);
    FitOptions bad;
    bad.l2_penalty = -1.0;
    CHECK_THROWS_AS(fit(symmetric_dataset(3, 1), bad), Error);
}
