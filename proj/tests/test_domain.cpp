#include <doctest.h>

#include <cmath>
#include <random>

#include "maxdiff/domain.hpp"
#include "maxdiff/error.hpp"
#include "oracles.hpp"

using namespace maxdiff;

namespace {

ErrorKind kind_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::io;
}

Dataset two_obs() {
    Dataset ds{oracle::items(3), {}};
    ds.observations.push_back({"r1", 0, 0, {"i0", "i1", "i2"}, "i0", "i2", {}});
    ds.observations.push_back({"r1", 0, 1, {"i0", "i1", "i2"}, "i1", std::nullopt, {}});
    return ds;
}

}  // namespace

TEST_CASE("chance cutoff examples") {
    CHECK(chance_cutoff(20) == 5.0);
    CHECK(chance_cutoff(18) == doctest::Approx(5.5555555555).epsilon(1e-10));
    CHECK(kind_of([] { chance_cutoff(1); }) == ErrorKind::invalid_spec);
    CHECK(kind_of([] { chance_cutoff(0); }) == ErrorKind::invalid_spec);
}

TEST_CASE("chance cutoff times K is 100") {
    for (std::size_t k = 2; k <= 1000; ++k) CHECK(std::abs(chance_cutoff(k) * k - 100.0) <= 1e-12);
}

TEST_CASE("validate_dataset examples") {
    auto ds = two_obs();
    CHECK(validate_dataset(ds).empty());

    auto bad_best = ds;
    bad_best.observations[1].best = "zzz";
    auto v = validate_dataset(bad_best);
    REQUIRE(v.size() == 1);
    CHECK(v[0].respondent_id == "r1");
    CHECK(v[0].screen_index == 1u);
    CHECK(v[0].to_string().find("r1") != std::string::npos);

    auto same = ds;
    same.observations[0].worst = "i0";
    CHECK(validate_dataset(same).size() == 1);
}

TEST_CASE("validate_dataset catches structural problems") {
    auto ds = two_obs();
    ds.observations[0].shown = {"i0", "i0", "i1"};
    CHECK(!validate_dataset(ds).empty());

    ds = two_obs();
    ds.observations[0].shown = {"i0"};
    ds.observations[0].best = "i0";
    ds.observations[0].worst.reset();
    CHECK(!validate_dataset(ds).empty());

    ds = two_obs();
    ds.items.push_back(ds.items[0]);
    CHECK(!validate_dataset(ds).empty());

    ds = two_obs();
    ds.observations[0].worst = "nope";
    CHECK(!validate_dataset(ds).empty());
}

TEST_CASE("validate_dataset against a design") {
    Design d;
    d.spec = {3, 3, 1, 1, 0, 0};
    d.versions = {{Screen{{0, 1, 2}}}};
    Dataset ds{oracle::items(3), {}};
    ds.observations.push_back({"r1", 0, 0, {"i0", "i1", "i2"}, "i0", std::nullopt, {}});
    CHECK(validate_dataset(ds, &d).empty());
    ds.observations[0].screen_index = 3;
    CHECK(validate_dataset(ds, &d).size() == 1);
    ds.observations[0].screen_index = 0;
    ds.observations[0].version_index = 1;
    CHECK(validate_dataset(ds, &d).size() == 1);
}

TEST_CASE("ranks break ties by ascending id") {
    std::vector<Item> items{{"b", "B", ""}, {"a", "A", ""}, {"c", "C", ""}};
    std::vector<double> shares{40.0, 40.0, 20.0};
    auto ranks = rank_shares(shares, items);
    CHECK(ranks == std::vector<int>{2, 1, 3});
    auto report = make_share_report(items, shares, 1, 1);
    CHECK(report.chance_cutoff == doctest::Approx(100.0 / 3));
    CHECK(report.rows[0].above_chance);
    CHECK(!report.rows[2].above_chance);
    CHECK(report.order_by_rank() == std::vector<std::size_t>{1, 0, 2});
}

TEST_CASE("uniform shares are all flagged") {
    auto items = oracle::items(20);
    std::vector<double> shares(20, 5.0);
    auto report = make_share_report(items, shares, 1, 1);
    for (const auto& row : report.rows) CHECK(row.above_chance);
}

TEST_CASE("attach_intervals keeps the point estimate inside") {
    auto items = oracle::items(2);
    std::vector<double> shares{70.0, 30.0};
    auto report = make_share_report(items, shares, 1, 1);
    std::vector<double> lows{71.0, 20.0}, highs{80.0, 29.0};
    attach_intervals(report, lows, highs);
    for (const auto& row : report.rows) {
        CHECK(*row.ci_low <= row.share);
        CHECK(row.share <= *row.ci_high);
    }
    CHECK(*report.rows[0].ci_above_chance);
    CHECK(!*report.rows[1].ci_above_chance);
}

TEST_CASE("cohort filter and decision counts") {
    Dataset ds{oracle::items(3), {}};
    ds.observations.push_back({"a", 0, 0, {"i0", "i1", "i2"}, "i0", "i1", {{"vision", "low"}}});
    ds.observations.push_back({"b", 0, 0, {"i0", "i1", "i2"}, "i2", std::nullopt, {{"vision", "typical"}}});
    CohortSpec low{"low_vision", {{"vision", "low"}}};
    auto only = filter_cohort(ds, low);
    REQUIRE(only.observations.size() == 1);
    CHECK(only.observations[0].respondent_id == "a");
    auto counts = decision_counts(ds);
    CHECK(counts["a"] == 2);
    CHECK(counts["b"] == 1);
    CHECK(CohortSpec{"all", {}}.matches({{"x", "y"}}));
}

TEST_CASE("random datasets from the oracle generator validate") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 50; ++i) {
        auto ds = oracle::random_dataset(rng, 2 + i % 7, 30, 0.5);
        CHECK(validate_dataset(ds).empty());
    }
}

TEST_CASE("validate_items") {
    std::vector<Item> dup{{"a", "A", ""}, {"a", "B", ""}};
    CHECK(kind_of([&] { validate_items(dup); }) == ErrorKind::invalid_input);
    std::vector<Item> blank{{"", "A", ""}};
    CHECK(kind_of([&] { validate_items(blank); }) == ErrorKind::invalid_input);
    ItemIndex index(std::span<const Item>(dup.data(), 1));
    CHECK(kind_of([&] { index.at("x"); }) == ErrorKind::undefined_item);
}
