#include <doctest.h>

#include <random>

#include "maxdiff/csv.hpp"
#include "maxdiff/error.hpp"
#include "oracles.hpp"

using namespace maxdiff;

TEST_CASE("rfc4180 parsing") {
    auto rows = csv::parse("a,\"b,c\",\"say \"\"hi\"\"\"\n1,\"two\nlines\",3\r\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == csv::Row{"a", "b,c", "say \"hi\""});
    CHECK(rows[1] == csv::Row{"1", "two\nlines", "3"});
    CHECK_THROWS_AS(csv::parse("a,\"b\n"), Error);
}

TEST_CASE("quoting only when needed") {
    CHECK(csv::quote_field("plain") == "plain");
    CHECK(csv::quote_field("a,b") == "\"a,b\"");
    CHECK(csv::quote_field("q\"") == "\"q\"\"\"");
    std::vector<std::string> fields{"x", "y z", "1,2"};
    CHECK(csv::format_row(fields) == "x,y z,\"1,2\"\n");
}

TEST_CASE("items file") {
    auto items = csv::parse_items(
        "#tool=maxdiff\nid,label,description\nvoice,Voice Control,\"Speak, and it listens\"\n"
        "captions,Live Captions,\n");
    REQUIRE(items.size() == 2);
    CHECK(items[0].description == "Speak, and it listens");
    CHECK(csv::parse_items(csv::format_items(items)) == items);
    CHECK_THROWS_AS(csv::parse_items("name,label\nx,y\n"), Error);
    CHECK_THROWS_AS(csv::parse_items("id,label,description\na|b,y,\n"), Error);
    CHECK(csv::leading_comments("#one\n#two\nid\n") == std::vector<std::string>{"one", "two"});
}

TEST_CASE("attributes encoding") {
    Attributes a{{"vision", "low"}, {"age", "65+"}};
    CHECK(csv::decode_attributes(csv::encode_attributes(a)) == a);
    CHECK(csv::decode_attributes("").empty());
    CHECK_THROWS_AS(csv::decode_attributes("novalue"), Error);
}

TEST_CASE("responses round trip on random datasets") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 30; ++i) {
        auto ds = oracle::random_dataset(rng, 3 + i % 5, 20, 0.5);
        for (std::size_t o = 0; o < ds.observations.size(); ++o)
            if (o % 3 == 0) ds.observations[o].attributes = {{"group", o % 2 ? "a" : "b"}};
        std::vector<std::string> comments{"tool=maxdiff version=0.1.0 seed=1"};
        const auto text = csv::format_responses(ds, comments);
        CHECK(text.rfind("#tool=maxdiff", 0) == 0);
        CHECK(csv::parse_responses(text, ds.items) == ds);
    }
}

TEST_CASE("unknown items parse but fail validation") {
    auto items = oracle::items(3);
    const std::string text =
        "respondent_id,version,screen,shown,best,worst,attributes\n"
        "r1,0,0,i0|i1|i9,i0,,\n";
    auto ds = csv::parse_responses(text, items);
    CHECK(validate_dataset(ds).size() == 1);
    CHECK_THROWS_AS(csv::parse_responses("respondent_id,version,screen,shown,best,worst,attributes\nr1,x,0,i0|i1,i0,,\n", items), Error);
    CHECK_THROWS_AS(csv::parse_responses("respondent_id,best\n", items), Error);
}
