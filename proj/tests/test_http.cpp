#include <doctest.h>
#include <httplib.h>

#include <filesystem>
#include <random>
#include <thread>

#include <json.hpp>

#include "maxdiff/csv.hpp"
#include "maxdiff/error.hpp"
#include "maxdiff/http_server.hpp"
#include "maxdiff/service.hpp"
#include "maxdiff/simulator.hpp"

using namespace maxdiff;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Fixture {
    fs::path dir;
    std::unique_ptr<service::SurveyService> svc;
    std::unique_ptr<service::HttpServer> server;
    std::thread listener;
    std::unique_ptr<httplib::Client> client;

    Fixture() {
        std::random_device rd;
        dir = fs::temp_directory_path() / ("maxdiff-http-" + std::to_string(rd()));
        svc = std::make_unique<service::SurveyService>(dir);
        server = std::make_unique<service::HttpServer>(*svc);
        const int port = server->bind("127.0.0.1", 0);
        listener = std::thread([this] { server->listen(); });
        while (!server->running()) std::this_thread::yield();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
    }
    ~Fixture() {
        server->stop();
        listener.join();
        fs::remove_all(dir);
    }
    httplib::Result post(const std::string& path, const Json& body) {
        return client->Post(path, body.dump(), "application/json");
    }
};

Json study_body(const std::string& mode = "best_only") {
    Json body;
    body["items"] = Json::array();
    for (const auto& item : synthetic_items(6))
        body["items"].push_back({{"id", item.id}, {"label", item.label}, {"description", "about " + item.id}});
    body["design_spec"] = {{"items_per_screen", 3}, {"screens_per_respondent", 4}, {"n_versions", 2}};
    body["mode"] = mode;
    body["attribute_schema"] = {"vision"};
    return body;
}

}  // namespace

TEST_CASE("study creation over http") {
    Fixture f;
    auto first = f.post("/studies", study_body());
    REQUIRE(first);
    CHECK(first->status == 201);
    auto j = Json::parse(first->body);
    CHECK(j["n_versions"] == 2);
    auto second = f.post("/studies", study_body());
    CHECK(second->status == 200);
    CHECK(Json::parse(second->body)["study_id"] == j["study_id"]);

    auto empty = study_body();
    empty["items"] = Json::array();
    CHECK(f.post("/studies", empty)->status == 422);
    auto bad = f.client->Post("/studies", "{not json", "application/json");
    CHECK(bad->status == 400);
    CHECK(f.client->Get("/studies/unknown/results")->status == 404);
    CHECK(f.client->Get("/studies/unknown/export.csv")->status == 404);
}

TEST_CASE("session walk over http") {
    Fixture f;
    const std::string id = Json::parse(f.post("/studies", study_body())->body)["study_id"];
    CHECK(f.post("/studies/" + id + "/sessions", Json::object())->status == 422);
    auto opened = f.post("/studies/" + id + "/sessions", {{"attributes", {{"vision", "low"}}}});
    REQUIRE(opened->status == 201);
    auto session = Json::parse(opened->body);
    CHECK(session["total_screens"] == 4);
    CHECK(session["version"] == 0);
    const std::string sid = session["session_id"];

    auto screen = Json::parse(f.client->Get("/sessions/" + sid + "/screen")->body);
    CHECK(screen["screen_index"] == 0);
    CHECK(screen["prompt"] == service::kDefaultPrompt);
    REQUIRE(screen["options"].size() == 3);
    CHECK(screen["options"][0]["description"].get<std::string>().rfind("about ", 0) == 0);

    const std::string best = screen["options"][0]["id"];
    const std::string other = screen["options"][1]["id"];
    const std::string path = "/sessions/" + sid + "/choices";
    CHECK(f.post(path, {{"screen_index", 0}, {"best", "item99"}})->status == 422);
    CHECK(f.post(path, {{"screen_index", 0}, {"best", best}, {"worst", other}})->status == 422);
    CHECK(f.post(path, {{"screen_index", 2}, {"best", best}})->status == 409);
    CHECK(f.post(path, {{"screen_index", 0}, {"best", best}})->status == 204);
    auto dup = f.post(path, {{"screen_index", 0}, {"best", best}});
    CHECK(dup->status == 409);
    CHECK(Json::parse(dup->body)["error"] == "conflict");
    CHECK(f.post(path, {{"best", best}})->status == 400);

    for (int t = 1; t < 4; ++t) {
        auto view = Json::parse(f.client->Get("/sessions/" + sid + "/screen")->body);
        CHECK(f.post(path, {{"screen_index", view["screen_index"]}, {"best", view["options"][2]["id"]}})
                  ->status == 204);
    }
    auto done = Json::parse(f.client->Get("/sessions/" + sid + "/screen")->body);
    CHECK(done["completed"] == true);
    CHECK(f.client->Get("/sessions/abcdef/screen")->status == 404);

    auto exported = f.client->Get("/studies/" + id + "/export.csv");
    REQUIRE(exported->status == 200);
    auto ds = csv::parse_responses(exported->body, synthetic_items(6));
    CHECK(ds.observations.size() == 4);
    CHECK(ds.observations[0].attributes.at("vision") == "low");

    auto results = f.client->Get("/studies/" + id + "/results?cohort=low_vision:vision=low&lambda=0.01");
    REQUIRE(results->status == 200);
    auto rj = Json::parse(results->body);
    CHECK(rj["fit"]["lambda"] == 0.01);
    CHECK(rj["cohorts"].size() == 1);
    CHECK(rj["sessions"]["completed"] == 1);
    CHECK(f.client->Get("/studies/" + id + "/results?lambda=abc")->status == 422);
    CHECK(f.client->Get("/studies/" + id + "/results?cohort=nobody:vision=none")->status == 422);
}

TEST_CASE("results need data") {
    Fixture f;
    const std::string id = Json::parse(f.post("/studies", study_body("best_worst"))->body)["study_id"];
    auto r = f.client->Get("/studies/" + id + "/results");
    CHECK(r->status == 422);
    CHECK(Json::parse(r->body)["error"] == "insufficient-data");
}

TEST_CASE("cohort query parsing") {
    auto c = service::parse_cohort("low_vision:vision=low;age=65+");
    CHECK(c.name == "low_vision");
    CHECK(c.required_attributes.at("age") == "65+");
    CHECK_THROWS_AS(service::parse_cohort("novalue"), Error);
}
