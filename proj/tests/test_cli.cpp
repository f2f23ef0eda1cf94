#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "maxdiff/cli.hpp"
#include "maxdiff/csv.hpp"
#include "maxdiff/json_io.hpp"
#include "maxdiff/report.hpp"
#include "maxdiff/simulator.hpp"

using namespace maxdiff;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "maxdiff");
    std::ostringstream out, err;
    const int code = maxdiff::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("maxdiff-cli-" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

const std::string kItems = std::string(MAXDIFF_DATA_DIR) + "/tablet_items.csv";
const std::string kResponses = std::string(MAXDIFF_DATA_DIR) + "/tablet_responses.csv";

}  // namespace

TEST_CASE("design is byte-identical on rerun") {
    TempDir dir;
    auto a = run_cli({"design", "--items", kItems, "-k", "3", "-T", "10", "-V", "10", "--seed", "7",
                  "-o", dir / "a.json"});
    auto b = run_cli({"design", "--items", kItems, "-k", "3", "-T", "10", "-V", "10", "--seed", "7",
                  "-o", dir / "b.json"});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    const auto text = csv::read_file(dir / "a.json");
    CHECK(text == csv::read_file(dir / "b.json"));
    auto j = json::parse(text);
    CHECK(j["run"]["seed"] == 7);
    CHECK(j["run"]["version"] == "0.1.0");
    const auto items = csv::parse_items(csv::read_file(kItems));
    auto design = json::design_from_json(j, items);
    CHECK(design.versions.size() == 10);
    CHECK(json::to_json(design, items)["versions"] == j["versions"]);

    auto diag = run_cli({"diagnose", "--items", kItems, "--design", dir / "a.json", "--responses", kResponses,
                     "--format", "text"});
    CHECK(diag.code == 0);
    CHECK(diag.out.find("violations: 0") != std::string::npos);
}

TEST_CASE("fit on the bundled example") {
    TempDir dir;
    auto r = run_cli({"fit", "--responses", kResponses, "--items", kItems, "-o", dir / "report.json"});
    REQUIRE(r.code == 0);
    auto j = json::parse(csv::read_file(dir / "report.json"));
    double total = 0.0;
    for (const auto& row : j["shares"]) total += row["share"].get<double>();
    CHECK(total == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(j["metadata"]["tool"] == "maxdiff");

    auto parsed = json::fit_result_from_json(j);
    auto again = json::to_json(parsed);
    again["metadata"] = j["metadata"];
    CHECK(again == j);

    auto text = run_cli({"report", "--fit", dir / "report.json"});
    CHECK(text.code == 0);
    CHECK(text.out.rfind("#tool=maxdiff version=0.1.0", 0) == 0);
    CHECK(text.out.find("* above chance") != std::string::npos);
    auto as_json = run_cli({"report", "--fit", dir / "report.json", "--format", "json"});
    auto rj = json::parse(as_json.out);
    for (const auto& item : rj["items"]) {
        const auto share = format_percent(item["share"].get<double>());
        CHECK(text.out.find(share) != std::string::npos);
    }
}

TEST_CASE("fit with bootstrap, cohorts and csv output") {
    auto r = run_cli({"fit", "--responses", kResponses, "--items", kItems, "--bootstrap", "50",
                  "--cohort", "low_vision:vision=low", "--format", "csv"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("# cohort low_vision") != std::string::npos);
    auto rows = csv::parse(r.out.substr(r.out.find("\nrank") + 1));
    CHECK(rows[0][0] == "rank");
}

TEST_CASE("report for 20 items shows a 5.0% cutoff") {
    TempDir dir;
    csv::write_file(dir / "items.csv", csv::format_items(synthetic_items(20)));
    auto sim = run_cli({"simulate", "--items", dir / "items.csv", "-N", "60", "--seed", "3", "-o",
                    dir / "r.csv"});
    REQUIRE(sim.code == 0);
    CHECK(csv::read_file(dir / "r.csv").rfind("#tool=maxdiff version=0.1.0 seed=3", 0) == 0);
    auto text = run_cli({"fit", "--items", dir / "items.csv", "--responses", dir / "r.csv", "--format",
                     "text"});
    REQUIRE(text.code == 0);
    CHECK(text.out.find("chance cutoff: 5.0%") != std::string::npos);
    auto synthetic = run_cli({"fit", "-K", "20", "--responses", dir / "r.csv", "--format", "text"});
    CHECK(synthetic.code == 0);
    CHECK(synthetic.out == text.out);

    auto again = run_cli({"simulate", "--items", dir / "items.csv", "-N", "60", "--seed", "3"});
    CHECK(again.out == csv::read_file(dir / "r.csv"));
}

TEST_CASE("power table has one row per grid value") {
    TempDir dir;
    auto r = run_cli({"power", "--k", "3", "-T", "10", "-K", "18", "--n-grid", "100,300,500", "--reps",
                  "50", "--seed", "7", "-o", dir / "power.csv"});
    REQUIRE(r.code == 0);
    const auto text = csv::read_file(dir / "power.csv");
    CHECK(text.rfind("#tool=maxdiff version=0.1.0 seed=7", 0) == 0);
    auto rows = csv::parse(text.substr(text.find('\n') + 1));
    while (!rows.empty() && rows.back().size() == 1 && rows.back()[0].empty()) rows.pop_back();
    REQUIRE(rows.size() == 4);
    CHECK(rows[1][0] == "100");
    CHECK(rows[2][0] == "300");
    CHECK(rows[3][0] == "500");
    std::vector<double> error, rho;
    for (std::size_t i = 1; i < 4; ++i) {
        CHECK(rows[i][1] == "50");
        error.push_back(std::stod(rows[i][2]));
        rho.push_back(std::stod(rows[i][3]));
    }
    CHECK(error[0] > error[1]);
    CHECK(error[1] > error[2]);
    CHECK(rho[0] < rho[2]);

    auto js = run_cli({"power", "-K", "6", "--n-grid", "50,80", "--reps", "4", "--seed", "7", "--format",
                   "json"});
    REQUIRE(js.code == 0);
    auto j = json::parse(js.out);
    CHECK(json::to_json(json::power_table_from_json(j)) == j);
}

TEST_CASE("compare output round-trips") {
    auto r = run_cli({"compare", "-K", "6", "-N", "60", "--reps", "4", "--format", "json"});
    REQUIRE(r.code == 0);
    auto j = json::parse(r.out);
    CHECK(json::to_json(json::method_comparison_from_json(j)) == j);
    CHECK(j["metadata"]["seed"] == 20250224);
    auto csv_out = run_cli({"compare", "-K", "6", "-N", "60", "--reps", "4"});
    CHECK(csv_out.out.find("best_only,") != std::string::npos);
    CHECK(csv_out.out.find("top_choice,") != std::string::npos);
}

TEST_CASE("exit codes") {
    auto usage = run_cli({"fit"});
    CHECK(usage.code == 2);
    CHECK(run_cli({"no-such-command"}).code == 2);
    CHECK(run_cli({"design", "--seed", "abc"}).code == 2);

    auto missing = run_cli({"fit", "--responses", "/nonexistent/r.csv", "--items", kItems});
    CHECK(missing.code == 1);
    auto j = json::parse(missing.err);
    CHECK(j["error"] == "io");
    CHECK(missing.err.find('\n') == missing.err.size() - 1);

    auto bad = run_cli({"design", "-K", "4", "-k", "5"});
    CHECK(bad.code == 1);
    CHECK(json::parse(bad.err)["error"] == "invalid-spec");

    auto reps = run_cli({"power", "-K", "6", "--n-grid", "50", "--reps", "0"});
    CHECK(reps.code == 1);
}
