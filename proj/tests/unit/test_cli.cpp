#include <catch_amalgamated.hpp>

#include "distopt/cli.hpp"
#include "distopt/errors.hpp"
#include "distopt/util.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace distopt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kData = DISTOPT_DATA_DIR;
const std::string kGolden = DISTOPT_GOLDEN_DIR;

fs::path scratch_dir(const std::string& name)
{
    auto dir = fs::temp_directory_path() / ("distopt_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct Run {
    int code = 0;
    std::string out, err;
};

Run cli(std::vector<std::string> args)
{
    args.insert(args.begin(), {"distopt", "-q"});
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    Run r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

// Relative comparison of every number; strings and structure must match exactly.
void compare_json(const json& got, const json& want, double tol, const std::string& path = "")
{
    INFO(path);
    if (want.is_object()) {
        REQUIRE(got.is_object());
        REQUIRE(got.size() == want.size());
        for (auto it = want.begin(); it != want.end(); ++it) {
            REQUIRE(got.contains(it.key()));
            compare_json(got.at(it.key()), it.value(), tol, path + "/" + it.key());
        }
    } else if (want.is_array()) {
        REQUIRE(got.is_array());
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) compare_json(got[i], want[i], tol, path + "[" + std::to_string(i) + "]");
    } else if (want.is_number()) {
        REQUIRE(got.is_number());
        double a = got.get<double>(), b = want.get<double>();
        CHECK(std::abs(a - b) <= tol * std::max(1.0, std::abs(b)));
    } else {
        CHECK(got == want);
    }
}

// Run file that points at the shipped inputs, with overrides for a quick optimisation.
fs::path small_run_config(const fs::path& dir, const std::string& scenarios = "")
{
    json run = json::parse(read_text_file(kData + "/run.json"));
    for (const char* key : {"components", "scenarios", "economics", "flowsheet"}) {
        run[key] = kData + "/" + run[key].get<std::string>();
    }
    if (!scenarios.empty()) run["scenarios"] = scenarios;
    run["es"]["mu"] = 2;
    run["es"]["lambda"] = 2;
    run["es"]["elite_count"] = 1;
    run["es"]["generations"] = 2;
    run["search"]["max_evaluations"] = 6;
    auto path = dir / "run.json";
    write_text_file(path, run.dump(2));
    return path;
}

}  // namespace

TEST_CASE("design and operating point files round-trip")
{
    const std::array<double, kTrainColumns> p{30.0, 30.0, 20.0};
    auto d = parse_design(read_text_file(kData + "/robust_design.json"), p);
    CHECK(d.columns[0].n_stages == 40);
    CHECK(d.columns[1].feed_stage == 15);
    CHECK(d.columns[2].diameter == 1.0);
    CHECK(d.pressures == p);
    auto again = parse_design(design_json(d), p);
    CHECK(design_key(again) == design_key(d));

    CHECK_THROWS_AS(parse_design(R"({"columns": []})", p), SchemaError);
    CHECK_THROWS_AS(parse_design(R"({"columns": [{"n_stages": 10}]})", p), SchemaError);
    CHECK_THROWS_AS(parse_design("not json", p), SchemaError);

    OperatingPoint op{0.5, 3.25, 5.0, 3.125};
    CHECK(parse_operating_point(operating_point_json(op)) == op);
    CHECK_THROWS_AS(parse_operating_point(R"({"reflux_ratio_c1": 1.0})"), SchemaError);
}

TEST_CASE("output directory precedence")
{
    ::setenv("DISTOPT_OUT", "/tmp/from_env", 1);
    CHECK(resolve_output_dir("/tmp/from_flag") == fs::path("/tmp/from_flag"));
    CHECK(resolve_output_dir("") == fs::path("/tmp/from_env"));
    ::unsetenv("DISTOPT_OUT");
    CHECK(resolve_output_dir("") == fs::path("distopt_out"));
}

TEST_CASE("workers default to the core count, capped")
{
    auto w = default_workers();
    CHECK(w >= 1);
    CHECK(w <= 8);
}

TEST_CASE("simulate reproduces the golden robust base case")
{
    auto dir = scratch_dir("simulate");
    auto r = cli({"simulate", "--design", kData + "/robust_design.json", "--scenario", "base", "--operating-point",
                  kData + "/robust_operating_point.json", "--config", kData + "/run.json", "--out", dir.string()});
    REQUIRE(r.code == 0);
    auto got = json::parse(read_text_file(dir / OutputLayout::simulation));
    auto want = json::parse(read_text_file(kGolden + "/robust_base_simulation.json"));
    compare_json(got, want, 1e-9);
    CHECK(got.at("mass_balance_residual").get<double>() < 1e-6);

    auto table = read_text_file(kGolden + "/robust_base_stream_table.txt");
    auto first_rows = [](const std::string& s) { return s.substr(0, s.find("w acetone")); };
    CHECK(first_rows(r.out) == first_rows(table));
    CHECK(r.out.find("mass balance closure") != std::string::npos);
}

TEST_CASE("simulate input errors map to exit code 2")
{
    auto dir = scratch_dir("simulate_errors");
    const std::vector<std::string> common{"--operating-point", kData + "/robust_operating_point.json", "--out",
                                          dir.string()};
    auto with = [&](std::vector<std::string> a) {
        a.insert(a.end(), common.begin(), common.end());
        return cli(a);
    };

    auto unknown = with({"simulate", "--design", kData + "/robust_design.json", "--scenario", "sc9", "--config",
                         kData + "/run.json"});
    CHECK(unknown.code == 2);
    CHECK(unknown.err.find("sc9") != std::string::npos);

    auto missing_path = (dir / "nowhere" / "scenarios.json").string();
    auto missing = with({"simulate", "--design", kData + "/robust_design.json", "--scenario", "base", "--config",
                         small_run_config(dir, missing_path).string()});
    CHECK(missing.code == 2);
    CHECK(missing.err.find(missing_path) != std::string::npos);

    auto bad_design = dir / "bad_design.json";
    write_text_file(bad_design, R"({"columns": [
        {"n_stages": 20, "feed_stage": 25, "diameter_m": 1.0},
        {"n_stages": 25, "feed_stage": 15, "diameter_m": 0.7},
        {"n_stages": 60, "feed_stage": 30, "diameter_m": 1.0}]})");
    auto feed_high = with({"simulate", "--design", bad_design.string(), "--scenario", "base", "--config",
                           kData + "/run.json"});
    CHECK(feed_high.code == 2);

    auto no_args = cli({"simulate"});
    CHECK(no_args.code == 2);
}

TEST_CASE("evaluate writes an identical report on every run")
{
    auto a = scratch_dir("evaluate_a"), b = scratch_dir("evaluate_b");
    auto ra = cli({"evaluate", "--design", kData + "/robust_design.json", "--config", kData + "/run.json", "--out",
                   a.string()});
    auto rb = cli({"evaluate", "--design", kData + "/robust_design.json", "--config", kData + "/run.json", "--out",
                   b.string()});
    REQUIRE(ra.code == 0);
    REQUIRE(rb.code == 0);
    CHECK(read_text_file(a / OutputLayout::evaluation) == read_text_file(b / OutputLayout::evaluation));
    CHECK(ra.out == rb.out);

    std::istringstream lines(ra.out);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(lines, line)) rows.push_back(line);
    REQUIRE(rows.size() == 9);  // header, 7 scenarios, mean
    CHECK(rows[1].rfind("base", 0) == 0);
    CHECK(rows[7].rfind("sc6", 0) == 0);
    CHECK(rows[8].rfind("mean", 0) == 0);

    auto report = json::parse(read_text_file(a / OutputLayout::evaluation));
    CHECK(report.at("scenarios").size() == 7);
}

TEST_CASE("optimize is deterministic, resumable and guards its checkpoint")
{
    auto dir = scratch_dir("optimize");
    auto config = small_run_config(dir).string();
    auto first = dir / "first", second = dir / "second", staged = dir / "staged";

    auto r1 = cli({"optimize", "--config", config, "--seed", "5", "--workers", "1", "--out", first.string()});
    REQUIRE(r1.code == 0);
    for (const char* f : {OutputLayout::manifest, OutputLayout::completion, OutputLayout::trace, OutputLayout::report,
                          OutputLayout::checkpoint}) {
        CHECK(fs::exists(first / f));
    }
    auto r2 = cli({"optimize", "--config", config, "--seed", "5", "--workers", "2", "--out", second.string()});
    REQUIRE(r2.code == 0);
    CHECK(read_text_file(first / OutputLayout::trace) == read_text_file(second / OutputLayout::trace));
    CHECK(read_text_file(first / OutputLayout::report) == read_text_file(second / OutputLayout::report));

    auto partial = cli({"optimize", "--config", config, "--seed", "5", "--generations", "1", "--out",
                        staged.string()});
    REQUIRE(partial.code == 0);
    auto manifest = read_text_file(staged / OutputLayout::manifest);
    auto resumed = cli({"optimize", "--config", config, "--seed", "5", "--resume", "--out", staged.string()});
    REQUIRE(resumed.code == 0);
    CHECK(read_text_file(staged / OutputLayout::trace) == read_text_file(first / OutputLayout::trace));
    CHECK(read_text_file(staged / OutputLayout::report) == read_text_file(first / OutputLayout::report));
    CHECK(read_text_file(staged / OutputLayout::manifest) == manifest);

    auto other_seed = cli({"optimize", "--config", config, "--seed", "6", "--resume", "--out", staged.string()});
    CHECK(other_seed.code == 3);

    auto ckpt = json::parse(read_text_file(staged / OutputLayout::checkpoint));
    ckpt["fingerprint"] = "0000";
    write_text_file(staged / OutputLayout::checkpoint, ckpt.dump());
    auto other_config = cli({"optimize", "--config", config, "--seed", "5", "--resume", "--out", staged.string()});
    CHECK(other_config.code == 3);

    auto report = json::parse(read_text_file(first / OutputLayout::report));
    CHECK(report.at("master_seed") == "5");
    CHECK(report.at("generations") == 2);
}

TEST_CASE("bad run files are config errors")
{
    auto dir = scratch_dir("bad_config");
    CHECK(cli({"evaluate", "--design", kData + "/robust_design.json", "--config", (dir / "none.json").string()}).code ==
          2);
    auto broken = dir / "run.json";
    write_text_file(broken, "{\"schema\": \"distopt.run/1\"");
    CHECK(cli({"evaluate", "--design", kData + "/robust_design.json", "--config", broken.string()}).code == 2);
}
