#pragma once

// Command-line front end: optimize, evaluate and simulate subcommands plus the JSON
// formats for designs, operating points and reports.

#include "distopt/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace distopt {

enum ExitCode : int { exit_ok = 0, exit_runtime = 1, exit_config = 2, exit_resume_mismatch = 3 };

/// Design file: {"columns": [{"n_stages", "feed_stage", "diameter_m"} x 3]}. Pressures
/// come from the flowsheet configuration. Throws SchemaError.
TrainDesign parse_design(std::string_view json_text, const std::array<double, kTrainColumns>& pressures);
std::string design_json(const TrainDesign& design);

/// {"reflux_ratio_c1", "boilup_ratio_c2", "reflux_ratio_c2", "reflux_ratio_c3"}.
OperatingPoint parse_operating_point(std::string_view json_text);
std::string operating_point_json(const OperatingPoint& op);

struct RunManifest {
    std::vector<InputFile> inputs;
    std::uint64_t seed = 0;
    int generations = 0;
    unsigned workers = 1;
    std::string started;  // UTC, ISO 8601
    std::string version;
    std::filesystem::path output_dir;
};

struct OutputLayout {
    static constexpr const char* manifest = "manifest.json";
    static constexpr const char* completion = "completion.json";
    static constexpr const char* trace = "trace.csv";
    static constexpr const char* report = "report.json";
    static constexpr const char* checkpoint = "checkpoint.json";
    static constexpr const char* evaluation = "evaluation.json";
    static constexpr const char* simulation = "simulation.json";
};

std::string manifest_json(const RunManifest& manifest);

/// Per-scenario table of an evaluated design as JSON (machine-readable report).
std::string evaluation_json(const ProblemBundle& problem, const TrainDesign& design, const Evaluation& eval);
std::string evaluation_table(const ProblemBundle& problem, const Evaluation& eval);

/// Largest per-component |in - out| over the train, divided by the feed molar flow.
double mass_balance_residual(const Stream& feed, const TrainSolution& sol);
std::string simulation_json(const ProblemBundle& problem, const Stream& feed, const TrainSolution& sol,
                            const OperatingPoint& op);
std::string stream_table(const ProblemBundle& problem, const Stream& feed, const TrainSolution& sol);

struct OptimizeArgs {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::filesystem::path out;
    std::optional<unsigned> workers;
    bool resume = false;
    std::optional<int> generations;
};

struct EvaluateArgs {
    std::filesystem::path design;
    std::filesystem::path config;
    std::filesystem::path out;
};

struct SimulateArgs {
    std::filesystem::path design;
    std::string scenario;
    std::filesystem::path operating_point;
    std::filesystem::path config;
    std::filesystem::path out;
};

int cmd_optimize(const OptimizeArgs& args, std::ostream& out, std::ostream& err);
int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);

unsigned default_workers();
/// --out wins, then DISTOPT_OUT, then ./distopt_out.
std::filesystem::path resolve_output_dir(const std::string& flag);

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace distopt
