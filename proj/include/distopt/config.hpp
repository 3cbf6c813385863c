#pragma once

// Run configuration: one run file naming the component, scenario, economics and
// flowsheet files (paths relative to the run file) plus the ES and search sections.

#include "distopt/evolution.hpp"
#include "distopt/problem.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace distopt {

struct FlowsheetFile {
    FlowsheetConfig flowsheet;
    TrainBounds bounds;
};

FlowsheetFile parse_flowsheet_config(std::string_view json_text);
ESConfig parse_es_config(std::string_view json_text);      // the "es" object
SearchConfig parse_search_config(std::string_view json_text);  // the "search" object

struct InputFile {
    std::filesystem::path path;
    std::string checksum;
};

struct RunConfig {
    std::filesystem::path file;
    std::vector<InputFile> inputs;  // run file first
    ESConfig es;
    std::shared_ptr<const ProblemBundle> problem;
    /// Checksum over all input files; a checkpoint only resumes under the same value.
    std::string fingerprint;
};

/// Throws SchemaError (missing or malformed files name the offending path).
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace distopt
