#pragma once

// Feed-composition scenarios and their weights.

#include "distopt/column.hpp"
#include "distopt/thermo.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace distopt {

struct Scenario {
    std::string id;
    double weight = 0.0;
    std::vector<double> raw_mass_percent;     // as listed in the file, component-set order
    std::vector<double> feed_mass_fractions;  // normalised to sum 1
    double feed_mass_flow = 0.0;               // kg/h
};

/// Parses a scenario file. Component names are resolved against `components` and the
/// compositions reordered to its order. Throws SchemaError, CompositionOutOfTolerance.
std::vector<Scenario> parse_scenarios(std::string_view json_text, const ComponentSet& components);
std::vector<Scenario> load_scenarios(const std::filesystem::path& path, const ComponentSet& components);

const Scenario& find_scenario(const std::vector<Scenario>& scenarios, std::string_view id);

/// Molar feed at its bubble point at `pressure` (kPa).
Stream to_feed_stream(const Scenario& s, const ComponentSet& components, double pressure);

std::vector<double> scenario_weights(const std::vector<Scenario>& scenarios);

/// Sum of w_i * profit_i. Throws LengthMismatch.
double weighted_fitness(std::span<const double> profits, std::span<const double> weights);
/// As above with infeasible entries replaced by `penalty`.
double weighted_fitness(std::span<const double> profits, const std::vector<bool>& feasible,
                        std::span<const double> weights, double penalty);

}  // namespace distopt
