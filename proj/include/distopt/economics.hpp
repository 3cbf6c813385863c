#pragma once

// Annual profit: product revenue minus waste disposal, utilities and straight-line
// depreciation of the Lang-factor fixed capital.

#include "distopt/flowsheet.hpp"

#include <filesystem>
#include <string_view>

namespace distopt {

/// Shell cost = base * (d / d_ref)^diameter_exponent * (h / h_ref)^height_exponent.
struct ShellCorrelation {
    double base_cost = 0.0;  // EUR at the reference size
    double reference_diameter = 1.0;  // m
    double reference_height = 1.0;    // m
    double diameter_exponent = 1.0;
    double height_exponent = 1.0;
};

struct EconParams {
    double price_product = 0.0;    // EUR/kg
    double cost_waste = 0.0;       // EUR/kg
    double steam_tariff = 0.0;     // EUR/kWh of reboiler duty
    double cooling_tariff = 0.0;   // EUR/kWh of condenser duty
    double lang_factor = 1.0;
    double depreciation_years = 10.0;
    double operating_hours = 8000.0;  // h/y
    double stage_height = 0.5;        // m of packing per equilibrium stage
    ShellCorrelation shell;
    double packing_cost = 0.0;  // EUR per m3 of packed volume
};

/// Throws SchemaError when a price is negative or hours/years are out of range.
void validate(const EconParams& econ);
EconParams parse_econ_params(std::string_view json_text);
EconParams load_econ_params(const std::filesystem::path& path);

double column_equipment_cost(const ColumnDesign& column, const EconParams& econ);
/// Fixed capital in EUR: Lang factor times the summed shell and packing costs.
double investment_cost(const TrainDesign& design, const EconParams& econ);
/// EUR/y.
double utility_cost(const TrainSolution& sol, const EconParams& econ);

struct ProfitBreakdown {
    double revenue = 0.0;
    double waste = 0.0;
    double utilities = 0.0;
    double depreciation = 0.0;
    double profit = 0.0;
    double waste_mass_flow = 0.0;  // kg/h
};

/// Throws InfeasibleSolution for a solution that did not converge.
ProfitBreakdown profit_breakdown(const ComponentSet& components, const TrainSolution& sol,
                                 const TrainDesign& design, const EconParams& econ);
double annual_profit(const ComponentSet& components, const TrainSolution& sol,
                     const TrainDesign& design, const EconParams& econ);

}  // namespace distopt
