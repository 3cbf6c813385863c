#include "distopt/economics.hpp"

#include "distopt/errors.hpp"
#include "distopt/util.hpp"

#include <json.hpp>

#include <cmath>
#include <numbers>

namespace distopt {

void validate(const EconParams& e)
{
    auto nonneg = [](double v, const char* what) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw SchemaError(std::string("economics: ") + what + " must be >= 0");
    };
    nonneg(e.price_product, "price_product");
    nonneg(e.cost_waste, "cost_waste");
    nonneg(e.steam_tariff, "steam_tariff");
    nonneg(e.cooling_tariff, "cooling_tariff");
    nonneg(e.packing_cost, "packing_cost");
    nonneg(e.shell.base_cost, "shell.base_cost");
    if (!(e.lang_factor > 0.0)) throw SchemaError("economics: lang_factor must be > 0");
    if (!(e.depreciation_years > 0.0)) throw SchemaError("economics: depreciation_years must be > 0");
    if (!(e.operating_hours > 0.0 && e.operating_hours <= 8784.0)) {
        throw SchemaError("economics: operating_hours must lie in (0, 8784]");
    }
    if (!(e.stage_height > 0.0)) throw SchemaError("economics: stage_height must be > 0");
    if (!(e.shell.reference_diameter > 0.0 && e.shell.reference_height > 0.0)) {
        throw SchemaError("economics: shell reference size must be > 0");
    }
}

EconParams parse_econ_params(std::string_view json_text)
{
    EconParams e;
    try {
        auto j = nlohmann::json::parse(json_text);
        e.price_product = j.at("price_product_eur_kg").get<double>();
        e.cost_waste = j.at("cost_waste_eur_kg").get<double>();
        e.steam_tariff = j.at("steam_tariff_eur_kwh").get<double>();
        e.cooling_tariff = j.at("cooling_tariff_eur_kwh").get<double>();
        e.lang_factor = j.at("lang_factor").get<double>();
        e.depreciation_years = j.value("depreciation_years", 10.0);
        e.operating_hours = j.at("operating_hours").get<double>();
        e.stage_height = j.value("stage_height_m", 0.5);
        const auto& s = j.at("shell");
        e.shell.base_cost = s.at("base_cost_eur").get<double>();
        e.shell.reference_diameter = s.at("reference_diameter_m").get<double>();
        e.shell.reference_height = s.at("reference_height_m").get<double>();
        e.shell.diameter_exponent = s.at("diameter_exponent").get<double>();
        e.shell.height_exponent = s.at("height_exponent").get<double>();
        e.packing_cost = j.at("packing_cost_eur_m3").get<double>();
    } catch (const nlohmann::json::exception& ex) {
        throw SchemaError(std::string("economics: ") + ex.what());
    }
    validate(e);
    return e;
}

EconParams load_econ_params(const std::filesystem::path& path)
{
    auto text = read_text_file(path);
    auto e = parse_econ_params(text);
    log_line("economics " + path.string() + " checksum " + checksum_hex(text));
    return e;
}

double column_equipment_cost(const ColumnDesign& column, const EconParams& econ)
{
    double height = column.n_stages * econ.stage_height;
    const auto& s = econ.shell;
    double shell = s.base_cost * std::pow(column.diameter / s.reference_diameter, s.diameter_exponent) *
                   std::pow(height / s.reference_height, s.height_exponent);
    double volume = std::numbers::pi / 4.0 * column.diameter * column.diameter * height;
    return shell + econ.packing_cost * volume;
}

double investment_cost(const TrainDesign& design, const EconParams& econ)
{
    double equipment = 0.0;
    for (const auto& c : design.columns) equipment += column_equipment_cost(c, econ);
    return econ.lang_factor * equipment;
}

double utility_cost(const TrainSolution& sol, const EconParams& econ)
{
    return (econ.steam_tariff * sol.total_reboiler_duty + econ.cooling_tariff * sol.total_condenser_duty) *
           econ.operating_hours;
}

ProfitBreakdown profit_breakdown(const ComponentSet& components, const TrainSolution& sol,
                                 const TrainDesign& design, const EconParams& econ)
{
    if (!sol.feasible) {
        throw InfeasibleSolution("profit requested for an unconverged train: " + sol.diagnostics);
    }
    ProfitBreakdown b;
    double hours = econ.operating_hours;
    b.waste_mass_flow = mass_flow(components, sol.waste_heavy) + mass_flow(components, sol.waste_light);
    b.revenue = econ.price_product * mass_flow(components, sol.product) * hours;
    b.waste = econ.cost_waste * b.waste_mass_flow * hours;
    b.utilities = utility_cost(sol, econ);
    b.depreciation = investment_cost(design, econ) / econ.depreciation_years;
    b.profit = b.revenue - b.waste - b.utilities - b.depreciation;
    return b;
}

double annual_profit(const ComponentSet& components, const TrainSolution& sol, const TrainDesign& design,
                     const EconParams& econ)
{
    return profit_breakdown(components, sol, design, econ).profit;
}

}  // namespace distopt
