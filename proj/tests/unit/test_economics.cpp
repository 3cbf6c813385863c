#include <catch_amalgamated.hpp>

#include "distopt/economics.hpp"
#include "distopt/errors.hpp"
#include "distopt/util.hpp"

#include <cmath>
#include <numbers>

using namespace distopt;
using Catch::Approx;

namespace {

const ComponentSet& components()
{
    static const ComponentSet set = load_components(DISTOPT_DATA_DIR "/components.json");
    return set;
}

EconParams simple()
{
    EconParams e;
    e.price_product = 2.0;
    e.cost_waste = 0.5;
    e.steam_tariff = 0.04;
    e.cooling_tariff = 0.01;
    e.lang_factor = 4.0;
    e.depreciation_years = 10.0;
    e.operating_hours = 8000.0;
    e.stage_height = 0.5;
    e.shell = {10000.0, 1.0, 10.0, 1.0, 1.0};
    e.packing_cost = 1000.0;
    return e;
}

Stream pure(const std::string& name, double kmol_h)
{
    Stream s;
    s.flow = kmol_h;
    s.composition.assign(components().size(), 0.0);
    s.composition[components().index_of(name)] = 1.0;
    return s;
}

TrainSolution fake_solution()
{
    TrainSolution sol;
    sol.feasible = true;
    sol.product = pure("aniline", 3.0);        // 279.39 kg/h
    sol.waste_heavy = pure("indole", 1.0);     // 117.15 kg/h
    sol.waste_light = pure("water", 2.0);      // 36.03 kg/h
    sol.midboiler_out = pure("p-toluidine", 1.0);
    sol.total_reboiler_duty = 500.0;
    sol.total_condenser_duty = 400.0;
    return sol;
}

TrainDesign two_small_columns()
{
    TrainDesign d;
    d.columns = {ColumnDesign{20, 10, 1.0}, ColumnDesign{20, 10, 1.0}, ColumnDesign{40, 20, 2.0}};
    return d;
}

}  // namespace

TEST_CASE("equipment cost by hand")
{
    auto e = simple();
    // 20 stages -> 10 m: shell at the reference size plus pi/4 * 1 * 10 m3 of packing
    CHECK(column_equipment_cost(ColumnDesign{20, 10, 1.0}, e) == Approx(10000.0 + 1000.0 * std::numbers::pi * 2.5));
    // 40 stages, 2 m: shell 10000 * 2 * 2, packing pi/4 * 4 * 20 m3
    CHECK(column_equipment_cost(ColumnDesign{40, 20, 2.0}, e) == Approx(40000.0 + 1000.0 * std::numbers::pi * 20.0));
    double equipment = 2.0 * (10000.0 + 2500.0 * std::numbers::pi) + 40000.0 + 20000.0 * std::numbers::pi;
    CHECK(investment_cost(two_small_columns(), e) == Approx(4.0 * equipment));
}

TEST_CASE("profit breakdown by hand")
{
    auto e = simple();
    auto sol = fake_solution();
    auto b = profit_breakdown(components(), sol, two_small_columns(), e);
    CHECK(b.revenue == Approx(2.0 * 3.0 * 93.13 * 8000.0));
    CHECK(b.waste_mass_flow == Approx(117.15 + 2.0 * 18.015));
    CHECK(b.waste == Approx(0.5 * (117.15 + 36.03) * 8000.0));
    CHECK(b.utilities == Approx((0.04 * 500.0 + 0.01 * 400.0) * 8000.0));
    CHECK(b.depreciation == Approx(investment_cost(two_small_columns(), e) / 10.0));
    CHECK(b.profit == Approx(b.revenue - b.waste - b.utilities - b.depreciation));
    CHECK(annual_profit(components(), sol, two_small_columns(), e) == b.profit);
}

TEST_CASE("waste cost set to zero raises profit by the waste term")
{
    auto e = simple();
    auto sol = fake_solution();
    auto with = profit_breakdown(components(), sol, two_small_columns(), e);
    e.cost_waste = 0.0;
    auto without = profit_breakdown(components(), sol, two_small_columns(), e);
    CHECK(without.profit - with.profit == Approx(with.waste));
    CHECK(without.profit > with.profit);
}

TEST_CASE("unconverged solutions have no profit")
{
    auto sol = fake_solution();
    sol.feasible = false;
    CHECK_THROWS_AS(profit_breakdown(components(), sol, two_small_columns(), simple()), InfeasibleSolution);
}

TEST_CASE("economics file")
{
    auto e = load_econ_params(DISTOPT_DATA_DIR "/economics.json");
    CHECK(e.depreciation_years == 10.0);
    CHECK(e.lang_factor > 1.0);
    CHECK(e.cost_waste > 0.0);

    auto text = read_text_file(DISTOPT_DATA_DIR "/economics.json");
    CHECK_THROWS_AS(parse_econ_params("{\"price_product_eur_kg\": 1.0}"), SchemaError);
    auto negative = text;
    negative.replace(negative.find("\"cost_waste_eur_kg\": 0.65"), 25, "\"cost_waste_eur_kg\": -1.0");
    CHECK_THROWS_AS(parse_econ_params(negative), SchemaError);
}
