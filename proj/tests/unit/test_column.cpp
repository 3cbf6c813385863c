#include <catch_amalgamated.hpp>

#include "distopt/column.hpp"
#include "distopt/errors.hpp"
#include "distopt/thermo.hpp"

#include "../support/oracles.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

using namespace distopt;
using Catch::Approx;
using testing::beta_flash;

namespace {

const ComponentSet& components()
{
    static const ComponentSet set = load_components(DISTOPT_DATA_DIR "/components.json");
    return set;
}

Stream base_feed(double pressure)
{
    const auto& cs = components();
    std::vector<double> w = {2.0, 1.0, 3.0, 7.9, 6.9, 4.9, 14.8, 29.6, 24.7, 4.9};
    double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& v : w) v /= s;
    auto x = mass_to_mole_fractions(cs, w);
    Stream f{1000.0 / mean_molar_mass(cs, x), x, 0.0, pressure};
    f.temperature = bubble_point(cs, x, pressure).temperature;
    return f;
}

double max_balance_error(const Stream& feed, const ColumnSolution& s)
{
    auto f = component_flows(feed), d = component_flows(s.distillate), b = component_flows(s.bottoms);
    double e = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) e = std::max(e, std::abs(f[i] - d[i] - b[i]));
    return e / feed.flow;
}

}  // namespace

TEST_CASE("one stage without reflux is a flash")
{
    const auto& cs = components();
    auto feed = base_feed(30.0);
    feed.flow = 10.0;
    for (double d : {1.0, 4.0, 8.5}) {
        ColumnOperating op{30.0, TotalCondenser{}, 0.0, DistillateRate{d}};
        auto s = solve_column(cs, ColumnDesign{1, 1, 1.0}, op, feed);
        REQUIRE(s.converged());
        auto o = beta_flash(cs, feed.composition, d / feed.flow, 30.0);
        CHECK(s.bottoms.temperature == Approx(o.temperature).margin(1e-6));
        for (std::size_t i = 0; i < cs.size(); ++i) {
            CHECK(s.bottoms.composition[i] == Approx(o.x[i]).margin(1e-6));
            CHECK(s.distillate.composition[i] == Approx(o.y[i]).margin(1e-6));
        }
    }
}

TEST_CASE("total reflux on a constant-volatility binary follows Fenske")
{
    auto cs = testing::alpha_binary();
    std::vector<double> z{0.5, 0.5};
    Stream feed{100.0, z, bubble_point(cs, z, 50.0).temperature, 50.0};
    for (int n : {5, 10, 20}) {
        ColumnOperating op{50.0, TotalCondenser{}, 1e5, DistillateRate{50.0}};
        auto s = solve_column(cs, ColumnDesign{n, n / 2, 1.0}, op, feed);
        REQUIRE(s.converged());
        double xd = s.distillate.composition[0], xb = s.bottoms.composition[0];
        double fenske = std::log(xd / (1.0 - xd) * (1.0 - xb) / xb) / std::log(2.5);
        CHECK(fenske == Approx(n).epsilon(0.05));
    }
}

TEST_CASE("closing specifications are met")
{
    const auto& cs = components();
    auto feed = base_feed(30.0);
    ColumnDesign design{30, 15, 1.0};

    SECTION("boilup ratio")
    {
        ColumnOperating op{30.0, PartialCondenser{318.15}, 2.0, BoilupRatio{1.5}};
        auto s = solve_column(cs, design, op, feed);
        REQUIRE(s.converged());
        CHECK(s.boilup_flow / s.bottoms.flow == Approx(1.5).epsilon(1e-9));
        CHECK(s.distillate.temperature == Approx(318.15));
        CHECK(max_balance_error(feed, s) < 1e-9);
    }
    SECTION("reboiler temperature")
    {
        ColumnOperating op{30.0, PartialCondenser{318.15}, 1.0, ReboilerTemperature{468.15}};
        auto s = solve_column(cs, design, op, feed);
        REQUIRE(s.converged());
        CHECK(s.bottoms.temperature == Approx(468.15).margin(1e-6));
        CHECK(max_balance_error(feed, s) < 1e-9);
    }
    SECTION("distillate purity")
    {
        auto b = testing::alpha_binary();
        std::vector<double> z{0.4, 0.6};
        Stream bf{100.0, z, bubble_point(b, z, 50.0).temperature, 50.0};
        ColumnOperating op{50.0, TotalCondenser{}, 3.0, DistillatePurity{0, 0.95}};
        auto s = solve_column(b, ColumnDesign{20, 10, 1.0}, op, bf);
        REQUIRE(s.converged());
        CHECK(mole_to_mass_fractions(b, s.distillate.composition)[0] == Approx(0.95).epsilon(1e-6));
    }
    SECTION("unreachable purity")
    {
        auto b = testing::alpha_binary();
        std::vector<double> z{0.4, 0.6};
        Stream bf{100.0, z, bubble_point(b, z, 50.0).temperature, 50.0};
        ColumnOperating op{50.0, TotalCondenser{}, 0.2, DistillatePurity{0, 0.999999}};
        auto s = solve_column(b, ColumnDesign{3, 2, 1.0}, op, bf);
        CHECK(s.status == ColumnStatus::spec_unattainable);
    }
}

TEST_CASE("warm start reproduces the solution with fewer sweeps")
{
    const auto& cs = components();
    auto feed = base_feed(30.0);
    ColumnOperating op{30.0, PartialCondenser{318.15}, 1.5, ReboilerTemperature{468.15}};
    auto cold = solve_column(cs, ColumnDesign{40, 20, 1.0}, op, feed);
    REQUIRE(cold.converged());
    auto warm = solve_column(cs, ColumnDesign{40, 20, 1.0}, op, feed, &cold);
    REQUIRE(warm.converged());
    CHECK(warm.sweeps < cold.sweeps);
    CHECK(warm.distillate.flow == Approx(cold.distillate.flow).epsilon(1e-7));
}

TEST_CASE("F-factor by hand")
{
    CHECK(f_factor(2.0, 0.25) == Approx(1.0));
    const auto& cs = components();
    std::vector<double> y(cs.size(), 0.0);
    y[cs.index_of("water")] = 1.0;
    // 36 kmol/h of water vapour at 300 K, 10 kPa, in a 1 m column
    double rho = 10.0e3 * 18.015 / (8314.462618 * 300.0);
    double q = 36.0 / 3600.0 * 8314.462618 * 300.0 / 10.0e3;
    double u = q / (std::numbers::pi / 4.0);
    CHECK(f_factor(cs, 36.0, y, 300.0, 10.0, 1.0) == Approx(u * std::sqrt(rho)).epsilon(1e-4));
}

TEST_CASE("invalid column inputs")
{
    const auto& cs = components();
    auto feed = base_feed(30.0);
    ColumnOperating op{30.0, TotalCondenser{}, 1.0, DistillateRate{1.0}};
    CHECK_THROWS_AS(solve_column(cs, ColumnDesign{10, 11, 1.0}, op, feed), InvalidInput);
    CHECK_THROWS_AS(solve_column(cs, ColumnDesign{0, 0, 1.0}, op, feed), InvalidInput);
    CHECK_THROWS_AS(solve_column(cs, ColumnDesign{10, 5, 0.0}, op, feed), InvalidInput);
    ColumnOperating bad_p{-1.0, TotalCondenser{}, 1.0, DistillateRate{1.0}};
    CHECK_THROWS_AS(solve_column(cs, ColumnDesign{10, 5, 1.0}, bad_p, feed), NonPositivePressure);
    ColumnOperating bad_d{30.0, TotalCondenser{}, 1.0, DistillateRate{feed.flow * 2.0}};
    CHECK_THROWS_AS(solve_column(cs, ColumnDesign{10, 5, 1.0}, bad_d, feed), InvalidInput);
    Stream broken = feed;
    broken.composition[0] += 0.5;
    CHECK_THROWS_AS(solve_column(cs, ColumnDesign{10, 5, 1.0}, op, broken), InvalidInput);
}
