#include <catch_amalgamated.hpp>

#include "distopt/errors.hpp"
#include "distopt/thermo.hpp"

#include "../support/oracles.hpp"

#include <cmath>
#include <numeric>
#include <random>

using namespace distopt;
using Catch::Approx;
using testing::oracle_bubble;
using testing::oracle_psat;

namespace {

const ComponentSet& components()
{
    static const ComponentSet set = load_components(DISTOPT_DATA_DIR "/components.json");
    return set;
}

}  // namespace

TEST_CASE("water vapour pressure against steam-table values")
{
    const auto& water = components()[components().index_of("water")];
    // saturation pressures of water (kPa)
    CHECK(psat(water, 373.15) == Approx(101.42).epsilon(0.005));
    CHECK(psat(water, 353.15) == Approx(47.414).epsilon(0.005));
    CHECK(saturation_temperature(water, 101.325) == Approx(373.12).margin(0.1));
}

TEST_CASE("sets derived from the boiling point reproduce it")
{
    for (const char* name : {"indole", "o-toluidine", "p-toluidine"}) {
        const auto& c = components()[components().index_of(name)];
        CHECK(psat(c, c.normal_boiling_point) == Approx(101.325).epsilon(1e-4));
    }
}

TEST_CASE("psat outside the declared range throws")
{
    const auto& c = components()[0];
    CHECK_THROWS_AS(psat(c, c.antoine.t_max + 1.0), TemperatureOutOfRange);
    CHECK_THROWS_AS(psat(c, c.antoine.t_min - 1.0), TemperatureOutOfRange);
}

TEST_CASE("k value is psat over pressure")
{
    const auto& c = components()[components().product_index()];
    CHECK(k_value(c, 420.0, 30.0) == Approx(oracle_psat(c, 420.0) / 30.0).epsilon(1e-12));
    CHECK(c.name == "aniline");
}

TEST_CASE("bubble point agrees with a bisection oracle on random mixtures")
{
    const auto& cs = components();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> pressure(10.0, 101.325);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(cs.size());
        for (auto& v : x) v = -std::log(u(rng) + 1e-300);
        double s = std::accumulate(x.begin(), x.end(), 0.0);
        for (auto& v : x) v /= s;
        double p = pressure(rng);
        auto bp = bubble_point(cs, x, p);
        worst = std::max(worst, std::abs(bp.temperature - oracle_bubble(cs, x, p)));
        double ysum = std::accumulate(bp.vapor.begin(), bp.vapor.end(), 0.0);
        CHECK(ysum == Approx(1.0).margin(1e-9));
    }
    CHECK(worst < 0.01);
}

TEST_CASE("pure component bubble point is the saturation temperature")
{
    const auto& cs = components();
    std::vector<double> x(cs.size(), 0.0);
    x[cs.product_index()] = 1.0;
    auto bp = bubble_point(cs, x, 30.0);
    CHECK(bp.temperature == Approx(saturation_temperature(cs[cs.product_index()], 30.0)).margin(1e-6));
}

TEST_CASE("flash closes the balance and the equilibrium relation")
{
    const auto& cs = components();
    std::vector<double> z(cs.size(), 1.0 / static_cast<double>(cs.size()));
    double tb = bubble_point(cs, z, 30.0).temperature;
    auto fl = isothermal_flash(cs, z, tb + 40.0, 30.0);
    REQUIRE(fl.vapor_fraction > 0.0);
    REQUIRE(fl.vapor_fraction < 1.0);
    for (std::size_t i = 0; i < cs.size(); ++i) {
        CHECK(fl.vapor_fraction * fl.vapor[i] + (1.0 - fl.vapor_fraction) * fl.liquid[i] ==
              Approx(z[i]).margin(1e-12));
        CHECK(fl.vapor[i] == Approx(k_value(cs[i], tb + 40.0, 30.0) * fl.liquid[i]).epsilon(1e-9).margin(1e-14));
    }

    auto sub = isothermal_flash(cs, z, tb - 5.0, 30.0);
    CHECK(sub.vapor_fraction == 0.0);
    for (std::size_t i = 0; i < cs.size(); ++i) CHECK(sub.liquid[i] == Approx(z[i]));
}

TEST_CASE("mass and mole fractions round-trip")
{
    const auto& cs = components();
    std::vector<double> w(cs.size());
    std::iota(w.begin(), w.end(), 1.0);
    double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& v : w) v /= s;
    auto back = mole_to_mass_fractions(cs, mass_to_mole_fractions(cs, w));
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(back[i] == Approx(w[i]).epsilon(1e-12));
}

TEST_CASE("component file errors")
{
    CHECK_THROWS_AS(parse_components("{}"), SchemaError);
    CHECK_THROWS_AS(parse_components("not json"), SchemaError);
    CHECK_THROWS_AS(components().index_of("benzene"), InvalidInput);
    CHECK(components().find("water").has_value());
}

TEST_CASE("boiling classes")
{
    CHECK(parse_boiling_class("mid") == BoilingClass::mid);
    CHECK(to_string(BoilingClass::high) == "high");
    CHECK_THROWS(parse_boiling_class("medium"));
}
