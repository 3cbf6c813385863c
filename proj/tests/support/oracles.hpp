#pragma once

// Independent reference calculations: Antoine vapour pressures, bubble points and
// fixed-vapour-fraction flashes by plain bisection, and a constant-volatility binary.

#include "distopt/thermo.hpp"

#include <cmath>
#include <vector>

namespace distopt::testing {

inline double oracle_psat(const ComponentRecord& c, double t)
{
    return std::pow(10.0, c.antoine.a - c.antoine.b / (t + c.antoine.c));
}

// Plain bisection on sum K x - 1 over a wide bracket.
inline double oracle_bubble(const ComponentSet& cs, const std::vector<double>& x, double p)
{
    auto f = [&](double t) {
        double s = 0.0;
        for (std::size_t i = 0; i < cs.size(); ++i) s += x[i] * oracle_psat(cs[i], t) / p;
        return s - 1.0;
    };
    double lo = 250.0, hi = 700.0;
    for (int k = 0; k < 200; ++k) {
        double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

struct FlashOracle {
    double temperature;
    std::vector<double> x, y;
};

// Flash at a given vapour fraction: bisection on the Rachford-Rice residual in T.
inline FlashOracle beta_flash(const ComponentSet& cs, const std::vector<double>& z, double beta, double p)
{
    auto k = [&](std::size_t i, double t) { return oracle_psat(cs[i], t) / p; };
    auto rr = [&](double t) {
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) s += z[i] * (k(i, t) - 1.0) / (1.0 + beta * (k(i, t) - 1.0));
        return s;
    };
    double lo = 250.0, hi = 700.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (rr(mid) > 0.0 ? hi : lo) = mid;
    }
    FlashOracle o{0.5 * (lo + hi), {}, {}};
    for (std::size_t i = 0; i < z.size(); ++i) {
        double ki = k(i, o.temperature);
        o.x.push_back(z[i] / (1.0 + beta * (ki - 1.0)));
        o.y.push_back(ki * o.x.back());
    }
    return o;
}

// Binary with a constant relative volatility of 2.5.
inline ComponentSet alpha_binary()
{
    ComponentRecord light{"light", 80.0, 0.0, {6.0 + std::log10(2.5), 1500.0, -50.0, 200.0, 700.0},
                          30000.0, 800.0, BoilingClass::low, false};
    ComponentRecord heavy{"heavy", 80.0, 0.0, {6.0, 1500.0, -50.0, 200.0, 700.0}, 30000.0, 800.0,
                          BoilingClass::high, true};
    return ComponentSet({light, heavy});
}

}  // namespace distopt::testing
