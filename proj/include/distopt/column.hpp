#pragma once

// Steady-state equilibrium-stage column under constant molar overflow.
//
// Stage 1 is the top equilibrium stage, stage N the bottom one. The condenser is either
// total (distillate and reflux have the composition of the top vapour) or partial at a
// fixed temperature (top vapour flashed; uncondensed vapour leaves as distillate and the
// condensate is split into reflux and liquid distillate by the reflux ratio). The
// reboiler returns vapour with the composition of the bottoms liquid and is not an
// equilibrium stage. Feeds enter as saturated liquid.

#include "distopt/thermo.hpp"

#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace distopt {

struct Stream {
    double flow = 0.0;                 // kmol/h
    std::vector<double> composition;   // mole fractions, component-set order
    double temperature = 0.0;          // K
    double pressure = 0.0;             // kPa
};

/// Throws InvalidInput unless flow >= 0 and the composition is a valid simplex point.
void validate_stream(const Stream& stream, std::size_t n_components);

/// Component molar flows (kmol/h).
std::vector<double> component_flows(const Stream& stream);
double mass_flow(const ComponentSet& components, const Stream& stream);  // kg/h

struct ColumnDesign {
    int n_stages = 0;    // equilibrium stages, reboiler and condenser excluded
    int feed_stage = 0;  // 1 = top
    double diameter = 0.0;  // m
};

struct TotalCondenser {};
struct PartialCondenser {
    double temperature = 0.0;  // K
};
using Condenser = std::variant<TotalCondenser, PartialCondenser>;

struct DistillateRate {
    double value = 0.0;  // kmol/h, vapour + liquid
};
struct BoilupRatio {
    double value = 0.0;  // reboiler vapour / bottoms
};
struct DistillatePurity {
    std::size_t component = 0;
    double mass_fraction = 0.0;
};
struct ReboilerTemperature {
    double value = 0.0;  // K
};

/// Second specification closing the column's two degrees of freedom next to the reflux ratio.
using ClosingSpec = std::variant<DistillateRate, BoilupRatio, DistillatePurity, ReboilerTemperature>;

struct ColumnOperating {
    double pressure = 0.0;  // kPa, uniform over the column
    Condenser condenser = TotalCondenser{};
    double reflux_ratio = 0.0;  // reflux / liquid distillate
    ClosingSpec closing = DistillateRate{};
};

struct StageState {
    double temperature = 0.0;
    std::vector<double> liquid;
    std::vector<double> vapor;
    double liquid_flow = 0.0;  // leaving the stage, kmol/h
    double vapor_flow = 0.0;
};

enum class ColumnStatus { converged, no_convergence, spec_unattainable };

std::string_view to_string(ColumnStatus status);

struct ColumnSolution {
    ColumnStatus status = ColumnStatus::no_convergence;
    double residual = std::numeric_limits<double>::infinity();
    int sweeps = 0;           // total over all inner solves
    int spec_iterations = 0;  // inner solves spent on the closing spec
    double spec_slope = 0.0;  // d(spec residual)/d ln D at the solution, reused by warm starts
    std::string message;

    Stream distillate;  // combined vapour + liquid distillate
    double distillate_vapor_fraction = 0.0;
    Stream bottoms;
    std::vector<StageState> stages;

    double reflux_flow = 0.0;
    double top_vapor_flow = 0.0;
    double boilup_flow = 0.0;
    double reboiler_duty = 0.0;   // kW
    double condenser_duty = 0.0;  // kW
    double max_f_factor = 0.0;    // Pa^0.5

    bool converged() const { return status == ColumnStatus::converged; }
};

struct ColumnSolverOptions {
    int max_sweeps = 500;
    double tolerance = 1e-9;  // scaled summation / temperature residual
    double damping = 1.0;     // temperature update relaxation
    int acceleration_depth = 5;  // Anderson history length; 0 = plain successive substitution
    int max_spec_iterations = 60;
    double purity_tolerance = 1e-6;       // on logit(purity)
    double temperature_tolerance = 1e-7;  // K, reboiler temperature spec
    bool boilup_retries = true;  // approach a failed boilup spec from nearby values
};

/// Solves the column. Convergence failures and unattainable specs come back as a status,
/// never as an exception; malformed inputs throw InvalidInput. `init` warm-starts the
/// stage profile (and the spec search) when its stage count matches.
ColumnSolution solve_column(const ComponentSet& components, const ColumnDesign& design,
                            const ColumnOperating& op, const Stream& feed,
                            const ColumnSolution* init = nullptr,
                            const ColumnSolverOptions& options = {});

/// F = u_G sqrt(rho_G).
double f_factor(double gas_velocity, double gas_density);

/// F-factor of a vapour flow (kmol/h) of composition y at T (K), P (kPa) in a column of
/// the given diameter (m), ideal-gas density.
double f_factor(const ComponentSet& components, double vapor_flow, std::span<const double> y,
                double temperature, double pressure, double diameter);

}  // namespace distopt
