#pragma once

// Bounded derivative-free search over the operating point of one scenario. Constraints
// enter as an exact penalty; a feasible point always ranks above an infeasible one.

#include "distopt/economics.hpp"
#include "distopt/flowsheet.hpp"

#include <array>
#include <functional>
#include <vector>

namespace distopt {

struct SearchConfig {
    std::array<Interval, 4> bounds{{{0.1, 20.0}, {0.05, 20.0}, {0.1, 50.0}, {0.1, 30.0}}};
    bool log_scale = true;        // search in log x
    int max_evaluations = 200;    // simulator calls
    double initial_step = 0.05;   // fraction of the (log) range
    double chained_initial_step = 0.02;  // for a start handed over from the previous scenario
    double step_tolerance = 1e-3;
    double objective_tolerance = 1.0;  // EUR/y; smaller gains do not count as progress
    double purity_tolerance = 1e-6;
    double f_factor_tolerance = 1e-6;
    double temperature_tolerance = 1e-6;
    double purity_penalty = 1e10;      // EUR/y per unit wt fraction
    double f_factor_penalty = 1e9;     // EUR/y per Pa^0.5
    double temperature_penalty = 1e8;  // EUR/y per K
};

/// Throws SchemaError for non-finite or inverted bounds and non-positive tolerances.
void validate(const SearchConfig& cfg);

struct SearchResult {
    OperatingPoint best_point;
    double best_profit = 0.0;
    bool feasible = false;
    int evaluations_used = 0;
    std::vector<SpecViolation> constraint_residuals;
    std::string message;
};

struct TrialOutcome {
    bool converged = false;
    double profit = 0.0;
    std::vector<SpecViolation> violations;
};

using TrialFunction = std::function<TrialOutcome(const OperatingPoint&)>;

/// Compass search with step halving. The trial function is never called outside the box
/// (a wrapper assertion throws std::logic_error if it would be).
SearchResult pattern_search(const TrialFunction& trial, const SearchConfig& cfg, const OperatingPoint& x0);

/// Everything needed to score an operating point of one design on one scenario feed.
struct OperatingProblem {
    const ComponentSet& components;
    const FlowsheetConfig& flowsheet;
    const EconParams& econ;
    const TrainDesign& design;
    const Stream& feed;
    ColumnMemo* memo = nullptr;  // shared warm starts across trials and scenarios
    const TrainWarmStart* warm = nullptr;  // used while the memo is still empty
};

TrialOutcome score_operating_point(const OperatingProblem& problem, const OperatingPoint& op);

SearchResult optimize_operating(const OperatingProblem& problem, const SearchConfig& cfg,
                                const OperatingPoint& x0);

}  // namespace distopt
