#pragma once

// The two-stage problem: a design is scored by optimising the operating point separately
// for every scenario and averaging the profits with the scenario weights.

#include "distopt/economics.hpp"
#include "distopt/evolution.hpp"
#include "distopt/flowsheet.hpp"
#include "distopt/localsearch.hpp"
#include "distopt/scenarios.hpp"

#include <vector>

namespace distopt {

struct ProblemBundle {
    ComponentSet components;
    std::vector<Scenario> scenarios;
    EconParams econ;
    FlowsheetConfig flowsheet;
    SearchConfig search;
    TrainBounds bounds;
    double penalty_profit = -1e8;
};

std::vector<Stream> scenario_feeds(const ProblemBundle& problem);

/// Staged initialisation on the first scenario, then the per-scenario searches chained
/// through their optima. Initialisation failure yields the penalty for every scenario.
Evaluation evaluate_design(const ProblemBundle& problem, const TrainDesign& design);

DesignEvaluator make_evaluator(const ProblemBundle& problem);

}  // namespace distopt
