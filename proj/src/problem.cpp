#include "distopt/problem.hpp"

#include "distopt/errors.hpp"

namespace distopt {

std::vector<Stream> scenario_feeds(const ProblemBundle& p)
{
    std::vector<Stream> feeds;
    feeds.reserve(p.scenarios.size());
    for (const auto& s : p.scenarios) feeds.push_back(to_feed_stream(s, p.components, p.flowsheet.pressures[0]));
    return feeds;
}

Evaluation evaluate_design(const ProblemBundle& p, const TrainDesign& design)
{
    validate_design(design, p.bounds);
    Evaluation eval;
    auto feeds = scenario_feeds(p);
    auto weights = scenario_weights(p.scenarios);
    std::size_t n = p.scenarios.size();

    ColumnMemo memo;
    OperatingPoint x0;
    OperatingPoint cold_start;
    TrainWarmStart warm;
    try {
        auto init = initialize_train(p.components, design, feeds.front(), p.flowsheet);
        x0 = init.start;
        cold_start = init.start;
        warm = std::move(init.warm);
    } catch (const InitializationFailed& e) {
        eval.fitness = p.penalty_profit;
        eval.per_scenario.assign(n, SearchResult{});
        for (auto& r : eval.per_scenario) r.message = e.what();
        eval.diagnostics = e.what();
        return eval;
    }

    FlowsheetConfig trial_flowsheet = p.flowsheet;
    trial_flowsheet.solver.boilup_retries = false;
    std::vector<double> profits(n, 0.0);
    std::vector<bool> feasible(n, false);
    SearchConfig chained = p.search;
    chained.initial_step = p.search.chained_initial_step;
    bool handed_over = false;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t same = 0;
        while (same < i && !(feeds[same].flow == feeds[i].flow && feeds[same].composition == feeds[i].composition &&
                             feeds[same].temperature == feeds[i].temperature)) {
            ++same;
        }
        if (same < i) {
            profits[i] = profits[same];
            feasible[i] = feasible[same];
            eval.per_scenario.push_back(eval.per_scenario[same]);
            continue;
        }
        OperatingProblem op{p.components, trial_flowsheet, p.econ, design, feeds[i], &memo, &warm};
        auto r = optimize_operating(op, handed_over ? chained : p.search, x0);
        if (!r.feasible && handed_over && r.evaluations_used < p.search.max_evaluations) {
            SearchConfig rest = p.search;
            rest.max_evaluations = p.search.max_evaluations - r.evaluations_used;
            auto again = optimize_operating(op, rest, cold_start);
            again.evaluations_used += r.evaluations_used;
            r = std::move(again);
        }
        eval.simulator_calls += static_cast<std::size_t>(r.evaluations_used);
        profits[i] = r.best_profit;
        feasible[i] = r.feasible;
        if (r.feasible) {
            x0 = r.best_point;
            handed_over = true;
        }
        eval.per_scenario.push_back(std::move(r));
    }
    eval.fitness = weighted_fitness(profits, feasible, weights, p.penalty_profit);
    return eval;
}

DesignEvaluator make_evaluator(const ProblemBundle& problem)
{
    return [&problem](const TrainDesign& design) { return evaluate_design(problem, design); };
}

}  // namespace distopt
