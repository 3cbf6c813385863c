#include "distopt/localsearch.hpp"

#include "distopt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace distopt {

void validate(const SearchConfig& cfg)
{
    for (std::size_t j = 0; j < cfg.bounds.size(); ++j) {
        const auto& b = cfg.bounds[j];
        if (!std::isfinite(b.lower) || !std::isfinite(b.upper) || !(b.lower < b.upper)) {
            throw SchemaError(std::string("search: invalid bounds for ") + OperatingPoint::names()[j]);
        }
        if (cfg.log_scale && !(b.lower > 0.0)) {
            throw SchemaError("search: log-scale search needs positive lower bounds");
        }
    }
    if (cfg.max_evaluations < 1) throw SchemaError("search: max_evaluations must be >= 1");
    if (!(cfg.initial_step > 0.0 && cfg.initial_step <= 1.0) ||
        !(cfg.chained_initial_step > 0.0 && cfg.chained_initial_step <= 1.0)) {
        throw SchemaError("search: initial steps must lie in (0, 1]");
    }
    if (!(cfg.step_tolerance > 0.0) || !(cfg.objective_tolerance > 0.0) || !(cfg.purity_tolerance > 0.0) ||
        !(cfg.f_factor_tolerance > 0.0) || !(cfg.temperature_tolerance > 0.0)) {
        throw SchemaError("search: tolerances must be > 0");
    }
    if (!(cfg.purity_penalty >= 0.0 && cfg.f_factor_penalty >= 0.0 && cfg.temperature_penalty >= 0.0)) {
        throw SchemaError("search: penalty weights must be >= 0");
    }
}

namespace {

using Unit = std::array<double, 4>;  // coordinates scaled to [0, 1]

struct Scaling {
    const SearchConfig& cfg;

    double to_unit(std::size_t j, double x) const
    {
        const auto& b = cfg.bounds[j];
        double s = cfg.log_scale ? (std::log(x) - std::log(b.lower)) / (std::log(b.upper) - std::log(b.lower))
                                 : (x - b.lower) / (b.upper - b.lower);
        return std::clamp(s, 0.0, 1.0);
    }

    double from_unit(std::size_t j, double s) const
    {
        const auto& b = cfg.bounds[j];
        if (s <= 0.0) return b.lower;
        if (s >= 1.0) return b.upper;
        double x = cfg.log_scale ? std::exp(std::log(b.lower) + s * (std::log(b.upper) - std::log(b.lower)))
                                 : b.lower + s * (b.upper - b.lower);
        return std::clamp(x, b.lower, b.upper);
    }

    OperatingPoint point(const Unit& s) const
    {
        std::array<double, 4> x{};
        for (std::size_t j = 0; j < 4; ++j) x[j] = from_unit(j, s[j]);
        return OperatingPoint::from_array(x);
    }
};

struct Scored {
    Unit s{};
    bool converged = false;
    bool feasible = false;
    double profit = -std::numeric_limits<double>::infinity();
    double merit = -std::numeric_limits<double>::infinity();
    std::vector<SpecViolation> violations;
};

bool better(const Scored& a, const Scored& b, double tol)
{
    if (a.feasible != b.feasible) return a.feasible;
    return a.merit > b.merit + tol;
}

Scored score(const TrialOutcome& t, const Unit& s, const SearchConfig& cfg)
{
    Scored r;
    r.s = s;
    r.converged = t.converged;
    if (!t.converged) return r;
    r.profit = t.profit;
    r.violations = t.violations;
    double penalty = 0.0;
    bool feasible = true;
    for (const auto& v : t.violations) {
        double weight;
        double tol;
        switch (v.kind) {
        case SpecKind::purity:
            weight = cfg.purity_penalty;
            tol = cfg.purity_tolerance;
            break;
        case SpecKind::reboiler_temperature:
            weight = cfg.temperature_penalty;
            tol = cfg.temperature_tolerance;
            break;
        default:
            weight = cfg.f_factor_penalty;
            tol = cfg.f_factor_tolerance;
            break;
        }
        penalty += weight * std::max(0.0, v.magnitude);
        if (v.magnitude > tol) feasible = false;
    }
    r.feasible = feasible;
    r.merit = t.profit - penalty;
    return r;
}

}  // namespace

SearchResult pattern_search(const TrialFunction& trial, const SearchConfig& cfg, const OperatingPoint& x0)
{
    validate(cfg);
    Scaling scale{cfg};
    std::map<Unit, Scored> seen;
    int evaluations = 0;

    auto evaluate = [&](const Unit& s) -> const Scored& {
        auto it = seen.find(s);
        if (it != seen.end()) return it->second;
        OperatingPoint op = scale.point(s);
        auto x = op.to_array();
        for (std::size_t j = 0; j < 4; ++j) {
            if (!cfg.bounds[j].contains(x[j])) throw std::logic_error("search left the box");
        }
        ++evaluations;
        return seen.emplace(s, score(trial(op), s, cfg)).first->second;
    };

    auto x0a = x0.to_array();
    Unit start{};
    for (std::size_t j = 0; j < 4; ++j) start[j] = scale.to_unit(j, x0a[j]);

    Scored best = evaluate(start);
    double step = cfg.initial_step;
    while (step >= cfg.step_tolerance && evaluations < cfg.max_evaluations) {
        bool improved = false;
        for (std::size_t j = 0; j < 4 && !improved && evaluations < cfg.max_evaluations; ++j) {
            for (double dir : {1.0, -1.0}) {
                Unit s = best.s;
                s[j] = std::clamp(s[j] + dir * step, 0.0, 1.0);
                if (s[j] == best.s[j]) continue;
                if (seen.find(s) == seen.end() && evaluations >= cfg.max_evaluations) break;
                const Scored& cand = evaluate(s);
                if (better(cand, best, cfg.objective_tolerance)) {
                    // Pattern move: keep going in the successful direction while it pays.
                    Scored current = cand;
                    Unit delta{};
                    delta[j] = s[j] - best.s[j];
                    while (evaluations < cfg.max_evaluations) {
                        Unit next = current.s;
                        next[j] = std::clamp(next[j] + delta[j], 0.0, 1.0);
                        if (next[j] == current.s[j]) break;
                        const Scored& ext = evaluate(next);
                        if (!better(ext, current, cfg.objective_tolerance)) break;
                        current = ext;
                    }
                    best = current;
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) step *= 0.5;
    }

    SearchResult result;
    result.best_point = scale.point(best.s);
    result.best_profit = best.profit;
    result.feasible = best.converged && best.feasible;
    result.evaluations_used = evaluations;
    result.constraint_residuals = best.violations;
    if (!best.converged) {
        bool any = false;
        for (const auto& [s, v] : seen) any = any || v.converged;
        result.message = any ? "start point failed; no converged improvement" : "all evaluations failed";
    }
    return result;
}

TrialOutcome score_operating_point(const OperatingProblem& p, const OperatingPoint& op)
{
    TrialOutcome out;
    TrainSolution sol;
    try {
        sol = simulate_train(p.components, p.design, op, p.feed, p.flowsheet, p.warm, p.memo);
    } catch (const NoConvergence&) {
        return out;
    } catch (const TemperatureOutOfRange&) {
        return out;
    }
    if (!sol.feasible) return out;
    out.converged = true;
    out.profit = annual_profit(p.components, sol, p.design, p.econ);
    out.violations = check_specs(sol, p.flowsheet);
    return out;
}

SearchResult optimize_operating(const OperatingProblem& problem, const SearchConfig& cfg, const OperatingPoint& x0)
{
    auto x = x0.to_array();
    for (std::size_t j = 0; j < 4; ++j) x[j] = std::clamp(x[j], cfg.bounds[j].lower, cfg.bounds[j].upper);
    return pattern_search([&](const OperatingPoint& op) { return score_operating_point(problem, op); }, cfg,
                          OperatingPoint::from_array(x));
}

}  // namespace distopt
