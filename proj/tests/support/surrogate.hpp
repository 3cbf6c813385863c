#pragma once

// Known-optimum stand-in for the flowsheet evaluator: a separable concave quadratic in
// the gene lattice, so the maximum sits at one design on the grid.

#include "distopt/evolution.hpp"
#include "distopt/flowsheet.hpp"

#include <atomic>

namespace distopt::testing {

inline TrainBounds surrogate_bounds()
{
    TrainBounds b = default_train_bounds();
    b[2] = ColumnBounds{10, 60, 5, 58, 0.5, 3.0};
    return b;
}

inline const DesignKey& surrogate_optimum()
{
    // 31 stages fed at 17 with 1.3 m, 22/9/0.9 m, 47/26/2.0 m
    static const DesignKey k{31, 17, 8, 22, 9, 4, 47, 26, 15};
    return k;
}

inline double surrogate_fitness(const TrainDesign& d)
{
    const auto key = design_key(d);
    const auto& opt = surrogate_optimum();
    double f = 0.0;
    for (std::size_t k = 0; k < kGenes; ++k) {
        double e = key[k] - opt[k];
        f -= 1000.0 * e * e;
    }
    return f;
}

struct SurrogateEvaluator {
    std::atomic<std::size_t>* calls = nullptr;

    Evaluation operator()(const TrainDesign& d) const
    {
        if (calls) ++*calls;
        Evaluation e;
        e.fitness = surrogate_fitness(d);
        e.simulator_calls = 1;
        return e;
    }
};

inline ESConfig surrogate_es(std::uint64_t seed, int generations = 50)
{
    ESConfig cfg;
    cfg.mu = 10;
    cfg.lambda = 40;
    cfg.generations = generations;
    cfg.seed = seed;
    return cfg;
}

}  // namespace distopt::testing
