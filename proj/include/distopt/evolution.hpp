#pragma once

// (mu + lambda) evolution strategy over the discrete train design with self-adaptive
// per-gene mutation strengths.

#include "distopt/errors.hpp"
#include "distopt/flowsheet.hpp"
#include "distopt/localsearch.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace distopt {

inline constexpr std::size_t kGenesPerColumn = 3;
inline constexpr std::size_t kGenes = kTrainColumns * kGenesPerColumn;

/// Gene layout per column: {n_stages, feed_stage, diameter index}; index 0 is 0.5 m and
/// each step adds 0.1 m.
struct Genome {
    std::array<int, kGenes> genes{};
    std::array<double, kGenes> sigma{};

    int stages(std::size_t c) const { return genes[c * kGenesPerColumn]; }
    int feed(std::size_t c) const { return genes[c * kGenesPerColumn + 1]; }
    int diameter_index(std::size_t c) const { return genes[c * kGenesPerColumn + 2]; }
    bool operator==(const Genome&) const = default;
};

struct GeneBounds {
    std::array<int, kGenes> lower{};
    std::array<int, kGenes> upper{};
};

GeneBounds gene_bounds(const TrainBounds& bounds);

enum class SelectionMode { elite_parents, plus };

struct ESConfig {
    std::size_t mu = 10;
    std::size_t lambda = 40;
    std::size_t elite_count = 3;
    int generations = 30;
    std::uint64_t seed = 1;
    double penalty_profit = -1e8;  // EUR/y
    double tau = 0.0;              // 0 = 1/sqrt(2 sqrt(n))
    double tau_prime = 0.0;        // 0 = 1/sqrt(2 n)
    double sigma_min = 0.2;
    double sigma_max = 10.0;
    double initial_sigma_fraction = 0.1;  // of each gene's range
    SelectionMode selection = SelectionMode::elite_parents;
    unsigned workers = 1;

    double tau_local() const;
    double tau_global() const;
};

/// Throws SchemaError.
void validate(const ESConfig& cfg);

/// Deterministic stream derived from the master seed and a (generation, index) counter.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t generation, std::uint64_t index);
    double normal() { return normal_(engine_); }
    int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
    bool coin() { return uniform_int(0, 1) == 1; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Clamps genes to bounds, pulls the feed to at most n_stages - 2 and at least its lower
/// bound, and clamps sigma. Idempotent.
Genome repair(Genome g, const GeneBounds& bounds, const ESConfig& cfg);
Genome random_genome(const GeneBounds& bounds, const ESConfig& cfg, Rng& rng);
Genome recombine(const Genome& p1, const Genome& p2, Rng& rng);
/// Log-normal sigma update, rounded normal gene steps, then repair.
Genome mutate(const Genome& g, const GeneBounds& bounds, const ESConfig& cfg, Rng& rng);

TrainDesign decode(const Genome& g, const std::array<double, kTrainColumns>& pressures);
/// Inverse of decode for designs on the grid; sigma set to the initial strengths.
Genome encode(const TrainDesign& design, const GeneBounds& bounds, const ESConfig& cfg);

using DesignKey = std::array<int, kGenes>;
DesignKey design_key(const TrainDesign& design);

struct Evaluation {
    double fitness = 0.0;
    std::vector<SearchResult> per_scenario;
    std::size_t simulator_calls = 0;
    std::string diagnostics;
};

using DesignEvaluator = std::function<Evaluation(const TrainDesign&)>;

struct Individual {
    Genome genome;
    std::optional<double> fitness;
    std::vector<SearchResult> per_scenario;
    int birth_generation = 0;
    std::string diagnostics;
};

/// Candidate pool is the offspring plus the top elite_count parents (all parents in plus
/// mode); returns the best mu. Ties: younger first, then lexicographically smaller genes.
/// Throws PoolTooSmall.
std::vector<Individual> select(const std::vector<Individual>& parents, const std::vector<Individual>& offspring,
                               const ESConfig& cfg);

struct GenerationRecord {
    int generation = 0;
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
    Genome best;
    std::size_t designs_evaluated = 0;  // new designs this generation
    std::size_t cache_hits = 0;
    std::size_t simulator_calls = 0;
    std::vector<Individual> population;
};

struct RunTrace {
    std::vector<GenerationRecord> generations;  // generation 0 is the initial population
    std::map<DesignKey, Evaluation> cache;
};

struct EvolveOptions {
    std::optional<std::filesystem::path> checkpoint;  // rewritten after every generation
    bool resume = false;
    std::string fingerprint;  // config identity stored in and checked against the checkpoint
    std::function<void(const GenerationRecord&)> on_generation;
};

RunTrace evolve(const ESConfig& cfg, const TrainBounds& bounds, const std::array<double, kTrainColumns>& pressures,
                const DesignEvaluator& evaluator, const EvolveOptions& options = {});

std::string trace_csv(const RunTrace& trace);

}  // namespace distopt
