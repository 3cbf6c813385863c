#include <catch_amalgamated.hpp>

#include "distopt/errors.hpp"
#include "distopt/evolution.hpp"
#include "distopt/util.hpp"

#include "../support/surrogate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <set>

using namespace distopt;
using Catch::Approx;

namespace {

const std::array<double, kTrainColumns> kPressures{30.0, 30.0, 20.0};

GeneBounds bounds() { return gene_bounds(testing::surrogate_bounds()); }

bool satisfies_invariants(const Genome& g, const GeneBounds& b, const ESConfig& cfg)
{
    for (std::size_t k = 0; k < kGenes; ++k) {
        if (g.genes[k] < b.lower[k] || g.genes[k] > b.upper[k]) return false;
        if (!(g.sigma[k] >= cfg.sigma_min && g.sigma[k] <= cfg.sigma_max)) return false;
    }
    for (std::size_t c = 0; c < kTrainColumns; ++c) {
        if (g.feed(c) > g.stages(c) - 2) return false;
    }
    return true;
}

Genome wild_genome(Rng& rng)
{
    Genome g;
    for (std::size_t k = 0; k < kGenes; ++k) {
        g.genes[k] = rng.uniform_int(-20, 90);
        g.sigma[k] = std::ldexp(1.0, rng.uniform_int(-12, 8));
    }
    if (rng.uniform_int(0, 9) == 0) g.sigma[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(kGenes) - 1))] = std::nan("");
    return g;
}

Individual individual(double fitness, int born, std::array<int, kGenes> genes = {})
{
    Individual ind;
    ind.genome.genes = genes;
    ind.fitness = fitness;
    ind.birth_generation = born;
    return ind;
}

std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("distopt_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("repair")
{
    ESConfig cfg;
    auto b = bounds();
    Rng rng(5, 0, 0);
    for (int t = 0; t < 10000; ++t) {
        auto once = repair(wild_genome(rng), b, cfg);
        REQUIRE(satisfies_invariants(once, b, cfg));
        REQUIRE(repair(once, b, cfg) == once);
    }

    Genome g = encode(decode(repair(Genome{}, b, cfg), kPressures), b, cfg);
    g.genes[0] = 10;
    g.genes[1] = 38;
    CHECK(repair(g, b, cfg).feed(0) == 8);

    Rng r2(6, 0, 0);
    auto valid = random_genome(b, cfg, r2);
    CHECK(repair(valid, b, cfg) == valid);
}

TEST_CASE("initial genomes cover the grid and are reproducible")
{
    ESConfig cfg;
    auto b = bounds();
    std::set<int> stages;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        Rng rng(42, 0, i);
        auto g = random_genome(b, cfg, rng);
        REQUIRE(satisfies_invariants(g, b, cfg));
        stages.insert(g.stages(0));
        CHECK(g.sigma[0] == Approx(std::max(cfg.sigma_min, 0.1 * (b.upper[0] - b.lower[0]))));
    }
    CHECK(stages.size() == 36);  // 5..40
    Rng a(42, 0, 3), c(42, 0, 3);
    CHECK(random_genome(b, cfg, a) == random_genome(b, cfg, c));
}

TEST_CASE("block crossover")
{
    ESConfig cfg;
    auto b = bounds();
    Rng init(9, 0, 0);
    auto p1 = random_genome(b, cfg, init);
    auto p2 = random_genome(b, cfg, init);
    for (std::size_t k = 0; k < kGenes; ++k) {
        p1.sigma[k] = 1.0 + static_cast<double>(k);
        p2.sigma[k] = 100.0 + static_cast<double>(k);
        if (p1.genes[k] == p2.genes[k]) p2.genes[k] = p1.genes[k] + 1;  // raw genomes, blocks must differ
    }

    Rng same(1, 0, 0);
    CHECK(recombine(p1, p1, same) == p1);

    std::array<int, kTrainColumns> from_first{};
    const int trials = 10000;
    Rng rng(11, 1, 0);
    for (int t = 0; t < trials; ++t) {
        auto child = recombine(p1, p2, rng);
        for (std::size_t c = 0; c < kTrainColumns; ++c) {
            bool all_first = true, all_second = true;
            for (std::size_t k = c * kGenesPerColumn; k < (c + 1) * kGenesPerColumn; ++k) {
                all_first = all_first && child.genes[k] == p1.genes[k] && child.sigma[k] == p1.sigma[k];
                all_second = all_second && child.genes[k] == p2.genes[k] && child.sigma[k] == p2.sigma[k];
            }
            REQUIRE(all_first != all_second);
            from_first[c] += all_first ? 1 : 0;
        }
    }
    const double sd = std::sqrt(trials * 0.25);
    for (int n : from_first) CHECK(std::abs(n - trials / 2.0) < 3.0 * sd);
}

TEST_CASE("mutation strengths stay clamped")
{
    ESConfig cfg;
    auto b = bounds();
    Rng rng(3, 0, 0);
    Genome g = random_genome(b, cfg, rng);
    g.sigma.fill(cfg.sigma_max);
    for (int t = 0; t < 5000; ++t) {
        auto m = mutate(g, b, cfg, rng);
        REQUIRE(satisfies_invariants(m, b, cfg));
    }

    // one lineage under mutation alone
    Genome drift = g;
    for (int t = 0; t < 500; ++t) {
        drift = mutate(drift, b, cfg, rng);
        REQUIRE(satisfies_invariants(drift, b, cfg));
    }
}

TEST_CASE("tiny mutation strengths leave the genome unchanged")
{
    ESConfig cfg;
    cfg.sigma_min = 0.01;
    auto b = bounds();
    Rng rng(4, 0, 0);
    Genome g = random_genome(b, cfg, rng);
    g.sigma.fill(0.01);
    int unchanged = 0;
    for (int t = 0; t < 1000; ++t) {
        auto m = mutate(g, b, cfg, rng);
        unchanged += m.genes == g.genes ? 1 : 0;
        g.sigma.fill(0.01);
    }
    CHECK(unchanged >= 995);
}

TEST_CASE("decode and encode are inverse on the grid")
{
    ESConfig cfg;
    auto b = bounds();
    for (std::uint64_t i = 0; i < 200; ++i) {
        Rng rng(8, 0, i);
        auto g = random_genome(b, cfg, rng);
        auto d = decode(g, kPressures);
        CHECK(encode(d, b, cfg).genes == g.genes);
        CHECK(design_key(d) == g.genes);
        CHECK(d.columns[0].diameter == Approx(0.5 + 0.1 * g.diameter_index(0)));
        CHECK(d.pressures == kPressures);
    }
}

TEST_CASE("selection")
{
    ESConfig cfg;
    cfg.mu = 3;
    cfg.elite_count = 1;

    SECTION("elite parent survives")
    {
        std::vector<Individual> parents{individual(5.0, 0), individual(-1.0, 0), individual(-2.0, 0)};
        std::vector<Individual> offspring{individual(1.0, 1), individual(2.0, 1), individual(0.0, 1)};
        auto next = select(parents, offspring, cfg);
        REQUIRE(next.size() == 3);
        CHECK(*next[0].fitness == 5.0);
        CHECK(*next[1].fitness == 2.0);
        CHECK(*next[2].fitness == 1.0);
    }
    SECTION("only the elite parents enter the pool")
    {
        std::vector<Individual> parents{individual(5.0, 0), individual(4.0, 0)};
        std::vector<Individual> offspring{individual(1.0, 1), individual(2.0, 1)};
        auto next = select(parents, offspring, cfg);
        CHECK(*next[1].fitness == 2.0);
        cfg.selection = SelectionMode::plus;
        CHECK(*select(parents, offspring, cfg)[1].fitness == 4.0);
    }
    SECTION("ties go to the younger, then to the smaller genes")
    {
        std::array<int, kGenes> small{}, large{};
        large[0] = 1;
        std::vector<Individual> parents{individual(1.0, 0, small)};
        std::vector<Individual> offspring{individual(1.0, 2, large), individual(1.0, 2, small), individual(0.0, 2)};
        auto next = select(parents, offspring, cfg);
        CHECK(next[0].genome.genes == small);
        CHECK(next[0].birth_generation == 2);
        CHECK(next[1].genome.genes == large);
        CHECK(next[2].birth_generation == 0);
        auto again = select(parents, offspring, cfg);
        for (std::size_t i = 0; i < 3; ++i) CHECK(again[i].genome == next[i].genome);
    }
    SECTION("pool too small")
    {
        std::vector<Individual> parents{individual(1.0, 0)};
        std::vector<Individual> offspring{individual(1.0, 1)};
        CHECK_THROWS_AS(select(parents, offspring, cfg), PoolTooSmall);
    }
}

TEST_CASE("evolution on the surrogate")
{
    std::atomic<std::size_t> calls{0};
    auto cfg = testing::surrogate_es(7, 12);
    auto trace = evolve(cfg, testing::surrogate_bounds(), kPressures, testing::SurrogateEvaluator{&calls});
    REQUIRE(trace.generations.size() == 13);
    std::size_t designs = 0;
    for (std::size_t g = 0; g < trace.generations.size(); ++g) {
        const auto& r = trace.generations[g];
        CHECK(r.generation == static_cast<int>(g));
        CHECK(r.designs_evaluated + r.cache_hits == (g == 0 ? cfg.mu : cfg.lambda));
        CHECK(r.population.size() == cfg.mu);
        if (g > 0) CHECK(r.best_fitness >= trace.generations[g - 1].best_fitness);
        designs += r.designs_evaluated;
    }
    CHECK(calls == designs);
    CHECK(trace.cache.size() == designs);

    auto same = evolve(cfg, testing::surrogate_bounds(), kPressures, testing::SurrogateEvaluator{});
    CHECK(trace_csv(same) == trace_csv(trace));
}

TEST_CASE("surrogate optimum is found")
{
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto trace = evolve(testing::surrogate_es(seed), testing::surrogate_bounds(), kPressures,
                            testing::SurrogateEvaluator{});
        hits += trace.generations.back().best_fitness == 0.0 ? 1 : 0;
    }
    CHECK(hits >= 9);
}

TEST_CASE("parallel batches match the serial run")
{
    auto cfg = testing::surrogate_es(21, 6);
    auto serial = evolve(cfg, testing::surrogate_bounds(), kPressures, testing::SurrogateEvaluator{});
    cfg.workers = 4;
    auto parallel = evolve(cfg, testing::surrogate_bounds(), kPressures, testing::SurrogateEvaluator{});
    CHECK(trace_csv(parallel) == trace_csv(serial));
}

TEST_CASE("failed evaluations get the penalty")
{
    auto cfg = testing::surrogate_es(2, 1);
    DesignEvaluator broken = [](const TrainDesign&) -> Evaluation { throw std::runtime_error("boom"); };
    auto trace = evolve(cfg, testing::surrogate_bounds(), kPressures, broken);
    CHECK(trace.generations.back().best_fitness == cfg.penalty_profit);
    CHECK(trace.cache.begin()->second.diagnostics == "evaluation failed: boom");
}

TEST_CASE("checkpoint and resume")
{
    auto dir = scratch_dir("resume");
    auto cfg = testing::surrogate_es(13, 8);
    auto full = evolve(cfg, testing::surrogate_bounds(), kPressures, testing::SurrogateEvaluator{});

    EvolveOptions opts;
    opts.checkpoint = dir / "checkpoint.json";
    opts.fingerprint = "abc";
    auto partial_cfg = cfg;
    partial_cfg.generations = 3;
    evolve(partial_cfg, testing::surrogate_bounds(), kPressures, testing::SurrogateEvaluator{}, opts);
    REQUIRE(std::filesystem::exists(*opts.checkpoint));

    std::atomic<std::size_t> calls{0};
    opts.resume = true;
    auto resumed = evolve(cfg, testing::surrogate_bounds(), kPressures, testing::SurrogateEvaluator{&calls}, opts);
    CHECK(trace_csv(resumed) == trace_csv(full));
    std::size_t later = 0;
    for (std::size_t g = 4; g < full.generations.size(); ++g) later += full.generations[g].designs_evaluated;
    CHECK(calls == later);

    auto other_seed = cfg;
    other_seed.seed = 14;
    CHECK_THROWS_AS(evolve(other_seed, testing::surrogate_bounds(), kPressures, testing::SurrogateEvaluator{}, opts),
                    ResumeMismatch);
    auto other_fp = opts;
    other_fp.fingerprint = "abd";
    CHECK_THROWS_AS(evolve(cfg, testing::surrogate_bounds(), kPressures, testing::SurrogateEvaluator{}, other_fp),
                    ResumeMismatch);
    auto shorter = cfg;
    shorter.generations = 2;
    CHECK_THROWS_AS(evolve(shorter, testing::surrogate_bounds(), kPressures, testing::SurrogateEvaluator{}, opts),
                    ResumeMismatch);
    std::filesystem::remove_all(dir);
}

TEST_CASE("trace csv")
{
    auto trace = evolve(testing::surrogate_es(1, 2), testing::surrogate_bounds(), kPressures,
                        testing::SurrogateEvaluator{});
    auto csv = trace_csv(trace);
    auto header = csv.substr(0, csv.find('\n'));
    CHECK(header ==
          "generation,best_fitness,mean_fitness,c1_stages,c1_feed,c1_diameter_m,c2_stages,c2_feed,c2_diameter_m,"
          "c3_stages,c3_feed,c3_diameter_m,designs_evaluated,cache_hits,simulator_calls");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("es config validation")
{
    ESConfig cfg;
    CHECK_NOTHROW(validate(cfg));
    cfg.elite_count = 11;
    CHECK_THROWS_AS(validate(cfg), SchemaError);
    cfg = ESConfig{};
    cfg.mu = 0;
    CHECK_THROWS_AS(validate(cfg), SchemaError);
    cfg = ESConfig{};
    cfg.sigma_min = 20.0;
    CHECK_THROWS_AS(validate(cfg), SchemaError);
    auto b = testing::surrogate_bounds();
    b[0].feed_min = 10;
    CHECK_THROWS_AS(gene_bounds(b), SchemaError);
}
