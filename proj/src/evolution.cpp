#include "distopt/evolution.hpp"

#include "distopt/errors.hpp"
#include "distopt/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace distopt {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

int diameter_tenths(double d) { return static_cast<int>(std::lround(d * 10.0)); }

constexpr int kOriginTenths = 5;

}  // namespace

double ESConfig::tau_local() const
{
    return tau > 0.0 ? tau : 1.0 / std::sqrt(2.0 * std::sqrt(static_cast<double>(kGenes)));
}

double ESConfig::tau_global() const
{
    return tau_prime > 0.0 ? tau_prime : 1.0 / std::sqrt(2.0 * static_cast<double>(kGenes));
}

void validate(const ESConfig& cfg)
{
    if (cfg.mu == 0 || cfg.lambda == 0 || cfg.elite_count == 0) {
        throw SchemaError("es: mu, lambda and elite_count must be > 0");
    }
    if (cfg.elite_count > cfg.mu) throw SchemaError("es: elite_count must not exceed mu");
    if (cfg.generations < 0) throw SchemaError("es: generations must be >= 0");
    if (!(cfg.sigma_min > 0.0 && cfg.sigma_min <= cfg.sigma_max)) throw SchemaError("es: invalid sigma bounds");
    if (!(cfg.initial_sigma_fraction > 0.0)) throw SchemaError("es: initial_sigma_fraction must be > 0");
    if (!std::isfinite(cfg.penalty_profit)) throw SchemaError("es: penalty_profit must be finite");
    if (cfg.tau < 0.0 || cfg.tau_prime < 0.0) throw SchemaError("es: learning rates must be >= 0");
}

GeneBounds gene_bounds(const TrainBounds& bounds)
{
    GeneBounds g;
    for (std::size_t c = 0; c < kTrainColumns; ++c) {
        const auto& b = bounds[c];
        if (b.stages_min > b.stages_max || b.feed_min > b.feed_max || b.diameter_min > b.diameter_max) {
            throw SchemaError("design bounds: inverted interval for column " + std::to_string(c + 1));
        }
        if (b.feed_min > b.stages_min - 2) {
            throw SchemaError("design bounds: lowest feed stage does not fit the smallest column " +
                              std::to_string(c + 1));
        }
        std::size_t o = c * kGenesPerColumn;
        g.lower[o] = b.stages_min;
        g.upper[o] = b.stages_max;
        g.lower[o + 1] = b.feed_min;
        g.upper[o + 1] = b.feed_max;
        g.lower[o + 2] = diameter_tenths(b.diameter_min) - kOriginTenths;
        g.upper[o + 2] = diameter_tenths(b.diameter_max) - kOriginTenths;
        if (g.lower[o + 2] < 0) throw SchemaError("design bounds: diameter below the 0.5 m grid origin");
    }
    return g;
}

Rng::Rng(std::uint64_t seed, std::uint64_t generation, std::uint64_t index)
    : engine_(splitmix64(seed ^ splitmix64(splitmix64(generation) ^ (index * 0xd1b54a32d192ed03ULL))))
{
}

Genome repair(Genome g, const GeneBounds& b, const ESConfig& cfg)
{
    for (std::size_t k = 0; k < kGenes; ++k) {
        g.genes[k] = std::clamp(g.genes[k], b.lower[k], b.upper[k]);
        double s = std::isfinite(g.sigma[k]) ? g.sigma[k] : cfg.sigma_max;
        g.sigma[k] = std::clamp(s, cfg.sigma_min, cfg.sigma_max);
    }
    for (std::size_t c = 0; c < kTrainColumns; ++c) {
        std::size_t o = c * kGenesPerColumn;
        int& feed = g.genes[o + 1];
        feed = std::min(feed, g.genes[o] - 2);
        feed = std::max(feed, b.lower[o + 1]);
    }
    return g;
}

Genome random_genome(const GeneBounds& b, const ESConfig& cfg, Rng& rng)
{
    Genome g;
    for (std::size_t k = 0; k < kGenes; ++k) {
        g.genes[k] = rng.uniform_int(b.lower[k], b.upper[k]);
        g.sigma[k] = cfg.initial_sigma_fraction * (b.upper[k] - b.lower[k]);
    }
    return repair(g, b, cfg);
}

Genome recombine(const Genome& p1, const Genome& p2, Rng& rng)
{
    Genome child = p1;
    for (std::size_t c = 0; c < kTrainColumns; ++c) {
        const Genome& from = rng.coin() ? p2 : p1;
        for (std::size_t k = c * kGenesPerColumn; k < (c + 1) * kGenesPerColumn; ++k) {
            child.genes[k] = from.genes[k];
            child.sigma[k] = from.sigma[k];
        }
    }
    return child;
}

Genome mutate(const Genome& g, const GeneBounds& b, const ESConfig& cfg, Rng& rng)
{
    Genome m = g;
    double global = cfg.tau_global() * rng.normal();
    double tau = cfg.tau_local();
    for (std::size_t k = 0; k < kGenes; ++k) {
        double s = g.sigma[k] * std::exp(global + tau * rng.normal());
        m.sigma[k] = std::clamp(s, cfg.sigma_min, cfg.sigma_max);
        m.genes[k] = g.genes[k] + static_cast<int>(std::lround(m.sigma[k] * rng.normal()));
    }
    return repair(m, b, cfg);
}

TrainDesign decode(const Genome& g, const std::array<double, kTrainColumns>& pressures)
{
    TrainDesign d;
    d.pressures = pressures;
    for (std::size_t c = 0; c < kTrainColumns; ++c) {
        d.columns[c].n_stages = g.stages(c);
        d.columns[c].feed_stage = g.feed(c);
        d.columns[c].diameter = (kOriginTenths + g.diameter_index(c)) / 10.0;
    }
    return d;
}

Genome encode(const TrainDesign& design, const GeneBounds& b, const ESConfig& cfg)
{
    Genome g;
    for (std::size_t c = 0; c < kTrainColumns; ++c) {
        std::size_t o = c * kGenesPerColumn;
        g.genes[o] = design.columns[c].n_stages;
        g.genes[o + 1] = design.columns[c].feed_stage;
        g.genes[o + 2] = diameter_tenths(design.columns[c].diameter) - kOriginTenths;
    }
    for (std::size_t k = 0; k < kGenes; ++k) {
        g.sigma[k] = std::clamp(cfg.initial_sigma_fraction * (b.upper[k] - b.lower[k]), cfg.sigma_min, cfg.sigma_max);
    }
    return g;
}

DesignKey design_key(const TrainDesign& design)
{
    DesignKey k{};
    for (std::size_t c = 0; c < kTrainColumns; ++c) {
        k[c * kGenesPerColumn] = design.columns[c].n_stages;
        k[c * kGenesPerColumn + 1] = design.columns[c].feed_stage;
        k[c * kGenesPerColumn + 2] = diameter_tenths(design.columns[c].diameter) - kOriginTenths;
    }
    return k;
}

namespace {

bool ranks_before(const Individual& a, const Individual& b)
{
    double fa = a.fitness.value_or(-std::numeric_limits<double>::infinity());
    double fb = b.fitness.value_or(-std::numeric_limits<double>::infinity());
    if (fa != fb) return fa > fb;
    if (a.birth_generation != b.birth_generation) return a.birth_generation > b.birth_generation;
    return a.genome.genes < b.genome.genes;
}

}  // namespace

std::vector<Individual> select(const std::vector<Individual>& parents, const std::vector<Individual>& offspring,
                               const ESConfig& cfg)
{
    std::vector<Individual> sorted_parents = parents;
    std::stable_sort(sorted_parents.begin(), sorted_parents.end(), ranks_before);
    std::size_t keep = cfg.selection == SelectionMode::plus ? sorted_parents.size()
                                                            : std::min(cfg.elite_count, sorted_parents.size());
    std::vector<Individual> pool = offspring;
    pool.insert(pool.end(), sorted_parents.begin(), sorted_parents.begin() + static_cast<std::ptrdiff_t>(keep));
    if (pool.size() < cfg.mu) throw PoolTooSmall(pool.size(), cfg.mu);
    std::stable_sort(pool.begin(), pool.end(), ranks_before);
    pool.resize(cfg.mu);
    return pool;
}

// ---------------------------------------------------------------------------------------
// Checkpoint serialisation. Doubles that may be non-finite are written as strings.

namespace {

json number(double v)
{
    if (std::isfinite(v)) return v;
    return format_double(v);
}

double number(const json& j)
{
    if (j.is_string()) {
        auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        return std::numeric_limits<double>::quiet_NaN();
    }
    return j.get<double>();
}

json to_json(const SearchResult& r)
{
    json v = json::array();
    for (const auto& s : r.constraint_residuals) {
        v.push_back({{"kind", std::string(to_string(s.kind))}, {"column", s.column}, {"magnitude", number(s.magnitude)}});
    }
    json x = json::array();
    for (double e : r.best_point.to_array()) x.push_back(number(e));
    return {{"point", x},          {"profit", number(r.best_profit)}, {"feasible", r.feasible},
            {"evaluations", r.evaluations_used}, {"residuals", v}, {"message", r.message}};
}

SpecKind parse_spec_kind(const std::string& s)
{
    for (auto k : {SpecKind::purity, SpecKind::reboiler_temperature, SpecKind::f_factor_high, SpecKind::f_factor_low}) {
        if (to_string(k) == s) return k;
    }
    throw SchemaError("checkpoint: unknown constraint kind '" + s + "'");
}

SearchResult search_result_from_json(const json& j)
{
    SearchResult r;
    std::array<double, 4> x{};
    for (std::size_t i = 0; i < 4; ++i) x[i] = number(j.at("point").at(i));
    r.best_point = OperatingPoint::from_array(x);
    r.best_profit = number(j.at("profit"));
    r.feasible = j.at("feasible").get<bool>();
    r.evaluations_used = j.at("evaluations").get<int>();
    for (const auto& v : j.at("residuals")) {
        r.constraint_residuals.push_back(
            {parse_spec_kind(v.at("kind").get<std::string>()), v.at("column").get<int>(), number(v.at("magnitude"))});
    }
    r.message = j.at("message").get<std::string>();
    return r;
}

json to_json(const Genome& g)
{
    json s = json::array();
    for (double v : g.sigma) s.push_back(v);
    return {{"genes", g.genes}, {"sigma", s}};
}

Genome genome_from_json(const json& j)
{
    Genome g;
    g.genes = j.at("genes").get<std::array<int, kGenes>>();
    g.sigma = j.at("sigma").get<std::array<double, kGenes>>();
    return g;
}

json to_json(const Individual& ind)
{
    json per = json::array();
    for (const auto& r : ind.per_scenario) per.push_back(to_json(r));
    return {{"genome", to_json(ind.genome)},
            {"fitness", ind.fitness ? json(number(*ind.fitness)) : json(nullptr)},
            {"birth_generation", ind.birth_generation},
            {"per_scenario", per},
            {"diagnostics", ind.diagnostics}};
}

Individual individual_from_json(const json& j)
{
    Individual ind;
    ind.genome = genome_from_json(j.at("genome"));
    if (!j.at("fitness").is_null()) ind.fitness = number(j.at("fitness"));
    ind.birth_generation = j.at("birth_generation").get<int>();
    for (const auto& r : j.at("per_scenario")) ind.per_scenario.push_back(search_result_from_json(r));
    ind.diagnostics = j.at("diagnostics").get<std::string>();
    return ind;
}

json to_json(const GenerationRecord& r)
{
    json pop = json::array();
    for (const auto& ind : r.population) pop.push_back(to_json(ind));
    return {{"generation", r.generation},
            {"best_fitness", number(r.best_fitness)},
            {"mean_fitness", number(r.mean_fitness)},
            {"best", to_json(r.best)},
            {"designs_evaluated", r.designs_evaluated},
            {"cache_hits", r.cache_hits},
            {"simulator_calls", r.simulator_calls},
            {"population", pop}};
}

GenerationRecord record_from_json(const json& j)
{
    GenerationRecord r;
    r.generation = j.at("generation").get<int>();
    r.best_fitness = number(j.at("best_fitness"));
    r.mean_fitness = number(j.at("mean_fitness"));
    r.best = genome_from_json(j.at("best"));
    r.designs_evaluated = j.at("designs_evaluated").get<std::size_t>();
    r.cache_hits = j.at("cache_hits").get<std::size_t>();
    r.simulator_calls = j.at("simulator_calls").get<std::size_t>();
    for (const auto& ind : j.at("population")) r.population.push_back(individual_from_json(ind));
    return r;
}

json to_json(const Evaluation& e)
{
    json per = json::array();
    for (const auto& r : e.per_scenario) per.push_back(to_json(r));
    return {{"fitness", number(e.fitness)},
            {"per_scenario", per},
            {"simulator_calls", e.simulator_calls},
            {"diagnostics", e.diagnostics}};
}

Evaluation evaluation_from_json(const json& j)
{
    Evaluation e;
    e.fitness = number(j.at("fitness"));
    for (const auto& r : j.at("per_scenario")) e.per_scenario.push_back(search_result_from_json(r));
    e.simulator_calls = j.at("simulator_calls").get<std::size_t>();
    e.diagnostics = j.at("diagnostics").get<std::string>();
    return e;
}

constexpr const char* kCheckpointSchema = "distopt.checkpoint/1";

void write_checkpoint(const std::filesystem::path& path, const ESConfig& cfg, const EvolveOptions& options,
                      const RunTrace& trace, const std::vector<Individual>& parents)
{
    json cache = json::array();
    for (const auto& [key, eval] : trace.cache) cache.push_back({{"design", key}, {"evaluation", to_json(eval)}});
    json records = json::array();
    for (const auto& r : trace.generations) records.push_back(to_json(r));
    json pop = json::array();
    for (const auto& ind : parents) pop.push_back(to_json(ind));
    json doc = {{"schema", kCheckpointSchema},
                {"fingerprint", options.fingerprint},
                {"rng", {{"master_seed", std::to_string(cfg.seed)}, {"next_generation", trace.generations.size()}}},
                {"parents", pop},
                {"generations", records},
                {"cache", cache}};
    auto tmp = path;
    tmp += ".tmp";
    write_text_file(tmp, doc.dump(1));
    std::filesystem::rename(tmp, path);
}

struct Restored {
    RunTrace trace;
    std::vector<Individual> parents;
};

Restored read_checkpoint(const std::filesystem::path& path, const ESConfig& cfg, const EvolveOptions& options)
{
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw SchemaError("checkpoint " + path.string() + ": " + e.what());
    }
    try {
        if (doc.at("schema").get<std::string>() != kCheckpointSchema) {
            throw SchemaError("checkpoint " + path.string() + ": unsupported schema");
        }
        if (doc.at("fingerprint").get<std::string>() != options.fingerprint) {
            throw ResumeMismatch("checkpoint " + path.string() + " was written by a different configuration");
        }
        if (doc.at("rng").at("master_seed").get<std::string>() != std::to_string(cfg.seed)) {
            throw ResumeMismatch("checkpoint " + path.string() + " was written with a different seed");
        }
        Restored r;
        for (const auto& ind : doc.at("parents")) r.parents.push_back(individual_from_json(ind));
        for (const auto& g : doc.at("generations")) r.trace.generations.push_back(record_from_json(g));
        for (const auto& e : doc.at("cache")) {
            r.trace.cache.emplace(e.at("design").get<DesignKey>(), evaluation_from_json(e.at("evaluation")));
        }
        if (r.trace.generations.empty() || r.parents.size() != cfg.mu) {
            throw ResumeMismatch("checkpoint " + path.string() + " does not match the population size");
        }
        if (doc.at("rng").at("next_generation").get<std::size_t>() != r.trace.generations.size()) {
            throw SchemaError("checkpoint " + path.string() + ": inconsistent generation counter");
        }
        return r;
    } catch (const json::exception& e) {
        throw SchemaError("checkpoint " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------------------

class BatchEvaluator {
public:
    BatchEvaluator(const ESConfig& cfg, const std::array<double, kTrainColumns>& pressures,
                   const DesignEvaluator& evaluator, RunTrace& trace)
        : cfg_(cfg), pressures_(pressures), evaluator_(evaluator), trace_(trace)
    {
    }

    void run(std::vector<Individual>& individuals, GenerationRecord& record)
    {
        std::vector<DesignKey> todo;
        std::vector<TrainDesign> designs;
        std::set<DesignKey> queued;
        for (const auto& ind : individuals) {
            auto design = decode(ind.genome, pressures_);
            auto key = design_key(design);
            if (trace_.cache.count(key) || queued.count(key)) continue;
            queued.insert(key);
            todo.push_back(key);
            designs.push_back(design);
        }

        std::vector<Evaluation> results(todo.size());
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t i = next++; i < todo.size(); i = next++) {
                try {
                    results[i] = evaluator_(designs[i]);
                } catch (const std::exception& e) {
                    results[i] = Evaluation{cfg_.penalty_profit, {}, 0, std::string("evaluation failed: ") + e.what()};
                }
            }
        };
        unsigned n_threads = std::max(1u, std::min<unsigned>(cfg_.workers, static_cast<unsigned>(todo.size())));
        if (n_threads <= 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(work);
            for (auto& t : pool) t.join();
        }

        record.designs_evaluated = todo.size();
        record.cache_hits = individuals.size() - todo.size();
        record.simulator_calls = 0;
        for (std::size_t i = 0; i < todo.size(); ++i) {
            record.simulator_calls += results[i].simulator_calls;
            trace_.cache.emplace(todo[i], std::move(results[i]));
        }
        for (auto& ind : individuals) {
            const auto& e = trace_.cache.at(design_key(decode(ind.genome, pressures_)));
            ind.fitness = e.fitness;
            ind.per_scenario = e.per_scenario;
            ind.diagnostics = e.diagnostics;
        }
    }

private:
    const ESConfig& cfg_;
    const std::array<double, kTrainColumns>& pressures_;
    const DesignEvaluator& evaluator_;
    RunTrace& trace_;
};

void summarise(GenerationRecord& rec, const std::vector<Individual>& parents)
{
    rec.population = parents;
    rec.best = parents.front().genome;
    rec.best_fitness = *parents.front().fitness;
    double sum = 0.0;
    for (const auto& p : parents) sum += *p.fitness;
    rec.mean_fitness = sum / static_cast<double>(parents.size());
}

}  // namespace

RunTrace evolve(const ESConfig& cfg, const TrainBounds& bounds, const std::array<double, kTrainColumns>& pressures,
                const DesignEvaluator& evaluator, const EvolveOptions& options)
{
    validate(cfg);
    GeneBounds gb = gene_bounds(bounds);
    RunTrace trace;
    std::vector<Individual> parents;
    BatchEvaluator batch(cfg, pressures, evaluator, trace);

    if (options.resume) {
        if (!options.checkpoint) throw InvalidInput("resume requested without a checkpoint path");
        auto restored = read_checkpoint(*options.checkpoint, cfg, options);
        trace = std::move(restored.trace);
        parents = std::move(restored.parents);
        if (static_cast<int>(trace.generations.size()) > cfg.generations + 1) {
            throw ResumeMismatch("checkpoint is past the requested number of generations");
        }
    } else {
        std::vector<Individual> initial(cfg.mu);
        for (std::size_t i = 0; i < cfg.mu; ++i) {
            Rng rng(cfg.seed, 0, i);
            initial[i].genome = random_genome(gb, cfg, rng);
        }
        GenerationRecord rec;
        batch.run(initial, rec);
        parents = select({}, initial, cfg);
        summarise(rec, parents);
        trace.generations.push_back(rec);
        if (options.checkpoint) write_checkpoint(*options.checkpoint, cfg, options, trace, parents);
        if (options.on_generation) options.on_generation(rec);
    }

    for (int g = static_cast<int>(trace.generations.size()); g <= cfg.generations; ++g) {
        std::vector<Individual> offspring(cfg.lambda);
        for (std::size_t k = 0; k < cfg.lambda; ++k) {
            Rng rng(cfg.seed, static_cast<std::uint64_t>(g), k);
            int n = static_cast<int>(parents.size());
            int i = rng.uniform_int(0, n - 1);
            int j = i;
            if (n > 1) {
                j = rng.uniform_int(0, n - 2);
                if (j >= i) ++j;
            }
            Genome child = recombine(parents[i].genome, parents[j].genome, rng);
            offspring[k].genome = mutate(child, gb, cfg, rng);
            offspring[k].birth_generation = g;
        }
        GenerationRecord rec;
        rec.generation = g;
        batch.run(offspring, rec);
        parents = select(parents, offspring, cfg);
        summarise(rec, parents);
        trace.generations.push_back(rec);
        if (options.checkpoint) write_checkpoint(*options.checkpoint, cfg, options, trace, parents);
        if (options.on_generation) options.on_generation(rec);
    }
    return trace;
}

std::string trace_csv(const RunTrace& trace)
{
    std::ostringstream out;
    out << "generation,best_fitness,mean_fitness";
    for (std::size_t c = 1; c <= kTrainColumns; ++c) {
        out << ",c" << c << "_stages,c" << c << "_feed,c" << c << "_diameter_m";
    }
    out << ",designs_evaluated,cache_hits,simulator_calls\n";
    for (const auto& r : trace.generations) {
        out << r.generation << ',' << format_double(r.best_fitness) << ',' << format_double(r.mean_fitness);
        for (std::size_t c = 0; c < kTrainColumns; ++c) {
            out << ',' << r.best.stages(c) << ',' << r.best.feed(c) << ','
                << format_double((kOriginTenths + r.best.diameter_index(c)) / 10.0);
        }
        out << ',' << r.designs_evaluated << ',' << r.cache_hits << ',' << r.simulator_calls << '\n';
    }
    return out.str();
}

}  // namespace distopt
