#include "distopt/cli.hpp"

#include "distopt/errors.hpp"
#include "distopt/util.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#ifndef DISTOPT_VERSION
#define DISTOPT_VERSION "0.1.0"
#endif

namespace distopt {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json parse_json(std::string_view text, const char* what)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string(what) + ": " + e.what());
    }
}

// Non-finite values are not representable in JSON.
ordered_json number(double v)
{
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

ordered_json stream_json(const ProblemBundle& p, const Stream& s)
{
    ordered_json j;
    j["flow_kmol_h"] = number(s.flow);
    j["mass_flow_kg_h"] = number(mass_flow(p.components, s));
    j["temperature_k"] = number(s.temperature);
    j["pressure_kpa"] = number(s.pressure);
    auto w = mole_to_mass_fractions(p.components, s.composition);
    ordered_json x = ordered_json::object(), wt = ordered_json::object();
    for (std::size_t i = 0; i < p.components.size(); ++i) {
        x[p.components[i].name] = number(s.composition[i]);
        wt[p.components[i].name] = number(w[i]);
    }
    j["mole_fractions"] = x;
    j["mass_fractions"] = wt;
    return j;
}

ordered_json residuals_json(const std::vector<SpecViolation>& v)
{
    ordered_json a = ordered_json::array();
    for (const auto& r : v) {
        a.push_back({{"kind", std::string(to_string(r.kind))}, {"column", r.column}, {"magnitude", number(r.magnitude)}});
    }
    return a;
}

ordered_json design_object(const TrainDesign& d)
{
    ordered_json cols = ordered_json::array();
    for (const auto& c : d.columns) {
        cols.push_back({{"n_stages", c.n_stages}, {"feed_stage", c.feed_stage}, {"diameter_m", c.diameter}});
    }
    return {{"columns", cols}};
}

ordered_json op_object(const OperatingPoint& op)
{
    ordered_json j;
    auto v = op.to_array();
    for (std::size_t i = 0; i < v.size(); ++i) j[OperatingPoint::names()[i]] = number(v[i]);
    return j;
}

ordered_json evaluation_object(const ProblemBundle& p, const TrainDesign& design, const Evaluation& eval)
{
    ordered_json j;
    j["design"] = design_object(design);
    j["fitness"] = number(eval.fitness);
    j["simulator_calls"] = eval.simulator_calls;
    if (!eval.diagnostics.empty()) j["diagnostics"] = eval.diagnostics;
    auto weights = scenario_weights(p.scenarios);
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < eval.per_scenario.size(); ++i) {
        const auto& r = eval.per_scenario[i];
        ordered_json row;
        row["scenario"] = i < p.scenarios.size() ? p.scenarios[i].id : std::to_string(i);
        row["weight"] = i < weights.size() ? weights[i] : 0.0;
        row["feasible"] = r.feasible;
        row["profit_eur_y"] = number(r.best_profit);
        row["operating_point"] = op_object(r.best_point);
        row["evaluations"] = r.evaluations_used;
        row["spec_residuals"] = residuals_json(r.constraint_residuals);
        if (!r.message.empty()) row["message"] = r.message;
        rows.push_back(std::move(row));
    }
    j["scenarios"] = rows;
    return j;
}

std::string utc_now()
{
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

template <class Fn>
int guarded(std::ostream& err, Fn&& fn)
{
    try {
        return fn();
    } catch (const ResumeMismatch& e) {
        err << "error: " << e.what() << '\n';
        return exit_resume_mismatch;
    } catch (const SchemaError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const InvalidInput& e) {
        err << "invalid input: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_runtime;
    }
}

TrainDesign load_design(const std::filesystem::path& path, const ProblemBundle& p)
{
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const std::exception&) {
        throw SchemaError("cannot read design file " + path.string());
    }
    try {
        return parse_design(text, p.flowsheet.pressures);
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

}  // namespace

TrainDesign parse_design(std::string_view json_text, const std::array<double, kTrainColumns>& pressures)
{
    auto j = parse_json(json_text, "design");
    TrainDesign d;
    d.pressures = pressures;
    try {
        const auto& cols = j.at("columns");
        if (!cols.is_array() || cols.size() != kTrainColumns) {
            throw SchemaError("design: \"columns\" must list " + std::to_string(kTrainColumns) + " columns");
        }
        for (std::size_t c = 0; c < kTrainColumns; ++c) {
            d.columns[c].n_stages = cols[c].at("n_stages").get<int>();
            d.columns[c].feed_stage = cols[c].at("feed_stage").get<int>();
            d.columns[c].diameter = cols[c].at("diameter_m").get<double>();
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("design: ") + e.what());
    }
    return d;
}

std::string design_json(const TrainDesign& design) { return dump(design_object(design)); }

OperatingPoint parse_operating_point(std::string_view json_text)
{
    auto j = parse_json(json_text, "operating point");
    std::array<double, 4> v{};
    try {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = j.at(OperatingPoint::names()[i]).get<double>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("operating point: ") + e.what());
    }
    return OperatingPoint::from_array(v);
}

std::string operating_point_json(const OperatingPoint& op) { return dump(op_object(op)); }

std::string manifest_json(const RunManifest& m)
{
    ordered_json j;
    j["version"] = m.version;
    j["started_utc"] = m.started;
    j["master_seed"] = std::to_string(m.seed);
    j["generations"] = m.generations;
    j["workers"] = m.workers;
    ordered_json inputs = ordered_json::array();
    for (const auto& in : m.inputs) inputs.push_back({{"path", in.path.string()}, {"checksum", in.checksum}});
    j["inputs"] = inputs;
    j["output_dir"] = m.output_dir.string();
    j["layout"] = {{"manifest", OutputLayout::manifest},   {"completion", OutputLayout::completion},
                   {"trace", OutputLayout::trace},         {"report", OutputLayout::report},
                   {"checkpoint", OutputLayout::checkpoint}};
    return dump(j);
}

std::string evaluation_json(const ProblemBundle& p, const TrainDesign& design, const Evaluation& eval)
{
    return dump(evaluation_object(p, design, eval));
}

std::string evaluation_table(const ProblemBundle& p, const Evaluation& eval)
{
    std::ostringstream os;
    os << std::left << std::setw(10) << "scenario" << std::right << std::setw(8) << "weight" << std::setw(10)
       << "feasible" << std::setw(16) << "profit_eur_y" << std::setw(10) << "R1" << std::setw(10) << "bu2"
       << std::setw(10) << "R2" << std::setw(10) << "R3" << std::setw(7) << "calls"
       << "  residuals\n";
    auto weights = scenario_weights(p.scenarios);
    os << std::fixed;
    for (std::size_t i = 0; i < eval.per_scenario.size(); ++i) {
        const auto& r = eval.per_scenario[i];
        auto x = r.best_point.to_array();
        os << std::left << std::setw(10) << p.scenarios[i].id << std::right << std::setprecision(4) << std::setw(8)
           << weights[i] << std::setw(10) << (r.feasible ? "yes" : "no") << std::setprecision(0) << std::setw(16)
           << r.best_profit << std::setprecision(4);
        for (double v : x) os << std::setw(10) << v;
        os << std::setw(7) << r.evaluations_used << "  ";
        if (r.constraint_residuals.empty()) os << '-';
        for (std::size_t k = 0; k < r.constraint_residuals.size(); ++k) {
            const auto& v = r.constraint_residuals[k];
            os << (k ? " " : "") << to_string(v.kind) << "@c" << v.column << '=' << std::scientific
               << std::setprecision(2) << v.magnitude << std::fixed;
        }
        os << '\n';
    }
    os << std::left << std::setw(10) << "mean" << std::right << std::setw(8) << "" << std::setw(10) << ""
       << std::setprecision(0) << std::setw(16) << eval.fitness << '\n';
    return os.str();
}

double mass_balance_residual(const Stream& feed, const TrainSolution& sol)
{
    auto in = component_flows(feed);
    std::vector<double> out(in.size(), 0.0);
    for (const Stream* s : {&sol.product, &sol.waste_heavy, &sol.waste_light, &sol.midboiler_out}) {
        if (s->composition.size() != in.size()) continue;
        auto f = component_flows(*s);
        for (std::size_t i = 0; i < in.size(); ++i) out[i] += f[i];
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) worst = std::max(worst, std::abs(in[i] - out[i]));
    return feed.flow > 0.0 ? worst / feed.flow : worst;
}

namespace {

std::vector<std::pair<std::string, const Stream*>> named_streams(const Stream& feed, const TrainSolution& sol)
{
    return {{"feed", &feed},
            {"c1_distillate", &sol.columns[0].distillate},
            {"c1_bottoms", &sol.columns[0].bottoms},
            {"c2_distillate", &sol.columns[1].distillate},
            {"c2_bottoms", &sol.columns[1].bottoms},
            {"c3_distillate", &sol.columns[2].distillate},
            {"c3_bottoms", &sol.columns[2].bottoms}};
}

}  // namespace

std::string simulation_json(const ProblemBundle& p, const Stream& feed, const TrainSolution& sol,
                            const OperatingPoint& op)
{
    ordered_json j;
    j["operating_point"] = op_object(op);
    j["feasible"] = sol.feasible;
    j["spec_relaxed"] = sol.spec_relaxed;
    ordered_json streams;
    for (const auto& [name, s] : named_streams(feed, sol)) {
        if (s->composition.size() == p.components.size()) streams[name] = stream_json(p, *s);
    }
    j["streams"] = streams;
    ordered_json cols = ordered_json::array();
    for (std::size_t c = 0; c < kTrainColumns; ++c) {
        const auto& col = sol.columns[c];
        cols.push_back({{"column", c + 1},
                        {"status", std::string(to_string(col.status))},
                        {"residual", number(col.residual)},
                        {"reboiler_duty_kw", number(col.reboiler_duty)},
                        {"condenser_duty_kw", number(col.condenser_duty)},
                        {"max_f_factor", number(col.max_f_factor)},
                        {"reflux_kmol_h", number(col.reflux_flow)},
                        {"boilup_kmol_h", number(col.boilup_flow)}});
    }
    j["columns"] = cols;
    j["product_purity_wt"] = number(sol.product_purity);
    j["total_reboiler_duty_kw"] = number(sol.total_reboiler_duty);
    j["total_condenser_duty_kw"] = number(sol.total_condenser_duty);
    j["mass_balance_residual"] = number(mass_balance_residual(feed, sol));
    j["spec_residuals"] = residuals_json(check_specs(sol, p.flowsheet));
    if (!sol.diagnostics.empty()) j["diagnostics"] = sol.diagnostics;
    return dump(j);
}

std::string stream_table(const ProblemBundle& p, const Stream& feed, const TrainSolution& sol)
{
    auto streams = named_streams(feed, sol);
    std::ostringstream os;
    os << std::left << std::setw(24) << "stream" << std::right;
    for (const auto& s : streams) os << std::setw(15) << s.first;
    os << '\n' << std::setprecision(6);
    auto row = [&](const std::string& label, auto value) {
        os << std::left << std::setw(24) << label << std::right;
        for (const auto& s : streams) {
            if (s.second->composition.size() == p.components.size()) {
                os << std::setw(15) << value(*s.second);
            } else {
                os << std::setw(15) << "-";
            }
        }
        os << '\n';
    };
    row("flow kmol/h", [](const Stream& s) { return s.flow; });
    row("flow kg/h", [&](const Stream& s) { return mass_flow(p.components, s); });
    row("T K", [](const Stream& s) { return s.temperature; });
    row("P kPa", [](const Stream& s) { return s.pressure; });
    for (std::size_t i = 0; i < p.components.size(); ++i) {
        row("w " + p.components[i].name, [&](const Stream& s) {
            return mole_to_mass_fractions(p.components, s.composition)[i];
        });
    }
    os << '\n';
    for (std::size_t c = 0; c < kTrainColumns; ++c) {
        const auto& col = sol.columns[c];
        os << "column " << c + 1 << ": " << to_string(col.status) << ", reboiler " << col.reboiler_duty
           << " kW, condenser " << col.condenser_duty << " kW, max F " << col.max_f_factor << " Pa^0.5\n";
    }
    os << "product purity " << sol.product_purity << " wt\n";
    os << "mass balance closure: max |in - out| / F = " << std::scientific << std::setprecision(3)
       << mass_balance_residual(feed, sol) << '\n';
    return os.str();
}

unsigned default_workers()
{
    unsigned hw = std::thread::hardware_concurrency();
    return std::clamp(hw == 0 ? 1u : hw, 1u, 8u);
}

std::filesystem::path resolve_output_dir(const std::string& flag)
{
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("DISTOPT_OUT"); env != nullptr && *env != '\0') return env;
    return "distopt_out";
}

int cmd_optimize(const OptimizeArgs& args, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        auto rc = load_run_config(args.config);
        ESConfig es = rc.es;
        if (args.seed) es.seed = *args.seed;
        if (args.generations) es.generations = *args.generations;
        es.workers = args.workers ? *args.workers : default_workers();
        validate(es);
        const auto& p = *rc.problem;

        std::filesystem::create_directories(args.out);
        auto manifest_path = args.out / OutputLayout::manifest;
        if (!(args.resume && std::filesystem::exists(manifest_path))) {
            RunManifest m{rc.inputs, es.seed, es.generations, es.workers, utc_now(), DISTOPT_VERSION, args.out};
            write_text_file(manifest_path, manifest_json(m));
        }

        EvolveOptions opts;
        opts.checkpoint = args.out / OutputLayout::checkpoint;
        opts.resume = args.resume;
        opts.fingerprint = rc.fingerprint;
        opts.on_generation = [&](const GenerationRecord& g) {
            out << "generation " << g.generation << " best " << format_double(g.best_fitness) << " mean "
                << format_double(g.mean_fitness) << " new " << g.designs_evaluated << " hits " << g.cache_hits
                << '\n'
                << std::flush;
        };
        auto trace = evolve(es, p.bounds, p.flowsheet.pressures, make_evaluator(p), opts);
        write_text_file(args.out / OutputLayout::trace, trace_csv(trace));

        const auto& last = trace.generations.back();
        auto best = decode(last.best, p.flowsheet.pressures);
        auto it = trace.cache.find(design_key(best));
        Evaluation eval = it != trace.cache.end() ? it->second : evaluate_design(p, best);
        ordered_json report;
        report["master_seed"] = std::to_string(es.seed);
        report["generations"] = last.generation;
        report["best"] = evaluation_object(p, best, eval);
        write_text_file(args.out / OutputLayout::report, dump(report));
        write_text_file(args.out / OutputLayout::completion,
                        dump(ordered_json{{"finished_utc", utc_now()}, {"exit_code", 0}}));

        out << "best design written to " << (args.out / OutputLayout::report).string() << '\n';
        out << evaluation_table(p, eval);
        return static_cast<int>(exit_ok);
    });
}

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        auto rc = load_run_config(args.config);
        const auto& p = *rc.problem;
        auto design = load_design(args.design, p);
        validate_design(design, p.bounds);
        auto eval = evaluate_design(p, design);
        std::filesystem::create_directories(args.out);
        write_text_file(args.out / OutputLayout::evaluation, evaluation_json(p, design, eval));
        out << evaluation_table(p, eval);
        return static_cast<int>(exit_ok);
    });
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        auto rc = load_run_config(args.config);
        const auto& p = *rc.problem;
        auto design = load_design(args.design, p);
        validate_design(design, p.bounds);
        const auto& scenario = find_scenario(p.scenarios, args.scenario);
        OperatingPoint op;
        try {
            op = parse_operating_point(read_text_file(args.operating_point));
        } catch (const SchemaError& e) {
            throw SchemaError(args.operating_point.string() + ": " + e.what());
        } catch (const InvalidInput&) {
            throw;
        } catch (const std::exception&) {
            throw SchemaError("cannot read operating point file " + args.operating_point.string());
        }
        auto feed = to_feed_stream(scenario, p.components, p.flowsheet.pressures[0]);
        TrainSolution sol;
        try {
            sol = simulate_train(p.components, design, op, feed, p.flowsheet);
        } catch (const NoConvergence& e) {
            err << "simulation failed: " << e.what() << " (residual " << e.residual << " after " << e.iterations
                << " iterations)\n";
            return static_cast<int>(exit_runtime);
        }
        std::filesystem::create_directories(args.out);
        write_text_file(args.out / OutputLayout::simulation, simulation_json(p, feed, sol, op));
        out << stream_table(p, feed, sol);
        if (!sol.feasible) {
            err << "simulation failed at column " << sol.failed_column << ": " << sol.diagnostics << '\n';
            for (std::size_t c = 0; c < kTrainColumns; ++c) {
                err << "  column " << c + 1 << " residual " << sol.columns[c].residual << " "
                    << sol.columns[c].message << '\n';
            }
            return static_cast<int>(exit_runtime);
        }
        return static_cast<int>(exit_ok);
    });
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Design optimisation of a three-column distillation train under feed uncertainty"};
    app.set_version_flag("--version", DISTOPT_VERSION);
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Suppress log lines on stderr");

    std::string out_flag;
    OptimizeArgs opt;
    std::uint64_t seed = 0;
    unsigned workers = 0;
    int generations = 0;
    auto* optimize = app.add_subcommand("optimize", "Run the evolution strategy");
    optimize->add_option("--config", opt.config, "Run configuration file")->required();
    auto* seed_opt = optimize->add_option("--seed", seed, "Master seed (overrides the config)");
    optimize->add_option("--out", out_flag, "Output directory (default $DISTOPT_OUT or ./distopt_out)");
    auto* workers_opt =
        optimize->add_option("--workers", workers, "Evaluation threads (default: cores, at most 8)")
            ->check(CLI::Range(1u, 1024u));
    optimize->add_flag("--resume", opt.resume, "Continue from the checkpoint in the output directory");
    auto* gen_opt = optimize->add_option("--generations", generations, "Generations (overrides the config)")
                        ->check(CLI::NonNegativeNumber);

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "Score a fixed design over all scenarios");
    evaluate->add_option("--design", ev.design, "Design file")->required();
    evaluate->add_option("--config", ev.config, "Run configuration file")->required();
    evaluate->add_option("--out", out_flag, "Output directory");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate one design at one operating point");
    simulate->add_option("--design", sim.design, "Design file")->required();
    simulate->add_option("--scenario", sim.scenario, "Scenario id")->required();
    simulate->add_option("--operating-point", sim.operating_point, "Operating point file")->required();
    simulate->add_option("--config", sim.config, "Run configuration file")->required();
    simulate->add_option("--out", out_flag, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, e2;
        int code = app.exit(e, o, e2);
        out << o.str();
        err << e2.str();
        return code == 0 ? static_cast<int>(exit_ok) : static_cast<int>(exit_config);
    }
    set_log_enabled(!quiet);

    if (optimize->parsed()) {
        if (*seed_opt) opt.seed = seed;
        if (*workers_opt) opt.workers = workers;
        if (*gen_opt) opt.generations = generations;
        opt.out = resolve_output_dir(out_flag);
        return cmd_optimize(opt, out, err);
    }
    if (evaluate->parsed()) {
        ev.out = resolve_output_dir(out_flag);
        return cmd_evaluate(ev, out, err);
    }
    sim.out = resolve_output_dir(out_flag);
    return cmd_simulate(sim, out, err);
}

}  // namespace distopt
