#include "distopt/config.hpp"

#include "distopt/errors.hpp"
#include "distopt/util.hpp"

#include <json.hpp>

namespace distopt {

using nlohmann::json;

namespace {

Interval interval(const json& j, const std::string& what)
{
    if (!j.is_array() || j.size() != 2) throw SchemaError(what + ": expected [lower, upper]");
    Interval i{j[0].get<double>(), j[1].get<double>()};
    if (!(i.lower <= i.upper)) throw SchemaError(what + ": lower exceeds upper");
    return i;
}

json parse(std::string_view text, const std::string& what)
{
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaError(what + ": " + e.what());
    }
}

ESConfig es_from_json(const json& j)
{
    ESConfig c;
    c.mu = j.value("mu", c.mu);
    c.lambda = j.value("lambda", c.lambda);
    c.elite_count = j.value("elite_count", c.elite_count);
    c.generations = j.value("generations", c.generations);
    c.seed = j.value("seed", c.seed);
    c.penalty_profit = j.value("penalty_profit", c.penalty_profit);
    c.tau = j.value("tau", c.tau);
    c.tau_prime = j.value("tau_prime", c.tau_prime);
    c.sigma_min = j.value("sigma_min", c.sigma_min);
    c.sigma_max = j.value("sigma_max", c.sigma_max);
    c.initial_sigma_fraction = j.value("initial_sigma_fraction", c.initial_sigma_fraction);
    c.workers = j.value("workers", c.workers);
    auto mode = j.value("selection", std::string("elite_parents"));
    if (mode == "elite_parents") {
        c.selection = SelectionMode::elite_parents;
    } else if (mode == "plus") {
        c.selection = SelectionMode::plus;
    } else {
        throw SchemaError("es: unknown selection mode '" + mode + "'");
    }
    validate(c);
    return c;
}

SearchConfig search_from_json(const json& j)
{
    SearchConfig c;
    c.log_scale = j.value("log_scale", c.log_scale);
    c.max_evaluations = j.value("max_evaluations", c.max_evaluations);
    c.initial_step = j.value("initial_step", c.initial_step);
    c.chained_initial_step = j.value("chained_initial_step", c.chained_initial_step);
    c.step_tolerance = j.value("step_tolerance", c.step_tolerance);
    c.objective_tolerance = j.value("objective_tolerance", c.objective_tolerance);
    c.purity_tolerance = j.value("purity_tolerance", c.purity_tolerance);
    c.f_factor_tolerance = j.value("f_factor_tolerance", c.f_factor_tolerance);
    c.temperature_tolerance = j.value("temperature_tolerance", c.temperature_tolerance);
    c.purity_penalty = j.value("purity_penalty", c.purity_penalty);
    c.f_factor_penalty = j.value("f_factor_penalty", c.f_factor_penalty);
    c.temperature_penalty = j.value("temperature_penalty", c.temperature_penalty);
    validate(c);
    return c;
}

}  // namespace

FlowsheetFile parse_flowsheet_config(std::string_view text)
{
    auto j = parse(text, "flowsheet");
    FlowsheetFile f;
    auto& c = f.flowsheet;
    try {
        c.pressures = j.at("pressures_kpa").get<std::array<double, kTrainColumns>>();
        c.condenser_temperatures = j.at("condenser_temperatures_k").get<std::array<double, 2>>();
        c.c1_reboiler_temperature = j.at("c1_reboiler_temperature_k").get<double>();
        c.t_degradation = j.at("degradation_temperature_k").get<double>();
        c.product_purity = j.at("product_purity_wt").get<double>();
        c.init_f_factor = j.value("init_f_factor", c.init_f_factor);
        const auto& band = j.at("f_factor_band");
        if (!band.is_array() || band.size() != kTrainColumns) throw SchemaError("flowsheet: f_factor_band needs 3 entries");
        for (std::size_t k = 0; k < kTrainColumns; ++k) c.f_factor_band[k] = interval(band[k], "flowsheet: f_factor_band");
        const auto& ob = j.at("operating_bounds");
        for (std::size_t k = 0; k < 4; ++k) {
            const char* name = OperatingPoint::names()[k];
            c.operating_bounds[k] = interval(ob.at(name), std::string("flowsheet: operating_bounds.") + name);
        }
        if (j.contains("solver")) {
            const auto& s = j["solver"];
            auto& o = c.solver;
            o.max_sweeps = s.value("max_sweeps", o.max_sweeps);
            o.tolerance = s.value("tolerance", o.tolerance);
            o.damping = s.value("damping", o.damping);
            o.acceleration_depth = s.value("acceleration_depth", o.acceleration_depth);
            o.max_spec_iterations = s.value("max_spec_iterations", o.max_spec_iterations);
            o.purity_tolerance = s.value("purity_tolerance", o.purity_tolerance);
            o.temperature_tolerance = s.value("temperature_tolerance", o.temperature_tolerance);
        }
        f.bounds = default_train_bounds();
        if (j.contains("design_bounds")) {
            const auto& db = j["design_bounds"];
            if (!db.is_array() || db.size() != kTrainColumns) throw SchemaError("flowsheet: design_bounds needs 3 entries");
            for (std::size_t k = 0; k < kTrainColumns; ++k) {
                auto st = interval(db[k].at("stages"), "flowsheet: design_bounds.stages");
                auto fd = interval(db[k].at("feed"), "flowsheet: design_bounds.feed");
                auto di = interval(db[k].at("diameter_m"), "flowsheet: design_bounds.diameter_m");
                f.bounds[k] = {static_cast<int>(st.lower), static_cast<int>(st.upper), static_cast<int>(fd.lower),
                               static_cast<int>(fd.upper), di.lower, di.upper};
            }
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("flowsheet: ") + e.what());
    }
    for (double p : c.pressures) {
        if (!(p > 0.0 && p < 101.3)) throw SchemaError("flowsheet: pressures must lie in (0, 101.3) kPa");
    }
    if (!(c.product_purity > 0.0 && c.product_purity < 1.0)) throw SchemaError("flowsheet: purity must lie in (0, 1)");
    if (!(c.c1_reboiler_temperature > 0.0 && c.t_degradation > 0.0)) throw SchemaError("flowsheet: temperatures must be > 0");
    gene_bounds(f.bounds);
    return f;
}

ESConfig parse_es_config(std::string_view text)
{
    try {
        return es_from_json(parse(text, "es"));
    } catch (const json::exception& e) {
        throw SchemaError(std::string("es: ") + e.what());
    }
}

SearchConfig parse_search_config(std::string_view text)
{
    try {
        return search_from_json(parse(text, "search"));
    } catch (const json::exception& e) {
        throw SchemaError(std::string("search: ") + e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    RunConfig rc;
    rc.file = path;
    std::string combined;
    auto read = [&](const std::filesystem::path& p) {
        std::string text;
        try {
            text = read_text_file(p);
        } catch (const SchemaError&) {
            throw SchemaError("cannot read config file: " + p.string());
        }
        rc.inputs.push_back({p, checksum_hex(text)});
        combined += rc.inputs.back().checksum;
        return text;
    };

    auto run = parse(read(path), path.string());
    auto base = path.parent_path();
    auto ref = [&](const char* key) {
        try {
            return base / run.at(key).get<std::string>();
        } catch (const json::exception&) {
            throw SchemaError(path.string() + ": missing file reference '" + key + "'");
        }
    };

    auto components_path = ref("components");
    auto scenarios_path = ref("scenarios");
    auto econ_path = ref("economics");
    auto flowsheet_path = ref("flowsheet");

    auto components = parse_components(read(components_path));
    std::vector<Scenario> scenarios;
    EconParams econ;
    FlowsheetFile fs;
    auto with_path = [](const std::filesystem::path& p, const auto& fn) {
        try {
            return fn();
        } catch (const CompositionOutOfTolerance&) {
            throw;
        } catch (const SchemaError& e) {
            throw SchemaError(p.string() + ": " + e.what());
        }
    };
    scenarios = with_path(scenarios_path, [&] { return parse_scenarios(read(scenarios_path), components); });
    econ = with_path(econ_path, [&] { return parse_econ_params(read(econ_path)); });
    fs = with_path(flowsheet_path, [&] { return parse_flowsheet_config(read(flowsheet_path)); });

    try {
        rc.es = es_from_json(run.value("es", json::object()));
        auto search = search_from_json(run.value("search", json::object()));
        search.bounds = fs.flowsheet.operating_bounds;
        validate(search);
        rc.problem = std::make_shared<const ProblemBundle>(
            ProblemBundle{std::move(components), std::move(scenarios), econ, fs.flowsheet, search, fs.bounds,
                          rc.es.penalty_profit});
    } catch (const json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    rc.fingerprint = checksum_hex(combined);
    for (const auto& in : rc.inputs) log_line("config " + in.path.string() + " checksum " + in.checksum);
    return rc;
}

}  // namespace distopt
