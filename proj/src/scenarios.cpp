#include "distopt/scenarios.hpp"

#include "distopt/errors.hpp"
#include "distopt/util.hpp"

#include <json.hpp>

#include <cmath>
#include <numeric>

namespace distopt {

namespace {

constexpr double kSumTolerance = 0.01;
constexpr double kWeightTolerance = 1e-9;

}  // namespace

std::vector<Scenario> parse_scenarios(std::string_view json_text, const ComponentSet& components)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("scenarios: ") + e.what());
    }

    std::vector<Scenario> out;
    try {
        auto units = doc.value("units", std::string("wt%"));
        double scale;
        if (units == "wt%") {
            scale = 0.01;
        } else if (units == "wt fraction") {
            scale = 1.0;
        } else {
            throw SchemaError("scenarios: unknown units '" + units + "'");
        }
        double flow = doc.at("feed_mass_flow_kg_h").get<double>();
        if (!(flow > 0.0) || !std::isfinite(flow)) throw SchemaError("scenarios: feed_mass_flow_kg_h must be > 0");

        auto names = doc.at("components").get<std::vector<std::string>>();
        if (names.size() != components.size()) {
            throw SchemaError("scenarios: expected " + std::to_string(components.size()) + " components, got " +
                              std::to_string(names.size()));
        }
        std::vector<std::size_t> slot(names.size());
        std::vector<bool> seen(components.size(), false);
        for (std::size_t k = 0; k < names.size(); ++k) {
            auto idx = components.find(names[k]);
            if (!idx) throw SchemaError("scenarios: unknown component '" + names[k] + "'");
            if (seen[*idx]) throw SchemaError("scenarios: duplicate component '" + names[k] + "'");
            seen[*idx] = true;
            slot[k] = *idx;
        }

        const auto& list = doc.at("scenarios");
        if (!list.is_array() || list.empty()) throw SchemaError("scenarios: empty scenario list");
        std::size_t weighted = 0;
        for (const auto& item : list) {
            Scenario s;
            s.id = item.at("id").get<std::string>();
            for (const auto& prev : out) {
                if (prev.id == s.id) throw SchemaError("scenarios: duplicate id '" + s.id + "'");
            }
            auto values = item.at("composition").get<std::vector<double>>();
            if (values.size() != names.size()) {
                throw SchemaError("scenarios: '" + s.id + "' has " + std::to_string(values.size()) +
                                  " composition entries");
            }
            s.raw_mass_percent.assign(components.size(), 0.0);
            double sum = 0.0;
            for (std::size_t k = 0; k < values.size(); ++k) {
                if (!(values[k] >= 0.0) || !std::isfinite(values[k])) {
                    throw SchemaError("scenarios: '" + s.id + "' has a negative or non-finite entry");
                }
                s.raw_mass_percent[slot[k]] = values[k];
                sum += values[k] * scale;
            }
            if (std::abs(sum - 1.0) > kSumTolerance) throw CompositionOutOfTolerance(s.id, sum);
            s.feed_mass_fractions.resize(components.size());
            for (std::size_t i = 0; i < components.size(); ++i) {
                s.feed_mass_fractions[i] = s.raw_mass_percent[i] * scale / sum;
            }
            s.feed_mass_flow = item.value("feed_mass_flow_kg_h", flow);
            if (s.feed_mass_flow != flow) {
                throw SchemaError("scenarios: '" + s.id + "' overrides the common feed flow");
            }
            if (item.contains("weight")) {
                s.weight = item.at("weight").get<double>();
                if (!(s.weight >= 0.0 && s.weight <= 1.0)) throw SchemaError("scenarios: weight outside [0, 1]");
                ++weighted;
            }
            out.push_back(std::move(s));
        }

        if (weighted == 0) {
            for (auto& s : out) s.weight = 1.0 / static_cast<double>(out.size());
        } else if (weighted != out.size()) {
            throw SchemaError("scenarios: either all or none of the scenarios carry a weight");
        } else {
            double total = 0.0;
            for (const auto& s : out) total += s.weight;
            if (std::abs(total - 1.0) > kWeightTolerance) throw SchemaError("scenarios: weights do not sum to 1");
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("scenarios: ") + e.what());
    }
    return out;
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& path, const ComponentSet& components)
{
    auto text = read_text_file(path);
    auto s = parse_scenarios(text, components);
    log_line("scenarios " + path.string() + " checksum " + checksum_hex(text));
    return s;
}

const Scenario& find_scenario(const std::vector<Scenario>& scenarios, std::string_view id)
{
    for (const auto& s : scenarios) {
        if (s.id == id) return s;
    }
    throw InvalidInput("unknown scenario '" + std::string(id) + "'");
}

Stream to_feed_stream(const Scenario& s, const ComponentSet& components, double pressure)
{
    if (s.feed_mass_fractions.size() != components.size()) {
        throw LengthMismatch(components.size(), s.feed_mass_fractions.size());
    }
    Stream feed;
    feed.composition = mass_to_mole_fractions(components, s.feed_mass_fractions);
    double kmol = 0.0;
    for (std::size_t i = 0; i < components.size(); ++i) {
        kmol += s.feed_mass_flow * s.feed_mass_fractions[i] / components[i].molar_mass;
    }
    feed.flow = kmol;
    feed.pressure = pressure;
    feed.temperature = bubble_point(components, feed.composition, pressure).temperature;
    return feed;
}

std::vector<double> scenario_weights(const std::vector<Scenario>& scenarios)
{
    std::vector<double> w;
    w.reserve(scenarios.size());
    for (const auto& s : scenarios) w.push_back(s.weight);
    return w;
}

double weighted_fitness(std::span<const double> profits, std::span<const double> weights)
{
    if (profits.size() != weights.size()) throw LengthMismatch(weights.size(), profits.size());
    double f = 0.0;
    for (std::size_t i = 0; i < profits.size(); ++i) f += weights[i] * profits[i];
    return f;
}

double weighted_fitness(std::span<const double> profits, const std::vector<bool>& feasible,
                        std::span<const double> weights, double penalty)
{
    if (feasible.size() != profits.size()) throw LengthMismatch(profits.size(), feasible.size());
    std::vector<double> mapped(profits.begin(), profits.end());
    for (std::size_t i = 0; i < mapped.size(); ++i) {
        if (!feasible[i]) mapped[i] = penalty;
    }
    return weighted_fitness(mapped, weights);
}

}  // namespace distopt
