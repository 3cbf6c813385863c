#include "distopt/thermo.hpp"

#include "distopt/errors.hpp"
#include "distopt/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace distopt {

namespace {

constexpr double kLn10 = 2.302585092994046;
constexpr double kBracketWidening = 20.0;  // K
constexpr int kBubbleBudget = 200;
constexpr double kBubbleTolerance = 1e-10;

void check_composition(std::span<const double> x, std::size_t n)
{
    if (x.size() != n) {
        throw LengthMismatch(n, x.size());
    }
    double sum = 0.0;
    for (double v : x) {
        if (!(v >= 0.0)) {
            throw InvalidInput("composition entries must be non-negative");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw InvalidInput("composition must sum to 1, got " + std::to_string(sum));
    }
}

double finite_positive(const nlohmann::json& j, const char* key, const std::string& who)
{
    if (!j.contains(key) || !j.at(key).is_number()) {
        throw SchemaError("component '" + who + "': missing numeric field '" + key + "'");
    }
    double v = j.at(key).get<double>();
    if (!std::isfinite(v) || v <= 0.0) {
        throw SchemaError("component '" + who + "': field '" + key + "' must be positive");
    }
    return v;
}

}  // namespace

std::string_view to_string(BoilingClass c)
{
    switch (c) {
    case BoilingClass::low: return "low";
    case BoilingClass::mid: return "mid";
    case BoilingClass::high: return "high";
    }
    return "mid";
}

BoilingClass parse_boiling_class(std::string_view text)
{
    if (text == "low") return BoilingClass::low;
    if (text == "mid") return BoilingClass::mid;
    if (text == "high") return BoilingClass::high;
    throw SchemaError("unknown boiling class '" + std::string(text) + "'");
}

ComponentSet::ComponentSet(std::vector<ComponentRecord> records, std::string checksum)
    : records_(std::move(records)), checksum_(std::move(checksum))
{
    if (records_.empty()) {
        throw SchemaError("component set is empty");
    }
    std::set<std::string> names;
    std::size_t products = 0;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        if (!names.insert(r.name).second) {
            throw SchemaError("duplicate component name '" + r.name + "'");
        }
        if (!(r.molar_mass > 0.0) || !(r.heat_of_vaporization > 0.0)) {
            throw SchemaError("component '" + r.name + "': molar mass and enthalpy must be positive");
        }
        if (!(r.antoine.t_min < r.antoine.t_max)) {
            throw SchemaError("component '" + r.name + "': empty Antoine validity range");
        }
        // psat is increasing wherever T + c > 0 provided b > 0.
        if (!(r.antoine.b > 0.0) || !(r.antoine.t_min + r.antoine.c > 0.0)) {
            throw SchemaError("component '" + r.name + "': Antoine set not monotone on its range");
        }
        if (r.is_product) {
            ++products;
            product_ = i;
        }
    }
    if (products != 1) {
        throw SchemaError("exactly one component must be flagged as product, found " +
                          std::to_string(products));
    }
}

std::optional<std::size_t> ComponentSet::find(std::string_view name) const
{
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (records_[i].name == name) {
            return i;
        }
    }
    return std::nullopt;
}

std::size_t ComponentSet::index_of(std::string_view name) const
{
    if (auto i = find(name)) {
        return *i;
    }
    throw InvalidInput("unknown component '" + std::string(name) + "'");
}

ComponentSet parse_components(std::string_view json_text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("component file is not valid JSON: ") + e.what());
    }
    if (!doc.contains("components") || !doc.at("components").is_array()) {
        throw SchemaError("component file lacks a 'components' array");
    }
    std::vector<ComponentRecord> records;
    for (const auto& c : doc.at("components")) {
        ComponentRecord r;
        if (!c.contains("name") || !c.at("name").is_string()) {
            throw SchemaError("component entry without a name");
        }
        r.name = c.at("name").get<std::string>();
        r.molar_mass = finite_positive(c, "molar_mass", r.name);
        r.normal_boiling_point = finite_positive(c, "normal_boiling_point_k", r.name);
        r.heat_of_vaporization = finite_positive(c, "heat_of_vaporization", r.name);
        r.liquid_density = finite_positive(c, "liquid_density", r.name);
        if (!c.contains("antoine")) {
            throw SchemaError("component '" + r.name + "': missing antoine block");
        }
        const auto& a = c.at("antoine");
        if (a.value("units", "") != "kPa,K") {
            throw SchemaError("component '" + r.name + "': Antoine units must be 'kPa,K'");
        }
        try {
            r.antoine.a = a.at("A").get<double>();
            r.antoine.b = a.at("B").get<double>();
            r.antoine.c = a.at("C").get<double>();
            auto range = a.at("valid_range_k").get<std::vector<double>>();
            if (range.size() != 2) {
                throw SchemaError("component '" + r.name + "': valid_range_k needs two entries");
            }
            r.antoine.t_min = range[0];
            r.antoine.t_max = range[1];
            r.boiling_class = parse_boiling_class(c.at("boiling_class").get<std::string>());
            r.is_product = c.value("is_product", false);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("component '" + r.name + "': " + e.what());
        }
        records.push_back(std::move(r));
    }
    return ComponentSet(std::move(records), checksum_hex(json_text));
}

ComponentSet load_components(const std::filesystem::path& path)
{
    auto text = read_text_file(path);
    auto set = parse_components(text);
    log_line("loaded " + std::to_string(set.size()) + " components from " + path.string() +
             " (fnv1a64 " + set.checksum() + ")");
    return set;
}

double psat(const ComponentRecord& component, double temperature)
{
    const auto& a = component.antoine;
    if (!(temperature >= a.t_min && temperature <= a.t_max)) {
        throw TemperatureOutOfRange(component.name, temperature);
    }
    return std::pow(10.0, a.a - a.b / (temperature + a.c));
}

double k_value(const ComponentRecord& component, double temperature, double pressure)
{
    if (!(pressure > 0.0)) {
        throw NonPositivePressure(pressure);
    }
    return psat(component, temperature) / pressure;
}

double saturation_temperature(const ComponentRecord& component, double pressure)
{
    if (!(pressure > 0.0)) {
        throw NonPositivePressure(pressure);
    }
    const auto& a = component.antoine;
    return a.b / (a.a - std::log10(pressure)) - a.c;
}

BubblePoint bubble_point(const ComponentSet& components, std::span<const double> x,
                         double pressure)
{
    if (!(pressure > 0.0)) {
        throw NonPositivePressure(pressure);
    }
    check_composition(x, components.size());

    // Bracket between the lightest and heaviest boiling temperature of the present
    // species, widened and clipped to the range every present species supports.
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double range_lo = -lo;
    double range_hi = lo;
    for (std::size_t i = 0; i < components.size(); ++i) {
        if (x[i] <= 0.0) continue;
        double tb = saturation_temperature(components[i], pressure);
        lo = std::min(lo, tb);
        hi = std::max(hi, tb);
        range_lo = std::max(range_lo, components[i].antoine.t_min);
        range_hi = std::min(range_hi, components[i].antoine.t_max);
    }
    lo = std::max(lo - kBracketWidening, range_lo);
    hi = std::min(hi + kBracketWidening, range_hi);
    if (!(lo < hi)) {
        throw TemperatureOutOfRange("mixture", 0.5 * (lo + hi));
    }

    auto residual = [&](double t) {
        double s = 0.0;
        for (std::size_t i = 0; i < components.size(); ++i) {
            if (x[i] > 0.0) s += x[i] * k_value(components[i], t, pressure);
        }
        return s - 1.0;
    };

    double f_lo = residual(lo);
    double f_hi = residual(hi);
    if (f_lo > 0.0) throw TemperatureOutOfRange("mixture", lo);
    if (f_hi < 0.0) throw TemperatureOutOfRange("mixture", hi);

    BubblePoint result;
    double t = lo;
    double f = f_lo;
    int it = 0;
    // Bisection until the bracket is narrow, then secant steps kept inside the bracket.
    for (; it < kBubbleBudget && hi - lo > 0.05; ++it) {
        t = 0.5 * (lo + hi);
        f = residual(t);
        if (f == 0.0) break;
        (f < 0.0 ? lo : hi) = t;
        (f < 0.0 ? f_lo : f_hi) = f;
    }
    bool done = (f == 0.0);
    for (; !done && it < kBubbleBudget; ++it) {
        t = lo - f_lo * (hi - lo) / (f_hi - f_lo);
        if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
        f = residual(t);
        if (std::abs(f) <= kBubbleTolerance) {
            done = true;
            break;
        }
        if (f < 0.0) {
            lo = t;
            f_lo = f;
        } else {
            hi = t;
            f_hi = f;
        }
        if (hi - lo < 1e-13 * t) {
            done = std::abs(f) <= 1e-8;
            break;
        }
    }
    if (!done) {
        throw NoConvergence("bubble point", std::abs(f), it);
    }
    result.temperature = t;
    result.iterations = it;
    result.vapor.resize(components.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < components.size(); ++i) {
        result.vapor[i] = x[i] > 0.0 ? x[i] * k_value(components[i], t, pressure) : 0.0;
        sum += result.vapor[i];
    }
    for (double& v : result.vapor) v /= sum;
    return result;
}

FlashResult isothermal_flash(const ComponentSet& components, std::span<const double> z,
                             double temperature, double pressure)
{
    check_composition(z, components.size());
    const std::size_t n = components.size();
    std::vector<double> k(n);
    for (std::size_t i = 0; i < n; ++i) {
        k[i] = k_value(components[i], temperature, pressure);
    }
    FlashResult out;
    out.liquid.assign(n, 0.0);
    out.vapor.assign(n, 0.0);

    double bubble = 0.0;  // sum z K
    double dew = 0.0;     // sum z / K
    for (std::size_t i = 0; i < n; ++i) {
        bubble += z[i] * k[i];
        dew += z[i] / k[i];
    }
    auto finish = [&](double beta) {
        out.vapor_fraction = beta;
        double sl = 0.0;
        double sv = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            out.liquid[i] = z[i] / (1.0 + beta * (k[i] - 1.0));
            out.vapor[i] = k[i] * out.liquid[i];
            sl += out.liquid[i];
            sv += out.vapor[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            out.liquid[i] /= sl;
            out.vapor[i] /= sv;
        }
        return out;
    };
    if (bubble <= 1.0) return finish(0.0);
    if (dew <= 1.0) return finish(1.0);

    // Rachford-Rice on the physical window between the asymptotes, Newton with bisection guard.
    double k_max = *std::max_element(k.begin(), k.end());
    double k_min = *std::min_element(k.begin(), k.end());
    double lo = std::max(0.0, 1.0 / (1.0 - k_max));
    double hi = std::min(1.0, 1.0 / (1.0 - k_min));
    auto rr = [&](double beta, double& deriv) {
        double g = 0.0;
        deriv = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = 1.0 + beta * (k[i] - 1.0);
            g += z[i] * (k[i] - 1.0) / d;
            deriv -= z[i] * (k[i] - 1.0) * (k[i] - 1.0) / (d * d);
        }
        return g;
    };
    double beta = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        double d = 0.0;
        double g = rr(beta, d);
        if (std::abs(g) < 1e-15) break;
        (g > 0.0 ? lo : hi) = beta;
        double next = beta - g / d;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - beta) < 1e-16) {
            beta = next;
            break;
        }
        beta = next;
    }
    return finish(std::clamp(beta, 0.0, 1.0));
}

double mean_molar_mass(const ComponentSet& components, std::span<const double> x)
{
    if (x.size() != components.size()) {
        throw LengthMismatch(components.size(), x.size());
    }
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m += x[i] * components[i].molar_mass;
    return m;
}

std::vector<double> mass_to_mole_fractions(const ComponentSet& components,
                                           std::span<const double> w)
{
    if (w.size() != components.size()) {
        throw LengthMismatch(components.size(), w.size());
    }
    std::vector<double> x(w.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        x[i] = w[i] / components[i].molar_mass;
        sum += x[i];
    }
    if (!(sum > 0.0)) {
        throw InvalidInput("mass fractions are all zero");
    }
    for (double& v : x) v /= sum;
    return x;
}

std::vector<double> mole_to_mass_fractions(const ComponentSet& components,
                                           std::span<const double> x)
{
    if (x.size() != components.size()) {
        throw LengthMismatch(components.size(), x.size());
    }
    std::vector<double> w(x.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        w[i] = x[i] * components[i].molar_mass;
        sum += w[i];
    }
    if (!(sum > 0.0)) {
        throw InvalidInput("mole fractions are all zero");
    }
    for (double& v : w) v /= sum;
    return w;
}

}  // namespace distopt
