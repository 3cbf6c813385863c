#pragma once

// Pure-component vapour pressures and ideal (Raoult) vapour-liquid equilibrium.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace distopt {

enum class BoilingClass { low, mid, high };

std::string_view to_string(BoilingClass c);
BoilingClass parse_boiling_class(std::string_view text);

/// Extended Antoine form log10(P/kPa) = a - b / (T/K + c), valid on [t_min, t_max].
struct AntoineCoefficients {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double t_min = 0.0;
    double t_max = 0.0;
};

struct ComponentRecord {
    std::string name;
    double molar_mass = 0.0;            // kg/kmol
    double normal_boiling_point = 0.0;  // K, tabulated (same source as the Antoine set)
    AntoineCoefficients antoine;
    double heat_of_vaporization = 0.0;  // kJ/kmol
    double liquid_density = 0.0;        // kg/m3
    BoilingClass boiling_class = BoilingClass::mid;
    bool is_product = false;
};

/// Immutable, ordered component list. Every composition vector in the program is
/// indexed against this order.
class ComponentSet {
public:
    explicit ComponentSet(std::vector<ComponentRecord> records, std::string checksum = {});

    std::size_t size() const { return records_.size(); }
    const ComponentRecord& operator[](std::size_t i) const { return records_[i]; }
    const std::vector<ComponentRecord>& records() const { return records_; }

    std::optional<std::size_t> find(std::string_view name) const;
    /// Throws InvalidInput for unknown names.
    std::size_t index_of(std::string_view name) const;
    std::size_t product_index() const { return product_; }

    const std::string& checksum() const { return checksum_; }

private:
    std::vector<ComponentRecord> records_;
    std::size_t product_ = 0;
    std::string checksum_;
};

ComponentSet parse_components(std::string_view json_text);
/// Loads the component data file and logs its checksum.
ComponentSet load_components(const std::filesystem::path& path);

/// Saturation pressure in kPa. Throws TemperatureOutOfRange outside the record's range.
double psat(const ComponentRecord& component, double temperature);

/// Raoult K-value psat/P.
double k_value(const ComponentRecord& component, double temperature, double pressure);

/// Inverse Antoine: temperature at which psat equals `pressure`. Not range-checked.
double saturation_temperature(const ComponentRecord& component, double pressure);

struct BubblePoint {
    double temperature = 0.0;
    std::vector<double> vapor;
    int iterations = 0;
};

/// Liquid bubble point at fixed pressure: sum K_i x_i = 1. Bracketed bisection with a
/// secant polish. Throws NoConvergence or TemperatureOutOfRange.
BubblePoint bubble_point(const ComponentSet& components, std::span<const double> x,
                         double pressure);

struct FlashResult {
    double vapor_fraction = 0.0;  // clamped to [0, 1]
    std::vector<double> liquid;
    std::vector<double> vapor;
};

/// Isothermal flash by Rachford-Rice. Subcooled feeds return vapor_fraction 0 and
/// superheated feeds 1, with the missing phase set to its incipient composition.
FlashResult isothermal_flash(const ComponentSet& components, std::span<const double> z,
                             double temperature, double pressure);

double mean_molar_mass(const ComponentSet& components, std::span<const double> x);
std::vector<double> mass_to_mole_fractions(const ComponentSet& components,
                                           std::span<const double> w);
std::vector<double> mole_to_mass_fractions(const ComponentSet& components,
                                           std::span<const double> x);

}  // namespace distopt
