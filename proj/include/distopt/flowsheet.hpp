#pragma once

// Three-column train: column 1 removes the heavies at the bottom, column 2 takes the
// lights overhead, column 3 recovers the product overhead with a total condenser at the
// purity specification.

#include "distopt/column.hpp"
#include "distopt/thermo.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace distopt {

inline constexpr std::size_t kTrainColumns = 3;

struct TrainDesign {
    std::array<ColumnDesign, kTrainColumns> columns{};
    std::array<double, kTrainColumns> pressures{};  // kPa, configuration
};

struct OperatingPoint {
    double reflux_ratio_c1 = 1.0;
    double boilup_ratio_c2 = 1.0;
    double reflux_ratio_c2 = 1.0;
    double reflux_ratio_c3 = 1.0;

    static constexpr std::size_t size() { return 4; }
    std::array<double, 4> to_array() const
    {
        return {reflux_ratio_c1, boilup_ratio_c2, reflux_ratio_c2, reflux_ratio_c3};
    }
    static OperatingPoint from_array(const std::array<double, 4>& v)
    {
        return {v[0], v[1], v[2], v[3]};
    }
    static const std::array<const char*, 4>& names();
    bool operator==(const OperatingPoint&) const = default;
};

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
    bool contains(double v) const { return v >= lower && v <= upper; }
};

struct FlowsheetConfig {
    std::array<double, kTrainColumns> pressures{30.0, 30.0, 20.0};  // kPa
    std::array<double, 2> condenser_temperatures{318.15, 318.15};  // columns 1-2, K
    double c1_reboiler_temperature = 468.15;  // K, closing spec of column 1
    double t_degradation = 473.15;            // K, ceiling on the column-1 reboiler
    double product_purity = 0.995;            // wt fraction of the product in column-3 distillate
    std::array<Interval, kTrainColumns> f_factor_band{{{0.5, 2.5}, {0.5, 2.5}, {0.5, 2.5}}};
    std::array<Interval, 4> operating_bounds{{{0.1, 20.0}, {0.05, 20.0}, {0.1, 50.0}, {0.1, 30.0}}};
    double init_f_factor = 1.2;  // target F-factor used to pick the starting reflux ratios
    ColumnSolverOptions solver;
};

/// Design bounds for one column role (stage count, feed stage, diameter in m).
struct ColumnBounds {
    int stages_min = 5;
    int stages_max = 40;
    int feed_min = 3;
    int feed_max = 38;
    double diameter_min = 0.5;
    double diameter_max = 3.0;
};

using TrainBounds = std::array<ColumnBounds, kTrainColumns>;
TrainBounds default_train_bounds();

/// Throws InvalidInput when a column violates its bounds, its feed stage is not at least
/// two stages above the bottom, or its diameter is off the 0.1 m grid.
void validate_design(const TrainDesign& design, const TrainBounds& bounds);

struct TrainSolution {
    std::array<ColumnSolution, kTrainColumns> columns;
    Stream product;        // column 3 distillate
    Stream waste_heavy;    // column 1 bottoms
    Stream waste_light;    // column 2 distillate
    Stream midboiler_out;  // column 3 bottoms
    double total_reboiler_duty = 0.0;   // kW
    double total_condenser_duty = 0.0;  // kW
    double product_purity = 0.0;        // wt fraction
    std::array<double, kTrainColumns> max_f_factors{};
    double c1_reboiler_temperature = 0.0;
    bool feasible = false;  // every column converged
    /// Column-3 purity out of reach: that column is reported at its closest purity and the
    /// shortfall shows up in check_specs.
    bool spec_relaxed = false;
    int failed_column = 0;  // 1-based; 0 when all converged
    std::string diagnostics;
};

/// Previous per-column solutions used as warm starts.
struct TrainWarmStart {
    std::array<std::optional<ColumnSolution>, kTrainColumns> columns;
};

/// Per-column result memo keyed by exact column inputs. Consecutive evaluations that only
/// change downstream variables reuse upstream columns; the most recent solution of each
/// column also serves as warm start.
class ColumnMemo {
public:
    explicit ColumnMemo(std::size_t capacity = 16) : capacity_(capacity) {}
    const ColumnSolution* find(std::size_t column, const std::vector<double>& key) const;
    void store(std::size_t column, std::vector<double> key, const ColumnSolution& solution);
    const ColumnSolution* latest(std::size_t column) const;
    std::size_t solves() const { return solves_; }
    void count_solve() { ++solves_; }

private:
    struct Entry {
        std::vector<double> key;
        ColumnSolution solution;
    };
    std::size_t capacity_;
    std::array<std::vector<Entry>, kTrainColumns> entries_;
    std::array<std::optional<ColumnSolution>, kTrainColumns> latest_;
    std::size_t solves_ = 0;
};

/// Liquid feed brought to its bubble point at `pressure`.
Stream saturated_liquid(const ComponentSet& components, const Stream& stream, double pressure);

TrainSolution simulate_train(const ComponentSet& components, const TrainDesign& design,
                             const OperatingPoint& op, const Stream& feed,
                             const FlowsheetConfig& cfg, const TrainWarmStart* warm = nullptr,
                             ColumnMemo* memo = nullptr);

struct TrainInitialization {
    OperatingPoint start;
    TrainWarmStart warm;
    /// Sharp-split estimates per column: {distillate, bottoms}.
    std::array<std::array<Stream, 2>, kTrainColumns> split_estimates;
};

/// Staged initialisation: sharp-split profiles by boiling class, starting ratios sized to
/// the target F-factor, then one full solve per column. Throws InitializationFailed.
TrainInitialization initialize_train(const ComponentSet& components, const TrainDesign& design,
                                     const Stream& feed, const FlowsheetConfig& cfg);

enum class SpecKind { purity, reboiler_temperature, f_factor_high, f_factor_low };
std::string_view to_string(SpecKind kind);

struct SpecViolation {
    SpecKind kind = SpecKind::purity;
    int column = 0;  // 1-based
    double magnitude = 0.0;
};

/// Quantified violations of purity, column-1 reboiler ceiling and F-factor bands.
std::vector<SpecViolation> check_specs(const TrainSolution& sol, const FlowsheetConfig& cfg);

}  // namespace distopt
