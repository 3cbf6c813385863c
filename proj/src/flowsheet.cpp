#include "distopt/flowsheet.hpp"

#include "distopt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace distopt {

const std::array<const char*, 4>& OperatingPoint::names()
{
    static const std::array<const char*, 4> n{"reflux_ratio_c1", "boilup_ratio_c2", "reflux_ratio_c2",
                                              "reflux_ratio_c3"};
    return n;
}

TrainBounds default_train_bounds()
{
    TrainBounds b;
    b[0] = {5, 40, 3, 38, 0.5, 3.0};
    b[1] = {5, 40, 3, 38, 0.5, 3.0};
    b[2] = {10, 60, 5, 58, 0.5, 3.0};
    return b;
}

void validate_design(const TrainDesign& design, const TrainBounds& bounds)
{
    for (std::size_t c = 0; c < kTrainColumns; ++c) {
        const auto& col = design.columns[c];
        const auto& b = bounds[c];
        auto fail = [&](const std::string& what) {
            throw InvalidInput("column " + std::to_string(c + 1) + ": " + what);
        };
        if (col.n_stages < b.stages_min || col.n_stages > b.stages_max) {
            fail("stage count " + std::to_string(col.n_stages) + " outside [" + std::to_string(b.stages_min) +
                 ", " + std::to_string(b.stages_max) + "]");
        }
        if (col.feed_stage < b.feed_min || col.feed_stage > b.feed_max) {
            fail("feed stage " + std::to_string(col.feed_stage) + " outside [" + std::to_string(b.feed_min) +
                 ", " + std::to_string(b.feed_max) + "]");
        }
        if (col.feed_stage > col.n_stages - 2) {
            fail("feed stage " + std::to_string(col.feed_stage) + " must be at least two stages above the bottom");
        }
        if (!(col.diameter >= b.diameter_min - 1e-9 && col.diameter <= b.diameter_max + 1e-9)) {
            fail("diameter outside bounds");
        }
        double steps = col.diameter * 10.0;
        if (std::abs(steps - std::round(steps)) > 1e-6) fail("diameter not on the 0.1 m grid");
        if (!(design.pressures[c] > 0.0) || design.pressures[c] >= 101.3) {
            fail("pressure must lie in (0, 101.3) kPa");
        }
    }
}

const ColumnSolution* ColumnMemo::find(std::size_t column, const std::vector<double>& key) const
{
    for (const auto& e : entries_[column]) {
        if (e.key == key) return &e.solution;
    }
    return nullptr;
}

void ColumnMemo::store(std::size_t column, std::vector<double> key, const ColumnSolution& solution)
{
    auto& list = entries_[column];
    if (list.size() >= capacity_) list.erase(list.begin());
    list.push_back({std::move(key), solution});
    if (!solution.stages.empty()) latest_[column] = solution;
}

const ColumnSolution* ColumnMemo::latest(std::size_t column) const
{
    return latest_[column] ? &*latest_[column] : nullptr;
}

Stream saturated_liquid(const ComponentSet& components, const Stream& stream, double pressure)
{
    Stream s = stream;
    s.pressure = pressure;
    s.temperature = bubble_point(components, s.composition, pressure).temperature;
    return s;
}

namespace {

constexpr double kSeedFeedShare = 0.3;

std::vector<double> memo_key(const ColumnDesign& d, const ColumnOperating& op, double spec, const Stream& feed)
{
    std::vector<double> key;
    key.reserve(6 + feed.composition.size());
    key.insert(key.end(), {static_cast<double>(d.n_stages), static_cast<double>(d.feed_stage), d.diameter,
                           op.pressure, op.reflux_ratio, spec, feed.flow});
    key.insert(key.end(), feed.composition.begin(), feed.composition.end());
    return key;
}

/// Normalised composition of the components selected by `keep`, with its molar flow.
Stream sub_stream(const Stream& feed, const std::vector<bool>& keep)
{
    Stream s;
    s.pressure = feed.pressure;
    s.composition.assign(feed.composition.size(), 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i]) {
            s.composition[i] = feed.composition[i];
            sum += feed.composition[i];
        }
    }
    if (sum > 0.0) {
        for (double& x : s.composition) x /= sum;
    }
    s.flow = feed.flow * sum;
    return s;
}

std::array<ColumnOperating, kTrainColumns> column_operating(const ComponentSet& components,
                                                            const TrainDesign& design,
                                                            const OperatingPoint& op,
                                                            const FlowsheetConfig& cfg)
{
    std::array<ColumnOperating, kTrainColumns> out;
    out[0] = {design.pressures[0], PartialCondenser{cfg.condenser_temperatures[0]}, op.reflux_ratio_c1,
              ReboilerTemperature{cfg.c1_reboiler_temperature}};
    out[1] = {design.pressures[1], PartialCondenser{cfg.condenser_temperatures[1]}, op.reflux_ratio_c2,
              BoilupRatio{op.boilup_ratio_c2}};
    out[2] = {design.pressures[2], TotalCondenser{}, op.reflux_ratio_c3,
              DistillatePurity{components.product_index(), cfg.product_purity}};
    return out;
}

double spec_value(const ColumnOperating& op)
{
    return std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, DistillatePurity>) {
                return s.mass_fraction;
            } else {
                return s.value;
            }
        },
        op.closing);
}

double purity_of(const ComponentSet& components, const Stream& s)
{
    auto w = mole_to_mass_fractions(components, s.composition);
    return w[components.product_index()];
}

}  // namespace

TrainSolution simulate_train(const ComponentSet& components, const TrainDesign& design,
                             const OperatingPoint& op, const Stream& feed, const FlowsheetConfig& cfg,
                             const TrainWarmStart* warm, ColumnMemo* memo)
{
    validate_stream(feed, components.size());
    if (!(feed.flow > 0.0)) throw InvalidInput("train feed flow must be positive");
    for (double v : op.to_array()) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("operating point entries must be non-negative");
    }

    TrainSolution out;
    const auto ops = column_operating(components, design, op, cfg);
    Stream column_feed = saturated_liquid(components, feed, design.pressures[0]);

    for (std::size_t c = 0; c < kTrainColumns; ++c) {
        const ColumnSolution* init = nullptr;
        if (memo != nullptr) init = memo->latest(c);
        if (init == nullptr && warm != nullptr && warm->columns[c]) init = &*warm->columns[c];

        const ColumnSolution* cached = nullptr;
        std::vector<double> key;
        if (memo != nullptr) {
            key = memo_key(design.columns[c], ops[c], spec_value(ops[c]), column_feed);
            cached = memo->find(c, key);
        }
        if (cached != nullptr) {
            out.columns[c] = *cached;
        } else {
            out.columns[c] = solve_column(components, design.columns[c], ops[c], column_feed, init, cfg.solver);
            // The stage solver is start-dependent; a failed warm start is retried from the
            // initialisation profile and then cold. An unattainable spec is not retried.
            const ColumnSolution* seed = warm != nullptr && warm->columns[c] ? &*warm->columns[c] : nullptr;
            for (const ColumnSolution* retry : {seed, static_cast<const ColumnSolution*>(nullptr)}) {
                if (out.columns[c].status != ColumnStatus::no_convergence || retry == init) continue;
                auto again = solve_column(components, design.columns[c], ops[c], column_feed, retry, cfg.solver);
                again.sweeps += out.columns[c].sweeps;
                out.columns[c] = std::move(again);
                init = retry;
            }
            if (memo != nullptr) {
                memo->count_solve();
                memo->store(c, std::move(key), out.columns[c]);
            }
        }

        const auto& sol = out.columns[c];
        const bool relaxed = c == 2 && sol.status == ColumnStatus::spec_unattainable && !sol.stages.empty();
        if (relaxed) {
            out.spec_relaxed = true;
            out.diagnostics = "column 3 " + sol.message;
        }
        if (!sol.converged() && !relaxed) {
            out.feasible = false;
            out.failed_column = static_cast<int>(c) + 1;
            std::ostringstream msg;
            msg << "column " << c + 1 << ' ' << to_string(sol.status) << ": " << sol.message
                << " (residual " << sol.residual << ", sweeps " << sol.sweeps << ")";
            out.diagnostics = msg.str();
            return out;
        }
        out.max_f_factors[c] = sol.max_f_factor;
        out.total_reboiler_duty += sol.reboiler_duty;
        out.total_condenser_duty += sol.condenser_duty;
        if (c == 0) {
            out.waste_heavy = sol.bottoms;
            out.c1_reboiler_temperature = sol.bottoms.temperature;
            column_feed = saturated_liquid(components, sol.distillate, design.pressures[1]);
        } else if (c == 1) {
            out.waste_light = sol.distillate;
            column_feed = saturated_liquid(components, sol.bottoms, design.pressures[2]);
        } else {
            out.product = sol.distillate;
            out.midboiler_out = sol.bottoms;
        }
    }
    out.product_purity = purity_of(components, out.product);
    out.feasible = true;
    return out;
}

TrainInitialization initialize_train(const ComponentSet& components, const TrainDesign& design,
                                     const Stream& feed, const FlowsheetConfig& cfg)
{
    validate_stream(feed, components.size());
    if (!(feed.flow > 0.0)) throw InvalidInput("train feed flow must be positive");
    const std::size_t nc = components.size();
    const std::size_t product = components.product_index();

    TrainInitialization init;
    std::vector<bool> not_high(nc), low(nc), is_product(nc);
    for (std::size_t i = 0; i < nc; ++i) {
        not_high[i] = components[i].boiling_class != BoilingClass::high;
        low[i] = components[i].boiling_class == BoilingClass::low;
        is_product[i] = i == product;
    }
    auto complement = [](std::vector<bool> v) {
        v.flip();
        return v;
    };

    // Sharp splits: heavies down in column 1, lights up in column 2, product up in column 3.
    const std::array<std::vector<bool>, kTrainColumns> tops{not_high, low, is_product};
    std::array<Stream, kTrainColumns> feeds;
    feeds[0] = feed;
    for (std::size_t c = 0; c < kTrainColumns; ++c) {
        Stream top = sub_stream(feeds[c], tops[c]);
        Stream bottom = sub_stream(feeds[c], complement(tops[c]));
        if (!(top.flow > 0.0) || !(bottom.flow > 0.0)) {
            throw InitializationFailed(static_cast<int>(c) + 1, "sharp split leaves an empty product");
        }
        init.split_estimates[c] = {top, bottom};
        if (c + 1 < kTrainColumns) feeds[c + 1] = c == 0 ? top : bottom;
    }

    // Constant-composition warm-start profiles and F-factor-sized starting ratios.
    std::array<double, kTrainColumns> vapor{};
    for (std::size_t c = 0; c < kTrainColumns; ++c) {
        const auto& col = design.columns[c];
        const double p = design.pressures[c];
        const auto& [top, bottom] = init.split_estimates[c];
        ColumnSolution seed;
        try {
            // Section compositions leaning towards the sharp split but keeping every feed
            // component present.
            auto lean = [&](const Stream& product) {
                std::vector<double> x(nc);
                for (std::size_t i = 0; i < nc; ++i) {
                    x[i] = (1.0 - kSeedFeedShare) * product.composition[i] + kSeedFeedShare * feeds[c].composition[i];
                }
                return x;
            };
            const auto x_top = lean(top);
            const auto x_bottom = lean(bottom);
            double t_top = bubble_point(components, x_top, p).temperature;
            double t_bottom = bubble_point(components, x_bottom, p).temperature;
            seed.stages.resize(static_cast<std::size_t>(col.n_stages));
            for (int j = 0; j < col.n_stages; ++j) {
                bool rectifying = j < col.feed_stage - 1;
                auto& s = seed.stages[static_cast<std::size_t>(j)];
                s.temperature = rectifying ? t_top : t_bottom;
                s.liquid = rectifying ? x_top : x_bottom;
            }
            double unit_f = f_factor(components, 1.0, top.composition, t_top, p, col.diameter);
            vapor[c] = cfg.init_f_factor / unit_f;
        } catch (const Error& e) {
            throw InitializationFailed(static_cast<int>(c) + 1, e.what());
        }
        seed.distillate = top;
        seed.bottoms = bottom;
        init.warm.columns[c] = std::move(seed);
    }

    auto clamp_to = [&](double v, std::size_t k) {
        return std::clamp(v, cfg.operating_bounds[k].lower, cfg.operating_bounds[k].upper);
    };
    const auto& est = init.split_estimates;
    init.start.reflux_ratio_c1 = clamp_to(vapor[0] / est[0][0].flow - 1.0, 0);
    init.start.reflux_ratio_c2 = clamp_to(vapor[1] / est[1][0].flow - 1.0, 2);
    init.start.boilup_ratio_c2 = clamp_to(vapor[1] / est[1][1].flow, 1);
    init.start.reflux_ratio_c3 = clamp_to(vapor[2] / est[2][0].flow - 1.0, 3);

    // Full solves in sequence; raise the column-3 reflux until the purity spec is reachable.
    for (;;) {
        TrainSolution sol = simulate_train(components, design, init.start, feed, cfg, &init.warm);
        const double r3_max = cfg.operating_bounds[3].upper;
        if (sol.feasible && sol.spec_relaxed && init.start.reflux_ratio_c3 < r3_max) {
            init.start.reflux_ratio_c3 = std::min(r3_max, 1.5 * init.start.reflux_ratio_c3 + 0.5);
            for (std::size_t c = 0; c < 2; ++c) init.warm.columns[c] = sol.columns[c];
            continue;
        }
        if (sol.feasible) {
            // A purity still out of reach at the largest reflux is left to the search.
            for (std::size_t c = 0; c < kTrainColumns; ++c) {
                if (sol.columns[c].converged()) init.warm.columns[c] = sol.columns[c];
            }
            return init;
        }
        throw InitializationFailed(sol.failed_column, sol.diagnostics);
    }
}

std::string_view to_string(SpecKind kind)
{
    switch (kind) {
    case SpecKind::purity: return "purity";
    case SpecKind::reboiler_temperature: return "reboiler_temperature";
    case SpecKind::f_factor_high: return "f_factor_high";
    case SpecKind::f_factor_low: return "f_factor_low";
    }
    return "purity";
}

std::vector<SpecViolation> check_specs(const TrainSolution& sol, const FlowsheetConfig& cfg)
{
    std::vector<SpecViolation> out;
    if (sol.product_purity < cfg.product_purity) {
        out.push_back({SpecKind::purity, 3, cfg.product_purity - sol.product_purity});
    }
    if (sol.c1_reboiler_temperature > cfg.t_degradation) {
        out.push_back({SpecKind::reboiler_temperature, 1, sol.c1_reboiler_temperature - cfg.t_degradation});
    }
    for (std::size_t c = 0; c < kTrainColumns; ++c) {
        double f = sol.max_f_factors[c];
        const auto& band = cfg.f_factor_band[c];
        if (f > band.upper) out.push_back({SpecKind::f_factor_high, static_cast<int>(c) + 1, f - band.upper});
        if (f < band.lower) out.push_back({SpecKind::f_factor_low, static_cast<int>(c) + 1, band.lower - f});
    }
    return out;
}

}  // namespace distopt
