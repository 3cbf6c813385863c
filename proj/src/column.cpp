#include "distopt/column.hpp"

#include "distopt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

namespace distopt {

namespace {

constexpr double kGasConstant = 8.314462618;  // kJ/(kmol K) = Pa m3/(mol K)
constexpr double kLn10 = std::numbers::ln10;
constexpr double kTemperatureScale = 100.0;
// Iterates keep some condensate so a transient overshoot cannot dry the rectifying section.
constexpr double kMaxIterateVaporFraction = 0.99;

/// K_i(T) = exp(a_i - b_i / (T + c_i)) at a fixed pressure.
class KModel {
public:
    KModel(const ComponentSet& components, double pressure) : components_(&components)
    {
        const double ln_p = std::log(pressure);
        for (const auto& r : components.records()) {
            a_.push_back(kLn10 * r.antoine.a - ln_p);
            b_.push_back(kLn10 * r.antoine.b);
            c_.push_back(r.antoine.c);
            t_min_ = std::max(t_min_, r.antoine.t_min);
            t_max_ = std::min(t_max_, r.antoine.t_max);
        }
        pressure_ = pressure;
    }

    std::size_t size() const { return a_.size(); }
    double t_min() const { return t_min_; }
    double t_max() const { return t_max_; }
    double k(std::size_t i, double t) const { return std::exp(a_[i] - b_[i] / (t + c_[i])); }

    void k_all(double t, std::vector<double>& out) const
    {
        if (!(t >= t_min_ && t <= t_max_)) {
            throw TemperatureOutOfRange("stage", t);
        }
        out.resize(size());
        for (std::size_t i = 0; i < size(); ++i) out[i] = k(i, t);
    }

    /// Bubble temperature by Newton on ln(sum K x), starting from `guess`; falls back to
    /// the bracketed solver when Newton leaves the valid range or stalls.
    double bubble(std::span<const double> x, double guess) const
    {
        double t = std::clamp(guess, t_min_, t_max_);
        for (int it = 0; it < 30; ++it) {
            double s = 0.0;
            double ds = 0.0;
            for (std::size_t i = 0; i < size(); ++i) {
                if (x[i] <= 0.0) continue;
                double tc = t + c_[i];
                double kx = x[i] * k(i, t);
                s += kx;
                ds += kx * b_[i] / (tc * tc);
            }
            double f = std::log(s);
            if (std::abs(f) < 1e-13) {
                return t;
            }
            double step = f * s / ds;
            step = std::clamp(step, -40.0, 40.0);
            t -= step;
            if (!(t > t_min_ && t < t_max_)) break;
        }
        return bubble_point(*components_, x, pressure_).temperature;
    }

private:
    const ComponentSet* components_;
    std::vector<double> a_, b_, c_;
    double t_min_ = -std::numeric_limits<double>::infinity();
    double t_max_ = std::numeric_limits<double>::infinity();
    double pressure_ = 0.0;
};

/// Anderson mixing for a fixed-point map x -> G(x), type II, relaxation beta.
class Anderson {
public:
    Anderson(std::size_t dim, std::size_t depth, double beta) : dim_(dim), depth_(depth), beta_(beta) {}

    void reset()
    {
        dx_.clear();
        df_.clear();
        have_prev_ = false;
    }

    void step(const std::vector<double>& x, const std::vector<double>& gx, std::vector<double>& out)
    {
        std::vector<double> f(dim_);
        for (std::size_t i = 0; i < dim_; ++i) f[i] = gx[i] - x[i];
        if (depth_ > 0 && have_prev_) {
            std::vector<double> dx(dim_), df(dim_);
            for (std::size_t i = 0; i < dim_; ++i) {
                dx[i] = x[i] - x_prev_[i];
                df[i] = f[i] - f_prev_[i];
            }
            dx_.push_back(std::move(dx));
            df_.push_back(std::move(df));
            if (dx_.size() > depth_) {
                dx_.erase(dx_.begin());
                df_.erase(df_.begin());
            }
        }
        x_prev_ = x;
        f_prev_ = f;
        have_prev_ = true;

        for (std::size_t i = 0; i < dim_; ++i) out[i] = x[i] + beta_ * f[i];
        if (dx_.empty()) return;

        // Least squares min |f - DF gamma| by modified Gram-Schmidt.
        const std::size_t m = df_.size();
        std::vector<std::vector<double>> q = df_;
        std::vector<double> rmat(m * m, 0.0);
        for (std::size_t c = 0; c < m; ++c) {
            for (std::size_t p = 0; p < c; ++p) {
                double dot = 0.0;
                for (std::size_t i = 0; i < dim_; ++i) dot += q[p][i] * q[c][i];
                rmat[p * m + c] = dot;
                for (std::size_t i = 0; i < dim_; ++i) q[c][i] -= dot * q[p][i];
            }
            double norm = 0.0;
            for (double v : q[c]) norm += v * v;
            norm = std::sqrt(norm);
            double scale = 0.0;
            for (double v : df_[c]) scale += v * v;
            if (!(norm > 1e-10 * std::sqrt(scale)) || !(norm > 0.0)) {
                reset();
                return;
            }
            rmat[c * m + c] = norm;
            for (double& v : q[c]) v /= norm;
        }
        std::vector<double> gamma(m);
        for (std::size_t c = 0; c < m; ++c) {
            double dot = 0.0;
            for (std::size_t i = 0; i < dim_; ++i) dot += q[c][i] * f[i];
            gamma[c] = dot;
        }
        for (std::size_t c = m; c-- > 0;) {
            for (std::size_t p = c + 1; p < m; ++p) gamma[c] -= rmat[c * m + p] * gamma[p];
            gamma[c] /= rmat[c * m + c];
        }
        for (std::size_t c = 0; c < m; ++c) {
            for (std::size_t i = 0; i < dim_; ++i) {
                out[i] -= gamma[c] * (dx_[c][i] + beta_ * df_[c][i]);
            }
        }
    }

private:
    std::size_t dim_;
    std::size_t depth_;
    double beta_;
    bool have_prev_ = false;
    std::vector<double> x_prev_, f_prev_;
    std::vector<std::vector<double>> dx_, df_;
};

struct Profile {
    std::vector<double> t;  // per stage
    std::vector<double> x;  // stage-major, n_stages * n_components
};

/// Fixed-flow rule for one inner solve.
struct FlowRule {
    enum class Kind { rate, boilup } kind = Kind::rate;
    double value = 0.0;
};

struct Flows {
    double distillate = 0.0;
    double top_vapor = 0.0;
    double reflux = 0.0;
};

struct InnerResult {
    bool converged = false;
    bool retryable = false;  // failure that a different iteration scheme may overcome
    std::string message;
    double residual = std::numeric_limits<double>::infinity();
    int sweeps = 0;
    Profile profile;
    double phi = 0.0;  // condenser vapour fraction
    Flows flows;
    std::vector<double> distillate;  // component flows
    std::vector<double> bottoms;
    std::vector<double> condensate;  // partial condenser liquid composition
    std::vector<double> vapor_product;  // partial condenser vapour composition
};

class ColumnModel {
public:
    ColumnModel(const ComponentSet& components, const ColumnDesign& design,
                const ColumnOperating& op, const Stream& feed, const ColumnSolverOptions& options)
        : components_(components),
          design_(design),
          op_(op),
          options_(options),
          kmodel_(components, op.pressure),
          nc_(components.size()),
          n_(static_cast<std::size_t>(design.n_stages)),
          f_stage_(static_cast<std::size_t>(design.feed_stage - 1)),
          feed_flow_(feed.flow),
          feed_(component_flows(feed))
    {
        if (const auto* pc = std::get_if<PartialCondenser>(&op_.condenser)) {
            partial_ = true;
            condenser_t_ = pc->temperature;
            kmodel_.k_all(condenser_t_, k_condenser_);
        }
        feed_x_ = feed.composition;
    }

    Profile default_profile() const
    {
        Profile p;
        double tb = kmodel_.bubble(feed_x_, 400.0);
        p.t.assign(n_, tb);
        p.x.resize(n_ * nc_);
        for (std::size_t j = 0; j < n_; ++j) {
            std::copy(feed_x_.begin(), feed_x_.end(), p.x.begin() + j * nc_);
        }
        return p;
    }

    std::optional<Profile> profile_from(const ColumnSolution& init) const
    {
        if (init.stages.size() != n_) return std::nullopt;
        Profile p;
        p.t.resize(n_);
        p.x.resize(n_ * nc_);
        for (std::size_t j = 0; j < n_; ++j) {
            const auto& s = init.stages[j];
            if (s.liquid.size() != nc_ || !(s.temperature > 0.0)) return std::nullopt;
            p.t[j] = s.temperature;
            std::copy(s.liquid.begin(), s.liquid.end(), p.x.begin() + j * nc_);
        }
        return p;
    }

    double feed_flow() const { return feed_flow_; }

    InnerResult solve(Profile profile, const FlowRule& rule) const
    {
        return solve(std::move(profile), rule, options_.tolerance);
    }

    /// Accelerated bubble-point sweeps; a stalled run is rescued by Newton on the stage
    /// temperatures (Broyden updates first, then full Newton from the given profile and from
    /// the feed profile) and finished by sweeps from the Newton profile.
    InnerResult solve(Profile profile, const FlowRule& rule, double tolerance) const
    {
        InnerResult first = sweep_loop(profile, rule, tolerance, options_.max_sweeps, true);
        if (first.converged || !first.retryable) return first;
        int newton_iterations = 0;
        auto rescued = newton(profile, rule, newton_iterations, true);
        if (!rescued) rescued = newton(std::move(profile), rule, newton_iterations, false);
        if (!rescued) {
            try {
                rescued = newton(default_profile(), rule, newton_iterations, false);
            } catch (const Error&) {
            }
        }
        const int used = first.sweeps + newton_iterations;
        if (!rescued) {
            first.sweeps = used;
            return first;
        }
        InnerResult second = sweep_loop(std::move(*rescued), rule, tolerance,
                                        std::max(options_.max_sweeps - first.sweeps, kPolishSweeps), false);
        second.sweeps += used;
        return second;
    }

private:
    static constexpr int kStallSweeps = 300;
    static constexpr int kPolishSweeps = 50;

    /// Section flows for the current condenser vapour fraction; false for impossible splits.
    bool flows_for(double phi, const FlowRule& rule, Flows& flows, std::string& message) const
    {
        const double r = op_.reflux_ratio;
        const double cfac = 1.0 - r * (1.0 - phi) / (r + 1.0);
        if (rule.kind == FlowRule::Kind::rate) {
            flows.distillate = rule.value;
        } else {
            flows.distillate = cfac * rule.value * feed_flow_ / (1.0 + cfac * rule.value);
        }
        flows.top_vapor = flows.distillate / cfac;
        flows.reflux = flows.top_vapor - flows.distillate;
        if (!(flows.distillate > 0.0) || !(feed_flow_ - flows.distillate > 0.0)) {
            message = "distillate rate outside (0, feed)";
            return false;
        }
        if (f_stage_ > 0 && !(flows.reflux > 1e-12 * feed_flow_)) {
            message = "no reflux to wet the rectifying section";
            return false;
        }
        return true;
    }

    double liquid_flow(const Flows& flows, std::size_t j) const
    {
        return j < f_stage_ ? flows.reflux : flows.reflux + feed_flow_;
    }

    void reflux_fractions(double phi, std::vector<double>& rho) const
    {
        const double r = op_.reflux_ratio;
        for (std::size_t i = 0; i < nc_; ++i) {
            double condensed = partial_ ? (1.0 - phi) / (1.0 - phi + phi * k_condenser_[i]) : 1.0;
            rho[i] = r / (r + 1.0) * condensed;
        }
    }

    /// Tridiagonal component balances (Thomas algorithm), one per component.
    void component_balances(const std::vector<double>& kk, const Flows& flows, const std::vector<double>& rho,
                            std::vector<double>& l, std::vector<double>& cprime,
                            std::vector<double>& dprime) const
    {
        const double v = flows.top_vapor;
        const double l_bottom = flows.reflux + feed_flow_;
        const double bottoms = feed_flow_ - flows.distillate;
        std::vector<double> vl(n_);
        for (std::size_t j = 0; j < n_; ++j) vl[j] = v / liquid_flow(flows, j);
        for (std::size_t i = 0; i < nc_; ++i) {
            auto strip = [&](std::size_t j) { return kk[j * nc_ + i] * vl[j]; };
            for (std::size_t j = 0; j < n_; ++j) {
                double s = strip(j);
                double diag = -(1.0 + s);
                if (j == 0) diag += rho[i] * s;
                if (j == n_ - 1) diag += 1.0 - bottoms / l_bottom;  // -(B/L + S)
                double sup = j + 1 < n_ ? strip(j + 1) : 0.0;
                double rhs = j == f_stage_ ? -feed_[i] : 0.0;
                if (j == 0) {
                    cprime[j] = sup / diag;
                    dprime[j] = rhs / diag;
                } else {
                    double m = diag - cprime[j - 1];
                    cprime[j] = sup / m;
                    dprime[j] = (rhs - dprime[j - 1]) / m;
                }
            }
            l[(n_ - 1) * nc_ + i] = dprime[n_ - 1];
            for (std::size_t j = n_ - 1; j-- > 0;) {
                l[j * nc_ + i] = dprime[j] - cprime[j] * l[(j + 1) * nc_ + i];
            }
        }
    }

    InnerResult sweep_loop(Profile profile, const FlowRule& rule, double tolerance, int budget,
                           bool stop_on_stall) const
    {
        InnerResult res;
        std::vector<double> k(nc_);
        std::vector<double> kk(n_ * nc_);
        std::vector<double> l(n_ * nc_);
        std::vector<double> cprime(n_), dprime(n_);
        std::vector<double> rho(nc_);
        std::vector<double> y1(nc_);
        std::vector<double> t_new(n_);
        // Fixed-point state: stage temperatures (scaled) and the condenser vapour fraction.
        std::vector<double> state(n_ + 1), image(n_ + 1), next(n_ + 1);
        Anderson accel(n_ + 1, static_cast<std::size_t>(std::max(0, options_.acceleration_depth)),
                       options_.damping);
        double previous_residual = std::numeric_limits<double>::infinity();
        double best_residual = std::numeric_limits<double>::infinity();
        int best_sweep = 0;
        res.retryable = true;

        try {
            double phi = 0.0;
            if (partial_) {
                phi = condenser_vapor_fraction(top_vapor(profile.t[0], profile.x, y1));
            }
            for (int sweep = 1; sweep <= budget; ++sweep) {
                res.sweeps = sweep;
                for (std::size_t j = 0; j < n_; ++j) {
                    kmodel_.k_all(profile.t[j], k);
                    std::copy(k.begin(), k.end(), kk.begin() + j * nc_);
                }
                Flows flows;
                if (!flows_for(phi, rule, flows, res.message)) {
                    res.retryable = false;
                    return res;
                }
                reflux_fractions(phi, rho);
                component_balances(kk, flows, rho, l, cprime, dprime);

                // Normalise, measure the summation residual and update temperatures.
                double summation = 0.0;
                double temp_change = 0.0;
                for (std::size_t j = 0; j < n_; ++j) {
                    double sum = 0.0;
                    for (std::size_t i = 0; i < nc_; ++i) {
                        double& li = l[j * nc_ + i];
                        if (!(li >= 0.0)) li = 0.0;
                        sum += li;
                    }
                    if (!(sum > 0.0)) {
                        res.message = "empty stage liquid";
                        return res;
                    }
                    summation = std::max(summation, std::abs(sum / liquid_flow(flows, j) - 1.0));
                    for (std::size_t i = 0; i < nc_; ++i) profile.x[j * nc_ + i] = l[j * nc_ + i] / sum;
                    t_new[j] = kmodel_.bubble(std::span<const double>(profile.x).subspan(j * nc_, nc_),
                                              profile.t[j]);
                    temp_change = std::max(temp_change, std::abs(t_new[j] - profile.t[j]) / t_new[j]);
                }
                double phi_new = partial_ ? condenser_vapor_fraction(top_vapor(t_new[0], profile.x, y1)) : 0.0;
                double residual = std::max({summation, temp_change, std::abs(phi_new - phi)});
                res.residual = residual;
                if (residual <= tolerance) {
                    profile.t = t_new;
                    finish(res, std::move(profile), flows, phi, kk, l, rho, y1);
                    return res;
                }
                if (residual < 0.5 * best_residual) {
                    best_residual = residual;
                    best_sweep = sweep;
                } else if (stop_on_stall && sweep - best_sweep > kStallSweeps) {
                    res.message = "bubble-point iteration stalled";
                    return res;
                }

                for (std::size_t j = 0; j < n_; ++j) {
                    state[j] = profile.t[j] / kTemperatureScale;
                    image[j] = t_new[j] / kTemperatureScale;
                }
                state[n_] = phi;
                image[n_] = phi_new;
                if (residual > 2.0 * previous_residual) accel.reset();
                previous_residual = residual;
                accel.step(state, image, next);
                for (std::size_t j = 0; j < n_; ++j) {
                    profile.t[j] = std::clamp(next[j] * kTemperatureScale, kmodel_.t_min(), kmodel_.t_max());
                }
                phi = partial_ ? std::clamp(next[n_], 0.0, kMaxIterateVaporFraction) : 0.0;
            }
            res.message = "sweep budget exhausted";
        } catch (const Error& e) {
            res.message = e.what();
        }
        return res;
    }

    void finish(InnerResult& res, Profile profile, const Flows& flows, double phi, const std::vector<double>& kk,
                const std::vector<double>& l, const std::vector<double>& rho, std::vector<double>& y1) const
    {
        const double v = flows.top_vapor;
        const double l_bottom = flows.reflux + feed_flow_;
        const double bottoms = feed_flow_ - flows.distillate;
        res.converged = true;
        res.flows = flows;
        res.phi = phi;
        res.distillate.resize(nc_);
        res.bottoms.resize(nc_);
        for (std::size_t i = 0; i < nc_; ++i) {
            double v1 = kk[i] * v / liquid_flow(flows, 0) * l[i];
            res.distillate[i] = (1.0 - rho[i]) * v1;
            res.bottoms[i] = bottoms / l_bottom * l[(n_ - 1) * nc_ + i];
        }
        if (partial_) {
            top_vapor(profile.t[0], profile.x, y1);
            res.condensate.resize(nc_);
            res.vapor_product.resize(nc_);
            double sl = 0.0;
            double sv = 0.0;
            for (std::size_t i = 0; i < nc_; ++i) {
                res.condensate[i] = y1[i] / (1.0 - phi + phi * k_condenser_[i]);
                res.vapor_product[i] = k_condenser_[i] * res.condensate[i];
                sl += res.condensate[i];
                sv += res.vapor_product[i];
            }
            for (auto& c : res.condensate) c /= sl;
            for (auto& c : res.vapor_product) c /= sv;
        }
        res.profile = std::move(profile);
    }

    /// Newton on the liquid summation residuals ln(sum_i l_ij / L_j) (and the condenser
    /// flash for a partial condenser) with a finite-difference Jacobian and backtracking.
    /// Returns a profile close enough for the sweep iteration to finish, or nullopt.
    std::optional<Profile> newton(Profile profile, const FlowRule& rule, int& iterations, bool broyden) const
    {
        const std::size_t m = n_ + (partial_ ? 1 : 0);
        std::vector<double> kk(n_ * nc_), k(nc_), l(n_ * nc_), cprime(n_), dprime(n_), rho(nc_), y1(nc_);
        std::vector<double> t = profile.t;
        double phi = 0.0;
        std::string message;
        try {
            if (partial_) phi = condenser_vapor_fraction(top_vapor(t[0], profile.x, y1));
            for (std::size_t j = 0; j < n_; ++j) {
                kmodel_.k_all(t[j], k);
                std::copy(k.begin(), k.end(), kk.begin() + j * nc_);
            }

            auto residual = [&](double phi_value, std::vector<double>& r) {
                Flows flows;
                if (!flows_for(phi_value, rule, flows, message)) return false;
                reflux_fractions(phi_value, rho);
                component_balances(kk, flows, rho, l, cprime, dprime);
                r.resize(m);
                for (std::size_t j = 0; j < n_; ++j) {
                    double sum = 0.0;
                    for (std::size_t i = 0; i < nc_; ++i) sum += l[j * nc_ + i];
                    r[j] = std::log(std::max(sum, 1e-300) / liquid_flow(flows, j));
                }
                if (partial_) {
                    double sum = 0.0;
                    for (std::size_t i = 0; i < nc_; ++i) {
                        y1[i] = kk[i] * std::max(l[i], 0.0);
                        sum += y1[i];
                    }
                    if (!(sum > 0.0)) return false;
                    for (double& y : y1) y /= sum;
                    r[n_] = condenser_vapor_fraction(y1) - phi_value;
                }
                return true;
            };
            auto norm = [](const std::vector<double>& r) {
                double s = 0.0;
                for (double v : r) s += v * v;
                return std::sqrt(s);
            };
            auto set_stage = [&](std::size_t j, double value) {
                t[j] = value;
                for (std::size_t i = 0; i < nc_; ++i) kk[j * nc_ + i] = kmodel_.k(i, value);
            };

            std::vector<double> r, rp, jac(m * m), lu, step(m);
            bool have_jacobian = false;
            bool fresh = false;
            if (!residual(phi, r)) return std::nullopt;
            const double lo = kmodel_.t_min();
            const double hi = kmodel_.t_max();
            for (int it = 0; it < kNewtonIterations; ++it) {
                ++iterations;
                double rmax = 0.0;
                for (double v : r) rmax = std::max(rmax, std::abs(v));
                if (rmax < kNewtonTolerance) {
                    for (std::size_t j = 0; j < n_; ++j) {
                        double sum = 0.0;
                        for (std::size_t i = 0; i < nc_; ++i) sum += std::max(l[j * nc_ + i], 0.0);
                        for (std::size_t i = 0; i < nc_; ++i) {
                            profile.x[j * nc_ + i] = std::max(l[j * nc_ + i], 0.0) / sum;
                        }
                    }
                    profile.t = t;
                    return profile;
                }

                if (!have_jacobian || !broyden) {
                    for (std::size_t c = 0; c < n_; ++c) {
                        const double t0 = t[c];
                        const double h = t0 + kFdStep > hi ? -kFdStep : kFdStep;
                        set_stage(c, t0 + h);
                        if (!residual(phi, rp)) return std::nullopt;
                        for (std::size_t row = 0; row < m; ++row) jac[row * m + c] = (rp[row] - r[row]) / h;
                        set_stage(c, t0);
                    }
                    if (partial_) {
                        const double h = phi + 1e-7 > kMaxIterateVaporFraction ? -1e-7 : 1e-7;
                        if (!residual(phi + h, rp)) return std::nullopt;
                        for (std::size_t row = 0; row < m; ++row) jac[row * m + n_] = (rp[row] - r[row]) / h;
                    }
                    have_jacobian = true;
                    fresh = true;
                }
                for (std::size_t row = 0; row < m; ++row) step[row] = -r[row];
                lu = jac;
                if (!solve_dense(lu, step, m)) {
                    if (fresh) return std::nullopt;
                    have_jacobian = false;
                    continue;
                }

                double scale = 1.0;
                for (std::size_t j = 0; j < n_; ++j) scale = std::min(scale, kNewtonMaxStep / std::max(std::abs(step[j]), 1e-300));
                if (partial_) scale = std::min(scale, 0.2 / std::max(std::abs(step[n_]), 1e-300));

                const std::vector<double> t_base = t;
                const double phi_base = phi;
                const double r0 = norm(r);
                bool accepted = false;
                for (double alpha = scale; alpha > 1e-3 * scale; alpha *= 0.5) {
                    for (std::size_t j = 0; j < n_; ++j) set_stage(j, std::clamp(t_base[j] + alpha * step[j], lo, hi));
                    if (partial_) phi = std::clamp(phi_base + alpha * step[n_], 0.0, kMaxIterateVaporFraction);
                    if (residual(phi, rp) && norm(rp) < (1.0 - 1e-4 * alpha) * r0) {
                        accepted = true;
                        break;
                    }
                }
                if (!accepted) {
                    if (fresh) return std::nullopt;
                    for (std::size_t j = 0; j < n_; ++j) set_stage(j, t_base[j]);
                    phi = phi_base;
                    have_jacobian = false;
                    continue;
                }
                // Broyden update of the Jacobian along the accepted step.
                for (std::size_t j = 0; j < n_; ++j) step[j] = t[j] - t_base[j];
                if (partial_) step[n_] = phi - phi_base;
                double dx2 = 0.0;
                for (double v : step) dx2 += v * v;
                if (dx2 > 0.0) {
                    for (std::size_t row = 0; row < m; ++row) {
                        double predicted = 0.0;
                        for (std::size_t c = 0; c < m; ++c) predicted += jac[row * m + c] * step[c];
                        double w = (rp[row] - r[row] - predicted) / dx2;
                        for (std::size_t c = 0; c < m; ++c) jac[row * m + c] += w * step[c];
                    }
                }
                fresh = false;
                r = rp;
            }
        } catch (const Error&) {
        }
        return std::nullopt;
    }

    static constexpr int kNewtonIterations = 60;
    static constexpr double kNewtonTolerance = 1e-7;
    static constexpr double kNewtonMaxStep = 15.0;  // K per iteration
    static constexpr double kFdStep = 1e-4;         // K

    /// Gaussian elimination with partial pivoting; `b` is overwritten by the solution.
    static bool solve_dense(std::vector<double>& a, std::vector<double>& b, std::size_t m)
    {
        for (std::size_t col = 0; col < m; ++col) {
            std::size_t piv = col;
            for (std::size_t row = col + 1; row < m; ++row) {
                if (std::abs(a[row * m + col]) > std::abs(a[piv * m + col])) piv = row;
            }
            if (!(std::abs(a[piv * m + col]) > 1e-300)) return false;
            if (piv != col) {
                for (std::size_t c = 0; c < m; ++c) std::swap(a[col * m + c], a[piv * m + c]);
                std::swap(b[col], b[piv]);
            }
            for (std::size_t row = col + 1; row < m; ++row) {
                double f = a[row * m + col] / a[col * m + col];
                if (f == 0.0) continue;
                for (std::size_t c = col; c < m; ++c) a[row * m + c] -= f * a[col * m + c];
                b[row] -= f * b[col];
            }
        }
        for (std::size_t row = m; row-- > 0;) {
            double s = b[row];
            for (std::size_t c = row + 1; c < m; ++c) s -= a[row * m + c] * b[c];
            b[row] = s / a[row * m + row];
        }
        return std::all_of(b.begin(), b.end(), [](double v) { return std::isfinite(v); });
    }

public:
    /// Normalised vapour in equilibrium with the top-stage liquid at temperature t.
    std::span<const double> top_vapor(double t, const std::vector<double>& x, std::vector<double>& y) const
    {
        double sum = 0.0;
        for (std::size_t i = 0; i < nc_; ++i) {
            y[i] = kmodel_.k(i, t) * x[i];
            sum += y[i];
        }
        for (double& v : y) v /= sum;
        return y;
    }

    /// Flash of the top vapour at the condenser temperature (Rachford-Rice, K fixed).
    double condenser_vapor_fraction(std::span<const double> z) const
    {
        double bubble = 0.0;
        double dew = 0.0;
        for (std::size_t i = 0; i < nc_; ++i) {
            bubble += z[i] * k_condenser_[i];
            dew += z[i] / k_condenser_[i];
        }
        if (bubble <= 1.0) return 0.0;
        if (dew <= 1.0) return 1.0;
        double lo = 0.0;
        double hi = 1.0;
        double beta = 0.5;
        for (int it = 0; it < 100; ++it) {
            double g = 0.0;
            double dg = 0.0;
            for (std::size_t i = 0; i < nc_; ++i) {
                double km = k_condenser_[i] - 1.0;
                double d = 1.0 + beta * km;
                g += z[i] * km / d;
                dg -= z[i] * km * km / (d * d);
            }
            if (std::abs(g) < 1e-15) break;
            (g > 0.0 ? lo : hi) = beta;
            double next = beta - g / dg;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - beta) < 1e-16) break;
            beta = next;
        }
        return beta;
    }

    ColumnSolution assemble(const InnerResult& inner) const
    {
        ColumnSolution sol;
        sol.residual = inner.residual;
        sol.status = inner.converged ? ColumnStatus::converged : ColumnStatus::no_convergence;
        sol.message = inner.message;
        if (!inner.converged) return sol;

        const auto& p = inner.profile;
        const double v = inner.flows.top_vapor;
        const double l_bottom = inner.flows.reflux + feed_flow_;
        sol.stages.resize(n_);
        std::vector<double> k;
        double max_f = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            auto& s = sol.stages[j];
            s.temperature = p.t[j];
            s.liquid.assign(p.x.begin() + j * nc_, p.x.begin() + (j + 1) * nc_);
            kmodel_.k_all(p.t[j], k);
            s.vapor.resize(nc_);
            double sum = 0.0;
            for (std::size_t i = 0; i < nc_; ++i) {
                s.vapor[i] = k[i] * s.liquid[i];
                sum += s.vapor[i];
            }
            for (double& y : s.vapor) y /= sum;
            s.liquid_flow = j < f_stage_ ? inner.flows.reflux : l_bottom;
            s.vapor_flow = v;
            max_f = std::max(max_f, f_factor(components_, v, s.vapor, s.temperature, op_.pressure,
                                             design_.diameter));
        }
        const auto& bottom = sol.stages.back();
        max_f = std::max(max_f, f_factor(components_, v, bottom.liquid, bottom.temperature,
                                         op_.pressure, design_.diameter));
        sol.max_f_factor = max_f;

        auto make_stream = [&](const std::vector<double>& flows, double t) {
            Stream s;
            s.flow = 0.0;
            for (double c : flows) s.flow += c;
            s.composition.resize(nc_);
            for (std::size_t i = 0; i < nc_; ++i) s.composition[i] = flows[i] / s.flow;
            s.temperature = t;
            s.pressure = op_.pressure;
            return s;
        };
        sol.bottoms = make_stream(inner.bottoms, bottom.temperature);
        if (partial_) {
            sol.distillate = make_stream(inner.distillate, condenser_t_);
            sol.distillate_vapor_fraction = inner.phi * v / sol.distillate.flow;
        } else {
            sol.distillate = make_stream(inner.distillate, 0.0);
            sol.distillate.temperature = kmodel_.bubble(sol.distillate.composition, sol.stages.front().temperature);
        }

        auto latent = [&](std::span<const double> x) {
            double h = 0.0;
            for (std::size_t i = 0; i < nc_; ++i) h += x[i] * components_[i].heat_of_vaporization;
            return h;
        };
        const auto& top = sol.stages.front();
        if (partial_) {
            sol.condenser_duty = (1.0 - inner.phi) * v * latent(inner.condensate) / 3600.0;
        } else {
            sol.condenser_duty = v * latent(top.vapor) / 3600.0;
        }
        sol.reboiler_duty = v * latent(bottom.liquid) / 3600.0;
        sol.reflux_flow = inner.flows.reflux;
        sol.top_vapor_flow = v;
        sol.boilup_flow = v;
        sol.stages.shrink_to_fit();
        return sol;
    }

    double purity_of(const InnerResult& inner, std::size_t c) const
    {
        double total = 0.0;
        for (std::size_t i = 0; i < nc_; ++i) total += inner.distillate[i] * components_[i].molar_mass;
        return inner.distillate[c] * components_[c].molar_mass / total;
    }

    double reboiler_temperature_of(const InnerResult& inner) const { return inner.profile.t.back(); }

private:
    const ComponentSet& components_;
    ColumnDesign design_;
    ColumnOperating op_;
    ColumnSolverOptions options_;
    KModel kmodel_;
    std::size_t nc_;
    std::size_t n_;
    std::size_t f_stage_;
    double feed_flow_;
    std::vector<double> feed_;
    std::vector<double> feed_x_;
    bool partial_ = false;
    double condenser_t_ = 0.0;
    std::vector<double> k_condenser_;
};

}  // namespace

namespace {

/// Scalar search on u = ln(D) for a closing spec g(D) = 0, with g monotone in D.
/// Safeguarded secant: secant steps (sized by a known slope when one is available) until a
/// sign change is found, then secant inside the bracket with an Illinois regula falsi
/// fallback. Cold starts first run a coarse pass with loose inner solves.
class SpecSearch {
public:
    SpecSearch(const ColumnModel& model, Profile start, double d0, double slope_hint, bool increasing,
               double tol, double inner_tol, int budget)
        : model_(model),
          profile_(std::move(start)),
          increasing_(increasing),
          tol_(tol),
          inner_tol_(inner_tol),
          budget_(budget)
    {
        double f = model.feed_flow();
        u_min_ = std::log(1e-6 * f);
        u_max_ = std::log((1.0 - 1e-6) * f);
        u0_ = std::clamp(std::log(d0), u_min_, u_max_);
        if (usable(slope_hint)) slope_ = slope_hint;
    }

    template <typename G>
    ColumnStatus run(G&& g, InnerResult& best, int& sweeps, int& iterations, std::string& message)
    {
        constexpr double kCoarseInner = 1e-6;
        constexpr double kCoarseTol = 1e-3;
        double u = u0_;
        if (inner_tol_ < kCoarseInner && slope_ == 0.0) {
            ColumnStatus coarse = pass(g, u, std::max(kCoarseTol, tol_), kCoarseInner, best, sweeps,
                                       iterations, message);
            if (coarse != ColumnStatus::converged) return coarse;
        }
        return pass(g, u, tol_, inner_tol_, best, sweeps, iterations, message);
    }

    /// Last secant estimate of dg/du; 0 when unknown.
    double slope() const { return slope_; }

    /// For an unattainable spec: |residual| of the inner solution closest to the target.
    double closest_residual() const { return closest_abs_; }

private:
    struct Point {
        double u = 0.0;
        double g = 0.0;
    };

    static bool usable(double s) { return std::isfinite(s) && s != 0.0; }

    /// One search pass; `u0` is updated to the last converged abscissa.
    template <typename G>
    ColumnStatus pass(G& g, double& u0, double tol, double inner_tol, InnerResult& best, int& sweeps,
                      int& iterations, std::string& message)
    {
        auto eval = [&](double u) -> std::optional<double> {
            ++iterations;
            auto r = model_.solve(profile_, FlowRule{FlowRule::Kind::rate, std::exp(u)}, inner_tol);
            sweeps += r.sweeps;
            if (!r.converged) {
                message = r.message;
                return std::nullopt;
            }
            double value = g(r);
            profile_ = r.profile;
            note(r, value);
            best = std::move(r);
            u0 = u;
            return value;
        };

        auto g0 = eval(u0);
        // A failed start is retried closer to an even split.
        const double u_mid = std::log(0.5 * model_.feed_flow());
        for (int retry = 0; !g0 && retry < 3 && iterations < budget_; ++retry) {
            u0 = 0.5 * (u0 + u_mid);
            g0 = eval(u0);
        }
        if (!g0) return ColumnStatus::no_convergence;
        if (std::abs(*g0) <= tol) return ColumnStatus::converged;

        Point cur{u0, *g0};
        std::optional<Point> neg, pos;  // bracket ends, g < 0 and g > 0
        (cur.g > 0.0 ? pos : neg) = cur;
        double illinois_neg = 1.0;
        double illinois_pos = 1.0;
        double blind_step = kDefaultStep;
        int slow = 0;
        double previous_abs = std::abs(cur.g);
        // Without a bracket the step follows the secant (or, blind, the expected monotone
        // direction). Distillate purity need not be monotone in D: it peaks where light and
        // heavy impurities balance. For such a spec the root at the largest D is wanted, so
        // an over-satisfied spec always moves to more distillate, and on the short side a
        // step that moves g away from zero reverses once; a second one brackets the peak.
        const bool high_root = !increasing_;
        auto newton_dir = [&](const Point& p) {
            if (high_root && p.g > 0.0) return 1.0;
            if (slope_ != 0.0) return p.g / slope_ > 0.0 ? -1.0 : 1.0;
            return ((p.g > 0.0) == increasing_) ? -1.0 : 1.0;
        };
        double dir = newton_dir(cur);
        Point away;  // worse point on the far side after a reversal
        bool reversed = false;

        while (iterations < budget_) {
            double u;
            if (neg && pos) {
                double lo = std::min(neg->u, pos->u);
                double hi = std::max(neg->u, pos->u);
                double candidate = slope_ != 0.0 ? cur.u - cur.g / slope_ : std::nan("");
                if (slow < 2 && std::isfinite(candidate) && candidate > lo && candidate < hi) {
                    u = candidate;
                } else {
                    double gn = illinois_neg * neg->g;
                    double gp = illinois_pos * pos->g;
                    u = neg->u - gn * (pos->u - neg->u) / (gp - gn);
                    if (!std::isfinite(u) || u <= lo || u >= hi) u = 0.5 * (lo + hi);
                    slow = 0;
                }
            } else {
                const bool newton_ok = slope_ != 0.0 && !(high_root && cur.g > 0.0 && slope_ > 0.0);
                double delta = newton_ok ? std::abs(cur.g / slope_) : blind_step;
                blind_step = std::min(2.0 * blind_step, kMaxStep);
                u = std::clamp(cur.u + dir * std::clamp(delta, 1e-12, kMaxStep), u_min_, u_max_);
                if (u == cur.u) {
                    message = "closing specification unattainable within (0, feed)";
                    best = closest_;
                    return ColumnStatus::spec_unattainable;
                }
            }

            auto gu = eval(u);
            for (int shrink = 0; !gu && shrink < 4 && iterations < budget_; ++shrink) {
                u = 0.5 * (u + cur.u);
                gu = eval(u);
            }
            if (!gu) return ColumnStatus::no_convergence;
            if (std::abs(*gu) <= tol) return ColumnStatus::converged;

            Point next{u, *gu};
            const bool bracketed = neg && pos;
            if (!bracketed && (cur.g < 0.0 || !high_root) && (next.g > 0.0) == (cur.g > 0.0) &&
                std::abs(next.g) >= std::abs(cur.g)) {
                if (!reversed) {
                    reversed = true;
                    away = next;
                    dir = -dir;
                    slope_ = 0.0;
                    blind_step = std::max(std::abs(next.u - cur.u), kDefaultStep);
                    continue;
                }
                return extremum(g, away, cur, next, tol, inner_tol, best, sweeps, iterations, message);
            }

            double s = (next.g - cur.g) / (next.u - cur.u);
            if (usable(s)) slope_ = s;
            if (next.g > 0.0) {
                pos = next;
                illinois_pos = 1.0;
                illinois_neg *= 0.5;
            } else {
                neg = next;
                illinois_neg = 1.0;
                illinois_pos *= 0.5;
            }
            slow = std::abs(next.g) > 0.5 * previous_abs ? slow + 1 : 0;
            previous_abs = std::abs(next.g);
            cur = next;
            if (high_root && neg && pos && neg->u < pos->u) {
                // Crossed upwards: that is the low root. Keep marching right of pos.
                neg.reset();
                cur = *pos;
                reversed = false;
            }
            if (!(neg && pos)) dir = newton_dir(cur);
            if (neg && pos && std::abs(pos->u - neg->u) < 1e-13) {
                // Resolution limit of the inner solves.
                if (std::abs(cur.g) <= 100.0 * tol) return ColumnStatus::converged;
                message = "closing specification bracket collapsed";
                return ColumnStatus::no_convergence;
            }
        }
        message = "closing specification search exhausted its budget";
        return ColumnStatus::no_convergence;
    }

    /// g keeps its sign on a, b, c with |g(b)| smallest: golden-section search for the
    /// extremum inside [a, c]. A sign change there hands a bracket back to the root search;
    /// otherwise the spec is out of reach.
    template <typename G>
    ColumnStatus extremum(G& g, Point a, Point b, Point c, double tol, double inner_tol, InnerResult& best,
                          int& sweeps, int& iterations, std::string& message)
    {
        if (a.u > c.u) std::swap(a, c);
        constexpr double kGolden = 0.381966011250105;
        while (iterations < budget_ && c.u - a.u > kExtremumWidth) {
            const bool left = (b.u - a.u) > (c.u - b.u);
            double u = left ? b.u - kGolden * (b.u - a.u) : b.u + kGolden * (c.u - b.u);
            ++iterations;
            auto r = model_.solve(profile_, FlowRule{FlowRule::Kind::rate, std::exp(u)}, inner_tol);
            sweeps += r.sweeps;
            if (!r.converged) {
                message = r.message;
                return ColumnStatus::no_convergence;
            }
            Point p{u, g(r)};
            note(r, p.g);
            if ((p.g > 0.0) != (b.g > 0.0)) {
                // Crossed zero: root between p and b, solved by a fresh bracketed pass.
                profile_ = r.profile;
                best = std::move(r);
                if (std::abs(p.g) <= tol) return ColumnStatus::converged;
                const Point& q = (!increasing_ && p.u > b.u) ? c : b;
                return bracketed_root(g, p, q, tol, inner_tol, best, sweeps, iterations, message);
            }
            if (std::abs(p.g) < std::abs(b.g)) {
                profile_ = r.profile;
                (left ? c : a) = b;
                b = p;
            } else {
                (left ? a : c) = p;
            }
        }
        message = "closing specification unattainable: extremum short of the target";
        best = closest_;
        return ColumnStatus::spec_unattainable;
    }

    template <typename G>
    ColumnStatus bracketed_root(G& g, Point p, Point q, double tol, double inner_tol, InnerResult& best,
                                int& sweeps, int& iterations, std::string& message)
    {
        // Illinois regula falsi between two points of opposite sign.
        double wp = 1.0;
        double wq = 1.0;
        while (iterations < budget_) {
            double u = p.u - wp * p.g * (q.u - p.u) / (wq * q.g - wp * p.g);
            double lo = std::min(p.u, q.u);
            double hi = std::max(p.u, q.u);
            if (!std::isfinite(u) || u <= lo || u >= hi) u = 0.5 * (lo + hi);
            ++iterations;
            auto r = model_.solve(profile_, FlowRule{FlowRule::Kind::rate, std::exp(u)}, inner_tol);
            sweeps += r.sweeps;
            if (!r.converged) {
                message = r.message;
                return ColumnStatus::no_convergence;
            }
            Point n{u, g(r)};
            profile_ = r.profile;
            best = std::move(r);
            if (std::abs(n.g) <= tol) return ColumnStatus::converged;
            if ((n.g > 0.0) == (p.g > 0.0)) {
                p = n;
                wp = 1.0;
                wq *= 0.5;
            } else {
                q = n;
                wq = 1.0;
                wp *= 0.5;
            }
            if (std::abs(p.u - q.u) < 1e-13) {
                if (std::abs(n.g) <= 100.0 * tol) return ColumnStatus::converged;
                message = "closing specification bracket collapsed";
                return ColumnStatus::no_convergence;
            }
        }
        message = "closing specification search exhausted its budget";
        return ColumnStatus::no_convergence;
    }

    static constexpr double kExtremumWidth = 1e-3;
    void note(const InnerResult& r, double value)
    {
        if (std::abs(value) < closest_abs_) {
            closest_abs_ = std::abs(value);
            closest_ = r;
        }
    }

    static constexpr double kDefaultStep = 0.05;
    static constexpr double kMaxStep = 4.0;

    const ColumnModel& model_;
    Profile profile_;
    bool increasing_;
    double tol_;
    double inner_tol_;
    int budget_;
    double slope_ = 0.0;
    double u_min_ = 0.0;
    double u_max_ = 0.0;
    double u0_ = 0.0;
    InnerResult closest_;
    double closest_abs_ = std::numeric_limits<double>::infinity();
};

double logit(double p)
{
    p = std::clamp(p, 1e-15, 1.0 - 1e-15);
    return std::log(p / (1.0 - p));
}

/// Cold start walked in from a moderate boilup ratio, each step warm-started by the last.
InnerResult boilup_continuation(const ColumnModel& model, double target, int& sweeps)
{
    constexpr int kSteps = 6;
    InnerResult r;
    for (double anchor : {1.0, 3.0, 0.3}) {
        if (anchor == target) continue;
        Profile p = model.default_profile();
        for (int k = 0; k <= kSteps; ++k) {
            double v = anchor * std::pow(target / anchor, static_cast<double>(k) / kSteps);
            r = model.solve(std::move(p), FlowRule{FlowRule::Kind::boilup, v});
            sweeps += r.sweeps;
            if (!r.converged) break;
            p = r.profile;
        }
        if (r.converged) return r;
    }
    return r;
}

/// Solves next to the target from `start` and steps back onto it from there.
InnerResult boilup_nudge(const ColumnModel& model, const Profile& start, double target, int& sweeps)
{
    InnerResult r;
    for (double f : {1.02, 0.98, 1.1, 0.9}) {
        auto near = model.solve(start, FlowRule{FlowRule::Kind::boilup, f * target});
        sweeps += near.sweeps;
        if (!near.converged) continue;
        r = model.solve(std::move(near.profile), FlowRule{FlowRule::Kind::boilup, target});
        sweeps += r.sweeps;
        if (r.converged) return r;
    }
    return r;
}

}  // namespace

std::string_view to_string(ColumnStatus status)
{
    switch (status) {
    case ColumnStatus::converged: return "converged";
    case ColumnStatus::no_convergence: return "no_convergence";
    case ColumnStatus::spec_unattainable: return "spec_unattainable";
    }
    return "no_convergence";
}

void validate_stream(const Stream& s, std::size_t n)
{
    if (!(s.flow >= 0.0) || !std::isfinite(s.flow)) {
        throw InvalidInput("stream flow must be non-negative");
    }
    if (s.composition.size() != n) {
        throw LengthMismatch(n, s.composition.size());
    }
    double sum = 0.0;
    for (double x : s.composition) {
        if (!(x >= 0.0)) throw InvalidInput("stream composition entries must be non-negative");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw InvalidInput("stream composition must sum to 1");
    }
}

std::vector<double> component_flows(const Stream& s)
{
    std::vector<double> out(s.composition.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s.flow * s.composition[i];
    return out;
}

double mass_flow(const ComponentSet& components, const Stream& s)
{
    return s.flow * mean_molar_mass(components, s.composition);
}

ColumnSolution solve_column(const ComponentSet& components, const ColumnDesign& design,
                            const ColumnOperating& op, const Stream& feed,
                            const ColumnSolution* init, const ColumnSolverOptions& options)
{
    validate_stream(feed, components.size());
    if (!(feed.flow > 0.0)) throw InvalidInput("column feed flow must be positive");
    if (design.n_stages < 1) throw InvalidInput("column needs at least one stage");
    if (design.feed_stage < 1 || design.feed_stage > design.n_stages) {
        throw InvalidInput("feed stage outside 1..n_stages");
    }
    if (!(design.diameter > 0.0)) throw InvalidInput("column diameter must be positive");
    if (!(op.pressure > 0.0)) throw NonPositivePressure(op.pressure);
    if (!(op.reflux_ratio >= 0.0) || !std::isfinite(op.reflux_ratio)) {
        throw InvalidInput("reflux ratio must be non-negative");
    }

    ColumnModel model(components, design, op, feed, options);
    Profile start;
    bool warm = false;
    if (init != nullptr) {
        if (auto p = model.profile_from(*init)) {
            start = std::move(*p);
            warm = true;
        }
    }
    if (!warm) {
        try {
            start = model.default_profile();
        } catch (const Error& e) {
            ColumnSolution failed;
            failed.message = e.what();
            return failed;
        }
    }
    const bool init_has_rate = init != nullptr && init->distillate.flow > 0.0 &&
                               init->distillate.flow < feed.flow;

    const double slope_hint = init != nullptr ? init->spec_slope : 0.0;
    double spec_slope = 0.0;
    InnerResult inner;
    int sweeps = 0;
    int spec_iterations = 0;
    ColumnStatus status = ColumnStatus::no_convergence;
    std::string message;

    if (const auto* rate = std::get_if<DistillateRate>(&op.closing)) {
        if (!(rate->value > 0.0 && rate->value < feed.flow)) {
            throw InvalidInput("distillate rate must lie in (0, feed flow)");
        }
        inner = model.solve(std::move(start), FlowRule{FlowRule::Kind::rate, rate->value});
        sweeps = inner.sweeps;
        status = inner.converged ? ColumnStatus::converged : ColumnStatus::no_convergence;
        message = inner.message;
    } else if (const auto* bu = std::get_if<BoilupRatio>(&op.closing)) {
        if (!(bu->value > 0.0) || !std::isfinite(bu->value)) {
            throw InvalidInput("boilup ratio must be positive");
        }
        inner = model.solve(start, FlowRule{FlowRule::Kind::boilup, bu->value});
        sweeps = inner.sweeps;
        if (!inner.converged && options.boilup_retries) {
            auto nudged = boilup_nudge(model, start, bu->value, sweeps);
            if (nudged.converged) inner = std::move(nudged);
        }
        if (!inner.converged && !warm && options.boilup_retries) {
            auto walked = boilup_continuation(model, bu->value, sweeps);
            if (walked.converged) inner = std::move(walked);
        }
        status = inner.converged ? ColumnStatus::converged : ColumnStatus::no_convergence;
        message = inner.message;
    } else if (const auto* pur = std::get_if<DistillatePurity>(&op.closing)) {
        if (pur->component >= components.size()) throw InvalidInput("purity component index out of range");
        if (!(pur->mass_fraction > 0.0 && pur->mass_fraction < 1.0)) {
            throw InvalidInput("purity must lie in (0, 1)");
        }
        double target = logit(pur->mass_fraction);
        double d0 = init_has_rate ? init->distillate.flow
                                  : 0.5 * feed.flow * feed.composition[pur->component];
        if (!(d0 > 0.0)) d0 = 0.01 * feed.flow;
        SpecSearch search(model, std::move(start), d0, slope_hint, false, options.purity_tolerance,
                          options.tolerance, options.max_spec_iterations);
        status = search.run([&](const InnerResult& r) { return logit(model.purity_of(r, pur->component)) - target; },
                            inner, sweeps, spec_iterations, message);
        spec_slope = search.slope();
    } else if (const auto* reb = std::get_if<ReboilerTemperature>(&op.closing)) {
        if (!(reb->value > 0.0)) throw InvalidInput("reboiler temperature must be positive");
        double d0 = init_has_rate ? init->distillate.flow : 0.5 * feed.flow;
        SpecSearch search(model, std::move(start), d0, slope_hint, true, options.temperature_tolerance,
                          options.tolerance, options.max_spec_iterations);
        status = search.run([&](const InnerResult& r) { return model.reboiler_temperature_of(r) - reb->value; },
                            inner, sweeps, spec_iterations, message);
        spec_slope = search.slope();
    }

    ColumnSolution sol;
    const bool relaxed = status == ColumnStatus::spec_unattainable && inner.converged &&
                         std::holds_alternative<DistillatePurity>(op.closing);
    if (status == ColumnStatus::converged || relaxed) {
        try {
            sol = model.assemble(inner);
            if (relaxed) {
                sol.status = ColumnStatus::spec_unattainable;
                sol.message = message + "; profile at the closest purity";
            }
        } catch (const Error& e) {
            sol = ColumnSolution{};
            sol.message = e.what();
        }
    } else {
        sol.status = status;
        sol.message = message;
        sol.residual = inner.residual;
    }
    sol.sweeps = sweeps;
    sol.spec_iterations = spec_iterations;
    sol.spec_slope = spec_slope;
    return sol;
}

double f_factor(double gas_velocity, double gas_density)
{
    if (!(gas_density >= 0.0)) throw InvalidInput("gas density must be non-negative");
    return gas_velocity * std::sqrt(gas_density);
}

double f_factor(const ComponentSet& components, double vapor_flow, std::span<const double> y,
                double temperature, double pressure, double diameter)
{
    if (!(diameter > 0.0)) throw InvalidInput("diameter must be positive");
    if (!(temperature > 0.0)) throw InvalidInput("temperature must be positive");
    if (!(pressure > 0.0)) throw NonPositivePressure(pressure);
    if (!(vapor_flow >= 0.0)) throw InvalidInput("vapour flow must be non-negative");
    const double p_pa = pressure * 1000.0;
    const double molar_mass = mean_molar_mass(components, y);
    const double density = p_pa * molar_mass / (kGasConstant * 1000.0 * temperature);
    const double volumetric = vapor_flow / 3600.0 * kGasConstant * 1000.0 * temperature / p_pa;
    const double area = std::numbers::pi * diameter * diameter / 4.0;
    return f_factor(volumetric / area, density);
}

}  // namespace distopt
