#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kacflow/base_dynamics.hpp"
#include "kacflow/errors.hpp"
#include "kacflow/numeric.hpp"
#include "kacflow/parallel.hpp"
#include "kacflow/recurrence.hpp"
#include "kacflow/suspension.hpp"

namespace kacflow {

/// Statistical acceptance threshold in standard errors.
inline constexpr double kZThreshold = 4.0;
/// Relative tolerance for identities that hold exactly up to rounding.
inline constexpr double kIdentityTolerance = 1e-12;
/// Largest admissible fraction of discarded samples.
inline constexpr double kMaxDiscardFraction = 1e-3;

inline bool nearly_equal(double a, double b, double rel = kIdentityTolerance) {
    return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

/// A Monte Carlo estimate next to the value it should reproduce.
struct EstimateReport {
    std::string quantity;
    double mc_estimate = 0.0;
    double mc_stderr = 0.0;
    double analytic_value = 0.0;
    double z_score = 0.0;
    std::size_t n_samples = 0;
    std::size_t discarded_samples = 0;

    [[nodiscard]] bool valid() const {
        return n_samples == 0 ||
               static_cast<double>(discarded_samples) < kMaxDiscardFraction * static_cast<double>(n_samples);
    }
    [[nodiscard]] bool passes(double threshold = kZThreshold) const {
        return valid() && std::abs(z_score) <= threshold;
    }
};

/// z = (estimate - analytic) / stderr. With a zero stderr (deterministic
/// estimates) the comparison falls back to kIdentityTolerance.
inline EstimateReport make_report(std::string quantity, double estimate, double stderr_value, double analytic,
                                  std::size_t n, std::size_t discarded) {
    EstimateReport r{std::move(quantity), estimate, stderr_value, analytic, 0.0, n, discarded};
    if (stderr_value > 0.0) {
        r.z_score = (estimate - analytic) / stderr_value;
    } else if (!nearly_equal(estimate, analytic)) {
        r.z_score = std::copysign(std::numeric_limits<double>::infinity(), estimate - analytic);
    }
    return r;
}

template <std::size_t K>
EstimateReport make_report(std::string quantity, const SampleSummary<K>& s, double analytic, double scale = 1.0) {
    return make_report(std::move(quantity), s.moments.mean() * scale, s.moments.stderr_of_mean() * scale, analytic,
                       s.attempted, s.discarded);
}

namespace detail {

inline double positive_mass(const SuspensionFlow& flow, const BaseSet& base) {
    const double m = flow.base().measure(base);
    if (!(m > 0.0)) throw EmptyProjection("base set " + base.describe() + " has zero measure");
    return m;
}

/// tau^{n_I}(x) together with f^{n_I}(x).
inline std::pair<double, Point> roof_sum_to_return(const SuspensionFlow& flow, const BaseSet& base, Point x,
                                                   long long max_steps) {
    const auto& sys = flow.base();
    CompensatedSum acc;
    Point y = x;
    for (long long k = 1; k <= max_steps; ++k) {
        acc += flow.tau(y);
        const Point prev = y;
        y = sys.apply(y);
        if (sys.contains(base, y)) return {acc.value(), y};
        if (y == prev) throw NonRecurrentWithinBudget(x, k);
    }
    throw NonRecurrentWithinBudget(x, max_steps);
}

} // namespace detail

// ---- cylinders ---------------------------------------------------------------------

inline double mean_escape_cylinder(const CylinderSet& a) { return a.height() / 2.0; }

/// Mean return time to a cylinder, in its two closed forms:
///   escape form:  mean escape + (1 - mu-bar(A)) * int tau / mu(I)
///   roof form:    (t2 - t1)/2 + (1/mu(I)) * int (tau - (t2 - t1) chi_I) dmu
struct CylinderMeanReturn {
    double escape_form = 0.0;
    double roof_form = 0.0;
    double bar_mu = 0.0;

    [[nodiscard]] double value() const { return roof_form; }
};

inline CylinderMeanReturn rhs_theorem_A(const SuspensionFlow& flow, const CylinderSet& a) {
    const double mass = detail::positive_mass(flow, a.base);
    const double width = a.height();
    const double norm = flow.normalizer();
    CylinderMeanReturn r;
    r.bar_mu = mass * width / norm;
    r.escape_form = mean_escape_cylinder(a) + (1.0 - r.bar_mu) * norm / mass;
    r.roof_form = width / 2.0 + (norm - width * mass) / mass;
    if (!nearly_equal(r.escape_form, r.roof_form)) {
        std::ostringstream os;
        os.precision(17);
        os << "closed forms of the mean return time disagree: " << r.escape_form << " vs " << r.roof_form;
        throw Error(os.str());
    }
    return r;
}

/// Constant roof c and the full cylinder I x [0, c): c/mu(I) * (1 - mu(I)/2).
inline double constant_roof_full_cylinder(double c, double mass) { return c / mass * (1.0 - mass / 2.0); }

/// Monte Carlo mean of the hitting time over mu-bar restricted to A.
/// The analytic column is the closed form when it is exact (cylinders and
/// constant-width graph sets) and NaN otherwise.
inline EstimateReport mc_mean_return(const SuspensionFlow& flow, const FlowSet& a, const MonteCarloOptions& opts);

// ---- graph sets ------------------------------------------------------------------

struct TermValue {
    double value = 0.0;
    double std_error = 0.0;
    bool exact = true;
};

/// Mean return time to a graph set split into its three terms:
///   escape      int_I h (h/2) dmu / int_I h dmu
///   roof sum    int_I h tau^{n_I} dmu / int_I h dmu
///   correction  int_I h (h1 o f^{n_I} - h2) dmu / int_I h dmu
struct GraphMeanReturn {
    TermValue escape;
    TermValue roof_sum;
    TermValue correction;
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
    std::size_t discarded = 0;
};

struct TheoremBOptions {
    MonteCarloOptions mc;
    /// Use the closed forms available for constant widths. Turning this off
    /// estimates every term by sampling.
    bool use_exact_terms = true;
};

inline GraphMeanReturn rhs_theorem_B(const SuspensionFlow& flow, const GraphSet& a, const TheoremBOptions& opts) {
    const double mass = detail::positive_mass(flow, a.base());
    const auto& sys = flow.base();
    GraphMeanReturn r;

    if (opts.use_exact_terms && a.width()) {
        const double c = *a.width();
        r.escape = TermValue{c / 2.0, 0.0, true};
        // int_I tau^{n_I} dmu = int tau dmu by invariance (Kac-type tower decomposition)
        r.roof_sum = TermValue{flow.normalizer() / mass, 0.0, true};
        if (a.lower().constant_value()) {
            r.correction = TermValue{-c, 0.0, true};
        } else {
            const auto s = sample_parallel<1>(opts.mc, [&](unsigned) {
                return [&](RandomStream& rng) {
                    const Point x = sys.sample_in(a.base(), rng);
                    const Point y = detail::roof_sum_to_return(flow, a.base(), x, opts.mc.max_steps).second;
                    return std::array<double, 1>{a.h1(y) - a.h1(x)};
                };
            });
            r.correction = TermValue{s.moments.mean() - c, s.moments.stderr_of_mean(), false};
            r.n_samples = s.attempted;
            r.discarded = s.discarded;
        }
        r.value = r.escape.value + r.roof_sum.value + r.correction.value;
        r.std_error = r.correction.std_error;
        return r;
    }

    // columns: h, h^2/2, h tau^{n_I}, h (h1 o f^{n_I} - h2), total numerator
    const auto s = sample_parallel<5>(opts.mc, [&](unsigned) {
        return [&](RandomStream& rng) {
            const Point x = sys.sample_in(a.base(), rng);
            const double h = a.h(x);
            const auto [sum, y] = detail::roof_sum_to_return(flow, a.base(), x, opts.mc.max_steps);
            const double esc = h * h / 2.0;
            const double roof = h * sum;
            const double corr = h * (a.h1(y) - a.h2(x));
            return std::array<double, 5>{h, esc, roof, corr, esc + roof + corr};
        };
    });
    const auto& m = s.moments;
    if (!(m.mean(0) > 0.0)) throw EmptyProjection("graph set " + a.describe() + " has zero flow measure");
    r.escape = TermValue{m.mean(1) / m.mean(0), m.stderr_of_ratio(1, 0), false};
    r.roof_sum = TermValue{m.mean(2) / m.mean(0), m.stderr_of_ratio(2, 0), false};
    r.correction = TermValue{m.mean(3) / m.mean(0), m.stderr_of_ratio(3, 0), false};
    r.value = m.mean(4) / m.mean(0);
    r.std_error = m.stderr_of_ratio(4, 0);
    r.n_samples = s.attempted;
    r.discarded = s.discarded;
    return r;
}

/// Constant width c: c/2 + (1/mu(I)) int (tau - c chi_I) dmu, together with a
/// Monte Carlo check that int_I (h1 o f^{n_I} - h1) dmu_I vanishes.
inline double parallel_sides_closed_form(const SuspensionFlow& flow, const GraphSet& a) {
    if (!a.width()) throw ConfigurationError("parallel-sides formula needs a constant-width graph set");
    const double c = *a.width();
    const double mass = detail::positive_mass(flow, a.base());
    return c / 2.0 + (flow.normalizer() - c * mass) / mass;
}

struct ParallelSidesValue {
    double value = 0.0;
    EstimateReport telescoping;
};

inline ParallelSidesValue parallel_sides_rhs(const SuspensionFlow& flow, const GraphSet& a,
                                             const MonteCarloOptions& opts) {
    ParallelSidesValue r;
    r.value = parallel_sides_closed_form(flow, a);
    if (a.lower().constant_value()) {
        r.telescoping = make_report("h1_telescoping", 0.0, 0.0, 0.0, 0, 0);
        return r;
    }
    const auto& sys = flow.base();
    const auto s = sample_parallel<1>(opts, [&](unsigned) {
        return [&](RandomStream& rng) {
            const Point x = sys.sample_in(a.base(), rng);
            const Point y = detail::roof_sum_to_return(flow, a.base(), x, opts.max_steps).second;
            return std::array<double, 1>{a.h1(y) - a.h1(x)};
        };
    });
    r.telescoping = make_report("h1_telescoping", s, 0.0);
    return r;
}

inline EstimateReport mc_mean_return(const SuspensionFlow& flow, const FlowSet& a, const MonteCarloOptions& opts) {
    detail::positive_mass(flow, projection(a));
    double analytic = std::numeric_limits<double>::quiet_NaN();
    if (const auto* c = std::get_if<CylinderSet>(&a)) {
        analytic = rhs_theorem_A(flow, *c).value();
    } else if (std::get<GraphSet>(a).width()) {
        analytic = parallel_sides_closed_form(flow, std::get<GraphSet>(a));
    }
    const auto s = sample_parallel<1>(opts, [&](unsigned) {
        return [&](RandomStream& rng) {
            const FlowPoint p = sample_in_set(flow, a, rng);
            return std::array<double, 1>{hitting_time(flow, a, p, opts.max_steps)};
        };
    });
    return make_report("mean_return", s, analytic);
}

/// Independent cross-validation for graph sets: Monte Carlo mean return against
/// the three-term formula, z taken with the combined standard error.
inline EstimateReport theorem_B_cross_check(const SuspensionFlow& flow, const GraphSet& a,
                                            const MonteCarloOptions& opts) {
    MonteCarloOptions formula_opts = opts;
    formula_opts.seed = opts.seed ^ 0x9e3779b97f4a7c15ull;
    const auto rhs = rhs_theorem_B(flow, a, TheoremBOptions{formula_opts, true});
    const auto lhs = mc_mean_return(flow, FlowSet{a}, opts);
    const double se = std::hypot(lhs.mc_stderr, rhs.std_error);
    auto r = make_report("rhs_B_cross_check", lhs.mc_estimate, se, rhs.value, lhs.n_samples,
                         lhs.discarded_samples + rhs.discarded);
    return r;
}

// ---- cross-section ---------------------------------------------------------------

/// mu_I-average of tau^{n_I} against int tau / mu(I).
inline EstimateReport cross_section_mean_return(const SuspensionFlow& flow, const BaseSet& base,
                                                const MonteCarloOptions& opts) {
    const double mass = detail::positive_mass(flow, base);
    const auto& sys = flow.base();
    const auto s = sample_parallel<1>(opts, [&](unsigned) {
        return [&](RandomStream& rng) {
            const Point x = sys.sample_in(base, rng);
            return std::array<double, 1>{detail::roof_sum_to_return(flow, base, x, opts.max_steps).first};
        };
    });
    return make_report("cross_section", s, flow.normalizer() / mass);
}

/// Entropy of the induced map on I divided by the entropy of the time-one
/// map of the flow, both obtained from the analytic base entropy through
/// Abramov's formulas.
struct EntropyQuotient {
    double base_entropy = 0.0;
    double induced_entropy = 0.0; ///< h(f) / mu(I)
    double flow_entropy = 0.0;    ///< h(f) / int tau
    double quotient = 0.0;
    double mean_return = 0.0; ///< int tau / mu(I)
};

inline EntropyQuotient entropy_quotient(const SuspensionFlow& flow, const BaseSet& base) {
    const double h = flow.base().entropy();
    if (!(h > 0.0)) {
        throw ZeroEntropyBase("entropy quotient is 0/0 over the zero-entropy base " + flow.base().describe());
    }
    const double mass = detail::positive_mass(flow, base);
    EntropyQuotient q;
    q.base_entropy = h;
    q.induced_entropy = h / mass;
    q.flow_entropy = h / flow.normalizer();
    q.quotient = q.induced_entropy / q.flow_entropy;
    q.mean_return = flow.normalizer() / mass;
    if (!nearly_equal(q.quotient, q.mean_return)) {
        std::ostringstream os;
        os.precision(17);
        os << "entropy quotient " << q.quotient << " differs from the mean return " << q.mean_return;
        throw Error(os.str());
    }
    return q;
}

// ---- exit regions ------------------------------------------------------------------

/// One exit width of the exit-region limit. The estimator
///   (1/s) mu-bar(A_s) * mean of n_A over A_s
/// tends to 1 - mu-bar(A). For cylinders its expectation at width s is
/// 1 - mu-bar(A) + s mu(I) / (2 int tau), so `bias_bound` is exactly that offset.
struct ExitRegionEstimate {
    double s = 0.0;
    EstimateReport report; ///< analytic_value is the limit 1 - mu-bar(A)
    double finite_s_expectation = 0.0;
    double bias_bound = 0.0;

    [[nodiscard]] bool within_bound(double threshold = kZThreshold) const {
        return report.valid() &&
               std::abs(report.mc_estimate - report.analytic_value) <= bias_bound + threshold * report.mc_stderr;
    }
};

inline std::vector<ExitRegionEstimate> helmberg_limit(const SuspensionFlow& flow, const CylinderSet& a,
                                                      const std::vector<double>& widths,
                                                      const MonteCarloOptions& opts) {
    const double mass = detail::positive_mass(flow, a.base);
    const double target = 1.0 - bar_mu_of_set(flow, a);
    std::vector<ExitRegionEstimate> out;
    out.reserve(widths.size());
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const double s = widths[i];
        const CylinderSet region = exit_region(a, s);
        const FlowSet whole{a};
        MonteCarloOptions o = opts;
        o.seed = opts.seed + i;
        const auto summary = sample_parallel<1>(o, [&](unsigned) {
            return [&](RandomStream& rng) {
                const FlowPoint p = sample_in_set(flow, FlowSet{region}, rng);
                return std::array<double, 1>{hitting_time(flow, whole, p, opts.max_steps)};
            };
        });
        const double scale = bar_mu_of_set(flow, region) / s;
        ExitRegionEstimate e;
        e.s = s;
        std::ostringstream name;
        name.precision(17);
        name << "helmberg(s=" << s << ")";
        e.report = make_report(name.str(), summary, target, scale);
        e.bias_bound = s * mass / (2.0 * flow.normalizer());
        e.finite_s_expectation = target + e.bias_bound;
        out.push_back(std::move(e));
    }
    return out;
}

// ---- unnormalized identity ----------------------------------------------------------

/// int_A n_A dmu-bar (Monte Carlo) against int_A e_A dmu-bar + (t2 - t1)(1 - mu-bar(A)).
inline EstimateReport stat1_identity_check(const SuspensionFlow& flow, const CylinderSet& a,
                                           const MonteCarloOptions& opts) {
    detail::positive_mass(flow, a.base);
    const double bar_mu = bar_mu_of_set(flow, a);
    const double rhs = bar_mu * mean_escape_cylinder(a) + a.height() * (1.0 - bar_mu);
    const FlowSet set{a};
    const auto s = sample_parallel<1>(opts, [&](unsigned) {
        return [&](RandomStream& rng) {
            const FlowPoint p = sample_in_set(flow, set, rng);
            return std::array<double, 1>{hitting_time(flow, set, p, opts.max_steps)};
        };
    });
    return make_report("stat1", s, rhs, bar_mu);
}

// ---- linearity in the roof mean ---------------------------------------------------

struct LinearityRow {
    double scale = 0.0;
    double roof_integral = 0.0;
    double mean_return = 0.0;
};

struct LinearityTable {
    std::vector<LinearityRow> rows;
    double slope = 0.0;
    double intercept = 0.0;
    double max_residual = 0.0;
    double expected_slope = 0.0; ///< 1 / mu(I)

    [[nodiscard]] bool affine(double tol = kIdentityTolerance) const {
        return max_residual < tol && nearly_equal(slope, expected_slope, tol);
    }
};

/// Closed-form mean return for the roofs c * tau, c in `scales`, with A fixed.
inline LinearityTable linearity_scan(const SuspensionFlow& flow, const CylinderSet& a,
                                     const std::vector<double>& scales) {
    if (scales.size() < 2) throw ScaleRangeError("linearity scan needs at least two scale factors");
    const double mass = detail::positive_mass(flow, a.base);
    LinearityTable t;
    t.expected_slope = 1.0 / mass;
    for (double c : scales) {
        const SuspensionFlow scaled = flow.rescaled(c);
        try {
            validate(scaled, a);
        } catch (const InvalidSet& e) {
            std::ostringstream os;
            os.precision(17);
            os << "cylinder is not inside the flow for roof scale " << c << ": " << e.what();
            throw ScaleRangeError(os.str());
        }
        t.rows.push_back({c, scaled.normalizer(), rhs_theorem_A(scaled, a).value()});
    }
    // least-squares line through (integral, mean return)
    const double n = static_cast<double>(t.rows.size());
    double sx = 0.0, sy = 0.0;
    for (const auto& r : t.rows) {
        sx += r.roof_integral;
        sy += r.mean_return;
    }
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& r : t.rows) {
        sxx += (r.roof_integral - mx) * (r.roof_integral - mx);
        sxy += (r.roof_integral - mx) * (r.mean_return - my);
    }
    if (!(sxx > 0.0)) throw ScaleRangeError("linearity scan needs distinct scale factors");
    t.slope = sxy / sxx;
    t.intercept = my - t.slope * mx;
    for (const auto& r : t.rows) {
        t.max_residual = std::max(t.max_residual, std::abs(r.mean_return - (t.intercept + t.slope * r.roof_integral)));
    }
    return t;
}

// ---- base-level checks ----------------------------------------------------------------

/// Empirical mass of I under {f(x_i)}, x_i ~ mu, against mu(I).
inline EstimateReport measure_preservation_check(const BaseSystem& sys, const BaseSet& base,
                                                 const MonteCarloOptions& opts) {
    const double mass = sys.measure(base);
    const auto s = sample_parallel<1>(opts, [&](unsigned) {
        return [&](RandomStream& rng) {
            return std::array<double, 1>{sys.contains(base, sys.apply(sys.sample(rng))) ? 1.0 : 0.0};
        };
    });
    return make_report("measure_preservation", s, mass);
}

/// Kac over the whole space: int chi_I n_I dmu = 1, sampled from mu.
inline EstimateReport kac_integral_check(const BaseSystem& sys, const BaseSet& base, const MonteCarloOptions& opts) {
    if (!(sys.measure(base) > 0.0)) throw EmptyProjection("base set " + base.describe() + " has zero measure");
    const auto s = sample_parallel<1>(opts, [&](unsigned) {
        return [&](RandomStream& rng) {
            const Point x = sys.sample(rng);
            const double v = sys.contains(base, x) ? static_cast<double>(sys.first_return(base, x, opts.max_steps)) : 0.0;
            return std::array<double, 1>{v};
        };
    });
    return make_report("kac_integral", s, 1.0);
}

/// Empirical mu-bar mass of A after flowing for time s from mu-bar samples.
inline EstimateReport flow_invariance_check(const SuspensionFlow& flow, const CylinderSet& a, double s,
                                            const MonteCarloOptions& opts) {
    const FlowSet set{a};
    const auto summary = sample_parallel<1>(opts, [&](unsigned) {
        return [&, sampler = FlowMeasureSampler(flow)](RandomStream& rng) mutable {
            const FlowPoint p = flow.evolve(sampler(rng), s);
            return std::array<double, 1>{member(flow, set, p) ? 1.0 : 0.0};
        };
    });
    return make_report("flow_invariance", summary, bar_mu_of_set(flow, a));
}

} // namespace kacflow
