#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>

#include "kacflow/base_dynamics.hpp"
#include "kacflow/errors.hpp"
#include "kacflow/numeric.hpp"
#include "kacflow/suspension.hpp"

namespace kacflow {

/// A height function over the base: a constant or an arbitrary function.
class Height {
public:
    static Height constant(double c) {
        Height h;
        h.constant_ = c;
        h.fn_ = [c](Point) { return c; };
        std::ostringstream os;
        os.precision(17);
        os << c;
        h.label_ = os.str();
        return h;
    }

    static Height function(std::function<double(Point)> fn, std::string label) {
        Height h;
        h.fn_ = std::move(fn);
        h.label_ = std::move(label);
        return h;
    }

    [[nodiscard]] double operator()(Point x) const { return fn_(x); }
    [[nodiscard]] std::optional<double> constant_value() const { return constant_; }
    [[nodiscard]] const std::string& label() const { return label_; }

private:
    Height() = default;

    std::function<double(Point)> fn_;
    std::optional<double> constant_;
    std::string label_;
};

/// I x [t1, t2).
struct CylinderSet {
    BaseSet base;
    double t1 = 0.0;
    double t2 = 0.0;

    [[nodiscard]] double height() const { return t2 - t1; }

    [[nodiscard]] std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        os << base.describe() << "x[" << t1 << ',' << t2 << ')';
        return os.str();
    }
};

/// {(x,t) : x in I, h1(x) <= t < h2(x)}.
class GraphSet {
public:
    /// `h_sup` bounds h2 - h1 from above; needed to sample from the set when
    /// the width is not constant.
    static GraphSet between(BaseSet base, Height lower, Height upper, std::optional<double> h_sup = std::nullopt) {
        std::optional<double> width;
        if (lower.constant_value() && upper.constant_value()) {
            width = *upper.constant_value() - *lower.constant_value();
            if (!(*width > 0.0)) throw InvalidSet("graph set needs h1 < h2");
        }
        return GraphSet(std::move(base), std::move(lower), std::move(upper), width, h_sup);
    }

    /// Parallel sides: h2 = h1 + c.
    static GraphSet parallel(BaseSet base, Height lower, double c) {
        if (!(c > 0.0)) throw InvalidSet("parallel-sides width must be positive");
        Height upper = lower.constant_value()
                           ? Height::constant(*lower.constant_value() + c)
                           : Height::function([l = lower, c](Point x) { return l(x) + c; },
                                              lower.label() + "+" + Height::constant(c).label());
        return GraphSet(std::move(base), std::move(lower), std::move(upper), c, c);
    }

    [[nodiscard]] const BaseSet& base() const { return base_; }
    [[nodiscard]] const Height& lower() const { return lower_; }
    [[nodiscard]] const Height& upper() const { return upper_; }
    /// Constant width c when h2 - h1 is known to be constant.
    [[nodiscard]] std::optional<double> width() const { return width_; }
    [[nodiscard]] std::optional<double> height_sup() const { return h_sup_; }

    [[nodiscard]] double h1(Point x) const { return lower_(x); }
    [[nodiscard]] double h2(Point x) const { return upper_(x); }
    [[nodiscard]] double h(Point x) const { return width_ ? *width_ : upper_(x) - lower_(x); }

    [[nodiscard]] std::string describe() const {
        return base_.describe() + "x[" + lower_.label() + "," + upper_.label() + ")";
    }

private:
    GraphSet(BaseSet base, Height lower, Height upper, std::optional<double> width, std::optional<double> h_sup)
        : base_(std::move(base)), lower_(std::move(lower)), upper_(std::move(upper)), width_(width),
          h_sup_(h_sup ? h_sup : width) {}

    BaseSet base_;
    Height lower_;
    Height upper_;
    std::optional<double> width_;
    std::optional<double> h_sup_;
};

using FlowSet = std::variant<CylinderSet, GraphSet>;

inline const BaseSet& projection(const FlowSet& a) {
    return std::visit(
        [](const auto& s) -> const BaseSet& {
            if constexpr (std::is_same_v<std::decay_t<decltype(s)>, CylinderSet>) {
                return s.base;
            } else {
                return s.base();
            }
        },
        a);
}

inline std::string describe(const FlowSet& a) {
    return std::visit([](const auto& s) { return s.describe(); }, a);
}

/// Lower edge of the set's fiber over x (t1, or h1(x)).
inline double entry_height(const FlowSet& a, Point x) {
    if (const auto* c = std::get_if<CylinderSet>(&a)) return c->t1;
    return std::get<GraphSet>(a).h1(x);
}

/// Upper edge of the set's fiber over x (t2, or h2(x)).
inline double exit_height(const FlowSet& a, Point x) {
    if (const auto* c = std::get_if<CylinderSet>(&a)) return c->t2;
    return std::get<GraphSet>(a).h2(x);
}

// ---- validation ----------------------------------------------------------------

namespace detail {
inline constexpr std::size_t kSpotChecks = 10'000;
inline constexpr std::uint64_t kSpotCheckSeed = 0x5e7c4ecull;
} // namespace detail

/// Checks that A lies under the roof: t2 <= inf over I of tau. Constant and
/// piecewise roofs are checked exactly; closed-form roofs are trusted when
/// t2 <= lower_bound and spot-checked on sampled points otherwise.
inline void validate(const SuspensionFlow& flow, const CylinderSet& a) {
    const auto& sys = flow.base();
    sys.check_compatible(a.base);
    if (!(a.t1 >= 0.0 && a.t1 < a.t2)) {
        std::ostringstream os;
        os << "cylinder " << a.describe() << " needs 0 <= t1 < t2";
        throw InvalidSet(os.str());
    }
    const auto fail = [&](double bound) {
        std::ostringstream os;
        os.precision(17);
        os << "cylinder " << a.describe() << ": t2=" << a.t2 << " exceeds the roof minimum " << bound
           << " over its base";
        throw InvalidSet(os.str());
    };
    if (auto m = flow.roof().exact_min_over(sys, a.base)) {
        if (a.t2 > *m) fail(*m);
        return;
    }
    if (a.t2 <= flow.roof().lower_bound()) return;
    if (sys.measure(a.base) <= 0.0) return;
    RandomStream rng(detail::kSpotCheckSeed);
    for (std::size_t i = 0; i < detail::kSpotChecks; ++i) {
        const Point x = sys.sample_in(a.base, rng);
        const double v = flow.tau(x);
        if (a.t2 > v) fail(v);
    }
}

/// Spot-checks 0 <= h1 <= h2 <= tau on sampled points of I.
inline void validate(const SuspensionFlow& flow, const GraphSet& a) {
    const auto& sys = flow.base();
    sys.check_compatible(a.base());
    if (sys.measure(a.base()) <= 0.0) return;
    RandomStream rng(detail::kSpotCheckSeed);
    for (std::size_t i = 0; i < detail::kSpotChecks; ++i) {
        const Point x = sys.sample_in(a.base(), rng);
        const double lo = a.h1(x);
        const double hi = a.h2(x);
        const double top = flow.tau(x);
        if (!(lo >= 0.0 && lo <= hi && hi <= top)) {
            std::ostringstream os;
            os.precision(17);
            os << "graph set " << a.describe() << " violates 0 <= h1 <= h2 <= tau at x=" << x << " (h1=" << lo
               << ", h2=" << hi << ", tau=" << top << ")";
            throw InvalidSet(os.str());
        }
        if (a.height_sup() && hi - lo > *a.height_sup()) {
            throw InvalidSet("graph set " + a.describe() + ": h2 - h1 exceeds its declared bound");
        }
    }
}

inline void validate(const SuspensionFlow& flow, const FlowSet& a) {
    std::visit([&](const auto& s) { validate(flow, s); }, a);
}

// ---- membership and times ----------------------------------------------------

inline bool member(const SuspensionFlow& flow, const FlowSet& a, FlowPoint p) {
    if (!flow.base().contains(projection(a), p.x)) return false;
    return entry_height(a, p.x) <= p.t && p.t < exit_height(a, p.x);
}

/// Time for p to leave A along the flow; zero outside A.
inline double escape_time(const SuspensionFlow& flow, const FlowSet& a, FlowPoint p) {
    return member(flow, a, p) ? exit_height(a, p.x) - p.t : 0.0;
}

/// Hitting time n_A(p): the first time after the escape time at which the orbit
/// of p is in A again. Computed by reduction to the base return time: the
/// orbit can only enter A through a fiber over I, at its entry height.
inline double hitting_time(const SuspensionFlow& flow, const FlowSet& a, FlowPoint p,
                           long long max_steps = kDefaultMaxSteps) {
    const auto& sys = flow.base();
    const BaseSet& base = projection(a);
    if (!member(flow, a, p) && sys.contains(base, p.x)) {
        const double entry = entry_height(a, p.x);
        if (p.t < entry) return entry - p.t;
    }
    CompensatedSum elapsed(-p.t);
    Point y = p.x;
    for (long long j = 1; j <= max_steps; ++j) {
        elapsed += flow.tau(y);
        const Point prev = y;
        y = sys.apply(y);
        if (sys.contains(base, y)) {
            elapsed += entry_height(a, y);
            return elapsed.value();
        }
        if (y == prev) throw NonRecurrentWithinBudget(p.x, j); // stuck on a fixed point
    }
    throw NonRecurrentWithinBudget(p.x, max_steps);
}

/// n_A - e_A for a point of A.
inline double adjusted_return_time(const SuspensionFlow& flow, const FlowSet& a, FlowPoint p,
                                   long long max_steps = kDefaultMaxSteps) {
    if (!member(flow, a, p)) throw ConfigurationError("adjusted return time is defined on points of the set only");
    return hitting_time(flow, a, p, max_steps) - escape_time(flow, a, p);
}

/// The exit region I x [t2 - s, t2) of a cylinder: the points that leave A within time s.
inline CylinderSet exit_region(const CylinderSet& a, double s) {
    if (!(s > 0.0 && s <= a.height())) {
        std::ostringstream os;
        os.precision(17);
        os << "exit width s=" << s << " must lie in (0, " << a.height() << "]";
        throw InvalidExitWidth(os.str());
    }
    if (s == a.height()) return a;
    return CylinderSet{a.base, a.t2 - s, a.t2};
}

// ---- flow measure of sets ---------------------------------------------------------

/// mu-bar(A) for a cylinder: mu(I) (t2 - t1) / int tau.
inline double bar_mu_of_set(const SuspensionFlow& flow, const CylinderSet& a) {
    return flow.base().measure(a.base) * a.height() / flow.normalizer();
}

/// mu-bar(A) for a graph set: int_I h dmu / int tau. Exact for constant width,
/// otherwise estimated from `samples` draws of mu restricted to I.
inline Integral bar_mu_of_set(const SuspensionFlow& flow, const GraphSet& a, std::size_t samples,
                              RandomStream& rng) {
    const auto& sys = flow.base();
    const double mass = sys.measure(a.base());
    if (a.width()) return Integral{*a.width() * mass / flow.normalizer(), 0.0, 0};
    if (mass <= 0.0) return Integral{0.0, 0.0, 0};
    RunningMoments<1> m;
    for (std::size_t i = 0; i < samples; ++i) m.push({a.h(sys.sample_in(a.base(), rng))});
    const double scale = mass / flow.normalizer();
    return Integral{m.mean() * scale, m.stderr_of_mean() * scale, samples};
}

/// A point distributed according to mu-bar conditioned on A. Cylinders are
/// sampled directly; graph sets draw x with density proportional to h on I by
/// rejection against the declared bound on h.
inline FlowPoint sample_in_set(const SuspensionFlow& flow, const FlowSet& a, RandomStream& rng) {
    const auto& sys = flow.base();
    if (const auto* c = std::get_if<CylinderSet>(&a)) {
        const Point x = sys.sample_in(c->base, rng);
        return FlowPoint{x, rng.uniform(c->t1, c->t2)};
    }
    const auto& g = std::get<GraphSet>(a);
    if (!g.height_sup()) throw BadSupBound("sampling a graph set needs a declared bound on h2 - h1");
    const double bound = *g.height_sup();
    for (std::size_t tries = 0;; ++tries) {
        const Point x = sys.sample_in(g.base(), rng);
        const double h = g.h(x);
        if (h > bound) throw BadSupBound("h2 - h1 exceeds its declared bound on " + g.describe());
        if (rng.uniform() * bound < h) {
            const double lo = g.h1(x);
            return FlowPoint{x, lo + h * rng.uniform()};
        }
        if (tries > 1'000'000) throw BadSupBound("graph-set sampler cannot accept; bound on h is too loose");
    }
}

} // namespace kacflow
