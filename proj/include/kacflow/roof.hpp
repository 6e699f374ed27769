#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kacflow/base_dynamics.hpp"
#include "kacflow/errors.hpp"
#include "kacflow/numeric.hpp"

namespace kacflow {

/// A roof function tau bounded below by a declared positive constant.
///
/// Closed-form roofs carry either an analytic value of the integral of tau
/// against mu, or an explicit opt-in to Monte Carlo integration. There is no
/// silent fallback from one to the other.
class RoofFunction {
public:
    enum class Form { constant, piecewise, closed_form };

    static RoofFunction constant(double c) {
        if (!(c > 0.0)) throw RoofBoundViolation("constant roof must be positive");
        RoofFunction r(Form::constant);
        r.value_ = c;
        r.lower_ = c;
        r.sup_ = c;
        r.integral_ = c;
        return r;
    }

    /// Piecewise-constant roof on a partition of the state space of `sys`.
    static RoofFunction piecewise(const BaseSystem& sys, const PiecewiseConstant& parts) {
        if (parts.pieces.empty()) throw ConfigurationError("piecewise roof needs at least one piece");
        RoofFunction r(Form::piecewise);
        r.finite_ = sys.finite();
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        for (const auto& [set, v] : parts.pieces) {
            if (!(v > 0.0)) throw RoofBoundViolation("piecewise roof values must be positive");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (r.finite_) {
            const std::size_t n = sys.state_count();
            r.per_state_.assign(n, std::numeric_limits<double>::quiet_NaN());
            for (const auto& [set, v] : parts.pieces) {
                sys.check_compatible(set);
                for (std::size_t s : std::get<StateSet>(set.representation()).states) {
                    if (!std::isnan(r.per_state_[s])) throw ConfigurationError("piecewise roof pieces overlap");
                    r.per_state_[s] = v;
                }
            }
            for (double v : r.per_state_) {
                if (std::isnan(v)) throw ConfigurationError("piecewise roof does not cover every state");
            }
        } else {
            for (const auto& [set, v] : parts.pieces) {
                for (const auto& iv : sys.as_intervals(set)) r.segments_.push_back({iv, v});
            }
            std::sort(r.segments_.begin(), r.segments_.end(),
                      [](const auto& a, const auto& b) { return a.first.lo < b.first.lo; });
            double edge = 0.0;
            for (const auto& [iv, v] : r.segments_) {
                if (std::abs(iv.lo - edge) > 1e-12) {
                    throw ConfigurationError(iv.lo > edge ? "piecewise roof does not cover [0,1)"
                                                          : "piecewise roof pieces overlap");
                }
                edge = iv.hi;
            }
            if (std::abs(edge - 1.0) > 1e-12) throw ConfigurationError("piecewise roof does not cover [0,1)");
        }
        CompensatedSum integral;
        for (const auto& [set, v] : parts.pieces) integral += v * sys.measure(set);
        r.integral_ = integral.value();
        r.lower_ = lo;
        r.sup_ = hi;
        return r;
    }

    /// Per-state roof for a permutation system.
    static RoofFunction per_state(const BaseSystem& sys, const std::vector<double>& values) {
        if (!sys.finite()) throw ConfigurationError("per-state roof needs a permutation base");
        if (values.size() != sys.state_count()) throw ConfigurationError("need one roof value per state");
        PiecewiseConstant parts;
        for (std::size_t s = 0; s < values.size(); ++s) parts.pieces.emplace_back(BaseSet::states({s}), values[s]);
        return piecewise(sys, parts);
    }

    /// Closed-form roof. `analytic_integral` empty means the integral must be
    /// estimated by Monte Carlo. `sup` is an optional declared upper bound.
    static RoofFunction closed_form(std::function<double(Point)> fn, double lower_bound,
                                    std::optional<double> analytic_integral, std::string label,
                                    std::optional<double> sup = std::nullopt) {
        if (!(lower_bound > 0.0)) {
            throw RoofBoundViolation("declared roof lower bound must be positive, got " + std::to_string(lower_bound));
        }
        if (sup && *sup < lower_bound) throw BadSupBound("declared roof supremum is below its lower bound");
        RoofFunction r(Form::closed_form);
        r.fn_ = std::move(fn);
        r.lower_ = lower_bound;
        r.sup_ = sup;
        r.integral_ = analytic_integral;
        r.label_ = std::move(label);
        return r;
    }

    [[nodiscard]] Form form() const { return form_; }
    [[nodiscard]] double lower_bound() const { return lower_; }
    /// Known upper bound: the constant, the largest piece, or the declared bound.
    [[nodiscard]] std::optional<double> sup() const { return sup_; }
    /// The integral when it is known without sampling.
    [[nodiscard]] std::optional<double> known_integral() const { return integral_; }

    /// tau(x); throws RoofBoundViolation when the value drops below the lower bound.
    [[nodiscard]] double operator()(Point x) const {
        double v = 0.0;
        switch (form_) {
        case Form::constant: return value_;
        case Form::piecewise:
            if (finite_) return per_state_[static_cast<std::size_t>(x)];
            {
                auto it = std::upper_bound(segments_.begin(), segments_.end(), x,
                                           [](double y, const auto& seg) { return y < seg.first.lo; });
                v = it == segments_.begin() ? segments_.front().second : std::prev(it)->second;
            }
            return v;
        case Form::closed_form: v = fn_(x); break;
        }
        if (!(v >= lower_)) {
            std::ostringstream os;
            os.precision(17);
            os << "roof " << label_ << " evaluates to " << v << " at x=" << x << ", below its lower bound " << lower_;
            throw RoofBoundViolation(os.str());
        }
        return v;
    }

    /// The roof c * tau.
    [[nodiscard]] RoofFunction scaled(double c) const {
        if (!(c > 0.0)) throw ScaleRangeError("roof scale factor must be positive");
        RoofFunction r = *this;
        r.value_ *= c;
        r.lower_ *= c;
        if (r.sup_) *r.sup_ *= c;
        if (r.integral_) *r.integral_ *= c;
        for (auto& v : r.per_state_) v *= c;
        for (auto& seg : r.segments_) seg.second *= c;
        if (form_ == Form::closed_form) {
            r.fn_ = [fn = fn_, c](Point x) { return c * fn(x); };
            std::ostringstream os;
            os.precision(17);
            os << c << "*(" << label_ << ')';
            r.label_ = os.str();
        }
        return r;
    }

    /// Smallest roof value over the given intervals or states, when it can be
    /// read off exactly (constant and piecewise forms).
    [[nodiscard]] std::optional<double> exact_min_over(const BaseSystem& sys, const BaseSet& set) const {
        if (form_ == Form::constant) return value_;
        if (form_ == Form::closed_form) return std::nullopt;
        double m = std::numeric_limits<double>::infinity();
        if (finite_) {
            for (std::size_t s : std::get<StateSet>(set.representation()).states) m = std::min(m, per_state_[s]);
            return m;
        }
        for (const auto& iv : sys.as_intervals(set)) {
            for (const auto& [seg, v] : segments_) {
                if (seg.lo < iv.hi && iv.lo < seg.hi) m = std::min(m, v);
            }
        }
        return m;
    }

    [[nodiscard]] std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        switch (form_) {
        case Form::constant: os << "constant(" << value_ << ')'; break;
        case Form::piecewise:
            os << "piecewise(";
            if (finite_) {
                for (std::size_t i = 0; i < per_state_.size(); ++i) os << (i ? ":" : "") << per_state_[i];
            } else {
                for (std::size_t i = 0; i < segments_.size(); ++i) {
                    os << (i ? " " : "") << '[' << segments_[i].first.lo << ',' << segments_[i].first.hi
                       << ")=" << segments_[i].second;
                }
            }
            os << ')';
            break;
        case Form::closed_form: os << "expr(" << label_ << ')'; break;
        }
        return os.str();
    }

private:
    explicit RoofFunction(Form f) : form_(f) {}

    Form form_;
    double value_ = 0.0;
    double lower_ = 0.0;
    std::optional<double> sup_;
    std::optional<double> integral_;
    bool finite_ = false;
    std::vector<double> per_state_;
    std::vector<std::pair<Interval, double>> segments_;
    std::function<double(Point)> fn_;
    std::string label_;
};

/// Integral of tau against mu. Exact mode uses the constant, the piecewise sum,
/// or the declared analytic value; it refuses roofs that opted into Monte Carlo.
inline Integral roof_integral(const RoofFunction& tau, const BaseSystem& sys, IntegrationMode mode,
                              std::size_t samples, RandomStream& rng) {
    if (mode == IntegrationMode::exact) {
        if (auto v = tau.known_integral()) return Integral{*v, 0.0, 0};
        throw UnsupportedExactIntegration("roof " + tau.describe() +
                                          " declares no analytic integral; use Monte Carlo integration");
    }
    return integrate_mu(sys, std::function<double(Point)>([&tau](Point x) { return tau(x); }),
                        IntegrationMode::monte_carlo, samples, rng);
}

/// tau(x) + tau(f x) + ... + tau(f^{n-1} x), compensated.
inline double birkhoff_roof_sum(const RoofFunction& tau, const BaseSystem& sys, Point x, long long n) {
    CompensatedSum acc;
    for (long long k = 0; k < n; ++k) {
        acc += tau(x);
        x = sys.apply(x);
    }
    return acc.value();
}

} // namespace kacflow
