#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <sstream>
#include <utility>

#include "kacflow/base_dynamics.hpp"
#include "kacflow/errors.hpp"
#include "kacflow/numeric.hpp"
#include "kacflow/roof.hpp"

namespace kacflow {

/// A point (x, t) of the suspension space. Canonical when 0 <= t < tau(x).
struct FlowPoint {
    Point x = 0.0;
    double t = 0.0;

    friend bool operator==(const FlowPoint&, const FlowPoint&) = default;
};

/// The suspension flow over (f, mu, tau) together with its invariant
/// probability measure: (mu x Lebesgue) restricted to the region under the
/// roof, divided by the integral of tau.
///
/// The top of each fiber is identified with the bottom of the next one, so the
/// canonical fiber over x is the half-open [0, tau(x)).
class SuspensionFlow {
public:
    /// `normalizer` is the integral of tau against mu; `tau_sup` an upper bound
    /// of tau used by the rejection sampler and checked on every evaluation.
    SuspensionFlow(BaseSystem sys, RoofFunction roof, double normalizer, std::optional<double> tau_sup = std::nullopt)
        : sys_(std::move(sys)), roof_(std::move(roof)), normalizer_(normalizer),
          tau_sup_(tau_sup ? tau_sup : roof_.sup()) {
        if (!(normalizer_ > 0.0)) throw ConfigurationError("integral of the roof must be positive");
        if (tau_sup_ && *tau_sup_ < roof_.lower_bound()) {
            throw BadSupBound("declared roof supremum is below the roof lower bound");
        }
    }

    /// Uses the roof's exact integral; throws UnsupportedExactIntegration when
    /// the roof only supports Monte Carlo integration.
    static SuspensionFlow exact(BaseSystem sys, RoofFunction roof, std::optional<double> tau_sup = std::nullopt) {
        RandomStream unused(0);
        const double norm = roof_integral(roof, sys, IntegrationMode::exact, 0, unused).value;
        return SuspensionFlow(std::move(sys), std::move(roof), norm, tau_sup);
    }

    [[nodiscard]] const BaseSystem& base() const { return sys_; }
    [[nodiscard]] const RoofFunction& roof() const { return roof_; }
    [[nodiscard]] double normalizer() const { return normalizer_; }
    [[nodiscard]] std::optional<double> tau_sup() const { return tau_sup_; }

    /// The same flow over the roof c * tau.
    [[nodiscard]] SuspensionFlow rescaled(double c) const {
        std::optional<double> sup;
        if (tau_sup_) sup = *tau_sup_ * c;
        return SuspensionFlow(sys_, roof_.scaled(c), normalizer_ * c, sup);
    }

    /// tau(x), checked against both declared bounds.
    [[nodiscard]] double tau(Point x) const {
        const double v = roof_(x);
        if (tau_sup_ && v > *tau_sup_) {
            std::ostringstream os;
            os.precision(17);
            os << "roof value " << v << " at x=" << x << " exceeds the declared supremum " << *tau_sup_;
            throw BadSupBound(os.str());
        }
        return v;
    }

    /// Number of fiber tops crossed when flowing from p for time s, i.e. the k with
    /// tau^k(x) <= t + s < tau^{k+1}(x). A landing exactly on a top counts as crossed.
    [[nodiscard]] long long crossing_count(FlowPoint p, double s) const { return advance(p, s).second; }

    [[nodiscard]] FlowPoint evolve(FlowPoint p, double s) const {
        if (!(s >= 0.0)) throw ConfigurationError("flow time must be non-negative");
        return advance(p, s).first;
    }

    /// Resolves (x, t) with t >= 0 to its canonical representative.
    [[nodiscard]] FlowPoint canonicalize(Point x, double t) const {
        if (!(t >= 0.0)) throw ConfigurationError("fiber coordinate must be non-negative");
        return advance(FlowPoint{x, 0.0}, t).first;
    }

    [[nodiscard]] bool is_canonical(FlowPoint p) const {
        return sys_.in_state_space(p.x) && p.t >= 0.0 && p.t < tau(p.x);
    }

private:
    [[nodiscard]] std::pair<FlowPoint, long long> advance(FlowPoint p, double s) const {
        CompensatedSum residual(p.t);
        residual += s;
        double r = residual.value();
        Point x = p.x;
        long long k = 0;
        for (;;) {
            const double h = tau(x);
            if (r < h) break;
            residual -= h;
            r = residual.value();
            x = sys_.apply(x);
            ++k;
        }
        return {FlowPoint{x, std::max(r, 0.0)}, k};
    }

    BaseSystem sys_;
    RoofFunction roof_;
    double normalizer_;
    std::optional<double> tau_sup_;
};

/// Draws from the flow-invariant measure by rejection: x ~ mu is accepted with
/// probability tau(x)/tau_sup and t is then uniform on [0, tau(x)).
///
/// One sampler per worker; it keeps acceptance counts so that a hopeless
/// supremum (acceptance below 1e-3 over a window) is reported as BadSupBound.
class FlowMeasureSampler {
public:
    static constexpr std::size_t kWindow = 10'000;
    static constexpr double kMinAcceptance = 1e-3;

    explicit FlowMeasureSampler(const SuspensionFlow& flow) : flow_(&flow) {
        if (!flow.tau_sup()) throw BadSupBound("sampling the flow measure needs a declared roof supremum");
        sup_ = *flow.tau_sup();
    }

    FlowPoint operator()(RandomStream& rng) {
        for (;;) {
            const Point x = flow_->base().sample(rng);
            const double h = flow_->tau(x);
            ++window_proposals_;
            const bool accept = rng.uniform() * sup_ < h;
            if (accept) ++window_accepted_;
            if (window_proposals_ == kWindow) {
                if (static_cast<double>(window_accepted_) < kMinAcceptance * static_cast<double>(kWindow)) {
                    throw BadSupBound("flow-measure acceptance rate fell below 1e-3; the roof supremum is too loose");
                }
                window_proposals_ = 0;
                window_accepted_ = 0;
            }
            if (accept) return FlowPoint{x, rng.uniform() * h};
        }
    }

    [[nodiscard]] std::size_t window_proposals() const { return window_proposals_; }

private:
    const SuspensionFlow* flow_;
    double sup_ = 0.0;
    std::size_t window_proposals_ = 0;
    std::size_t window_accepted_ = 0;
};

} // namespace kacflow
