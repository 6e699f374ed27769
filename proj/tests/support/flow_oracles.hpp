#pragma once

// Reference implementations used only by tests. They deliberately avoid the
// library's closed-form reductions: flow positions are found by walking fiber
// tops one at a time, and hitting times by stepping the clock.

#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>

#include "kacflow/kacflow.hpp"

namespace kacflow::testing {

struct Walked {
    FlowPoint point;
    long long crossings = 0;
};

/// Position after time s by repeated subtraction of fiber heights.
inline Walked walk_fibers(const BaseSystem& sys, const RoofFunction& tau, FlowPoint p, double s) {
    Walked w{p, 0};
    long double t = static_cast<long double>(p.t) + s;
    while (t >= static_cast<long double>(tau(w.point.x))) {
        t -= tau(w.point.x);
        w.point.x = sys.apply(w.point.x);
        ++w.crossings;
    }
    w.point.t = static_cast<double>(t);
    return w;
}

/// Clock-stepping search for the first time the orbit of p lies in the
/// cylinder, after having left it if p started inside. Returns the first
/// grid time k*step at which membership holds, so the true hitting time h
/// satisfies result - step < h <= result.
inline std::optional<double> scan_hitting_time(const BaseSystem& sys, const RoofFunction& tau, const CylinderSet& a,
                                               FlowPoint p, double step, double horizon) {
    auto inside = [&](Point x, long double t) {
        return sys.contains(a.base, x) && static_cast<long double>(a.t1) <= t && t < static_cast<long double>(a.t2);
    };
    Point x = p.x;
    long double fiber_start = 0.0L; // elapsed time at which the current fiber was entered, minus p.t
    bool left = !inside(x, p.t);
    const long long max_k = static_cast<long long>(std::ceil(horizon / step));
    for (long long k = 1; k <= max_k; ++k) {
        const long double elapsed = static_cast<long double>(k) * step;
        long double t = static_cast<long double>(p.t) + elapsed - fiber_start;
        while (t >= static_cast<long double>(tau(x))) {
            fiber_start += tau(x);
            t -= tau(x);
            x = sys.apply(x);
        }
        const bool in = inside(x, t);
        if (!left) {
            left = !in;
            continue;
        }
        if (in) return static_cast<double>(elapsed);
    }
    return std::nullopt;
}

} // namespace kacflow::testing
