#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "kacflow/base_dynamics.hpp"
#include "kacflow/errors.hpp"
#include "kacflow/numeric.hpp"
#include "kacflow/roof.hpp"
#include "kacflow/suspension.hpp"

namespace kacflow::oracle {

using Rational = boost::multiprecision::cpp_rational;

namespace detail {

/// Decimal digits only; leading zeros are dropped so the digits are never read as octal.
inline std::optional<boost::multiprecision::cpp_int> parse_digits(std::string digits) {
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        return std::nullopt;
    }
    const auto first = digits.find_first_not_of('0');
    digits = first == std::string::npos ? "0" : digits.substr(first);
    return boost::multiprecision::cpp_int(digits);
}

} // namespace detail

/// Parses "3", "-2/5" or a plain decimal such as "0.125" exactly.
inline Rational parse_rational(const std::string& text) {
    const auto fail = [&]() -> Rational { throw ConfigurationError("\"" + text + "\" is not a rational number"); };
    std::string body = text;
    bool negative = false;
    if (!body.empty() && (body.front() == '-' || body.front() == '+')) {
        negative = body.front() == '-';
        body.erase(0, 1);
    }
    Rational r;
    if (const auto slash = body.find('/'); slash != std::string::npos) {
        const auto num = detail::parse_digits(body.substr(0, slash));
        const auto den = detail::parse_digits(body.substr(slash + 1));
        if (!num || !den || *den == 0) return fail();
        r = Rational(*num, *den);
    } else {
        boost::multiprecision::cpp_int den = 1;
        if (const auto dot = body.find('.'); dot != std::string::npos) {
            for (std::size_t i = dot + 1; i < body.size(); ++i) den *= 10;
            body.erase(dot, 1);
        }
        const auto num = detail::parse_digits(body);
        if (!num) return fail();
        r = Rational(*num, den);
    }
    return negative ? Rational(-r) : r;
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline std::string to_string(const Rational& r) {
    std::ostringstream os;
    os << r;
    return os.str();
}

/// A permutation of {0..n-1} with exact invariant weights and exact roof values.
///
/// The weights must be invariant (constant along cycles), sum to one, and be
/// supported on a single cycle so that the measure is ergodic.
class RationalFlowModel {
public:
    RationalFlowModel(std::vector<std::size_t> table, std::vector<Rational> weights, std::vector<Rational> roof)
        : table_(std::move(table)), weights_(std::move(weights)), roof_(std::move(roof)) {
        const std::size_t n = table_.size();
        if (n == 0) throw ConfigurationError("model needs at least one state");
        if (weights_.size() != n || roof_.size() != n) {
            throw ConfigurationError("model needs one weight and one roof value per state");
        }
        std::vector<bool> hit(n, false);
        for (std::size_t img : table_) {
            if (img >= n || hit[img]) throw ConfigurationError("permutation table is not a bijection");
            hit[img] = true;
        }
        Rational total = 0;
        for (const auto& w : weights_) {
            if (w < 0) throw ConfigurationError("state weights must be non-negative");
            total += w;
        }
        if (total != 1) throw ConfigurationError("state weights must sum to exactly 1, got " + to_string(total));
        for (const auto& r : roof_) {
            if (r <= 0) throw RoofBoundViolation("roof values must be positive");
        }
        std::size_t charged = 0;
        std::vector<bool> seen(n, false);
        for (std::size_t start = 0; start < n; ++start) {
            if (seen[start]) continue;
            std::size_t i = start;
            do {
                seen[i] = true;
                if (weights_[table_[i]] != weights_[i]) {
                    throw ConfigurationError("state weights are not invariant: they must be constant on cycles");
                }
                i = table_[i];
            } while (i != start);
            if (weights_[start] > 0) ++charged;
        }
        if (charged != 1) throw ConfigurationError("state weights must be supported on exactly one cycle");
        for (std::size_t i = 0; i < n; ++i) integral_ += weights_[i] * roof_[i];
    }

    [[nodiscard]] std::size_t size() const { return table_.size(); }
    [[nodiscard]] std::size_t apply(std::size_t x) const { return table_[x]; }
    [[nodiscard]] const Rational& weight(std::size_t x) const { return weights_[x]; }
    [[nodiscard]] const Rational& roof(std::size_t x) const { return roof_[x]; }
    [[nodiscard]] const Rational& roof_integral() const { return integral_; }
    [[nodiscard]] const std::vector<std::size_t>& table() const { return table_; }

    [[nodiscard]] Rational measure(const std::vector<std::size_t>& states) const {
        Rational m = 0;
        for (std::size_t s : states) m += weights_.at(s);
        return m;
    }

    [[nodiscard]] bool roof_is_constant() const {
        return std::all_of(roof_.begin(), roof_.end(), [&](const Rational& r) { return r == roof_.front(); });
    }

    /// Floating-point counterparts, for cross-checking the double-precision code.
    [[nodiscard]] BaseSystem to_base_system() const {
        std::vector<double> w;
        for (const auto& x : weights_) w.push_back(to_double(x));
        return BaseSystem::permutation(table_, std::move(w));
    }

    [[nodiscard]] SuspensionFlow to_flow() const {
        const BaseSystem sys = to_base_system();
        std::vector<double> r;
        for (const auto& x : roof_) r.push_back(to_double(x));
        RoofFunction roof = RoofFunction::per_state(sys, r);
        return SuspensionFlow(sys, std::move(roof), to_double(integral_));
    }

private:
    std::vector<std::size_t> table_;
    std::vector<Rational> weights_;
    std::vector<Rational> roof_;
    Rational integral_ = 0;
};

/// A region over finitely many states: over each state s of `states` the
/// fiber slice [lower[s], upper[s]). Cylinders have the same slice everywhere.
struct RationalRegion {
    std::vector<std::size_t> states;
    std::vector<Rational> lower; ///< indexed by state id, size n
    std::vector<Rational> upper; ///< indexed by state id, size n

    [[nodiscard]] bool covers(std::size_t x) const { return std::binary_search(states.begin(), states.end(), x); }
    [[nodiscard]] bool contains(std::size_t x, const Rational& t) const {
        return covers(x) && lower[x] <= t && t < upper[x];
    }
};

inline RationalRegion make_cylinder(const RationalFlowModel& model, std::vector<std::size_t> states, Rational t1,
                                    Rational t2) {
    std::sort(states.begin(), states.end());
    states.erase(std::unique(states.begin(), states.end()), states.end());
    if (states.empty()) throw ConfigurationError("cylinder needs at least one state");
    if (!(t1 >= 0 && t1 < t2)) throw InvalidSet("cylinder needs 0 <= t1 < t2");
    for (std::size_t s : states) {
        if (s >= model.size()) throw ConfigurationError("state index out of range");
        if (t2 > model.roof(s)) {
            throw InvalidSet("t2=" + to_string(t2) + " exceeds the roof value " + to_string(model.roof(s)) +
                             " of state " + std::to_string(s));
        }
    }
    RationalRegion r{std::move(states), std::vector<Rational>(model.size(), t1),
                     std::vector<Rational>(model.size(), t2)};
    return r;
}

inline RationalRegion make_graph(const RationalFlowModel& model, std::vector<std::size_t> states,
                                 std::vector<Rational> lower, std::vector<Rational> upper) {
    std::sort(states.begin(), states.end());
    states.erase(std::unique(states.begin(), states.end()), states.end());
    if (states.empty()) throw ConfigurationError("graph set needs at least one state");
    if (lower.size() != model.size() || upper.size() != model.size()) {
        throw ConfigurationError("graph set needs per-state heights for every state");
    }
    for (std::size_t s : states) {
        if (!(lower[s] >= 0 && lower[s] < upper[s] && upper[s] <= model.roof(s))) {
            throw InvalidSet("graph set violates 0 <= h1 < h2 <= tau at state " + std::to_string(s));
        }
    }
    return RationalRegion{std::move(states), std::move(lower), std::move(upper)};
}

/// First k >= 1 with f^k(x) in `states`.
inline std::size_t first_return(const RationalFlowModel& model, const std::vector<std::size_t>& states, std::size_t x) {
    std::size_t y = x;
    for (std::size_t k = 1; k <= model.size(); ++k) {
        y = model.apply(y);
        if (std::binary_search(states.begin(), states.end(), y)) return k;
    }
    throw NonRecurrentWithinBudget(static_cast<double>(x), static_cast<long long>(model.size()));
}

/// tau(x) + ... + tau(f^{k-1} x), exactly.
inline Rational roof_sum(const RationalFlowModel& model, std::size_t x, std::size_t k) {
    Rational acc = 0;
    for (std::size_t j = 0; j < k; ++j, x = model.apply(x)) acc += model.roof(x);
    return acc;
}

/// Hitting time of (x, t) to the region, by following the orbit fiber by fiber
/// in exact arithmetic: first out of the region (if inside), then up to each
/// fiber top, until a fiber whose slice lies ahead of the current height.
inline Rational hitting_time(const RationalFlowModel& model, const RationalRegion& a, std::size_t x, const Rational& t) {
    if (!a.contains(x, t) && a.covers(x) && t < a.lower[x]) return a.lower[x] - t;
    Rational elapsed = model.roof(x) - t;
    std::size_t y = model.apply(x);
    for (std::size_t k = 0; k <= model.size(); ++k) {
        if (a.covers(y)) return elapsed + a.lower[y];
        elapsed += model.roof(y);
        y = model.apply(y);
    }
    throw NonRecurrentWithinBudget(static_cast<double>(x), static_cast<long long>(model.size()));
}

/// Mean of the hitting time over mu-bar restricted to the region. The hitting
/// time is affine in t on each fiber slice, so its average over the slice is
/// its value at the midpoint; the slices are then weighted by w_x (upper - lower).
inline Rational oracle_mean_return(const RationalFlowModel& model, const RationalRegion& a) {
    Rational num = 0;
    Rational den = 0;
    for (std::size_t x : a.states) {
        if (model.weight(x) == 0) continue;
        const Rational width = a.upper[x] - a.lower[x];
        const Rational mid = (a.lower[x] + a.upper[x]) / 2;
        num += model.weight(x) * width * hitting_time(model, a, x, mid);
        den += model.weight(x) * width;
    }
    if (den == 0) throw EmptyProjection("region has zero flow measure");
    return num / den;
}

/// sum over x in I of n_I(x) w_x.
inline Rational oracle_discrete_kac(const RationalFlowModel& model, std::vector<std::size_t> states) {
    std::sort(states.begin(), states.end());
    states.erase(std::unique(states.begin(), states.end()), states.end());
    if (states.empty()) throw ConfigurationError("Kac sum needs a nonempty set");
    Rational acc = 0;
    for (std::size_t x : states) {
        if (model.weight(x) == 0) continue;
        acc += static_cast<long long>(first_return(model, states, x)) * model.weight(x);
    }
    return acc;
}

/// Both closed forms of the cylinder mean return, exactly.
struct RationalTheoremA {
    Rational escape_form;
    Rational roof_form;
};

inline RationalTheoremA rhs_theorem_A(const RationalFlowModel& model, const RationalRegion& cylinder) {
    const Rational mass = model.measure(cylinder.states);
    if (mass == 0) throw EmptyProjection("cylinder base has zero measure");
    const Rational width = cylinder.upper[cylinder.states.front()] - cylinder.lower[cylinder.states.front()];
    const Rational& norm = model.roof_integral();
    const Rational bar_mu = mass * width / norm;
    return RationalTheoremA{width / 2 + (1 - bar_mu) * norm / mass, width / 2 + (norm - width * mass) / mass};
}

/// Three-term mean return for a region with per-state heights.
inline Rational rhs_theorem_B(const RationalFlowModel& model, const RationalRegion& a) {
    Rational weight = 0, escape = 0, roof = 0, correction = 0;
    for (std::size_t x : a.states) {
        const Rational& w = model.weight(x);
        if (w == 0) continue;
        const Rational h = a.upper[x] - a.lower[x];
        const std::size_t n = first_return(model, a.states, x);
        std::size_t y = x;
        for (std::size_t k = 0; k < n; ++k) y = model.apply(y);
        weight += w * h;
        escape += w * h * h / 2;
        roof += w * h * roof_sum(model, x, n);
        correction += w * h * (a.lower[y] - a.upper[x]);
    }
    if (weight == 0) throw EmptyProjection("region has zero flow measure");
    return (escape + roof + correction) / weight;
}

struct IdentityCheck {
    std::string name;
    Rational lhs;
    Rational rhs;

    [[nodiscard]] bool holds() const { return lhs == rhs; }
};

struct OracleSuiteResult {
    std::vector<IdentityCheck> checks;
    std::vector<std::string> skipped;

    [[nodiscard]] bool all_hold() const {
        return std::all_of(checks.begin(), checks.end(), [](const IdentityCheck& c) { return c.holds(); });
    }
};

/// Every identity that can be decided exactly on a finite model for the
/// cylinder `a` (same slice [t1, t2) over each of its states).
inline OracleSuiteResult oracle_full_identity_suite(const RationalFlowModel& model, const RationalRegion& a) {
    OracleSuiteResult out;
    const Rational mass = model.measure(a.states);
    if (mass == 0) throw EmptyProjection("cylinder base has zero measure");
    const std::size_t s0 = a.states.front();
    const Rational t1 = a.lower[s0];
    const Rational t2 = a.upper[s0];
    for (std::size_t s : a.states) {
        if (a.lower[s] != t1 || a.upper[s] != t2) {
            throw ConfigurationError("identity suite needs a cylinder (constant slice over its states)");
        }
    }
    const Rational width = t2 - t1;
    const Rational& norm = model.roof_integral();
    const Rational bar_mu = mass * width / norm;

    const Rational mean = oracle_mean_return(model, a);
    const auto closed = rhs_theorem_A(model, a);
    out.checks.push_back({"mean_return=theorem_A", mean, closed.roof_form});
    out.checks.push_back({"stat2", mean, width / 2 + (1 - bar_mu) * norm / mass});
    out.checks.push_back({"stat1", bar_mu * mean, bar_mu * width / 2 + width * (1 - bar_mu)});
    out.checks.push_back({"theorem_A_forms", closed.escape_form, closed.roof_form});

    out.checks.push_back({"discrete_kac", oracle_discrete_kac(model, a.states), Rational(1)});

    Rational tower = 0;
    for (std::size_t x : a.states) {
        if (model.weight(x) == 0) continue;
        tower += model.weight(x) * roof_sum(model, x, first_return(model, a.states, x));
    }
    out.checks.push_back({"roof_tower_decomposition", tower, norm});
    out.checks.push_back({"cross_section", tower / mass, norm / mass});

    if (model.roof_is_constant() && t1 == 0 && t2 == model.roof(0)) {
        const Rational& c = model.roof(0);
        out.checks.push_back({"constant_roof_full_cylinder", mean, c / mass * (1 - mass / 2)});
    } else {
        out.skipped.push_back("constant_roof_full_cylinder");
    }
    out.skipped.push_back("entropy_quotient (zero-entropy base)");

    // Exit regions: mean hitting time over I x [t2 - s, t2) is the hitting time
    // at the slice midpoint t2 - s/2, and n_A is affine in t on each slice.
    const auto exit_value = [&](const Rational& s) -> Rational {
        Rational acc = 0;
        for (std::size_t x : a.states) {
            if (model.weight(x) == 0) continue;
            acc += model.weight(x) * hitting_time(model, a, x, t2 - s / 2);
        }
        return acc / norm; // (1/s) mu-bar(A_s) = mu(I)/norm, times the mu_I average
    };
    const Rational half = width / 2;
    out.checks.push_back({"helmberg_finite_s", exit_value(half), 1 - bar_mu + half * mass / (2 * norm)});
    // the limit s -> 0 by affine extrapolation from s = width and s = width/2
    const Rational limit = 2 * exit_value(half) - exit_value(width);
    out.checks.push_back({"helmberg_limit", limit, 1 - bar_mu});

    out.checks.push_back({"theorem_B_reduces_to_A", rhs_theorem_B(model, a), closed.roof_form});
    out.checks.push_back({"parallel_sides", rhs_theorem_B(model, a), width / 2 + (norm - width * mass) / mass});
    return out;
}

/// Exact checks for a region with per-state heights: the simulated mean return
/// equals the three-term formula; with constant width it also equals the
/// parallel-sides closed form.
inline OracleSuiteResult oracle_graph_suite(const RationalFlowModel& model, const RationalRegion& a) {
    OracleSuiteResult out;
    const Rational mean = oracle_mean_return(model, a);
    out.checks.push_back({"mean_return=theorem_B", mean, rhs_theorem_B(model, a)});
    std::optional<Rational> width;
    bool constant_width = true;
    for (std::size_t x : a.states) {
        const Rational h = a.upper[x] - a.lower[x];
        if (width && *width != h) constant_width = false;
        width = h;
    }
    if (constant_width) {
        const Rational mass = model.measure(a.states);
        const Rational& norm = model.roof_integral();
        out.checks.push_back({"parallel_sides", mean, *width / 2 + (norm - *width * mass) / mass});
    } else {
        out.skipped.push_back("parallel_sides (width not constant)");
    }
    return out;
}

/// Random ergodic model: a random permutation of up to `max_states` states, the
/// mass spread uniformly over one of its cycles, roof values p/q with q <= max_den.
inline RationalFlowModel random_model(RandomStream& rng, std::size_t max_states = 8, int max_den = 16) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.below(max_states));
    std::vector<std::size_t> table(n);
    std::iota(table.begin(), table.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(table[i - 1], table[static_cast<std::size_t>(rng.below(i))]);

    // pick a cycle through a random state
    const std::size_t anchor = static_cast<std::size_t>(rng.below(n));
    std::vector<std::size_t> cycle;
    std::size_t i = anchor;
    do {
        cycle.push_back(i);
        i = table[i];
    } while (i != anchor);
    std::vector<Rational> weights(n, Rational(0));
    for (std::size_t s : cycle) weights[s] = Rational(1, static_cast<long long>(cycle.size()));

    std::vector<Rational> roof(n);
    for (auto& r : roof) {
        const long long den = 1 + static_cast<long long>(rng.below(static_cast<std::uint64_t>(max_den)));
        const long long num = 1 + static_cast<long long>(rng.below(static_cast<std::uint64_t>(2 * max_den)));
        r = Rational(num, den);
    }
    return RationalFlowModel(std::move(table), std::move(weights), std::move(roof));
}

/// States carrying positive weight.
inline std::vector<std::size_t> support(const RationalFlowModel& model) {
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < model.size(); ++s) {
        if (model.weight(s) > 0) out.push_back(s);
    }
    return out;
}

} // namespace kacflow::oracle
