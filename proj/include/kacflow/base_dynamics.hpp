#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kacflow/errors.hpp"
#include "kacflow/numeric.hpp"

namespace kacflow {

/// Points of the base. Continuous systems live on [0,1); finite systems use
/// the state index stored as a double.
using Point = double;

inline constexpr long long kDefaultMaxSteps = 10'000'000;

enum class SystemKind { expanding, rotation, permutation };

inline const char* to_string(SystemKind k) {
    switch (k) {
    case SystemKind::expanding: return "expanding";
    case SystemKind::rotation: return "rotation";
    case SystemKind::permutation: return "permutation";
    }
    return "?";
}

/// Half-open interval [lo, hi).
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] bool contains(double x) const { return lo <= x && x < hi; }
    [[nodiscard]] double length() const { return hi - lo; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

struct IntervalUnion {
    std::vector<Interval> parts; // sorted, pairwise disjoint
};

/// m-ary digit cylinder: points whose expansion starts with `digits`.
struct DigitPrefix {
    std::vector<int> digits;
};

struct StateSet {
    std::vector<std::size_t> states; // sorted, unique
};

/// A measurable subset of the base: a finite interval union, a digit cylinder
/// or a finite set of states. Which representations make sense depends on the
/// system the set is used with; see BaseSystem::measure.
class BaseSet {
public:
    using Representation = std::variant<IntervalUnion, DigitPrefix, StateSet>;

    static BaseSet intervals(std::vector<Interval> parts) {
        if (parts.empty()) throw ConfigurationError("interval union must not be empty");
        std::sort(parts.begin(), parts.end(),
                  [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
        for (std::size_t i = 0; i < parts.size(); ++i) {
            const auto& iv = parts[i];
            if (!(iv.lo >= 0.0 && iv.lo < iv.hi && iv.hi <= 1.0)) {
                std::ostringstream os;
                os << "interval [" << iv.lo << ", " << iv.hi << ") is empty or not inside [0,1)";
                throw ConfigurationError(os.str());
            }
            if (i > 0 && parts[i - 1].hi > iv.lo) {
                throw ConfigurationError("intervals of a base set must be pairwise disjoint");
            }
        }
        return BaseSet(IntervalUnion{std::move(parts)});
    }

    static BaseSet interval(double lo, double hi) { return intervals({Interval{lo, hi}}); }

    static BaseSet prefix(std::vector<int> digits) {
        for (int d : digits) {
            if (d < 0) throw ConfigurationError("digit prefix entries must be non-negative");
        }
        return BaseSet(DigitPrefix{std::move(digits)});
    }

    /// Prefix from a digit string such as "01".
    static BaseSet prefix(const std::string& digits) {
        std::vector<int> ds;
        for (char c : digits) {
            if (c < '0' || c > '9') {
                throw ConfigurationError("digit prefix \"" + digits + "\" must contain only digits");
            }
            ds.push_back(c - '0');
        }
        return prefix(std::move(ds));
    }

    static BaseSet states(std::vector<std::size_t> ids) {
        if (ids.empty()) throw ConfigurationError("state set must not be empty");
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        return BaseSet(StateSet{std::move(ids)});
    }

    [[nodiscard]] const Representation& representation() const { return rep_; }

    [[nodiscard]] std::string describe() const {
        std::ostringstream os;
        std::visit(
            [&](const auto& r) {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, IntervalUnion>) {
                    for (std::size_t i = 0; i < r.parts.size(); ++i) {
                        os << (i ? "u" : "") << '[' << r.parts[i].lo << ',' << r.parts[i].hi << ')';
                    }
                } else if constexpr (std::is_same_v<T, DigitPrefix>) {
                    os << "prefix:";
                    for (int d : r.digits) os << d;
                } else {
                    os << '{';
                    for (std::size_t i = 0; i < r.states.size(); ++i) os << (i ? " " : "") << r.states[i];
                    os << '}';
                }
            },
            rep_);
        return os.str();
    }

private:
    explicit BaseSet(Representation r) : rep_(std::move(r)) {}
    Representation rep_;
};

/// A base map together with its ergodic invariant measure.
///
/// Three kinds are supported:
///  - expanding: x -> m x mod 1 with the Bernoulli(p_0..p_{m-1}) measure on digits,
///  - rotation:  x -> x + alpha mod 1 with Lebesgue measure,
///  - permutation: a bijection of {0..n-1} with weights constant on cycles and
///    supported on a single cycle (so the measure is ergodic).
///
/// Values are immutable after construction and may be shared between threads.
class BaseSystem {
public:
    static BaseSystem expanding(int branches, std::vector<double> weights) {
        if (branches < 2) throw ConfigurationError("expanding map needs at least 2 branches");
        if (weights.empty()) weights.assign(static_cast<std::size_t>(branches), 1.0 / branches);
        if (weights.size() != static_cast<std::size_t>(branches)) {
            throw ConfigurationError("expanding map needs one Bernoulli weight per branch");
        }
        double total = 0.0;
        for (double p : weights) {
            if (!(p > 0.0)) throw ConfigurationError("Bernoulli weights must be strictly positive");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-12) throw ConfigurationError("Bernoulli weights must sum to 1");

        BaseSystem s(SystemKind::expanding);
        s.branches_ = branches;
        s.weights_ = std::move(weights);
        s.cumulative_.resize(s.weights_.size() + 1, 0.0);
        std::partial_sum(s.weights_.begin(), s.weights_.end(), s.cumulative_.begin() + 1);
        s.uniform_ = std::all_of(s.weights_.begin(), s.weights_.end(),
                                 [&](double p) { return p == s.weights_.front(); });
        s.entropy_ = 0.0;
        for (double p : s.weights_) s.entropy_ -= p * std::log(p);
        s.depth_ = branches == 2 ? 52
                                 : static_cast<int>(std::ceil(52.0 / std::log2(static_cast<double>(branches))));
        return s;
    }

    static BaseSystem doubling() { return expanding(2, {0.5, 0.5}); }

    /// alpha is taken verbatim; its irrationality is not (and cannot be) certified.
    static BaseSystem rotation(double alpha) {
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigurationError("rotation number must lie in (0,1)");
        BaseSystem s(SystemKind::rotation);
        s.alpha_ = alpha;
        s.entropy_ = 0.0;
        return s;
    }

    static BaseSystem permutation(std::vector<std::size_t> table, std::vector<double> weights) {
        const std::size_t n = table.size();
        if (n == 0) throw ConfigurationError("permutation needs at least one state");
        if (weights.size() != n) throw ConfigurationError("permutation needs one weight per state");
        std::vector<bool> hit(n, false);
        for (std::size_t img : table) {
            if (img >= n || hit[img]) throw ConfigurationError("permutation table is not a bijection");
            hit[img] = true;
        }
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw ConfigurationError("state weights must be non-negative");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12) throw ConfigurationError("state weights must sum to 1");
        std::size_t charged_cycles = 0;
        std::vector<bool> seen(n, false);
        for (std::size_t start = 0; start < n; ++start) {
            if (seen[start]) continue;
            std::size_t i = start;
            do {
                seen[i] = true;
                if (std::abs(weights[table[i]] - weights[i]) > 1e-15) {
                    throw ConfigurationError("state weights are not invariant: they must be constant on cycles");
                }
                i = table[i];
            } while (i != start);
            if (weights[start] > 0.0) ++charged_cycles;
        }
        if (charged_cycles != 1) {
            throw ConfigurationError("state weights must be supported on exactly one cycle (ergodic measure)");
        }
        BaseSystem s(SystemKind::permutation);
        s.table_ = std::move(table);
        s.weights_ = std::move(weights);
        s.entropy_ = 0.0;
        return s;
    }

    /// The cyclic shift i -> i+1 mod n with uniform weights.
    static BaseSystem cycle(std::size_t n) {
        std::vector<std::size_t> table(n);
        for (std::size_t i = 0; i < n; ++i) table[i] = (i + 1) % n;
        return permutation(std::move(table), std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }

    [[nodiscard]] SystemKind kind() const { return kind_; }
    [[nodiscard]] bool invertible() const { return kind_ != SystemKind::expanding; }
    [[nodiscard]] bool finite() const { return kind_ == SystemKind::permutation; }
    [[nodiscard]] double entropy() const { return entropy_; }
    [[nodiscard]] int branches() const { return branches_; }
    [[nodiscard]] double alpha() const { return alpha_; }
    [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
    [[nodiscard]] const std::vector<std::size_t>& table() const { return table_; }
    [[nodiscard]] std::size_t state_count() const { return table_.size(); }
    /// Number of m-ary digits drawn per sample (expanding kind).
    [[nodiscard]] int sampling_depth() const { return depth_; }

    [[nodiscard]] std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        switch (kind_) {
        case SystemKind::expanding:
            os << "expanding(m=" << branches_ << ",p=";
            for (std::size_t i = 0; i < weights_.size(); ++i) os << (i ? ":" : "") << weights_[i];
            os << ')';
            break;
        case SystemKind::rotation: os << "rotation(alpha=" << alpha_ << ')'; break;
        case SystemKind::permutation:
            os << "permutation(";
            for (std::size_t i = 0; i < table_.size(); ++i) os << (i ? " " : "") << table_[i];
            os << ')';
            break;
        }
        return os.str();
    }

    [[nodiscard]] bool in_state_space(Point x) const {
        if (finite()) return x >= 0.0 && x < static_cast<double>(table_.size()) && x == std::floor(x);
        return x >= 0.0 && x < 1.0;
    }

    /// f(x).
    [[nodiscard]] Point apply(Point x) const {
        switch (kind_) {
        case SystemKind::expanding: {
            const double y = static_cast<double>(branches_) * x;
            return y - std::floor(y);
        }
        case SystemKind::rotation: {
            const double y = x + alpha_;
            return y >= 1.0 ? y - 1.0 : y;
        }
        case SystemKind::permutation: return static_cast<double>(table_[static_cast<std::size_t>(x)]);
        }
        return x;
    }

    /// f^n(x).
    [[nodiscard]] Point iterate(Point x, long long n) const {
        for (long long k = 0; k < n; ++k) x = apply(x);
        return x;
    }

    // ---- sets ---------------------------------------------------------------

    /// Throws ConfigurationError when the representation does not fit this kind.
    void check_compatible(const BaseSet& set) const {
        std::visit(
            [&](const auto& r) {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, IntervalUnion>) {
                    if (finite()) throw ConfigurationError("interval sets need a continuous base, not a permutation");
                } else if constexpr (std::is_same_v<T, DigitPrefix>) {
                    if (kind_ != SystemKind::expanding) {
                        throw ConfigurationError(std::string("digit cylinders need an expanding base, not ") +
                                                 to_string(kind_));
                    }
                    if (r.digits.empty()) throw ConfigurationError("digit prefix must not be empty");
                    if (static_cast<int>(r.digits.size()) > depth_) {
                        throw ConfigurationError("digit prefix is longer than the sampling depth");
                    }
                    for (int d : r.digits) {
                        if (d >= branches_) throw ConfigurationError("digit prefix uses a digit >= branch count");
                    }
                } else {
                    if (!finite()) throw ConfigurationError("state sets need a permutation base");
                    if (r.states.back() >= table_.size()) throw ConfigurationError("state index out of range");
                }
            },
            set.representation());
    }

    /// The set as half-open intervals of [0,1) (continuous kinds only).
    [[nodiscard]] std::vector<Interval> as_intervals(const BaseSet& set) const {
        check_compatible(set);
        if (const auto* u = std::get_if<IntervalUnion>(&set.representation())) return u->parts;
        if (const auto* p = std::get_if<DigitPrefix>(&set.representation())) return {prefix_interval(*p)};
        throw ConfigurationError("state sets have no interval form");
    }

    [[nodiscard]] bool contains(const BaseSet& set, Point x) const {
        return std::visit(
            [&](const auto& r) -> bool {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, IntervalUnion>) {
                    for (const auto& iv : r.parts) {
                        if (x < iv.lo) return false;
                        if (x < iv.hi) return true;
                    }
                    return false;
                } else if constexpr (std::is_same_v<T, DigitPrefix>) {
                    return prefix_interval(r).contains(x);
                } else {
                    return std::binary_search(r.states.begin(), r.states.end(), static_cast<std::size_t>(x));
                }
            },
            set.representation());
    }

    /// The whole state space as a set of the natural representation.
    [[nodiscard]] BaseSet whole() const {
        if (!finite()) return BaseSet::interval(0.0, 1.0);
        std::vector<std::size_t> all(table_.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        return BaseSet::states(std::move(all));
    }

    /// mu(set), exact for the supported representations.
    [[nodiscard]] double measure(const BaseSet& set) const {
        check_compatible(set);
        return std::visit(
            [&](const auto& r) -> double {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, IntervalUnion>) {
                    double m = 0.0;
                    for (const auto& iv : r.parts) m += interval_measure(iv);
                    return m;
                } else if constexpr (std::is_same_v<T, DigitPrefix>) {
                    double m = 1.0;
                    for (int d : r.digits) m *= weights_[static_cast<std::size_t>(d)];
                    return m;
                } else {
                    double m = 0.0;
                    for (std::size_t s : r.states) m += weights_[s];
                    return m;
                }
            },
            set.representation());
    }

    /// Least k >= 1 with f^k(x) in the set.
    [[nodiscard]] long long first_return(const BaseSet& set, Point x,
                                         long long max_steps = kDefaultMaxSteps) const {
        Point y = x;
        for (long long k = 1; k <= max_steps; ++k) {
            const Point prev = y;
            y = apply(y);
            if (contains(set, y)) return k;
            // rounding can pin an orbit on a fixed point outside the set
            if (y == prev) throw NonRecurrentWithinBudget(x, k);
        }
        throw NonRecurrentWithinBudget(x, max_steps);
    }

    // ---- sampling -------------------------------------------------------------

    /// A point distributed according to mu.
    Point sample(RandomStream& rng) const {
        switch (kind_) {
        case SystemKind::rotation: return rng.uniform();
        case SystemKind::expanding: {
            if (branches_ == 2 && uniform_) {
                // 52 fair binary digits at once
                return static_cast<double>(rng() >> 12) * 0x1.0p-52;
            }
            std::vector<int> digits;
            digits.reserve(static_cast<std::size_t>(depth_));
            return compose_digits(digits, rng);
        }
        case SystemKind::permutation: return static_cast<double>(pick_weighted(weights_, rng));
        }
        return 0.0;
    }

    /// A point distributed according to mu restricted to `set` and renormalized.
    Point sample_in(const BaseSet& set, RandomStream& rng) const {
        check_compatible(set);
        return std::visit(
            [&](const auto& r) -> Point {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, IntervalUnion>) {
                    return sample_in_intervals(r.parts, rng);
                } else if constexpr (std::is_same_v<T, DigitPrefix>) {
                    std::vector<int> digits(r.digits);
                    return compose_digits(digits, rng);
                } else {
                    std::vector<double> w;
                    w.reserve(r.states.size());
                    for (std::size_t s : r.states) w.push_back(weights_[s]);
                    if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) {
                        throw EmptyProjection("state set " + set.describe() + " has zero measure");
                    }
                    return static_cast<double>(r.states[pick_weighted(w, rng)]);
                }
            },
            set.representation());
    }

    /// Distribution function of the Bernoulli measure, F(y) = mu([0, y)).
    [[nodiscard]] double bernoulli_cdf(double y) const {
        if (y <= 0.0) return 0.0;
        if (y >= 1.0) return 1.0;
        if (uniform_) return y;
        const double m = static_cast<double>(branches_);
        CompensatedSum acc;
        double mass = 1.0;
        for (int i = 0; i < 400 && y > 0.0 && mass > 0x1.0p-60; ++i) {
            y *= m;
            const double fd = std::floor(y);
            const auto d = static_cast<std::size_t>(std::min(fd, m - 1.0));
            y -= static_cast<double>(d);
            acc += cumulative_[d] * mass;
            mass *= weights_[d];
        }
        return acc.value();
    }

private:
    explicit BaseSystem(SystemKind k) : kind_(k) {}

    [[nodiscard]] Interval prefix_interval(const DigitPrefix& p) const {
        const double m = static_cast<double>(branches_);
        double lo = 0.0;
        double width = 1.0;
        for (int d : p.digits) {
            width /= m;
            lo += static_cast<double>(d) * width;
        }
        return Interval{lo, lo + width};
    }

    [[nodiscard]] double interval_measure(const Interval& iv) const {
        if (kind_ == SystemKind::expanding && !uniform_) return bernoulli_cdf(iv.hi) - bernoulli_cdf(iv.lo);
        return iv.length();
    }

    static std::size_t pick_weighted(const std::vector<double>& w, RandomStream& rng) {
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        const double u = rng.uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            acc += w[i];
            if (u < acc && w[i] > 0.0) return i;
        }
        // rounding pushed u past the last bucket
        for (std::size_t i = w.size(); i-- > 0;) {
            if (w[i] > 0.0) return i;
        }
        return 0;
    }

    int draw_digit(RandomStream& rng) const {
        const double u = rng.uniform();
        for (int d = 0; d + 1 < branches_; ++d) {
            if (u < cumulative_[static_cast<std::size_t>(d) + 1]) return d;
        }
        return branches_ - 1;
    }

    /// Completes `digits` to the sampling depth with Bernoulli digits and
    /// returns sum d_i m^{-i}.
    Point compose_digits(std::vector<int>& digits, RandomStream& rng) const {
        while (static_cast<int>(digits.size()) < depth_) digits.push_back(draw_digit(rng));
        const double m = static_cast<double>(branches_);
        double x = 0.0;
        for (std::size_t i = digits.size(); i-- > 0;) x = (static_cast<double>(digits[i]) + x) / m;
        return x;
    }

    Point sample_in_intervals(const std::vector<Interval>& parts, RandomStream& rng) const {
        std::vector<double> masses;
        masses.reserve(parts.size());
        for (const auto& iv : parts) masses.push_back(interval_measure(iv));
        if (std::accumulate(masses.begin(), masses.end(), 0.0) <= 0.0) {
            throw EmptyProjection("interval union has zero measure");
        }
        for (int attempt = 0; attempt < 64; ++attempt) {
            const Interval& iv = parts[pick_weighted(masses, rng)];
            // uniform weights make mu Lebesgue measure
            const Point x = kind_ == SystemKind::rotation || uniform_ ? iv.lo + iv.length() * rng.uniform()
                                                                      : descend_digits(iv, rng);
            if (iv.contains(x)) return x;
        }
        throw EmptyProjection("could not draw a point inside the interval union");
    }

    /// Draws digits one level at a time, conditioned on landing in `iv`. Once the
    /// current cylinder lies inside the interval the remaining digits are free.
    Point descend_digits(const Interval& iv, RandomStream& rng) const {
        const double m = static_cast<double>(branches_);
        std::vector<int> digits;
        digits.reserve(static_cast<std::size_t>(depth_));
        double lo = 0.0;
        double width = 1.0;
        std::vector<double> child(static_cast<std::size_t>(branches_));
        while (static_cast<int>(digits.size()) < depth_) {
            if (lo >= iv.lo && lo + width <= iv.hi) break;
            const double w = width / m;
            for (int d = 0; d < branches_; ++d) {
                const double clo = std::max(lo + d * w, iv.lo);
                const double chi = std::min(lo + (d + 1) * w, iv.hi);
                child[static_cast<std::size_t>(d)] =
                    chi > clo ? std::max(bernoulli_cdf(chi) - bernoulli_cdf(clo), 0.0) : 0.0;
            }
            const int d = static_cast<int>(pick_weighted(child, rng));
            digits.push_back(d);
            lo += d * w;
            width = w;
        }
        return compose_digits(digits, rng);
    }

    SystemKind kind_;
    int branches_ = 0;
    double alpha_ = 0.0;
    std::vector<double> weights_;
    std::vector<double> cumulative_;
    std::vector<std::size_t> table_;
    bool uniform_ = false;
    double entropy_ = 0.0;
    int depth_ = 0;
};

// ---- integration ------------------------------------------------------------

/// g = sum_j value_j * chi_{set_j} over a declared finite partition.
struct PiecewiseConstant {
    std::vector<std::pair<BaseSet, double>> pieces;

    [[nodiscard]] double operator()(const BaseSystem& sys, Point x) const {
        for (const auto& [set, v] : pieces) {
            if (sys.contains(set, x)) return v;
        }
        return 0.0;
    }
};

using Integrand = std::variant<PiecewiseConstant, std::function<double(Point)>>;

enum class IntegrationMode { exact, monte_carlo };

struct Integral {
    double value = 0.0;
    double std_error = 0.0; ///< zero for exact results
    std::size_t samples = 0;
};

/// Integral of g against mu. Exact mode sums value * measure over the pieces;
/// Monte Carlo mode averages N draws from mu.
inline Integral integrate_mu(const BaseSystem& sys, const Integrand& g, IntegrationMode mode, std::size_t samples,
                             RandomStream& rng) {
    if (mode == IntegrationMode::exact) {
        const auto* pc = std::get_if<PiecewiseConstant>(&g);
        if (pc == nullptr) {
            throw UnsupportedExactIntegration("exact integration needs a piecewise-constant integrand");
        }
        CompensatedSum acc;
        for (const auto& [set, v] : pc->pieces) acc += v * sys.measure(set);
        return Integral{acc.value(), 0.0, 0};
    }
    if (samples < 2) throw ConfigurationError("Monte Carlo integration needs at least 2 samples");
    RunningMoments<1> moments;
    for (std::size_t i = 0; i < samples; ++i) {
        const Point x = sys.sample(rng);
        const double v = std::visit(
            [&](const auto& fn) -> double {
                using T = std::decay_t<decltype(fn)>;
                if constexpr (std::is_same_v<T, PiecewiseConstant>) {
                    return fn(sys, x);
                } else {
                    return fn(x);
                }
            },
            g);
        moments.push({v});
    }
    return Integral{moments.mean(), moments.stderr_of_mean(), samples};
}

} // namespace kacflow
