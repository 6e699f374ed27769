#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>

namespace kacflow {

/// Neumaier's variant of Kahan summation. Keeps a running correction term so
/// that long Birkhoff sums of roof values do not drift.
class CompensatedSum {
public:
    CompensatedSum() = default;
    explicit CompensatedSum(double initial) : sum_(initial) {}

    CompensatedSum& add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
        return *this;
    }

    CompensatedSum& operator+=(double v) { return add(v); }
    CompensatedSum& operator-=(double v) { return add(-v); }

    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// A seeded 64-bit stream. The generator and the conversion to doubles are both
/// fully specified, so draws are identical on every conforming platform.
class RandomStream {
public:
    using result_type = std::uint64_t;

    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    /// Stream number `worker` of the family rooted at `seed`.
    static RandomStream derive(std::uint64_t seed, std::uint64_t worker) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(worker),
                          static_cast<std::uint32_t>(worker >> 32), 0x6b616366u};
        RandomStream s(0);
        s.engine_.seed(seq);
        return s;
    }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform on [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // reject the incomplete top block so every residue is equally likely
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return r % n;
    }

private:
    std::mt19937_64 engine_;
};

/// Running means and co-moments of K jointly observed quantities (Welford),
/// with the pairwise merge of Chan et al. for combining worker partials.
template <std::size_t K>
class RunningMoments {
public:
    void push(const std::array<double, K>& v) {
        ++n_;
        const double nn = static_cast<double>(n_);
        std::array<double, K> delta{};
        for (std::size_t i = 0; i < K; ++i) {
            delta[i] = v[i] - mean_[i];
            mean_[i] += delta[i] / nn;
        }
        for (std::size_t i = 0; i < K; ++i) {
            for (std::size_t j = 0; j < K; ++j) {
                comoment_[i][j] += delta[i] * (v[j] - mean_[j]);
            }
        }
    }

    void merge(const RunningMoments& other) {
        if (other.n_ == 0) return;
        if (n_ == 0) {
            *this = other;
            return;
        }
        const double na = static_cast<double>(n_);
        const double nb = static_cast<double>(other.n_);
        const double n = na + nb;
        std::array<double, K> delta{};
        for (std::size_t i = 0; i < K; ++i) delta[i] = other.mean_[i] - mean_[i];
        for (std::size_t i = 0; i < K; ++i) {
            for (std::size_t j = 0; j < K; ++j) {
                comoment_[i][j] += other.comoment_[i][j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for (std::size_t i = 0; i < K; ++i) mean_[i] += delta[i] * nb / n;
        n_ += other.n_;
    }

    [[nodiscard]] std::size_t count() const { return n_; }
    [[nodiscard]] double mean(std::size_t i = 0) const { return mean_[i]; }

    /// Unbiased sample covariance.
    [[nodiscard]] double covariance(std::size_t i, std::size_t j) const {
        return n_ > 1 ? comoment_[i][j] / static_cast<double>(n_ - 1) : 0.0;
    }
    [[nodiscard]] double variance(std::size_t i = 0) const { return covariance(i, i); }

    /// Standard error of mean(i).
    [[nodiscard]] double stderr_of_mean(std::size_t i = 0) const {
        return n_ > 1 ? std::sqrt(variance(i) / static_cast<double>(n_)) : 0.0;
    }

    /// Delta-method standard error of mean(num) / mean(den).
    [[nodiscard]] double stderr_of_ratio(std::size_t num, std::size_t den) const {
        if (n_ < 2) return 0.0;
        const double r = mean(num) / mean(den);
        const double v = variance(num) - 2.0 * r * covariance(num, den) + r * r * variance(den);
        return std::sqrt(std::max(v, 0.0) / static_cast<double>(n_)) / std::abs(mean(den));
    }

private:
    std::size_t n_ = 0;
    std::array<double, K> mean_{};
    std::array<std::array<double, K>, K> comoment_{};
};

} // namespace kacflow
