#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "nilmbound/errors.hpp"

namespace nilmbound {

enum class NoiseKind { Gaussian, Laplace };

namespace detail {

/// splitmix64 step; used to derive independent child seeds from a master
/// seed so that per-trial / per-start streams are stable across platforms.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    splitmix64(s);
    return splitmix64(s);
}

/// Minimal uniform stream built on splitmix64: pure integer arithmetic
/// plus an explicit 53-bit mantissa conversion, so the seed-to-stream
/// mapping is identical on every platform.
class UniformStream {
public:
    explicit UniformStream(std::uint64_t seed) : state_(seed) {
        // Warm up splitmix so trivially related seeds decorrelate.
        splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform on (0, 1]; never returns 0 so log() stays finite.
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

}  // namespace detail

/// Parametric i.i.d. additive noise density. Gaussian scale is the
/// standard deviation; Laplace scale is the diversity b.
///
/// Both families meet the regularity needed for the information bounds
/// (continuously differentiable density vanishing on the boundary of its
/// support). The Laplace score is undefined at the single point w = 0,
/// a measure-zero set that does not affect the Fisher integral.
class NoiseModel {
public:
    NoiseModel(NoiseKind kind, double scale) : kind_(kind), scale_(scale) {
        if (!(std::isfinite(scale) && scale > 0.0))
            throw ValidationError("noise model: scale must be a positive real");
    }

    static NoiseModel gaussian(double sigma) { return {NoiseKind::Gaussian, sigma}; }
    static NoiseModel laplace(double b) { return {NoiseKind::Laplace, b}; }

    NoiseKind kind() const { return kind_; }
    double scale() const { return scale_; }

    bool satisfies_regularity() const { return true; }

    double variance() const {
        return kind_ == NoiseKind::Gaussian ? scale_ * scale_ : 2.0 * scale_ * scale_;
    }

    double pdf(double w) const {
        if (kind_ == NoiseKind::Gaussian) {
            const double z = w / scale_;
            return std::exp(-0.5 * z * z) /
                   (scale_ * std::sqrt(2.0 * std::numbers::pi));
        }
        return std::exp(-std::abs(w) / scale_) / (2.0 * scale_);
    }

    double log_pdf(double w) const {
        if (kind_ == NoiseKind::Gaussian) {
            const double z = w / scale_;
            return -0.5 * z * z - std::log(scale_) -
                   0.5 * std::log(2.0 * std::numbers::pi);
        }
        return -std::abs(w) / scale_ - std::log(2.0 * scale_);
    }

    /// Score p'(w)/p(w). For Laplace the w = 0 value takes the right limit.
    double score(double w) const {
        if (kind_ == NoiseKind::Gaussian) return -w / (scale_ * scale_);
        return (w >= 0.0 ? -1.0 : 1.0) / scale_;
    }

private:
    NoiseKind kind_;
    double scale_;
};

/// Fisher information of the noise density: E{(p'(w)/p(w))^2}.
/// Gaussian sigma gives 1/sigma^2; Laplace b gives 1/b^2. Squaring the
/// reciprocal (rather than taking the reciprocal of the square) keeps
/// round decimal scales exact: 1/0.1 rounds to 10 and squares to 100.
inline double fisher_information(const NoiseModel& model) {
    const double inv = 1.0 / model.scale();
    return inv * inv;
}

/// Draws `count` i.i.d. values. Deterministic for a given seed and stable
/// across platforms (integer generator plus explicit inverse transforms).
inline std::vector<double> sample(const NoiseModel& model, std::uint64_t seed,
                                  std::size_t count) {
    std::vector<double> out;
    out.reserve(count);
    detail::UniformStream stream(seed);
    if (model.kind() == NoiseKind::Gaussian) {
        const double sigma = model.scale();
        while (out.size() < count) {
            // Box-Muller; u1 in (0,1] keeps the log finite.
            const double u1 = stream.next_unit();
            const double u2 = stream.next_unit();
            const double r = std::sqrt(-2.0 * std::log(u1));
            const double angle = 2.0 * std::numbers::pi * u2;
            out.push_back(sigma * r * std::cos(angle));
            if (out.size() < count) out.push_back(sigma * r * std::sin(angle));
        }
    } else {
        // Difference of two exponentials is Laplace; avoids the inverse-CDF
        // boundary where log(0) would appear.
        const double b = model.scale();
        for (std::size_t i = 0; i < count; ++i) {
            const double e1 = -std::log(stream.next_unit());
            const double e2 = -std::log(stream.next_unit());
            out.push_back(b * (e1 - e2));
        }
    }
    return out;
}

}  // namespace nilmbound
