#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "nilmbound/errors.hpp"

namespace nilmbound {

/// Smooth single hump: f(t) = a/2 * (1 - cos(2*pi*t/T)) on [0, T].
/// Both f and f' vanish at the support endpoints, so f is C1 on the
/// whole real line.
struct RaisedCosinePulse {
    double amplitude = 1.0;  // watts
    double duration = 1.0;   // time units
};

/// Plateau of height `amplitude` with half-cosine on/off ramps of widths
/// `rise` and `fall`. C1 on the real line; f'' jumps at the four
/// breakpoints {0, rise, T-fall, T}.
struct SmoothTrapezoid {
    double amplitude = 1.0;
    double duration = 1.0;
    double rise = 0.25;
    double fall = 0.25;
};

/// Two raised-cosine humps of width `pulse_width` separated by a gap of
/// `separation`; total support [0, 2*pulse_width + separation].
struct DoublePulse {
    double amplitude = 1.0;   // first hump
    double amplitude2 = 1.0;  // second hump
    double pulse_width = 0.5;
    double separation = 0.0;
};

/// One segment of a piecewise polynomial signature. Coefficients are in
/// the local coordinate s = t - piece_start, lowest degree first, and
/// every piece must carry at least three of them (degree >= 2).
struct PolynomialPiece {
    double end = 0.0;  // global time where this piece stops
    std::vector<double> coefficients;
};

/// Generic signature given as polynomial pieces over [0, duration]; the
/// first piece starts at 0 and the last ends at the duration. Continuity
/// of f and f' across breakpoints (including both support endpoints,
/// against the zero function outside) is checked by the catalog loader.
struct PiecewisePolynomial {
    std::vector<PolynomialPiece> pieces;
};

namespace detail {

inline double poly_eval(const std::vector<double>& c, double s, int order) {
    // Horner on the analytically differentiated coefficients.
    double acc = 0.0;
    const int n = static_cast<int>(c.size());
    for (int k = n - 1; k >= order; --k) {
        double factor = 1.0;
        for (int m = 0; m < order; ++m) factor *= static_cast<double>(k - m);
        acc = acc * s + factor * c[static_cast<std::size_t>(k)];
    }
    return acc;
}

inline double raised_cosine_eval(double a, double T, double t, int order) {
    const double w = 2.0 * std::numbers::pi / T;
    switch (order) {
        case 0: return 0.5 * a * (1.0 - std::cos(w * t));
        case 1: return 0.5 * a * w * std::sin(w * t);
        default: return 0.5 * a * w * w * std::cos(w * t);
    }
}

}  // namespace detail

/// An appliance's power-vs-time template: compactly supported on
/// [0, duration], C1 on the real line, with piecewise-defined second
/// derivative. Immutable after construction; eval is pure.
class LoadSignature {
public:
    using Shape = std::variant<RaisedCosinePulse, SmoothTrapezoid, DoublePulse,
                               PiecewisePolynomial>;

    explicit LoadSignature(Shape shape) : shape_(std::move(shape)) {
        validate_parameters();
        duration_ = compute_duration();
        breakpoints_ = compute_breakpoints();
    }

    double duration() const { return duration_; }

    /// f(t), f'(t) or f''(t) for order 0, 1, 2. Exactly zero outside the
    /// support. At points where f'' has one-sided limits the right limit
    /// is returned, so t >= duration evaluates to zero for every order.
    double eval(double t, int order) const {
        if (order < 0 || order > 2)
            throw std::invalid_argument("eval: derivative order must be 0, 1 or 2, got " +
                                        std::to_string(order));
        if (!(t >= 0.0) || t >= duration_) return 0.0;
        return std::visit([&](const auto& s) { return eval_shape(s, t, order); }, shape_);
    }

    /// Sorted global times where f'' may jump (support endpoints plus any
    /// internal seams). Quadrature splits its panels here.
    const std::vector<double>& derivative_breakpoints() const { return breakpoints_; }

    const Shape& shape() const { return shape_; }

private:
    static double eval_shape(const RaisedCosinePulse& s, double t, int order) {
        return detail::raised_cosine_eval(s.amplitude, s.duration, t, order);
    }

    static double eval_shape(const SmoothTrapezoid& s, double t, int order) {
        const double pi = std::numbers::pi;
        if (t < s.rise) {
            const double w = pi / s.rise;
            switch (order) {
                case 0: return 0.5 * s.amplitude * (1.0 - std::cos(w * t));
                case 1: return 0.5 * s.amplitude * w * std::sin(w * t);
                default: return 0.5 * s.amplitude * w * w * std::cos(w * t);
            }
        }
        const double fall_start = s.duration - s.fall;
        if (t < fall_start) return order == 0 ? s.amplitude : 0.0;
        const double u = s.duration - t;  // distance to the right edge
        const double w = pi / s.fall;
        switch (order) {
            case 0: return 0.5 * s.amplitude * (1.0 - std::cos(w * u));
            case 1: return -0.5 * s.amplitude * w * std::sin(w * u);
            default: return 0.5 * s.amplitude * w * w * std::cos(w * u);
        }
    }

    static double eval_shape(const DoublePulse& s, double t, int order) {
        double v = 0.0;
        if (t < s.pulse_width)
            v += detail::raised_cosine_eval(s.amplitude, s.pulse_width, t, order);
        const double second_start = s.pulse_width + s.separation;
        const double u = t - second_start;
        if (u >= 0.0 && u < s.pulse_width)
            v += detail::raised_cosine_eval(s.amplitude2, s.pulse_width, u, order);
        return v;
    }

    static double eval_shape(const PiecewisePolynomial& s, double t, int order) {
        // Right-limit convention: a breakpoint belongs to the piece on
        // its right, so scan for the first piece whose end exceeds t.
        double start = 0.0;
        for (const auto& piece : s.pieces) {
            if (t < piece.end) return detail::poly_eval(piece.coefficients, t - start, order);
            start = piece.end;
        }
        return 0.0;
    }

    void validate_parameters() const {
        auto check = [](bool ok, const std::string& msg) {
            if (!ok) throw ValidationError("load signature: " + msg);
        };
        std::visit(
            [&](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, RaisedCosinePulse>) {
                    check(std::isfinite(s.amplitude) && s.amplitude >= 0.0,
                          "amplitude must be finite and non-negative");
                    check(std::isfinite(s.duration) && s.duration > 0.0,
                          "duration must be positive");
                } else if constexpr (std::is_same_v<S, SmoothTrapezoid>) {
                    check(std::isfinite(s.amplitude) && s.amplitude >= 0.0,
                          "amplitude must be finite and non-negative");
                    check(std::isfinite(s.duration) && s.duration > 0.0,
                          "duration must be positive");
                    check(s.rise > 0.0 && s.fall > 0.0, "ramp widths must be positive");
                    check(s.rise + s.fall <= s.duration,
                          "ramps may not exceed the duration");
                } else if constexpr (std::is_same_v<S, DoublePulse>) {
                    check(std::isfinite(s.amplitude) && s.amplitude >= 0.0 &&
                              std::isfinite(s.amplitude2) && s.amplitude2 >= 0.0,
                          "amplitudes must be finite and non-negative");
                    check(s.pulse_width > 0.0, "pulse width must be positive");
                    check(s.separation >= 0.0, "separation must be non-negative");
                } else {
                    check(!s.pieces.empty(), "piecewise signature needs at least one piece");
                    double prev = 0.0;
                    for (const auto& piece : s.pieces) {
                        check(std::isfinite(piece.end) && piece.end > prev,
                              "piece breakpoints must be strictly increasing from 0");
                        check(piece.coefficients.size() >= 3,
                              "each piece needs degree >= 2 (at least three coefficients)");
                        for (double c : piece.coefficients)
                            check(std::isfinite(c), "coefficients must be finite");
                        prev = piece.end;
                    }
                }
            },
            shape_);
    }

    double compute_duration() const {
        return std::visit(
            [](const auto& s) -> double {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, RaisedCosinePulse>) return s.duration;
                else if constexpr (std::is_same_v<S, SmoothTrapezoid>) return s.duration;
                else if constexpr (std::is_same_v<S, DoublePulse>)
                    return 2.0 * s.pulse_width + s.separation;
                else return s.pieces.back().end;
            },
            shape_);
    }

    std::vector<double> compute_breakpoints() const {
        std::vector<double> bp = std::visit(
            [](const auto& s) -> std::vector<double> {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, RaisedCosinePulse>)
                    return {0.0, s.duration};
                else if constexpr (std::is_same_v<S, SmoothTrapezoid>)
                    return {0.0, s.rise, s.duration - s.fall, s.duration};
                else if constexpr (std::is_same_v<S, DoublePulse>) {
                    return {0.0, s.pulse_width, s.pulse_width + s.separation,
                            2.0 * s.pulse_width + s.separation};
                } else {
                    std::vector<double> out{0.0};
                    for (const auto& piece : s.pieces) out.push_back(piece.end);
                    return out;
                }
            },
            shape_);
        std::sort(bp.begin(), bp.end());
        bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
        return bp;
    }

    Shape shape_;
    double duration_ = 0.0;
    std::vector<double> breakpoints_;
};

/// f(t), f'(t) or f''(t); zero outside [0, duration].
inline double eval(const LoadSignature& sig, double t, int order) {
    return sig.eval(t, order);
}

/// Ordered, uniquely labelled collection of load signatures. The catalog
/// size fixes the dimension of every schedule and weight vector used
/// with it.
class SignatureCatalog {
public:
    struct Entry {
        std::string label;
        LoadSignature signature;
    };

    SignatureCatalog() = default;

    explicit SignatureCatalog(std::vector<Entry> entries) : entries_(std::move(entries)) {
        if (entries_.empty())
            throw ValidationError("catalog: needs at least one signature");
        for (std::size_t i = 0; i < entries_.size(); ++i)
            for (std::size_t j = i + 1; j < entries_.size(); ++j)
                if (entries_[i].label == entries_[j].label)
                    throw ValidationError("catalog: duplicate label '" + entries_[i].label + "'");
        validate_continuity();
    }

    std::size_t size() const { return entries_.size(); }
    const Entry& entry(std::size_t i) const { return entries_.at(i); }
    const LoadSignature& signature(std::size_t i) const { return entries_.at(i).signature; }
    const std::string& label(std::size_t i) const { return entries_.at(i).label; }

    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    /// Largest support end across the catalog; the natural scenario horizon.
    double max_duration() const {
        double m = 0.0;
        for (const auto& e : entries_) m = std::max(m, e.signature.duration());
        return m;
    }

private:
    // Compares exact one-sided limits of f and f' at every breakpoint to
    // 1e-9 relative tolerance; outside the support the reference is the
    // zero function. The built-in families are C1 by construction, so
    // only piecewise polynomials can actually fail here.
    void validate_continuity() const {
        constexpr double rel = 1e-9;
        for (const auto& e : entries_) {
            const auto* pw = std::get_if<PiecewisePolynomial>(&e.signature.shape());
            if (!pw) continue;
            auto require_match = [&](double left, double right, int order, double b) {
                const double tol = rel * std::max({1.0, std::abs(left), std::abs(right)});
                if (std::abs(left - right) > tol)
                    throw ValidationError(
                        "catalog: signature '" + e.label + "': f" +
                        (order == 0 ? std::string() : std::string("'")) +
                        " jumps at breakpoint t=" + std::to_string(b) + " (left " +
                        std::to_string(left) + ", right " + std::to_string(right) + ")");
            };
            const std::size_t m = pw->pieces.size();
            std::vector<double> starts(m, 0.0);
            for (std::size_t i = 1; i < m; ++i) starts[i] = pw->pieces[i - 1].end;

            for (int order = 0; order <= 1; ++order) {
                // Left support edge: zero outside vs first piece at s=0.
                require_match(0.0, detail::poly_eval(pw->pieces[0].coefficients, 0.0, order),
                              order, 0.0);
                // Interior seams: previous piece at its right end vs next at s=0.
                for (std::size_t i = 1; i < m; ++i) {
                    const auto& prev = pw->pieces[i - 1];
                    const double left =
                        detail::poly_eval(prev.coefficients, prev.end - starts[i - 1], order);
                    const double right = detail::poly_eval(pw->pieces[i].coefficients, 0.0, order);
                    require_match(left, right, order, prev.end);
                }
                // Right support edge: last piece at its end vs zero outside.
                const auto& last = pw->pieces.back();
                require_match(detail::poly_eval(last.coefficients, last.end - starts[m - 1], order),
                              0.0, order, last.end);
            }
        }
    }

    std::vector<Entry> entries_;
};

}  // namespace nilmbound
