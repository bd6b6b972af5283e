#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include "nilmbound/errors.hpp"

namespace nilmbound {

/// Panel quadrature configuration for the continuous correlation integrals.
struct QuadratureSpec {
    int panel_order = 16;      // Gauss-Legendre nodes per panel
    double tolerance = 1e-10;  // per-integral error target (scaled by magnitude)
    int max_refinements = 24;  // bisection depth before giving up

    void validate() const {
        if (panel_order < 2 || panel_order > 64)
            throw ValidationError("quadrature: panel order must be in [2, 64]");
        if (!(tolerance > 0.0))
            throw ValidationError("quadrature: tolerance must be positive");
        if (max_refinements < 0)
            throw ValidationError("quadrature: max refinements must be non-negative");
    }
};

namespace detail {

struct GaussRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

/// Gauss-Legendre nodes/weights by Newton iteration on the Legendre
/// recurrence. Computed once per order and cached.
inline const GaussRule& gauss_rule(int order) {
    static std::mutex mutex;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(order);
    if (it != cache.end()) return it->second;

    GaussRule rule;
    rule.nodes.resize(static_cast<std::size_t>(order));
    rule.weights.resize(static_cast<std::size_t>(order));
    const int half = (order + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Chebyshev-based initial guess.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= order; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = order * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[static_cast<std::size_t>(i)] = -x;
        rule.nodes[static_cast<std::size_t>(order - 1 - i)] = x;
        rule.weights[static_cast<std::size_t>(i)] = w;
        rule.weights[static_cast<std::size_t>(order - 1 - i)] = w;
    }
    return cache.emplace(order, std::move(rule)).first->second;
}

template <typename F>
double gauss_panel(const F& f, double a, double b, const GaussRule& rule) {
    const double mid = 0.5 * (a + b);
    const double halfwidth = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        sum += rule.weights[i] * f(mid + halfwidth * rule.nodes[i]);
    return halfwidth * sum;
}

template <typename F>
double adaptive_panel(const F& f, double a, double b, const GaussRule& rule,
                      double tolerance, int depth, double& worst_error) {
    const double whole = gauss_panel(f, a, b, rule);
    const double mid = 0.5 * (a + b);
    const double left = gauss_panel(f, a, mid, rule);
    const double right = gauss_panel(f, mid, b, rule);
    const double error = std::abs(whole - (left + right));
    if (error <= tolerance || depth <= 0) {
        worst_error = std::max(worst_error, error);
        return left + right;
    }
    return adaptive_panel(f, a, mid, rule, 0.5 * tolerance, depth - 1, worst_error) +
           adaptive_panel(f, mid, b, rule, 0.5 * tolerance, depth - 1, worst_error);
}

}  // namespace detail

/// Integrates f over [a, b] with panels split at the given interior
/// breakpoints, refining adaptively until the error estimate falls below
/// spec.tolerance * max(1, |integral|). Throws NumericalError (carrying the
/// achieved tolerance) if the refinement budget runs out.
template <typename F>
double integrate(const F& f, double a, double b, std::vector<double> breakpoints,
                 const QuadratureSpec& spec) {
    spec.validate();
    if (!(b > a)) return 0.0;

    breakpoints.push_back(a);
    breakpoints.push_back(b);
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());

    const auto& rule = detail::gauss_rule(spec.panel_order);

    // First pass for the magnitude scale of the result.
    double rough = 0.0;
    std::vector<std::pair<double, double>> panels;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        const double lo = std::max(a, breakpoints[i]);
        const double hi = std::min(b, breakpoints[i + 1]);
        if (!(hi > lo)) continue;
        panels.emplace_back(lo, hi);
        rough += detail::gauss_panel(f, lo, hi, rule);
    }
    const double scale = std::max(1.0, std::abs(rough));
    const double panel_tol =
        spec.tolerance * scale / static_cast<double>(std::max<std::size_t>(1, panels.size()));

    double total = 0.0;
    double worst_error = 0.0;
    for (const auto& [lo, hi] : panels)
        total += detail::adaptive_panel(f, lo, hi, rule, panel_tol, spec.max_refinements,
                                        worst_error);
    if (worst_error > panel_tol)
        throw NumericalError(
            "quadrature: failed to reach tolerance " + std::to_string(spec.tolerance) +
                " within the refinement budget",
            worst_error / scale);
    return total;
}

}  // namespace nilmbound
