#pragma once

// Shared fixtures and independent oracles for the test suites. The oracles
// deliberately re-derive quantities from first principles (naive summation,
// Simpson quadrature, finite differences, exhaustive search) so they share
// no code path with the library implementations they check.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "nilmbound/bounds.hpp"
#include "nilmbound/correlation.hpp"
#include "nilmbound/grid.hpp"
#include "nilmbound/noise.hpp"
#include "nilmbound/signature.hpp"

namespace testing_support {

using namespace nilmbound;

/// The three-load demonstration catalog (mirrors scenarios/demo_catalog.json).
inline SignatureCatalog demo_catalog() {
    std::vector<SignatureCatalog::Entry> e;
    e.push_back({"dishwasher", LoadSignature(RaisedCosinePulse{1.0, 5.0})});
    e.push_back({"kettle", LoadSignature(SmoothTrapezoid{1.5, 3.5, 1.2, 1.6})});
    e.push_back({"pump", LoadSignature(DoublePulse{0.8, 0.7, 1.8, 0.8})});
    return SignatureCatalog(std::move(e));
}

/// Two interchangeable washers plus a distinct heater (mirrors
/// scenarios/interchangeable_catalog.json).
inline SignatureCatalog twins_catalog() {
    std::vector<SignatureCatalog::Entry> e;
    e.push_back({"washer_a", LoadSignature(RaisedCosinePulse{1.0, 3.0})});
    e.push_back({"washer_b", LoadSignature(RaisedCosinePulse{1.0, 3.0})});
    e.push_back({"heater", LoadSignature(SmoothTrapezoid{1.2, 3.5, 1.0, 1.4})});
    return SignatureCatalog(std::move(e));
}

inline SamplingGrid demo_grid() { return SamplingGrid::from_range(0.0, 0.5, 10.0); }

/// Brute-force discrete correlation: the defining double loop evaluated in
/// long double with naive summation.
inline Eigen::MatrixXd brute_force_r_discrete(const SignatureCatalog& catalog,
                                              const ScheduleVector& tau,
                                              const SamplingGrid& grid) {
    const auto n = static_cast<Eigen::Index>(catalog.size());
    Eigen::MatrixXd r(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            long double sum = 0.0L;
            for (std::size_t l = 0; l < grid.size(); ++l)
                sum += static_cast<long double>(
                           catalog.signature(static_cast<std::size_t>(i))
                               .eval(grid[l] - tau[i], 1)) *
                       static_cast<long double>(
                           catalog.signature(static_cast<std::size_t>(j))
                               .eval(grid[l] - tau[j], 1));
            r(i, j) = static_cast<double>(sum);
        }
    return r;
}

/// High-resolution midpoint Riemann sum in long double; reference for the
/// quadrature-based continuous correlation entries.
inline double riemann_reference(const std::function<double(double)>& f, double a, double b,
                                std::size_t panels = 2'000'000) {
    if (!(b > a)) return 0.0;
    const long double h = static_cast<long double>(b - a) / panels;
    long double sum = 0.0L;
    for (std::size_t m = 0; m < panels; ++m)
        sum += f(static_cast<double>(a + (m + 0.5L) * h));
    return static_cast<double>(sum * h);
}

/// Composite Simpson rule for the Fisher-information integral oracle.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      std::size_t intervals) {
    if (intervals % 2 != 0) ++intervals;
    const double h = (b - a) / static_cast<double>(intervals);
    long double sum = f(a) + f(b);
    for (std::size_t m = 1; m < intervals; ++m)
        sum += f(a + static_cast<double>(m) * h) * (m % 2 == 1 ? 4.0 : 2.0);
    return static_cast<double>(sum * h / 3.0L);
}

/// Numerical Fisher information: integral of (p'(w)/p(w))^2 p(w).
inline double fisher_information_oracle(const NoiseModel& model) {
    const double s = model.scale();
    // Split at zero so the Laplace kink sits on a panel boundary.
    auto integrand = [&](double w) {
        const double score = model.score(w);
        return score * score * model.pdf(w);
    };
    const double reach = model.kind() == NoiseKind::Gaussian ? 10.0 * s : 50.0 * s;
    return simpson(integrand, -reach, 0.0, 200'000) +
           simpson(integrand, 0.0, reach, 200'000);
}

/// Central finite difference of a scalar function.
inline double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Componentwise relative mismatch. Entries below floor_fraction of the
/// matrix scale are compared against that floor instead: a central
/// difference at h = 1e-6 carries cancellation noise of roughly
/// eps * |R| / (2h) ~ 3e-10, which would swamp a pure relative comparison
/// of entries that are analytically zero (e.g. shift-invariant diagonals).
inline double matrix_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                    double floor_fraction = 1e-3) {
    const double scale = std::max({1e-30, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            const double denom =
                std::max({std::abs(a(i, j)), std::abs(b(i, j)), floor_fraction * scale});
            worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / denom);
        }
    return worst;
}

/// Error measure for a partial-derivative matrix against its finite
/// difference. When the analytic partial is essentially zero relative to
/// the correlation matrix itself (disjoint supports, shift-invariant
/// diagonals), the comparison degenerates to checking that the difference
/// quotient is also noise; otherwise it is the floored relative error.
inline double partial_fd_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd,
                               double r_scale) {
    const double scale = analytic.cwiseAbs().maxCoeff();
    if (scale <= 1e-4 * r_scale)
        return fd.cwiseAbs().maxCoeff() <= 1e-4 * r_scale ? 0.0 : 1.0;
    return matrix_relative_error(analytic, fd, 1e-3);
}

/// Deterministic uniform draw helper for property tests.
class TestRng {
public:
    explicit TestRng(std::uint64_t seed) : stream_(seed) {}
    double uniform(double lo, double hi) { return lo + (hi - lo) * stream_.next_unit(); }
    std::uint64_t integer() { return stream_.next_u64(); }

private:
    nilmbound::detail::UniformStream stream_;
};

/// True when every sample offset t_l - tau_i stays clear of the signature
/// breakpoints, so central differencing of the grid sums is valid.
inline bool clear_of_breakpoints(const SignatureCatalog& catalog, const ScheduleVector& tau,
                                 const SamplingGrid& grid, double margin) {
    for (std::size_t i = 0; i < catalog.size(); ++i)
        for (std::size_t l = 0; l < grid.size(); ++l) {
            const double offset = grid[l] - tau[static_cast<Eigen::Index>(i)];
            for (double b : catalog.signature(i).derivative_breakpoints())
                if (std::abs(offset - b) < margin) return false;
        }
    return true;
}

}  // namespace testing_support
