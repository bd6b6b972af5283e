#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nilmbound/errors.hpp"
#include "nilmbound/grid.hpp"
#include "nilmbound/quadrature.hpp"
#include "nilmbound/signature.hpp"

namespace nilmbound {

enum class CorrelationFlavor { Discrete, Continuous };

/// Cross-correlation matrix of the shifted signature derivatives, either
/// sampled on a grid (discrete) or integrated (continuous), together with
/// its spectral diagnostics. Symmetric positive semi-definite by
/// construction (it is a Gram matrix).
class CorrelationMatrix {
public:
    CorrelationMatrix(Eigen::MatrixXd matrix, CorrelationFlavor flavor)
        : matrix_(std::move(matrix)), flavor_(flavor) {
        if (matrix_.rows() != matrix_.cols())
            throw std::invalid_argument("correlation matrix must be square");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix_,
                                                              Eigen::EigenvaluesOnly);
        smallest_eigenvalue_ = solver.eigenvalues().minCoeff();
        largest_eigenvalue_ = solver.eigenvalues().maxCoeff();
    }

    const Eigen::MatrixXd& matrix() const { return matrix_; }
    CorrelationFlavor flavor() const { return flavor_; }
    Eigen::Index dimension() const { return matrix_.rows(); }

    double smallest_eigenvalue() const { return smallest_eigenvalue_; }
    double largest_eigenvalue() const { return largest_eigenvalue_; }

    /// Spectral condition estimate lambda_max / lambda_min; +inf when the
    /// matrix has no strictly positive smallest eigenvalue.
    double condition_estimate() const {
        if (smallest_eigenvalue_ <= 0.0)
            return std::numeric_limits<double>::infinity();
        return largest_eigenvalue_ / smallest_eigenvalue_;
    }

private:
    Eigen::MatrixXd matrix_;
    CorrelationFlavor flavor_;
    double smallest_eigenvalue_ = 0.0;
    double largest_eigenvalue_ = 0.0;
};

namespace detail {

inline void check_dimensions(const SignatureCatalog& catalog, const ScheduleVector& tau) {
    if (static_cast<std::size_t>(tau.size()) != catalog.size())
        throw std::invalid_argument("schedule has " + std::to_string(tau.size()) +
                                    " entries but the catalog has " +
                                    std::to_string(catalog.size()) + " signatures");
    for (Eigen::Index i = 0; i < tau.size(); ++i)
        if (!std::isfinite(tau[i]))
            throw std::invalid_argument("schedule entries must be finite");
}

/// k x n matrix M with M(l, i) = f_i'(t_l - tau_i); R_d = M^T M.
inline Eigen::MatrixXd derivative_samples(const SignatureCatalog& catalog,
                                          const ScheduleVector& tau,
                                          const SamplingGrid& grid) {
    const auto k = static_cast<Eigen::Index>(grid.size());
    const auto n = static_cast<Eigen::Index>(catalog.size());
    Eigen::MatrixXd m(k, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& sig = catalog.signature(static_cast<std::size_t>(i));
        for (Eigen::Index l = 0; l < k; ++l)
            m(l, i) = sig.eval(grid[static_cast<std::size_t>(l)] - tau[i], 1);
    }
    return m;
}

/// Shifted breakpoints of both integrands, for panel splitting.
inline std::vector<double> joint_breakpoints(const LoadSignature& a, double tau_a,
                                             const LoadSignature& b, double tau_b) {
    std::vector<double> bp;
    for (double t : a.derivative_breakpoints()) bp.push_back(t + tau_a);
    for (double t : b.derivative_breakpoints()) bp.push_back(t + tau_b);
    return bp;
}

}  // namespace detail

/// Discrete cross-correlation matrix: entry (i, j) sums
/// f_i'(t_l - tau_i) * f_j'(t_l - tau_j) over the grid. Assembled entry by
/// entry with a fixed summation order so the result is deterministic.
inline CorrelationMatrix r_discrete(const SignatureCatalog& catalog,
                                    const ScheduleVector& tau, const SamplingGrid& grid) {
    detail::check_dimensions(catalog, tau);
    const Eigen::MatrixXd m = detail::derivative_samples(catalog, tau, grid);
    const auto n = static_cast<Eigen::Index>(catalog.size());
    Eigen::MatrixXd r(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) {
            double sum = 0.0;
            for (Eigen::Index l = 0; l < m.rows(); ++l) sum += m(l, i) * m(l, j);
            r(i, j) = sum;
            r(j, i) = sum;
        }
    return {std::move(r), CorrelationFlavor::Discrete};
}

/// Continuous cross-correlation matrix: entry (i, j) integrates
/// f_i'(t - tau_i) * f_j'(t - tau_j) over the overlap of the shifted
/// supports; exactly zero when the supports are disjoint.
inline CorrelationMatrix r_continuous(const SignatureCatalog& catalog,
                                      const ScheduleVector& tau,
                                      const QuadratureSpec& quadrature = {}) {
    detail::check_dimensions(catalog, tau);
    const auto n = static_cast<Eigen::Index>(catalog.size());
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& sig_i = catalog.signature(static_cast<std::size_t>(i));
        for (Eigen::Index j = i; j < n; ++j) {
            const auto& sig_j = catalog.signature(static_cast<std::size_t>(j));
            const double lo = std::max(tau[i], tau[j]);
            const double hi =
                std::min(tau[i] + sig_i.duration(), tau[j] + sig_j.duration());
            double value = 0.0;
            if (hi > lo) {
                auto integrand = [&](double t) {
                    return sig_i.eval(t - tau[i], 1) * sig_j.eval(t - tau[j], 1);
                };
                value = integrate(integrand, lo, hi,
                                  detail::joint_breakpoints(sig_i, tau[i], sig_j, tau[j]),
                                  quadrature);
            }
            r(i, j) = value;
            r(j, i) = value;
        }
    }
    return {std::move(r), CorrelationFlavor::Continuous};
}

/// Partial derivative of R_d with respect to tau_i. Nonzero only in row
/// and column i:
///   (i,i): -2 * sum_l f_i''(t_l - tau_i) * f_i'(t_l - tau_i)
///   (i,j): -   sum_l f_i''(t_l - tau_i) * f_j'(t_l - tau_j),  j != i
/// where l runs over the grid points (the matrix index j and the summation
/// index are distinct).
inline Eigen::MatrixXd r_discrete_partial(const SignatureCatalog& catalog,
                                          const ScheduleVector& tau,
                                          const SamplingGrid& grid, std::size_t i) {
    detail::check_dimensions(catalog, tau);
    if (i >= catalog.size())
        throw std::invalid_argument("r_discrete_partial: appliance index out of range");
    const auto n = static_cast<Eigen::Index>(catalog.size());
    const auto ii = static_cast<Eigen::Index>(i);
    const auto& sig_i = catalog.signature(i);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& sig_j = catalog.signature(static_cast<std::size_t>(j));
        const double factor = (j == ii) ? 2.0 : 1.0;
        double sum = 0.0;
        for (std::size_t l = 0; l < grid.size(); ++l) {
            const double ti = grid[l] - tau[ii];
            sum += sig_i.eval(ti, 2) * sig_j.eval(grid[l] - tau[j], 1);
        }
        d(ii, j) = -factor * sum;
        d(j, ii) = d(ii, j);
    }
    return d;
}

/// Continuous analog of r_discrete_partial. The diagonal entry integrates
/// -2 f_i'' f_i' = -(f_i'^2)' over the full support, which vanishes for C1
/// signatures, so it is returned as exact zero.
inline Eigen::MatrixXd r_continuous_partial(const SignatureCatalog& catalog,
                                            const ScheduleVector& tau,
                                            const QuadratureSpec& quadrature,
                                            std::size_t i) {
    detail::check_dimensions(catalog, tau);
    if (i >= catalog.size())
        throw std::invalid_argument("r_continuous_partial: appliance index out of range");
    const auto n = static_cast<Eigen::Index>(catalog.size());
    const auto ii = static_cast<Eigen::Index>(i);
    const auto& sig_i = catalog.signature(i);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (j == ii) continue;
        const auto& sig_j = catalog.signature(static_cast<std::size_t>(j));
        const double lo = std::max(tau[ii], tau[j]);
        const double hi = std::min(tau[ii] + sig_i.duration(), tau[j] + sig_j.duration());
        if (!(hi > lo)) continue;
        auto integrand = [&](double t) {
            return sig_i.eval(t - tau[ii], 2) * sig_j.eval(t - tau[j], 1);
        };
        const double value = integrate(
            integrand, lo, hi, detail::joint_breakpoints(sig_i, tau[ii], sig_j, tau[j]),
            quadrature);
        d(ii, j) = -value;
        d(j, ii) = d(ii, j);
    }
    return d;
}

}  // namespace nilmbound
