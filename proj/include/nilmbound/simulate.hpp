#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nilmbound/bounds.hpp"
#include "nilmbound/correlation.hpp"
#include "nilmbound/errors.hpp"
#include "nilmbound/grid.hpp"
#include "nilmbound/noise.hpp"
#include "nilmbound/parallel.hpp"
#include "nilmbound/scheduler.hpp"
#include "nilmbound/signature.hpp"

namespace nilmbound {

/// One noisy observation of the aggregate consumption; the true schedule
/// is kept only so experiments can score the estimate.
struct MeasurementSet {
    SamplingGrid grid;
    Eigen::VectorXd y;
    ScheduleVector true_tau;
    std::uint64_t seed = 0;
};

/// Coarse-to-fine configuration of the maximum-likelihood search.
struct MlSearchConfig {
    double lattice_step = 0.05;       // coarse exhaustive lattice per axis
    double refine_tolerance = 1e-4;   // coordinate-descent stopping width
    int max_refine_sweeps = 40;

    void validate() const {
        if (!(lattice_step > 0.0) || !(refine_tolerance > 0.0) || max_refine_sweeps < 1)
            throw ValidationError("ml search: lattice step, tolerance and sweeps must be positive");
    }
};

/// Monte Carlo outcome of repeated estimation runs.
struct EstimatorReport {
    Eigen::MatrixXd tau_hats;              // one row per trial
    std::vector<double> squared_errors;    // weighted, per trial
    double weighted_mse = 0.0;
    double standard_error = 0.0;           // of the weighted MSE estimate
    Eigen::VectorXd empirical_bias;        // mean(tau_hat) - tau
    std::size_t trials = 0;
};

/// Noiseless aggregate sum_i f_i(t_l - tau_i) over the grid.
inline Eigen::VectorXd aggregate(const SignatureCatalog& catalog, const ScheduleVector& tau,
                                 const SamplingGrid& grid) {
    detail::check_dimensions(catalog, tau);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        const auto& sig = catalog.signature(i);
        for (std::size_t l = 0; l < grid.size(); ++l)
            out[static_cast<Eigen::Index>(l)] +=
                sig.eval(grid[l] - tau[static_cast<Eigen::Index>(i)], 0);
    }
    return out;
}

/// Draws y_l = sum_i f_i(t_l - tau_i) + w_l. Deterministic per seed; the
/// zero-noise flag produces the exact aggregate for debugging.
inline MeasurementSet generate(const SignatureCatalog& catalog, const ScheduleVector& tau,
                               const SamplingGrid& grid, const NoiseModel& noise,
                               std::uint64_t seed, bool zero_noise = false) {
    Eigen::VectorXd y = aggregate(catalog, tau, grid);
    if (!zero_noise) {
        const std::vector<double> w = sample(noise, seed, grid.size());
        for (std::size_t l = 0; l < grid.size(); ++l)
            y[static_cast<Eigen::Index>(l)] += w[l];
    }
    return {grid, std::move(y), tau, seed};
}

namespace detail {

/// Per-axis table of f_i(t_l - c) over the lattice values of axis i.
struct LatticeAxis {
    std::vector<double> values;          // candidate start times
    Eigen::MatrixXd contributions;       // k x m, column per candidate
};

/// Negative log-likelihood up to a positive affine constant: sum of
/// squared residuals for Gaussian noise, sum of absolute residuals for
/// Laplace. Minimizing this is exactly maximizing the likelihood.
inline double residual_cost(NoiseKind kind, double r) {
    return kind == NoiseKind::Gaussian ? r * r : std::abs(r);
}

}  // namespace detail

/// Exhaustive maximum-likelihood search over the per-axis lattice spanning
/// the feasible box. Ties resolve to the lexicographically first lattice
/// point, so the result is deterministic.
inline ScheduleVector ml_lattice_search(const MeasurementSet& measurements,
                                        const SignatureCatalog& catalog,
                                        const NoiseModel& noise, const FeasibleSet& search,
                                        double lattice_step) {
    const auto n = catalog.size();
    if (search.size() != n)
        throw std::invalid_argument("ml search: feasible set does not match catalog");
    const auto k = static_cast<Eigen::Index>(measurements.grid.size());

    std::vector<detail::LatticeAxis> axes(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [lo, hi] = search.effective(i, catalog);
        auto& axis = axes[i];
        const auto count =
            static_cast<std::size_t>(std::floor((hi - lo) / lattice_step + 1e-9)) + 1;
        axis.values.reserve(count);
        for (std::size_t m = 0; m < count; ++m)
            axis.values.push_back(lo + static_cast<double>(m) * lattice_step);
        axis.contributions.resize(k, static_cast<Eigen::Index>(count));
        const auto& sig = catalog.signature(i);
        for (std::size_t m = 0; m < count; ++m)
            for (Eigen::Index l = 0; l < k; ++l)
                axis.contributions(l, static_cast<Eigen::Index>(m)) =
                    sig.eval(measurements.grid[static_cast<std::size_t>(l)] - axis.values[m], 0);
    }

    // Depth-first enumeration with running partial aggregates; the last
    // axis is scanned in a tight loop against the accumulated residual.
    std::vector<Eigen::VectorXd> partial(n, Eigen::VectorXd::Zero(k));
    std::vector<std::size_t> index(n, 0);
    std::vector<std::size_t> best_index(n, 0);
    double best_cost = std::numeric_limits<double>::infinity();
    const NoiseKind kind = noise.kind();

    auto scan_last_axis = [&] {
        const auto& axis = axes[n - 1];
        const Eigen::VectorXd residual = measurements.y - partial[n - 1];
        for (std::size_t m = 0; m < axis.values.size(); ++m) {
            const double* contrib = axis.contributions.col(static_cast<Eigen::Index>(m)).data();
            double cost = 0.0;
            for (Eigen::Index l = 0; l < k; ++l)
                cost += detail::residual_cost(kind, residual[l] - contrib[l]);
            if (cost < best_cost) {
                best_cost = cost;
                best_index = index;
                best_index[n - 1] = m;
            }
        }
    };

    if (n == 1) {
        scan_last_axis();
    } else {
        std::size_t depth = 0;
        for (;;) {
            if (index[depth] >= axes[depth].values.size()) {
                if (depth == 0) break;
                index[depth] = 0;
                --depth;
                ++index[depth];
                continue;
            }
            partial[depth + 1] =
                partial[depth] +
                axes[depth].contributions.col(static_cast<Eigen::Index>(index[depth]));
            if (depth + 2 < n) {
                ++depth;
                continue;
            }
            scan_last_axis();
            ++index[depth];
        }
    }

    ScheduleVector best(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        best[static_cast<Eigen::Index>(i)] = axes[i].values[best_index[i]];
    return best;
}

/// Maximum-likelihood schedule estimate: coarse lattice search followed by
/// golden-section coordinate descent until no axis moves more than the
/// refinement tolerance. Deterministic.
inline ScheduleVector ml_estimate(const MeasurementSet& measurements,
                                  const SignatureCatalog& catalog, const NoiseModel& noise,
                                  const FeasibleSet& search, const MlSearchConfig& config = {}) {
    config.validate();
    ScheduleVector tau = ml_lattice_search(measurements, catalog, noise, search,
                                           config.lattice_step);
    const auto n = catalog.size();
    const auto k = static_cast<Eigen::Index>(measurements.grid.size());

    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int sweep = 0; sweep < config.max_refine_sweeps; ++sweep) {
        double max_move = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            // Aggregate of the other appliances is fixed along this axis.
            Eigen::VectorXd others = Eigen::VectorXd::Zero(k);
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const auto& sig = catalog.signature(j);
                for (Eigen::Index l = 0; l < k; ++l)
                    others[l] += sig.eval(measurements.grid[static_cast<std::size_t>(l)] -
                                              tau[static_cast<Eigen::Index>(j)],
                                          0);
            }
            const auto& sig = catalog.signature(i);
            auto axis_cost = [&](double c) {
                double cost = 0.0;
                for (Eigen::Index l = 0; l < k; ++l) {
                    const double fitted =
                        others[l] +
                        sig.eval(measurements.grid[static_cast<std::size_t>(l)] - c, 0);
                    cost += detail::residual_cost(noise.kind(), measurements.y[l] - fitted);
                }
                return cost;
            };

            const auto [lo_box, hi_box] = search.effective(i, catalog);
            double lo = std::max(lo_box, tau[static_cast<Eigen::Index>(i)] - config.lattice_step);
            double hi = std::min(hi_box, tau[static_cast<Eigen::Index>(i)] + config.lattice_step);
            double x1 = hi - golden * (hi - lo);
            double x2 = lo + golden * (hi - lo);
            double f1 = axis_cost(x1);
            double f2 = axis_cost(x2);
            while (hi - lo > config.refine_tolerance) {
                if (f1 > f2) {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + golden * (hi - lo);
                    f2 = axis_cost(x2);
                } else {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - golden * (hi - lo);
                    f1 = axis_cost(x1);
                }
            }
            const double refined = 0.5 * (lo + hi);
            max_move = std::max(max_move,
                                std::abs(refined - tau[static_cast<Eigen::Index>(i)]));
            tau[static_cast<Eigen::Index>(i)] = refined;
        }
        if (max_move <= config.refine_tolerance) break;
    }
    return tau;
}

/// Runs `trials` generate + ml_estimate rounds with per-trial derived
/// seeds and reports the empirical weighted MSE, its standard error and
/// the empirical bias, next to the unbiased bound at the true schedule.
/// Identical master seeds give identical reports regardless of threading.
inline std::pair<EstimatorReport, BoundResult> monte_carlo(
    const SignatureCatalog& catalog, const ScheduleVector& tau, const SamplingGrid& grid,
    const NoiseModel& noise, const WeightMatrix& weights, const FeasibleSet& search,
    std::size_t trials, std::uint64_t seed, const MlSearchConfig& config = {},
    std::size_t threads = 0) {
    if (trials < 2) throw std::invalid_argument("monte carlo: need at least 2 trials");
    detail::check_dimensions(catalog, tau);

    EstimatorReport report;
    report.trials = trials;
    report.tau_hats.resize(static_cast<Eigen::Index>(trials),
                           static_cast<Eigen::Index>(catalog.size()));
    report.squared_errors.assign(trials, 0.0);

    parallel_for(trials, threads, [&](std::size_t t) {
        const std::uint64_t trial_seed = detail::derive_seed(seed, t);
        const MeasurementSet m = generate(catalog, tau, grid, noise, trial_seed);
        const ScheduleVector hat = ml_estimate(m, catalog, noise, search, config);
        report.tau_hats.row(static_cast<Eigen::Index>(t)) = hat.transpose();
        const Eigen::VectorXd err = hat - tau;
        report.squared_errors[t] =
            (weights.diagonal().array() * err.array().square()).sum();
    });

    const double mean = pairwise_sum(report.squared_errors) / static_cast<double>(trials);
    std::vector<double> centered_sq(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        const double d = report.squared_errors[t] - mean;
        centered_sq[t] = d * d;
    }
    const double variance =
        pairwise_sum(centered_sq) / static_cast<double>(trials - 1);
    report.weighted_mse = mean;
    report.standard_error = std::sqrt(variance / static_cast<double>(trials));
    report.empirical_bias =
        report.tau_hats.colwise().mean().transpose() - tau;

    const BoundResult bound =
        bound_unbiased(r_discrete(catalog, tau, grid), weights, fisher_information(noise));
    return {std::move(report), bound};
}

}  // namespace nilmbound
