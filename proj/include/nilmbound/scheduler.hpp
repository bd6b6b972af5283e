#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nilmbound/bounds.hpp"
#include "nilmbound/correlation.hpp"
#include "nilmbound/errors.hpp"
#include "nilmbound/grid.hpp"
#include "nilmbound/noise.hpp"
#include "nilmbound/parallel.hpp"
#include "nilmbound/quadrature.hpp"
#include "nilmbound/signature.hpp"

namespace nilmbound {

/// Per-appliance start-time boxes, optionally capped by a global horizon:
/// appliance i must finish by `horizon`, so its effective upper limit is
/// min(hi_i, horizon - duration_i).
class FeasibleSet {
public:
    FeasibleSet(std::vector<std::pair<double, double>> boxes,
                std::optional<double> horizon = std::nullopt)
        : boxes_(std::move(boxes)), horizon_(horizon) {
        for (const auto& [lo, hi] : boxes_) {
            if (!std::isfinite(lo) || !std::isfinite(hi))
                throw ValidationError("feasible set: box limits must be finite");
            if (lo > hi) throw ValidationError("feasible set: box lower limit above upper");
        }
        if (horizon_ && !std::isfinite(*horizon_))
            throw ValidationError("feasible set: horizon must be finite");
    }

    std::size_t size() const { return boxes_.size(); }
    double lower(std::size_t i) const { return boxes_.at(i).first; }
    double upper(std::size_t i) const { return boxes_.at(i).second; }
    std::optional<double> horizon() const { return horizon_; }

    /// Effective interval [lo_i, min(hi_i, horizon - T_i)] given the
    /// appliance durations. Throws InfeasibleSetError when empty.
    std::pair<double, double> effective(std::size_t i, const SignatureCatalog& catalog) const {
        double hi = upper(i);
        if (horizon_) hi = std::min(hi, *horizon_ - catalog.signature(i).duration());
        if (lower(i) > hi)
            throw InfeasibleSetError("feasible set: appliance '" + catalog.label(i) +
                                     "' has empty effective interval [" +
                                     std::to_string(lower(i)) + ", " + std::to_string(hi) +
                                     "]");
        return {lower(i), hi};
    }

private:
    std::vector<std::pair<double, double>> boxes_;
    std::optional<double> horizon_;
};

/// Everything a schedule search needs: signatures, weights, measurement
/// grid, noise (for the bound scale), the feasible set, and which
/// correlation flavor drives the objective.
struct ScheduleProblem {
    SignatureCatalog catalog;
    WeightMatrix weights;
    SamplingGrid grid;
    NoiseModel noise;
    FeasibleSet feasible;
    CorrelationFlavor flavor = CorrelationFlavor::Discrete;
    QuadratureSpec quadrature{};

    void validate() const {
        if (weights.size() != static_cast<Eigen::Index>(catalog.size()) ||
            feasible.size() != catalog.size())
            throw std::invalid_argument(
                "schedule problem: weights and feasible set must match the catalog size");
    }
};

struct AscentConfig {
    int max_iterations = 300;
    double initial_step = 25.0;          // backtracking starts here every iteration
    double backtracking_factor = 0.5;    // in (0, 1)
    double sufficient_increase = 0.2;    // Armijo constant on the projected step
    double gradient_tolerance = 1e-8;    // on the projected-gradient map norm
    int multistart_count = 20;
    std::uint64_t seed = 12345;
    double perturbation_radius = 1e-6;   // escape hatch for unusable gradients
    std::size_t threads = 0;             // 0 = hardware concurrency

    void validate() const {
        if (max_iterations <= 0 || !(initial_step > 0.0) ||
            !(backtracking_factor > 0.0 && backtracking_factor < 1.0) ||
            !(sufficient_increase > 0.0) || !(gradient_tolerance > 0.0) ||
            multistart_count <= 0 || !(perturbation_radius > 0.0))
            throw ValidationError("ascent config: all parameters must be positive, beta < 1");
    }
};

enum class Termination {
    Converged,        // projected-gradient map below tolerance
    IterationCap,
    SingularOptimum,  // iterate reached a singular matrix: bound is +inf
    NoAscent,         // backtracking could not find any increasing step
};

inline std::string to_string(Termination t) {
    switch (t) {
        case Termination::Converged: return "converged";
        case Termination::IterationCap: return "iteration-cap";
        case Termination::SingularOptimum: return "singular-optimum";
        default: return "no-ascent";
    }
}

struct StartSummary {
    int start_index = 0;
    ScheduleVector initial;
    ScheduleVector final;
    double objective = 0.0;
    Termination termination = Termination::IterationCap;
    std::vector<double> trace;            // objective after each accepted iterate
    std::vector<ScheduleVector> iterates; // the accepted iterates themselves
    std::string error;                    // non-empty when the start failed to evaluate
};

struct ScheduleSolution {
    ScheduleVector tau_star;
    double objective = 0.0;
    int start_index = 0;
    Termination termination = Termination::IterationCap;
    std::vector<double> trace;
    std::vector<StartSummary> starts;
};

/// Componentwise clamp onto the effective feasible box: the Euclidean
/// projection for box sets. Idempotent.
inline ScheduleVector project(const ScheduleVector& tau, const FeasibleSet& set,
                              const SignatureCatalog& catalog) {
    if (static_cast<std::size_t>(tau.size()) != set.size())
        throw std::invalid_argument("project: schedule dimension does not match feasible set");
    ScheduleVector out(tau.size());
    for (Eigen::Index i = 0; i < tau.size(); ++i) {
        const auto [lo, hi] = set.effective(static_cast<std::size_t>(i), catalog);
        out[i] = std::clamp(tau[i], lo, hi);
    }
    return out;
}

namespace detail {

/// Objective of the privacy schedule search: the unbiased estimation-error
/// bound trace(Pi R(tau)^-1) / iw, +inf at singular schedules.
inline double schedule_objective(const ScheduleProblem& problem, const ScheduleVector& tau) {
    const CorrelationMatrix r =
        problem.flavor == CorrelationFlavor::Discrete
            ? r_discrete(problem.catalog, tau, problem.grid)
            : r_continuous(problem.catalog, tau, problem.quadrature);
    return bound_unbiased(r, problem.weights, fisher_information(problem.noise)).value;
}

inline StartSummary run_single_start(const ScheduleProblem& problem,
                                     const AscentConfig& config, int start_index,
                                     const ScheduleVector& start_point) {
    const double iw = fisher_information(problem.noise);
    StartSummary summary;
    summary.start_index = start_index;
    summary.initial = start_point;

    ScheduleVector tau = project(start_point, problem.feasible, problem.catalog);
    double objective = schedule_objective(problem, tau);
    summary.trace.push_back(objective);
    summary.iterates.push_back(tau);

    detail::UniformStream perturb_stream(
        detail::derive_seed(config.seed, 0x9000u + static_cast<std::uint64_t>(start_index)));

    Termination termination = Termination::IterationCap;
    for (int iter = 0; iter < config.max_iterations; ++iter) {
        if (std::isinf(objective)) {
            termination = Termination::SingularOptimum;
            break;
        }

        Eigen::VectorXd gradient;
        try {
            gradient = bound_gradient(problem.catalog, tau, problem.grid, problem.weights,
                                      problem.flavor, problem.quadrature) /
                       iw;
        } catch (const GradientUnavailableError&) {
            // Ill-conditioned but not singular: nudge off the ridge and retry.
            ScheduleVector nudged = tau;
            for (Eigen::Index i = 0; i < nudged.size(); ++i)
                nudged[i] += config.perturbation_radius *
                             (2.0 * perturb_stream.next_unit() - 1.0);
            tau = project(nudged, problem.feasible, problem.catalog);
            objective = schedule_objective(problem, tau);
            summary.trace.push_back(objective);
            summary.iterates.push_back(tau);
            continue;
        }

        // Projected-gradient stationarity check.
        const ScheduleVector probe =
            project(tau + config.initial_step * gradient, problem.feasible, problem.catalog);
        const double map_norm = (probe - tau).norm() / config.initial_step;
        if (map_norm < config.gradient_tolerance) {
            termination = Termination::Converged;
            break;
        }

        // Backtracking line search with Armijo sufficient increase on the
        // projected step; a jump to +inf is accepted outright.
        double step = config.initial_step;
        bool accepted = false;
        for (int halvings = 0; halvings < 80; ++halvings) {
            const ScheduleVector candidate =
                project(tau + step * gradient, problem.feasible, problem.catalog);
            const double moved = (candidate - tau).norm();
            if (moved == 0.0) break;  // fully clamped, no direction left
            const double candidate_objective = schedule_objective(problem, candidate);
            const double required =
                objective + config.sufficient_increase * gradient.dot(candidate - tau);
            if (std::isinf(candidate_objective) || candidate_objective >= required) {
                tau = candidate;
                objective = candidate_objective;
                summary.trace.push_back(objective);
                summary.iterates.push_back(tau);
                accepted = true;
                break;
            }
            step *= config.backtracking_factor;
        }
        if (!accepted) {
            termination = Termination::NoAscent;
            break;
        }
        if (std::isinf(objective)) {
            termination = Termination::SingularOptimum;
            break;
        }
    }
    if (std::isinf(objective) && termination != Termination::SingularOptimum)
        termination = Termination::SingularOptimum;

    summary.final = tau;
    summary.objective = objective;
    summary.termination = termination;
    return summary;
}

}  // namespace detail

/// Multistart projected gradient ascent on the estimation-error bound.
/// Starts are drawn uniformly from the effective feasible box with
/// per-start derived seeds, run independently (possibly concurrently),
/// and the best objective wins; +inf (singular schedule) beats everything.
inline ScheduleSolution optimize(const ScheduleProblem& problem, const AscentConfig& config) {
    problem.validate();
    config.validate();

    const auto n = static_cast<Eigen::Index>(problem.catalog.size());
    std::vector<std::pair<double, double>> boxes;
    for (std::size_t i = 0; i < problem.catalog.size(); ++i)
        boxes.push_back(problem.feasible.effective(i, problem.catalog));

    // Draw all start points up front so results do not depend on scheduling.
    std::vector<ScheduleVector> starts;
    for (int s = 0; s < config.multistart_count; ++s) {
        detail::UniformStream stream(
            detail::derive_seed(config.seed, static_cast<std::uint64_t>(s)));
        ScheduleVector point(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& [lo, hi] = boxes[static_cast<std::size_t>(i)];
            point[i] = lo + (hi - lo) * stream.next_unit();
        }
        starts.push_back(std::move(point));
    }

    std::vector<StartSummary> summaries(static_cast<std::size_t>(config.multistart_count));
    parallel_for(summaries.size(), config.threads, [&](std::size_t s) {
        try {
            summaries[s] = detail::run_single_start(problem, config, static_cast<int>(s),
                                                    starts[s]);
        } catch (const InfeasibleSetError&) {
            throw;  // a property of the problem, not of one start
        } catch (const std::exception& e) {
            summaries[s].start_index = static_cast<int>(s);
            summaries[s].initial = starts[s];
            summaries[s].error = e.what();
            summaries[s].objective = -std::numeric_limits<double>::infinity();
        }
    });

    std::optional<std::size_t> best;
    for (std::size_t s = 0; s < summaries.size(); ++s) {
        if (!summaries[s].error.empty()) continue;
        if (!best || summaries[s].objective > summaries[*best].objective) best = s;
    }
    if (!best)
        throw OptimizationFailedError(
            "schedule search: every start failed to evaluate; first error: " +
            summaries.front().error);

    ScheduleSolution solution;
    solution.tau_star = summaries[*best].final;
    solution.objective = summaries[*best].objective;
    solution.start_index = summaries[*best].start_index;
    solution.termination = summaries[*best].termination;
    solution.trace = summaries[*best].trace;
    solution.starts = std::move(summaries);
    return solution;
}

/// Bound surface on a 2-D slice of the schedule space.
struct SweepResult {
    std::vector<double> grid_i;  // axis values for the first swept entry
    std::vector<double> grid_j;
    Eigen::MatrixXd values;      // rows follow grid_i, columns grid_j; may hold +inf
    std::size_t axis_i = 0;
    std::size_t axis_j = 1;
    CorrelationFlavor flavor = CorrelationFlavor::Discrete;
};

struct SweepRange {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 2;

    std::vector<double> points() const {
        if (count < 1 || !(hi >= lo))
            throw ValidationError("sweep range: need count >= 1 and hi >= lo");
        std::vector<double> p;
        p.reserve(count);
        if (count == 1) {
            p.push_back(lo);
            return p;
        }
        for (std::size_t m = 0; m < count; ++m)
            p.push_back(lo + (hi - lo) * static_cast<double>(m) /
                                 static_cast<double>(count - 1));
        return p;
    }
};

/// Evaluates the estimation-error bound over a Cartesian grid of
/// (tau_i, tau_j) with the other entries fixed. Cells are independent and
/// evaluated concurrently; +inf values are kept (export applies the cap).
inline SweepResult sweep_2d(const ScheduleProblem& problem, std::size_t axis_i,
                            std::size_t axis_j, const ScheduleVector& fixed,
                            const SweepRange& range_i, const SweepRange& range_j,
                            CorrelationFlavor flavor, std::size_t threads = 0) {
    problem.validate();
    if (axis_i == axis_j) throw std::invalid_argument("sweep axes must differ");
    if (axis_i >= problem.catalog.size() || axis_j >= problem.catalog.size())
        throw std::invalid_argument("sweep axis out of range");
    if (static_cast<std::size_t>(fixed.size()) != problem.catalog.size())
        throw std::invalid_argument("sweep: fixed schedule dimension mismatch");
    for (auto [axis, range] : {std::pair{axis_i, range_i}, std::pair{axis_j, range_j}}) {
        const auto [lo, hi] = problem.feasible.effective(axis, problem.catalog);
        if (range.lo < lo - 1e-12 || range.hi > hi + 1e-12)
            throw std::invalid_argument("sweep range exceeds the feasible interval of axis " +
                                        std::to_string(axis + 1));
    }

    SweepResult result;
    result.axis_i = axis_i;
    result.axis_j = axis_j;
    result.flavor = flavor;
    result.grid_i = range_i.points();
    result.grid_j = range_j.points();
    result.values.resize(static_cast<Eigen::Index>(result.grid_i.size()),
                         static_cast<Eigen::Index>(result.grid_j.size()));

    ScheduleProblem cell_problem = problem;
    cell_problem.flavor = flavor;
    const std::size_t cols = result.grid_j.size();
    parallel_for(result.grid_i.size() * cols, threads, [&](std::size_t cell) {
        const std::size_t a = cell / cols;
        const std::size_t b = cell % cols;
        ScheduleVector tau = fixed;
        tau[static_cast<Eigen::Index>(axis_i)] = result.grid_i[a];
        tau[static_cast<Eigen::Index>(axis_j)] = result.grid_j[b];
        result.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            detail::schedule_objective(cell_problem, tau);
    });
    return result;
}

}  // namespace nilmbound
