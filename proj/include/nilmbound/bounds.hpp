#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "nilmbound/correlation.hpp"
#include "nilmbound/errors.hpp"
#include "nilmbound/grid.hpp"
#include "nilmbound/signature.hpp"

namespace nilmbound {

/// Relative eigenvalue floor below which a correlation matrix counts as
/// singular (the bound is then +inf).
inline constexpr double kSingularEigRatio = 1e-12;

/// Condition estimate above which the bound gradient is refused.
inline constexpr double kGradientConditionLimit = 1e12;

/// Diagonal of the positive weight matrix expressing per-appliance
/// privacy importance.
class WeightMatrix {
public:
    explicit WeightMatrix(Eigen::VectorXd diag) : diag_(std::move(diag)) {
        for (Eigen::Index i = 0; i < diag_.size(); ++i)
            if (!(std::isfinite(diag_[i]) && diag_[i] > 0.0))
                throw ValidationError("weights: all entries must be positive reals");
    }

    static WeightMatrix identity(Eigen::Index n) {
        return WeightMatrix(Eigen::VectorXd::Ones(n));
    }

    Eigen::Index size() const { return diag_.size(); }
    const Eigen::VectorXd& diagonal() const { return diag_; }
    double operator[](Eigen::Index i) const { return diag_[i]; }

private:
    Eigen::VectorXd diag_;
};

enum class BoundTheorem { Thm1, Thm2, Cor1, Cor2 };

/// Whether the additive term of the biased bound uses the estimator mean
/// mu(tau) as stated, or the centered bias mu(tau) - tau. Both are
/// exposed because the two readings differ; AsStated is the default.
enum class BiasTerm { AsStated, Centered };

/// Result of a bound evaluation with its singularity diagnostics. The
/// value is +inf exactly when the singular flag is set.
struct BoundResult {
    double value = 0.0;
    BoundTheorem theorem = BoundTheorem::Thm1;
    double fisher_scalar = 0.0;
    double smallest_eigenvalue = 0.0;
    double condition_estimate = 0.0;
    bool singular = false;
    bool pseudo_inverse_used = false;  // range-space fallback of the biased bound
    std::optional<double> c1;          // simplified-bound multiplier
    std::optional<double> c2;          // simplified-bound offset
    std::optional<Eigen::VectorXd> bias_standard_error;  // empirical mu only
};

/// Mean and Monte Carlo standard error of an estimator at one schedule.
struct BiasSample {
    Eigen::VectorXd mean;
    Eigen::VectorXd standard_error;
};

/// Affine estimator-mean model mu(tau) = A tau + b.
struct AffineBias {
    Eigen::MatrixXd matrix;
    Eigen::VectorXd offset;
};

/// Estimator-mean model backed by a Monte Carlo callback; the Jacobian is
/// taken by central differences with per-axis step 1e-2 * box width (the
/// mean estimates carry sampling noise, so a large step is deliberate).
struct EmpiricalBias {
    std::function<BiasSample(const ScheduleVector&, std::uint64_t seed)> estimator_mean;
    Eigen::VectorXd box_widths;
    std::uint64_t seed = 0;
    double step_fraction = 1e-2;
};

/// Estimator mean model mu(tau) for the biased bounds.
class BiasModel {
public:
    explicit BiasModel(AffineBias affine) : model_(std::move(affine)) {
        const auto& a = std::get<AffineBias>(model_);
        if (a.matrix.rows() != a.matrix.cols() || a.matrix.rows() != a.offset.size())
            throw std::invalid_argument("affine bias: A must be n x n and b length n");
        if (!a.matrix.allFinite() || !a.offset.allFinite())
            throw std::invalid_argument("affine bias: entries must be finite");
    }

    explicit BiasModel(EmpiricalBias empirical) : model_(std::move(empirical)) {
        const auto& e = std::get<EmpiricalBias>(model_);
        if (!e.estimator_mean)
            throw std::invalid_argument("empirical bias: estimator callback required");
        if ((e.box_widths.array() <= 0.0).any())
            throw std::invalid_argument("empirical bias: box widths must be positive");
    }

    static BiasModel identity(Eigen::Index n) {
        return BiasModel(AffineBias{Eigen::MatrixXd::Identity(n, n),
                                    Eigen::VectorXd::Zero(n)});
    }

    bool is_empirical() const { return std::holds_alternative<EmpiricalBias>(model_); }

    /// mu(tau), its Jacobian, and (empirical mode only) the standard error.
    struct Evaluation {
        Eigen::VectorXd mean;
        Eigen::MatrixXd jacobian;
        std::optional<Eigen::VectorXd> standard_error;
    };

    Evaluation evaluate(const ScheduleVector& tau) const {
        if (const auto* a = std::get_if<AffineBias>(&model_)) {
            if (a->matrix.rows() != tau.size())
                throw std::invalid_argument("bias model dimension does not match schedule");
            return {a->matrix * tau + a->offset, a->matrix, std::nullopt};
        }
        const auto& e = std::get<EmpiricalBias>(model_);
        if (e.box_widths.size() != tau.size())
            throw std::invalid_argument("bias model dimension does not match schedule");
        const BiasSample center = e.estimator_mean(tau, e.seed);
        const auto n = tau.size();
        Eigen::MatrixXd jac(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double h = e.step_fraction * e.box_widths[j];
            ScheduleVector up = tau, down = tau;
            up[j] += h;
            down[j] -= h;
            const BiasSample plus = e.estimator_mean(up, e.seed);
            const BiasSample minus = e.estimator_mean(down, e.seed);
            jac.col(j) = (plus.mean - minus.mean) / (2.0 * h);
        }
        return {center.mean, jac, center.standard_error};
    }

private:
    std::variant<AffineBias, EmpiricalBias> model_;
};

namespace detail {

struct SpectralData {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    bool singular = false;
};

inline SpectralData analyze(const CorrelationMatrix& r) {
    const auto& m = r.matrix();
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("correlation matrix is not symmetric");

    SpectralData data{Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m), 0.0, 0.0, false};
    data.lambda_min = data.solver.eigenvalues().minCoeff();
    data.lambda_max = data.solver.eigenvalues().maxCoeff();
    const double norm = std::max(std::abs(data.lambda_max), std::abs(data.lambda_min));
    if (data.lambda_min < -1e-10 * std::max(1.0, norm))
        throw std::invalid_argument("correlation matrix is indefinite beyond tolerance");
    data.singular = !(data.lambda_min > kSingularEigRatio * norm) || norm == 0.0;
    return data;
}

inline void fill_diagnostics(BoundResult& out, const SpectralData& s, double iw) {
    out.fisher_scalar = iw;
    out.smallest_eigenvalue = s.lambda_min;
    out.condition_estimate = (!s.singular && s.lambda_min > 0.0)
                                 ? s.lambda_max / s.lambda_min
                                 : std::numeric_limits<double>::infinity();
    out.singular = s.singular;
    if (s.singular) out.value = std::numeric_limits<double>::infinity();
}

inline double trace_weighted_inverse(const SpectralData& s, const WeightMatrix& weights) {
    // trace(Pi R^-1) = sum_i pi_i sum_m V(i,m)^2 / lambda_m
    const auto& v = s.solver.eigenvectors();
    const auto& lambda = s.solver.eigenvalues();
    double total = 0.0;
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        double row = 0.0;
        for (Eigen::Index m = 0; m < v.cols(); ++m)
            row += v(i, m) * v(i, m) / lambda[m];
        total += weights[i] * row;
    }
    return total;
}

inline void check_weight_dimension(const CorrelationMatrix& r, const WeightMatrix& w) {
    if (w.size() != r.dimension())
        throw std::invalid_argument("weight vector dimension does not match matrix");
}

}  // namespace detail

/// Unbiased-estimator lower bound trace(Pi R^-1) / iw. Singular R yields
/// +inf with diagnostics: an ambiguous schedule admits no finite error
/// guarantee, which is exactly the privacy-optimal regime.
inline BoundResult bound_unbiased(const CorrelationMatrix& r, const WeightMatrix& weights,
                                  double iw) {
    detail::check_weight_dimension(r, weights);
    if (!(iw > 0.0)) throw std::invalid_argument("fisher information must be positive");
    const auto s = detail::analyze(r);
    BoundResult out;
    out.theorem =
        r.flavor() == CorrelationFlavor::Continuous ? BoundTheorem::Cor2 : BoundTheorem::Thm1;
    detail::fill_diagnostics(out, s, iw);
    if (!out.singular) out.value = detail::trace_weighted_inverse(s, weights) / iw;
    return out;
}

/// Asymptotic (continuous) bound trace(Pi R_c^-1) / iw; requires the
/// continuous matrix flavor.
inline BoundResult bound_asymptotic(const CorrelationMatrix& rc, const WeightMatrix& weights,
                                    double iw) {
    if (rc.flavor() != CorrelationFlavor::Continuous)
        throw std::invalid_argument("bound_asymptotic needs a continuous correlation matrix");
    BoundResult out = bound_unbiased(rc, weights, iw);
    out.theorem = BoundTheorem::Cor2;
    return out;
}

/// General-estimator bound: trace(Pi A R^-1 A^T) / iw plus the additive
/// term ||Pi^(1/2) mu(tau)||^2 (or the centered variant), where A is the
/// Jacobian of the estimator mean. If R is singular but A annihilates its
/// null space, the first term is evaluated on the range space via the
/// pseudo-inverse and flagged.
inline BoundResult bound_biased(const CorrelationMatrix& r, const WeightMatrix& weights,
                                double iw, const BiasModel& bias, const ScheduleVector& tau,
                                BiasTerm term = BiasTerm::AsStated) {
    detail::check_weight_dimension(r, weights);
    if (!(iw > 0.0)) throw std::invalid_argument("fisher information must be positive");
    const auto s = detail::analyze(r);
    const auto eval = bias.evaluate(tau);

    BoundResult out;
    out.theorem = BoundTheorem::Thm2;
    detail::fill_diagnostics(out, s, iw);
    out.bias_standard_error = eval.standard_error;

    const Eigen::VectorXd mu_term =
        term == BiasTerm::AsStated ? eval.mean : Eigen::VectorXd(eval.mean - tau);
    const double additive = (weights.diagonal().array() * mu_term.array().square()).sum();

    const auto& lambda = s.solver.eigenvalues();
    const auto& v = s.solver.eigenvectors();
    const double norm = std::max(std::abs(s.lambda_max), std::abs(s.lambda_min));

    if (s.singular) {
        // Project the Jacobian onto the null space; if it vanishes there the
        // quadratic form is still finite on the range space.
        double null_mass = 0.0;
        double jac_norm = eval.jacobian.norm();
        for (Eigen::Index m = 0; m < lambda.size(); ++m)
            if (!(lambda[m] > kSingularEigRatio * norm))
                null_mass = std::max(null_mass, (eval.jacobian * v.col(m)).norm());
        if (jac_norm > 0.0 && null_mass > 1e-9 * std::max(1.0, jac_norm)) {
            out.value = std::numeric_limits<double>::infinity();
            return out;  // genuinely divergent
        }
        out.pseudo_inverse_used = true;
        out.singular = false;  // a finite value is produced after all
    }

    // trace(Pi A R^+ A^T) via the spectral form; drops null directions when
    // the pseudo-inverse branch is active.
    double quad = 0.0;
    for (Eigen::Index m = 0; m < lambda.size(); ++m) {
        if (!(lambda[m] > kSingularEigRatio * norm)) continue;
        const Eigen::VectorXd col = eval.jacobian * v.col(m);
        quad += (weights.diagonal().array() * col.array().square()).sum() / lambda[m];
    }
    out.value = quad / iw + additive;
    return out;
}

/// Simplified biased bound (c1 / iw) * trace(Pi R^-1) + c2 with
///   c1 = lambda_min(Pi^-1/2 A^T Pi A Pi^-1/2), c2 = ||Pi^(1/2) mu||^2.
/// Always at or below bound_biased; returned with both constants filled.
inline BoundResult bound_biased_simplified(const CorrelationMatrix& r,
                                           const WeightMatrix& weights, double iw,
                                           const BiasModel& bias, const ScheduleVector& tau,
                                           BiasTerm term = BiasTerm::AsStated) {
    detail::check_weight_dimension(r, weights);
    if (!(iw > 0.0)) throw std::invalid_argument("fisher information must be positive");
    const auto s = detail::analyze(r);
    const auto eval = bias.evaluate(tau);

    BoundResult out;
    out.theorem = BoundTheorem::Cor1;
    detail::fill_diagnostics(out, s, iw);
    out.bias_standard_error = eval.standard_error;

    const Eigen::VectorXd pi_sqrt = weights.diagonal().cwiseSqrt();
    const Eigen::MatrixXd scaled = pi_sqrt.cwiseInverse().asDiagonal() *
                                   eval.jacobian.transpose() *
                                   weights.diagonal().asDiagonal() * eval.jacobian *
                                   pi_sqrt.cwiseInverse().asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> c1_solver(scaled, Eigen::EigenvaluesOnly);
    const double c1 = std::max(0.0, c1_solver.eigenvalues().minCoeff());

    const Eigen::VectorXd mu_term =
        term == BiasTerm::AsStated ? eval.mean : Eigen::VectorXd(eval.mean - tau);
    const double c2 = (weights.diagonal().array() * mu_term.array().square()).sum();
    out.c1 = c1;
    out.c2 = c2;

    if (out.singular) {
        if (c1 == 0.0) {
            // 0 * inf: the simplified bound's first term is vacuous here.
            out.singular = false;
            out.value = c2;
        }
        return out;
    }
    out.value = (c1 / iw) * detail::trace_weighted_inverse(s, weights) + c2;
    return out;
}

/// Gradient of trace(Pi R(tau)^-1) with respect to every schedule entry:
///   d/d tau_i = -trace(R^-1 Pi R^-1 dR/dtau_i).
/// One spectral factorization of R is shared across all n partials.
/// Near-singular matrices (condition above kGradientConditionLimit) raise
/// GradientUnavailableError; the scheduler recovers by perturbation.
inline Eigen::VectorXd bound_gradient(const SignatureCatalog& catalog,
                                      const ScheduleVector& tau, const SamplingGrid& grid,
                                      const WeightMatrix& weights, CorrelationFlavor flavor,
                                      const QuadratureSpec& quadrature = {}) {
    const CorrelationMatrix r = flavor == CorrelationFlavor::Discrete
                                    ? r_discrete(catalog, tau, grid)
                                    : r_continuous(catalog, tau, quadrature);
    detail::check_weight_dimension(r, weights);
    const auto s = detail::analyze(r);
    const double condition = s.lambda_min > 0.0 ? s.lambda_max / s.lambda_min
                                                : std::numeric_limits<double>::infinity();
    if (s.singular || condition > kGradientConditionLimit)
        throw GradientUnavailableError(
            "bound gradient unavailable: correlation matrix condition " +
                std::to_string(condition) + " exceeds " +
                std::to_string(kGradientConditionLimit),
            condition);

    const Eigen::MatrixXd r_inv = s.solver.eigenvectors() *
                                  s.solver.eigenvalues().cwiseInverse().asDiagonal() *
                                  s.solver.eigenvectors().transpose();
    const Eigen::MatrixXd sandwich =
        r_inv * weights.diagonal().asDiagonal() * r_inv;  // R^-1 Pi R^-1

    const auto n = static_cast<std::size_t>(tau.size());
    Eigen::VectorXd grad(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::MatrixXd partial =
            flavor == CorrelationFlavor::Discrete
                ? r_discrete_partial(catalog, tau, grid, i)
                : r_continuous_partial(catalog, tau, quadrature, i);
        // trace(S D) for symmetric S, D.
        grad[static_cast<Eigen::Index>(i)] = -(sandwich.cwiseProduct(partial)).sum();
    }
    return grad;
}

}  // namespace nilmbound
