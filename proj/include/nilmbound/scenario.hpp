#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nilmbound/bounds.hpp"
#include "nilmbound/catalog_io.hpp"
#include "nilmbound/errors.hpp"
#include "nilmbound/grid.hpp"
#include "nilmbound/noise.hpp"
#include "nilmbound/quadrature.hpp"
#include "nilmbound/scheduler.hpp"
#include "nilmbound/simulate.hpp"

namespace nilmbound {

/// Bias model description carried by a scenario; the empirical mode is
/// wired to the Monte Carlo attacker by the front-end.
struct BiasSpec {
    enum class Mode { Affine, Empirical } mode = Mode::Affine;
    Eigen::MatrixXd matrix;  // affine
    Eigen::VectorXd offset;  // affine
    std::size_t trials = 200;   // empirical
    std::uint64_t seed = 1;     // empirical
};

/// Default sweep axes/ranges carried by a scenario.
struct SweepSpec {
    std::size_t axis_i = 0;  // zero-based
    std::size_t axis_j = 1;
    SweepRange range_i;
    SweepRange range_j;
    double cap = 1e6;
};

/// Default output destinations; command-line flags override these.
struct OutputSpec {
    std::string bound;
    std::string sweep;
    std::string schedule;
    std::string report;
    std::string trials;
    std::string trace;
};

/// One scenario file binds a catalog, schedule, noise, grid, weights and
/// search configuration; every CLI subcommand reads the same document.
struct Scenario {
    SignatureCatalog catalog;
    std::optional<ScheduleVector> tau;
    NoiseModel noise;
    SamplingGrid grid;
    WeightMatrix weights;
    std::optional<FeasibleSet> feasible;
    QuadratureSpec quadrature{};
    MlSearchConfig ml{};
    AscentConfig ascent{};
    std::optional<BiasSpec> bias;
    std::optional<SweepSpec> sweep;
    OutputSpec output{};

    const ScheduleVector& require_tau() const {
        if (!tau) throw ValidationError("scenario: this command needs a 'tau' schedule");
        return *tau;
    }

    const FeasibleSet& require_feasible() const {
        if (!feasible)
            throw ValidationError("scenario: this command needs a 'feasible' set");
        return *feasible;
    }

    ScheduleProblem schedule_problem(CorrelationFlavor flavor) const {
        return {catalog, weights, grid, noise, require_feasible(), flavor, quadrature};
    }

    /// Sweep spec with defaults derived from the feasible set when the
    /// scenario does not pin one.
    SweepSpec sweep_or_default() const {
        if (sweep) return *sweep;
        if (catalog.size() < 2)
            throw ValidationError("scenario: sweeping needs at least two appliances");
        SweepSpec s;
        const auto box_i = require_feasible().effective(0, catalog);
        const auto box_j = require_feasible().effective(1, catalog);
        s.range_i = {box_i.first, box_i.second, 41};
        s.range_j = {box_j.first, box_j.second, 41};
        return s;
    }
};

namespace detail {

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& context) {
    if (!j.is_array()) throw ParseError(context + ": expected an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ParseError(context + ": entries must be numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

inline NoiseModel noise_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("scenario noise: expected an object");
    reject_unknown_fields(j, {"kind", "scale"}, "scenario noise");
    if (!j.contains("kind") || !j["kind"].is_string())
        throw ParseError("scenario noise: needs a string 'kind'");
    const std::string kind = j["kind"].get<std::string>();
    const double scale = require_number(j, "scale", "scenario noise");
    if (kind == "gaussian") return NoiseModel::gaussian(scale);
    if (kind == "laplace") return NoiseModel::laplace(scale);
    throw ParseError("scenario noise: unknown kind '" + kind +
                     "' (expected gaussian or laplace)");
}

inline SamplingGrid grid_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("scenario grid: expected an object");
    if (j.contains("points")) {
        reject_unknown_fields(j, {"points"}, "scenario grid");
        std::vector<double> points;
        for (const auto& p : j["points"]) {
            if (!p.is_number()) throw ParseError("scenario grid: points must be numbers");
            points.push_back(p.get<double>());
        }
        return SamplingGrid(std::move(points));
    }
    reject_unknown_fields(j, {"start", "step", "end"}, "scenario grid");
    return SamplingGrid::from_range(require_number(j, "start", "scenario grid"),
                                    require_number(j, "step", "scenario grid"),
                                    require_number(j, "end", "scenario grid"));
}

inline FeasibleSet feasible_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("scenario feasible: expected an object");
    reject_unknown_fields(j, {"boxes", "horizon"}, "scenario feasible");
    if (!j.contains("boxes") || !j["boxes"].is_array())
        throw ParseError("scenario feasible: needs an array 'boxes'");
    std::vector<std::pair<double, double>> boxes;
    for (const auto& b : j["boxes"]) {
        if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number())
            throw ParseError("scenario feasible: each box must be [lo, hi]");
        boxes.emplace_back(b[0].get<double>(), b[1].get<double>());
    }
    std::optional<double> horizon;
    if (j.contains("horizon")) horizon = require_number(j, "horizon", "scenario feasible");
    return FeasibleSet(std::move(boxes), horizon);
}

inline BiasSpec bias_from_json(const nlohmann::json& j, Eigen::Index n) {
    if (!j.is_object()) throw ParseError("scenario bias: expected an object");
    BiasSpec spec;
    if (!j.contains("mode") || !j["mode"].is_string())
        throw ParseError("scenario bias: needs a string 'mode'");
    const std::string mode = j["mode"].get<std::string>();
    if (mode == "affine") {
        reject_unknown_fields(j, {"mode", "matrix", "offset"}, "scenario bias");
        spec.mode = BiasSpec::Mode::Affine;
        if (!j.contains("matrix") || !j["matrix"].is_array())
            throw ParseError("scenario bias: affine mode needs a 'matrix'");
        spec.matrix.resize(n, n);
        const auto& rows = j["matrix"];
        if (static_cast<Eigen::Index>(rows.size()) != n)
            throw ParseError("scenario bias: matrix must be n x n");
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto row = vector_from_json(rows[static_cast<std::size_t>(r)],
                                              "scenario bias matrix row");
            if (row.size() != n) throw ParseError("scenario bias: matrix must be n x n");
            spec.matrix.row(r) = row.transpose();
        }
        spec.offset = j.contains("offset")
                          ? vector_from_json(j["offset"], "scenario bias offset")
                          : Eigen::VectorXd::Zero(n).eval();
        if (spec.offset.size() != n)
            throw ParseError("scenario bias: offset must have length n");
        return spec;
    }
    if (mode == "empirical") {
        reject_unknown_fields(j, {"mode", "trials", "seed"}, "scenario bias");
        spec.mode = BiasSpec::Mode::Empirical;
        spec.trials = static_cast<std::size_t>(
            optional_number(j, "trials", static_cast<double>(spec.trials), "scenario bias"));
        spec.seed = static_cast<std::uint64_t>(
            optional_number(j, "seed", static_cast<double>(spec.seed), "scenario bias"));
        return spec;
    }
    throw ParseError("scenario bias: unknown mode '" + mode +
                     "' (expected affine or empirical)");
}

inline void ascent_overrides_from_json(const nlohmann::json& j, AscentConfig& config) {
    if (!j.is_object()) throw ParseError("scenario ascent: expected an object");
    reject_unknown_fields(j,
                          {"max_iterations", "initial_step", "backtracking_factor",
                           "sufficient_increase", "gradient_tolerance", "multistart_count",
                           "seed", "perturbation_radius"},
                          "scenario ascent");
    config.max_iterations = static_cast<int>(optional_number(
        j, "max_iterations", config.max_iterations, "scenario ascent"));
    config.initial_step =
        optional_number(j, "initial_step", config.initial_step, "scenario ascent");
    config.backtracking_factor = optional_number(j, "backtracking_factor",
                                                 config.backtracking_factor, "scenario ascent");
    config.sufficient_increase = optional_number(j, "sufficient_increase",
                                                 config.sufficient_increase, "scenario ascent");
    config.gradient_tolerance = optional_number(j, "gradient_tolerance",
                                                config.gradient_tolerance, "scenario ascent");
    config.multistart_count = static_cast<int>(optional_number(
        j, "multistart_count", config.multistart_count, "scenario ascent"));
    config.seed = static_cast<std::uint64_t>(
        optional_number(j, "seed", static_cast<double>(config.seed), "scenario ascent"));
    config.perturbation_radius = optional_number(j, "perturbation_radius",
                                                 config.perturbation_radius, "scenario ascent");
    config.validate();
}

inline SweepSpec sweep_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("scenario sweep: expected an object");
    reject_unknown_fields(j, {"axis_i", "axis_j", "range_i", "range_j", "resolution", "cap"},
                          "scenario sweep");
    SweepSpec spec;
    const auto axis_i =
        static_cast<long>(optional_number(j, "axis_i", 1.0, "scenario sweep"));
    const auto axis_j =
        static_cast<long>(optional_number(j, "axis_j", 2.0, "scenario sweep"));
    if (axis_i < 1 || axis_j < 1)
        throw ParseError("scenario sweep: axes are 1-based appliance indices");
    spec.axis_i = static_cast<std::size_t>(axis_i - 1);
    spec.axis_j = static_cast<std::size_t>(axis_j - 1);
    const auto resolution = static_cast<std::size_t>(
        optional_number(j, "resolution", 41.0, "scenario sweep"));
    auto range = [&](const char* field) {
        if (!j.contains(field) || !j[field].is_array() || j[field].size() != 2)
            throw ParseError(std::string("scenario sweep: '") + field + "' must be [lo, hi]");
        SweepRange r;
        r.lo = j[field][0].get<double>();
        r.hi = j[field][1].get<double>();
        r.count = resolution;
        return r;
    };
    spec.range_i = range("range_i");
    spec.range_j = range("range_j");
    spec.cap = optional_number(j, "cap", spec.cap, "scenario sweep");
    return spec;
}

inline void ml_overrides_from_json(const nlohmann::json& j, MlSearchConfig& config) {
    if (!j.is_object()) throw ParseError("scenario ml: expected an object");
    reject_unknown_fields(j, {"lattice_step", "refine_tolerance", "max_refine_sweeps"},
                          "scenario ml");
    config.lattice_step =
        optional_number(j, "lattice_step", config.lattice_step, "scenario ml");
    config.refine_tolerance =
        optional_number(j, "refine_tolerance", config.refine_tolerance, "scenario ml");
    config.max_refine_sweeps = static_cast<int>(optional_number(
        j, "max_refine_sweeps", config.max_refine_sweeps, "scenario ml"));
    config.validate();
}

}  // namespace detail

/// Loads a scenario document; a string "catalog" field is resolved as a
/// path relative to `base_dir`, an array is an inline catalog.
inline Scenario load_scenario_json(const nlohmann::json& doc,
                                   const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw ParseError("scenario: top level must be an object");
    detail::reject_unknown_fields(doc,
                                  {"catalog", "tau", "noise", "grid", "weights", "feasible",
                                   "quadrature", "ml", "ascent", "bias", "sweep", "output"},
                                  "scenario");
    for (const char* field : {"catalog", "noise", "grid", "weights"})
        if (!doc.contains(field))
            throw ParseError(std::string("scenario: missing required field '") + field + "'");

    SignatureCatalog catalog = [&] {
        const auto& c = doc["catalog"];
        if (c.is_string()) {
            const std::filesystem::path path = base_dir / c.get<std::string>();
            std::ifstream in(path);
            if (!in) throw ParseError("scenario: cannot open catalog file " + path.string());
            return parse_catalog(in);
        }
        return parse_catalog_json(c);
    }();
    const auto n = static_cast<Eigen::Index>(catalog.size());

    Scenario scenario{std::move(catalog),
                      std::nullopt,
                      detail::noise_from_json(doc["noise"]),
                      detail::grid_from_json(doc["grid"]),
                      WeightMatrix(detail::vector_from_json(doc["weights"], "scenario weights")),
                      std::nullopt};

    if (scenario.weights.size() != n)
        throw ValidationError("scenario: weights dimension " +
                              std::to_string(scenario.weights.size()) +
                              " does not match catalog size " + std::to_string(n));
    if (doc.contains("tau")) {
        scenario.tau = detail::vector_from_json(doc["tau"], "scenario tau");
        if (scenario.tau->size() != n)
            throw ValidationError("scenario: tau dimension does not match catalog size");
    }
    if (doc.contains("feasible")) {
        scenario.feasible = detail::feasible_from_json(doc["feasible"]);
        if (static_cast<Eigen::Index>(scenario.feasible->size()) != n)
            throw ValidationError("scenario: feasible set dimension does not match catalog");
    }
    if (doc.contains("quadrature")) {
        const auto& q = doc["quadrature"];
        detail::reject_unknown_fields(q, {"panel_order", "tolerance", "max_refinements"},
                                      "scenario quadrature");
        scenario.quadrature.panel_order = static_cast<int>(detail::optional_number(
            q, "panel_order", scenario.quadrature.panel_order, "scenario quadrature"));
        scenario.quadrature.tolerance = detail::optional_number(
            q, "tolerance", scenario.quadrature.tolerance, "scenario quadrature");
        scenario.quadrature.max_refinements = static_cast<int>(detail::optional_number(
            q, "max_refinements", scenario.quadrature.max_refinements, "scenario quadrature"));
        scenario.quadrature.validate();
    }
    if (doc.contains("ml")) detail::ml_overrides_from_json(doc["ml"], scenario.ml);
    if (doc.contains("ascent")) detail::ascent_overrides_from_json(doc["ascent"], scenario.ascent);
    if (doc.contains("bias")) scenario.bias = detail::bias_from_json(doc["bias"], n);
    if (doc.contains("sweep")) scenario.sweep = detail::sweep_from_json(doc["sweep"]);
    if (doc.contains("output")) {
        const auto& o = doc["output"];
        detail::reject_unknown_fields(
            o, {"bound", "sweep", "schedule", "report", "trials", "trace"}, "scenario output");
        auto path = [&](const char* field) -> std::string {
            if (!o.contains(field)) return {};
            if (!o[field].is_string())
                throw ParseError(std::string("scenario output: '") + field +
                                 "' must be a string path");
            return o[field].get<std::string>();
        };
        scenario.output = {path("bound"), path("sweep"), path("schedule"),
                           path("report"), path("trials"), path("trace")};
    }
    return scenario;
}

inline Scenario load_scenario(const std::string& text,
                              const std::filesystem::path& base_dir = ".") {
    return load_scenario_json(detail::parse_json_document(text, "scenario"), base_dir);
}

inline Scenario load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("scenario: cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return load_scenario(buffer.str(), path.parent_path());
}

}  // namespace nilmbound
