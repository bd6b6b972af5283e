#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nilmbound/bounds.hpp"
#include "nilmbound/catalog_io.hpp"
#include "nilmbound/errors.hpp"
#include "nilmbound/scheduler.hpp"
#include "nilmbound/simulate.hpp"

namespace nilmbound {

/// JSON has no infinity, so +inf serializes as the literal string "inf".
inline nlohmann::json json_from_value(double v) {
    if (std::isinf(v)) return "inf";
    return v;
}

inline double value_from_json(const nlohmann::json& j, const std::string& context) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string() && j.get<std::string>() == "inf")
        return std::numeric_limits<double>::infinity();
    throw ParseError(context + ": expected a number or \"inf\"");
}

inline std::string to_string(BoundTheorem t) {
    switch (t) {
        case BoundTheorem::Thm1: return "thm1";
        case BoundTheorem::Thm2: return "thm2";
        case BoundTheorem::Cor1: return "cor1";
        default: return "cor2";
    }
}

inline BoundTheorem bound_theorem_from_string(const std::string& s) {
    if (s == "thm1") return BoundTheorem::Thm1;
    if (s == "thm2") return BoundTheorem::Thm2;
    if (s == "cor1") return BoundTheorem::Cor1;
    if (s == "cor2") return BoundTheorem::Cor2;
    throw ParseError("unknown theorem '" + s + "'");
}

inline nlohmann::json to_json(const BoundResult& r) {
    nlohmann::json j{{"theorem", to_string(r.theorem)},
                     {"value", json_from_value(r.value)},
                     {"iw", r.fisher_scalar},
                     {"smallest_eigenvalue", r.smallest_eigenvalue},
                     {"condition_estimate", json_from_value(r.condition_estimate)},
                     {"singular", r.singular}};
    if (r.pseudo_inverse_used) j["pseudo_inverse_used"] = true;
    if (r.c1) j["c1"] = *r.c1;
    if (r.c2) j["c2"] = *r.c2;
    if (r.bias_standard_error) {
        std::vector<double> se(r.bias_standard_error->begin(), r.bias_standard_error->end());
        j["bias_standard_error"] = se;
    }
    return j;
}

inline BoundResult bound_result_from_json(const nlohmann::json& j) {
    BoundResult r;
    r.theorem = bound_theorem_from_string(j.at("theorem").get<std::string>());
    r.value = value_from_json(j.at("value"), "bound value");
    r.fisher_scalar = j.at("iw").get<double>();
    r.smallest_eigenvalue = j.at("smallest_eigenvalue").get<double>();
    r.condition_estimate = value_from_json(j.at("condition_estimate"), "condition estimate");
    r.singular = j.at("singular").get<bool>();
    if (j.contains("pseudo_inverse_used")) r.pseudo_inverse_used = j["pseudo_inverse_used"];
    if (j.contains("c1")) r.c1 = j["c1"].get<double>();
    if (j.contains("c2")) r.c2 = j["c2"].get<double>();
    return r;
}

inline Termination termination_from_string(const std::string& s) {
    if (s == "converged") return Termination::Converged;
    if (s == "iteration-cap") return Termination::IterationCap;
    if (s == "singular-optimum") return Termination::SingularOptimum;
    if (s == "no-ascent") return Termination::NoAscent;
    throw ParseError("unknown termination '" + s + "'");
}

inline nlohmann::json to_json(const ScheduleSolution& s) {
    auto vec = [](const ScheduleVector& v) {
        return std::vector<double>(v.begin(), v.end());
    };
    nlohmann::json starts = nlohmann::json::array();
    for (const auto& st : s.starts) {
        nlohmann::json entry{{"start_index", st.start_index},
                             {"initial", vec(st.initial)},
                             {"tau", vec(st.final)},
                             {"objective", json_from_value(st.objective)},
                             {"termination", to_string(st.termination)},
                             {"iterations", st.trace.empty() ? 0 : st.trace.size() - 1}};
        if (!st.error.empty()) entry["error"] = st.error;
        starts.push_back(std::move(entry));
    }
    nlohmann::json trace = nlohmann::json::array();
    for (double v : s.trace) trace.push_back(json_from_value(v));
    return {{"tau_star", vec(s.tau_star)},
            {"objective", json_from_value(s.objective)},
            {"start_index", s.start_index},
            {"termination", to_string(s.termination)},
            {"trace", trace},
            {"per_start_summaries", starts}};
}

inline ScheduleSolution solution_from_json(const nlohmann::json& j) {
    auto vec = [](const nlohmann::json& a) {
        ScheduleVector v(static_cast<Eigen::Index>(a.size()));
        for (std::size_t i = 0; i < a.size(); ++i)
            v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
        return v;
    };
    ScheduleSolution s;
    s.tau_star = vec(j.at("tau_star"));
    s.objective = value_from_json(j.at("objective"), "solution objective");
    s.start_index = j.at("start_index").get<int>();
    s.termination = termination_from_string(j.at("termination").get<std::string>());
    for (const auto& t : j.at("trace"))
        s.trace.push_back(value_from_json(t, "solution trace"));
    for (const auto& entry : j.at("per_start_summaries")) {
        StartSummary st;
        st.start_index = entry.at("start_index").get<int>();
        st.initial = vec(entry.at("initial"));
        st.final = vec(entry.at("tau"));
        st.objective = value_from_json(entry.at("objective"), "start objective");
        st.termination = termination_from_string(entry.at("termination").get<std::string>());
        if (entry.contains("error")) st.error = entry["error"].get<std::string>();
        s.starts.push_back(std::move(st));
    }
    return s;
}

inline nlohmann::json to_json(const EstimatorReport& report, const BoundResult& bound) {
    std::vector<double> bias(report.empirical_bias.begin(), report.empirical_bias.end());
    return {{"trials", report.trials},
            {"weighted_mse", report.weighted_mse},
            {"standard_error", report.standard_error},
            {"empirical_bias", bias},
            {"bound", to_json(bound)}};
}

/// Reads back the statistics of a serialized estimator report (the
/// per-trial table is a separate dump).
inline std::pair<EstimatorReport, BoundResult> report_from_json(const nlohmann::json& j) {
    EstimatorReport report;
    report.trials = j.at("trials").get<std::size_t>();
    report.weighted_mse = j.at("weighted_mse").get<double>();
    report.standard_error = j.at("standard_error").get<double>();
    const auto& bias = j.at("empirical_bias");
    report.empirical_bias.resize(static_cast<Eigen::Index>(bias.size()));
    for (std::size_t i = 0; i < bias.size(); ++i)
        report.empirical_bias[static_cast<Eigen::Index>(i)] = bias[i].get<double>();
    return {std::move(report), bound_result_from_json(j.at("bound"))};
}

/// Sweep table: comma-separated, header row carries the tau_j grid, first
/// column the tau_i grid. Values above the cap are written as the cap and
/// recorded in the metadata sidecar with their true value ("inf" for
/// singular cells). A non-finite cap disables capping and writes "inf"
/// literally.
struct SweepExport {
    std::string table;        // delimited text
    nlohmann::json metadata;  // cap, capped cell list, axes, flavor
};

inline SweepExport export_sweep(const SweepResult& sweep, double cap = 1e6) {
    std::ostringstream out;
    out << std::setprecision(17);
    SweepExport result;
    nlohmann::json capped = nlohmann::json::array();

    out << "tau_i\\tau_j";
    for (double v : sweep.grid_j) out << ',' << v;
    out << '\n';
    for (std::size_t a = 0; a < sweep.grid_i.size(); ++a) {
        out << sweep.grid_i[a];
        for (std::size_t b = 0; b < sweep.grid_j.size(); ++b) {
            const double v = sweep.values(static_cast<Eigen::Index>(a),
                                          static_cast<Eigen::Index>(b));
            out << ',';
            if (std::isfinite(cap) && v > cap) {
                out << cap;
                capped.push_back({{"row", a},
                                  {"col", b},
                                  {"tau_i", sweep.grid_i[a]},
                                  {"tau_j", sweep.grid_j[b]},
                                  {"value", json_from_value(v)}});
            } else if (std::isinf(v)) {
                out << "inf";
            } else {
                out << v;
            }
        }
        out << '\n';
    }
    result.table = out.str();
    result.metadata = {{"axis_i", sweep.axis_i + 1},
                       {"axis_j", sweep.axis_j + 1},
                       {"flavor", sweep.flavor == CorrelationFlavor::Discrete ? "discrete"
                                                                              : "continuous"},
                       {"cap", json_from_value(cap)},
                       {"capped_cells", capped}};
    return result;
}

/// Reads a sweep table back; capped cells are restored from the metadata
/// when it is supplied.
inline SweepResult import_sweep(const std::string& table,
                                const nlohmann::json* metadata = nullptr) {
    SweepResult sweep;
    std::istringstream in(table);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("sweep table: empty document");

    auto split = [](const std::string& row) {
        std::vector<std::string> cells;
        std::istringstream s(row);
        std::string cell;
        while (std::getline(s, cell, ',')) cells.push_back(cell);
        return cells;
    };
    auto cell_value = [](const std::string& cell, std::size_t row, std::size_t col) {
        if (cell == "inf") return std::numeric_limits<double>::infinity();
        try {
            return std::stod(cell);
        } catch (const std::exception&) {
            throw ParseError("sweep table: bad cell at row " + std::to_string(row) +
                             ", column " + std::to_string(col));
        }
    };

    const auto header = split(line);
    if (header.size() < 2) throw ParseError("sweep table: header needs at least one column");
    for (std::size_t b = 1; b < header.size(); ++b)
        sweep.grid_j.push_back(cell_value(header[b], 0, b));

    std::vector<std::vector<double>> rows;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size())
            throw ParseError("sweep table: row " + std::to_string(row_no) +
                             " has wrong column count");
        sweep.grid_i.push_back(cell_value(cells[0], row_no, 0));
        std::vector<double> row;
        for (std::size_t b = 1; b < cells.size(); ++b)
            row.push_back(cell_value(cells[b], row_no, b));
        rows.push_back(std::move(row));
    }
    sweep.values.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(sweep.grid_j.size()));
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < rows[a].size(); ++b)
            sweep.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                rows[a][b];

    if (metadata) {
        sweep.axis_i = metadata->at("axis_i").get<std::size_t>() - 1;
        sweep.axis_j = metadata->at("axis_j").get<std::size_t>() - 1;
        sweep.flavor = metadata->at("flavor").get<std::string>() == "continuous"
                           ? CorrelationFlavor::Continuous
                           : CorrelationFlavor::Discrete;
        for (const auto& cell : metadata->at("capped_cells"))
            sweep.values(cell.at("row").get<Eigen::Index>(),
                         cell.at("col").get<Eigen::Index>()) =
                value_from_json(cell.at("value"), "capped cell");
    }
    return sweep;
}

/// Per-trial dump: trial, tau_hat_1..n, weighted_sq_error.
inline std::string export_trials(const EstimatorReport& report) {
    std::ostringstream out;
    out << std::setprecision(17) << "trial";
    for (Eigen::Index i = 0; i < report.tau_hats.cols(); ++i)
        out << ",tau_hat_" << (i + 1);
    out << ",weighted_sq_error\n";
    for (std::size_t t = 0; t < report.trials; ++t) {
        out << t;
        for (Eigen::Index i = 0; i < report.tau_hats.cols(); ++i)
            out << ',' << report.tau_hats(static_cast<Eigen::Index>(t), i);
        out << ',' << report.squared_errors[t] << '\n';
    }
    return out.str();
}

/// Time series of the noiseless and noisy aggregate, one row per sample.
inline std::string export_trace(const SamplingGrid& grid, const Eigen::VectorXd& noiseless,
                                const Eigen::VectorXd& noisy) {
    std::ostringstream out;
    out << std::setprecision(17) << "t,noiseless,noisy\n";
    for (std::size_t l = 0; l < grid.size(); ++l)
        out << grid[l] << ',' << noiseless[static_cast<Eigen::Index>(l)] << ','
            << noisy[static_cast<Eigen::Index>(l)] << '\n';
    return out.str();
}

namespace detail {

inline std::vector<std::vector<double>> parse_csv_rows(const std::string& text,
                                                       std::size_t columns,
                                                       const std::string& what) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(what + ": empty document");
    std::vector<std::vector<double>> rows;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ParseError(what + ": bad cell in row " + std::to_string(row_no));
            }
        }
        if (row.size() != columns)
            throw ParseError(what + ": row " + std::to_string(row_no) +
                             " has wrong column count");
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace detail

/// Reads back a per-trial dump: one row {trial, tau_hat_1..n, error}.
inline std::pair<Eigen::MatrixXd, std::vector<double>> import_trials(const std::string& text,
                                                                     std::size_t n) {
    const auto rows = detail::parse_csv_rows(text, n + 2, "trial dump");
    Eigen::MatrixXd tau_hats(static_cast<Eigen::Index>(rows.size()),
                             static_cast<Eigen::Index>(n));
    std::vector<double> errors;
    for (std::size_t t = 0; t < rows.size(); ++t) {
        for (std::size_t i = 0; i < n; ++i)
            tau_hats(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) =
                rows[t][i + 1];
        errors.push_back(rows[t][n + 1]);
    }
    return {std::move(tau_hats), std::move(errors)};
}

/// Reads back an aggregate trace: columns {t, noiseless, noisy}.
struct TraceData {
    std::vector<double> times;
    Eigen::VectorXd noiseless;
    Eigen::VectorXd noisy;
};

inline TraceData import_trace(const std::string& text) {
    const auto rows = detail::parse_csv_rows(text, 3, "trace");
    TraceData data;
    data.noiseless.resize(static_cast<Eigen::Index>(rows.size()));
    data.noisy.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t l = 0; l < rows.size(); ++l) {
        data.times.push_back(rows[l][0]);
        data.noiseless[static_cast<Eigen::Index>(l)] = rows[l][1];
        data.noisy[static_cast<Eigen::Index>(l)] = rows[l][2];
    }
    return data;
}

}  // namespace nilmbound
