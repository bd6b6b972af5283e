// Command-line front-end: binds a scenario file (catalog, schedule, noise,
// grid, weights, feasible set) to the bound, sweep, schedule and simulate
// workflows.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nilmbound/bounds.hpp"
#include "nilmbound/catalog_io.hpp"
#include "nilmbound/correlation.hpp"
#include "nilmbound/errors.hpp"
#include "nilmbound/scenario.hpp"
#include "nilmbound/scheduler.hpp"
#include "nilmbound/serialize.hpp"
#include "nilmbound/simulate.hpp"

namespace {

using namespace nilmbound;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;      // bad flags, unreadable or invalid scenario
constexpr int kExitNumerical = 3;  // a computation failed to converge

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write output file " + path);
    out << content;
}

struct CommonOptions {
    std::string scenario_path;
    std::string flavor = "discrete";
    std::size_t threads = 0;
    std::string out;
};

CorrelationFlavor parse_flavor(const std::string& name) {
    return name == "continuous" ? CorrelationFlavor::Continuous
                                : CorrelationFlavor::Discrete;
}

int cmd_bound(const Scenario& scenario, const std::string& theorem,
              const std::string& bias_term, const std::string& out) {
    const auto& tau = scenario.require_tau();
    const double iw = fisher_information(scenario.noise);
    const BiasTerm term =
        bias_term == "centered" ? BiasTerm::Centered : BiasTerm::AsStated;

    auto bias_model = [&]() -> BiasModel {
        if (!scenario.bias)
            throw ValidationError(
                "scenario: theorem thm2/cor1 needs a 'bias' model in the scenario");
        if (scenario.bias->mode == BiasSpec::Mode::Affine)
            return BiasModel(AffineBias{scenario.bias->matrix, scenario.bias->offset});
        // Empirical mode: the estimator mean is measured by Monte Carlo
        // runs of the maximum-likelihood attacker.
        EmpiricalBias empirical;
        const auto& feasible = scenario.require_feasible();
        empirical.box_widths.resize(static_cast<Eigen::Index>(scenario.catalog.size()));
        for (std::size_t i = 0; i < scenario.catalog.size(); ++i) {
            const auto [lo, hi] = feasible.effective(i, scenario.catalog);
            empirical.box_widths[static_cast<Eigen::Index>(i)] = std::max(hi - lo, 1e-6);
        }
        empirical.seed = scenario.bias->seed;
        const std::size_t trials = std::max<std::size_t>(2, scenario.bias->trials);
        empirical.estimator_mean = [&scenario, trials](const ScheduleVector& at,
                                                       std::uint64_t seed) {
            const auto [report, bound] =
                monte_carlo(scenario.catalog, at, scenario.grid, scenario.noise,
                            scenario.weights, scenario.require_feasible(), trials, seed,
                            scenario.ml);
            BiasSample sample;
            sample.mean = report.tau_hats.colwise().mean().transpose();
            sample.standard_error.resize(sample.mean.size());
            for (Eigen::Index i = 0; i < sample.mean.size(); ++i) {
                const auto column = report.tau_hats.col(i);
                const double mean = sample.mean[i];
                const double var =
                    (column.array() - mean).square().sum() /
                    static_cast<double>(report.trials - 1);
                sample.standard_error[i] =
                    std::sqrt(var / static_cast<double>(report.trials));
            }
            return sample;
        };
        return BiasModel(std::move(empirical));
    };

    BoundResult result;
    if (theorem == "thm1") {
        result = bound_unbiased(r_discrete(scenario.catalog, tau, scenario.grid),
                                scenario.weights, iw);
    } else if (theorem == "cor2") {
        result = bound_asymptotic(
            r_continuous(scenario.catalog, tau, scenario.quadrature), scenario.weights, iw);
    } else if (theorem == "thm2") {
        result = bound_biased(r_discrete(scenario.catalog, tau, scenario.grid),
                              scenario.weights, iw, bias_model(), tau, term);
    } else if (theorem == "cor1") {
        result = bound_biased_simplified(r_discrete(scenario.catalog, tau, scenario.grid),
                                         scenario.weights, iw, bias_model(), tau, term);
    } else {
        throw ValidationError("unknown theorem '" + theorem + "'");
    }

    const std::string serialized = to_json(result).dump(2);
    std::cout << serialized << "\n";
    if (!out.empty()) write_file(out, serialized + "\n");
    return kExitOk;  // the singular +inf case is a valid answer
}

int cmd_sweep(const Scenario& scenario, const CommonOptions& common,
              std::optional<std::size_t> axis_i, std::optional<std::size_t> axis_j,
              std::optional<std::pair<double, double>> range_i,
              std::optional<std::pair<double, double>> range_j,
              std::optional<std::size_t> resolution, std::optional<double> cap) {
    SweepSpec spec = scenario.sweep_or_default();
    if (axis_i) spec.axis_i = *axis_i - 1;
    if (axis_j) spec.axis_j = *axis_j - 1;
    if (resolution) {
        spec.range_i.count = *resolution;
        spec.range_j.count = *resolution;
    }
    if (range_i) {
        spec.range_i.lo = range_i->first;
        spec.range_i.hi = range_i->second;
    }
    if (range_j) {
        spec.range_j.lo = range_j->first;
        spec.range_j.hi = range_j->second;
    }
    if (cap) spec.cap = *cap;

    ScheduleVector fixed = scenario.tau ? *scenario.tau
                                        : ScheduleVector::Zero(static_cast<Eigen::Index>(
                                              scenario.catalog.size()));
    const auto flavor = parse_flavor(common.flavor);
    const auto problem = scenario.schedule_problem(flavor);

    std::cerr << "sweep: " << spec.range_i.count << " x " << spec.range_j.count
              << " cells over tau_" << (spec.axis_i + 1) << " x tau_" << (spec.axis_j + 1)
              << " (" << common.flavor << ")\n";
    const auto result = sweep_2d(problem, spec.axis_i, spec.axis_j, fixed, spec.range_i,
                                 spec.range_j, flavor, common.threads);
    const auto exported = export_sweep(result, spec.cap);

    std::string table_path = common.out.empty() ? scenario.output.sweep : common.out;
    if (table_path.empty()) table_path = "sweep.csv";
    write_file(table_path, exported.table);
    write_file(table_path + ".meta.json", exported.metadata.dump(2) + "\n");
    std::cerr << "sweep: wrote " << table_path << " ("
              << exported.metadata["capped_cells"].size() << " capped cells)\n";
    return kExitOk;
}

int cmd_schedule(const Scenario& scenario, const CommonOptions& common,
                 std::optional<int> starts, std::optional<std::uint64_t> seed,
                 std::optional<int> max_iterations) {
    AscentConfig config = scenario.ascent;
    if (starts) config.multistart_count = *starts;
    if (seed) config.seed = *seed;
    if (max_iterations) config.max_iterations = *max_iterations;
    config.threads = common.threads;

    const auto problem = scenario.schedule_problem(parse_flavor(common.flavor));
    const auto solution = optimize(problem, config);

    std::cout << "best objective: ";
    if (std::isinf(solution.objective))
        std::cout << "inf (singular schedule: estimation error unbounded)";
    else
        std::cout << solution.objective;
    std::cout << "\n  tau* = [";
    for (Eigen::Index i = 0; i < solution.tau_star.size(); ++i)
        std::cout << (i ? ", " : "") << solution.tau_star[i];
    std::cout << "]\n  termination: " << to_string(solution.termination) << " (start "
              << solution.start_index << ")\n";

    const std::string out = common.out.empty() ? scenario.output.schedule : common.out;
    if (!out.empty()) write_file(out, to_json(solution).dump(2) + "\n");
    return kExitOk;
}

int cmd_simulate(const Scenario& scenario, const CommonOptions& common,
                 std::size_t trials, std::uint64_t seed, const std::string& dump_trials,
                 const std::string& trace_out) {
    const auto& tau = scenario.require_tau();
    const auto [report, bound] =
        monte_carlo(scenario.catalog, tau, scenario.grid, scenario.noise, scenario.weights,
                    scenario.require_feasible(), trials, seed, scenario.ml, common.threads);

    std::cout << "bound " << bound.value << " vs empirical weighted MSE "
              << report.weighted_mse << " +/- " << report.standard_error << " ("
              << trials << " trials)\n";

    const std::string report_path =
        common.out.empty() ? scenario.output.report : common.out;
    const std::string trials_path =
        dump_trials.empty() ? scenario.output.trials : dump_trials;
    const std::string trace_path = trace_out.empty() ? scenario.output.trace : trace_out;
    if (!report_path.empty())
        write_file(report_path, to_json(report, bound).dump(2) + "\n");
    if (!trials_path.empty()) write_file(trials_path, export_trials(report));
    if (!trace_path.empty()) {
        const auto clean = aggregate(scenario.catalog, tau, scenario.grid);
        const auto measurement =
            generate(scenario.catalog, tau, scenario.grid, scenario.noise, seed);
        write_file(trace_path, export_trace(scenario.grid, clean, measurement.y));
    }
    return kExitOk;
}

int cmd_catalog_validate(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "error: cannot open " << path << "\n";
        return kExitUsage;
    }
    const auto catalog = parse_catalog(in);
    std::cout << "ok: " << catalog.size() << " signatures";
    for (const auto& entry : catalog) std::cout << " " << entry.label;
    std::cout << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Estimation-error lower bounds for load monitoring and "
                 "privacy-preserving appliance schedules"};
    app.require_subcommand(1);

    CommonOptions common;
    std::string theorem = "thm1";
    std::string bias_term = "as_stated";
    std::optional<std::size_t> axis_i, axis_j, resolution;
    std::optional<std::pair<double, double>> range_i, range_j;
    std::optional<double> cap;
    std::optional<int> starts, max_iterations;
    std::optional<std::uint64_t> schedule_seed;
    std::size_t trials = 500;
    std::uint64_t sim_seed = 1;
    std::string dump_trials, trace_out, catalog_path;

    auto add_common = [&](CLI::App* cmd, bool needs_flavor = true) {
        cmd->add_option("--scenario", common.scenario_path, "scenario file (JSON)")
            ->required();
        cmd->add_option("--threads", common.threads, "worker cap (0 = hardware)");
        cmd->add_option("--out", common.out, "output file path");
        if (needs_flavor)
            cmd->add_option("--flavor", common.flavor, "correlation flavor")
                ->check(CLI::IsMember({"discrete", "continuous"}));
    };

    auto* bound = app.add_subcommand("bound", "evaluate an estimation-error lower bound");
    add_common(bound, false);
    bound->add_option("--theorem", theorem, "which bound to evaluate")
        ->check(CLI::IsMember({"thm1", "thm2", "cor1", "cor2"}));
    bound->add_option("--bias-term", bias_term, "additive term of the biased bounds")
        ->check(CLI::IsMember({"as_stated", "centered"}));

    auto* sweep = app.add_subcommand("sweep", "bound surface over two schedule entries");
    add_common(sweep);
    sweep->add_option("--axis-i", axis_i, "first swept appliance (1-based)");
    sweep->add_option("--axis-j", axis_j, "second swept appliance (1-based)");
    sweep->add_option("--range-i", range_i, "lo hi for the first axis");
    sweep->add_option("--range-j", range_j, "lo hi for the second axis");
    sweep->add_option("--resolution", resolution, "points per axis");
    sweep->add_option("--cap", cap, "export ceiling for diverging cells");

    auto* schedule =
        app.add_subcommand("schedule", "search for a privacy-preserving schedule");
    add_common(schedule);
    schedule->add_option("--starts", starts, "multistart count");
    schedule->add_option("--seed", schedule_seed, "multistart seed");
    schedule->add_option("--max-iter", max_iterations, "iteration cap per start");

    auto* simulate =
        app.add_subcommand("simulate", "Monte Carlo ML attacker vs the bound");
    add_common(simulate, false);
    simulate->add_option("--trials", trials, "number of Monte Carlo trials");
    simulate->add_option("--seed", sim_seed, "master seed");
    simulate->add_option("--dump-trials", dump_trials, "per-trial CSV path");
    simulate->add_option("--trace-out", trace_out, "aggregate time-series CSV path");

    auto* catalog = app.add_subcommand("catalog", "catalog file utilities");
    auto* validate = catalog->add_subcommand("validate", "parse and validate a catalog");
    validate->add_option("path", catalog_path, "catalog file")->required();
    catalog->require_subcommand(1);

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_catalog_validate(catalog_path);

        const Scenario scenario = load_scenario_file(common.scenario_path);
        if (bound->parsed())
            return cmd_bound(scenario, theorem, bias_term,
                             common.out.empty() ? scenario.output.bound : common.out);
        if (sweep->parsed())
            return cmd_sweep(scenario, common, axis_i, axis_j, range_i, range_j, resolution,
                             cap);
        if (schedule->parsed())
            return cmd_schedule(scenario, common, starts, schedule_seed, max_iterations);
        if (simulate->parsed())
            return cmd_simulate(scenario, common, trials, sim_seed, dump_trials, trace_out);
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what()
                  << " (achieved tolerance " << e.achieved_tolerance << ")\n";
        return kExitNumerical;
    } catch (const OptimizationFailedError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
