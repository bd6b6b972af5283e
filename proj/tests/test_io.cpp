#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <limits>

#include "nilmbound/catalog_io.hpp"
#include "nilmbound/scenario.hpp"
#include "nilmbound/serialize.hpp"
#include "helpers.hpp"

using namespace nilmbound;

namespace {

const std::filesystem::path kScenarioDir = NILMBOUND_SCENARIO_DIR;

}  // namespace

TEST_CASE("catalog parsing round trip", "[io]") {
    const std::string text = R"([
        // a comment, allowed and ignored
        {"label": "rc", "kind": "raised_cosine_pulse", "amplitude": 1.0, "duration": 2.0},
        {"label": "tz", "kind": "smooth_trapezoid", "amplitude": 1.5, "duration": 3.0,
         "rise": 0.5, "fall": 0.75},
        {"label": "dp", "kind": "double_pulse", "amplitude": 0.8, "pulse_width": 0.5,
         "separation": 0.25}
    ])";
    const auto catalog = parse_catalog(text);
    REQUIRE(catalog.size() == 3);
    CHECK(catalog.label(0) == "rc");
    CHECK(catalog.signature(1).duration() == 3.0);
    CHECK(catalog.signature(2).duration() == Catch::Approx(1.25));
}

TEST_CASE("catalog parser reports locations and rejects bad input", "[io]") {
    SECTION("syntax error carries the line number") {
        try {
            parse_catalog("[\n{\"label\": }\n]");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line") != std::string::npos);
        }
    }
    SECTION("unknown fields are rejected") {
        CHECK_THROWS_WITH(
            parse_catalog(R"([{"label": "x", "kind": "raised_cosine_pulse",
                              "amplitude": 1.0, "duration": 2.0, "ramp": 0.1}])"),
            Catch::Matchers::ContainsSubstring("unknown field 'ramp'"));
    }
    SECTION("unknown kind is rejected") {
        CHECK_THROWS_AS(parse_catalog(R"([{"label": "x", "kind": "square"}])"), ParseError);
    }
    SECTION("missing parameters are named") {
        CHECK_THROWS_WITH(
            parse_catalog(R"([{"label": "x", "kind": "raised_cosine_pulse",
                              "amplitude": 1.0}])"),
            Catch::Matchers::ContainsSubstring("duration"));
    }
    SECTION("piecewise discontinuity names the signature and breakpoint") {
        const std::string text = R"([{"label": "jumpy", "kind": "piecewise_polynomial",
            "pieces": [
                {"end": 1.0, "coefficients": [0.0, 0.0, 3.0, -2.0]},
                {"end": 2.0, "coefficients": [1.1, 0.0, -3.0, 2.0]}
            ]}])";
        CHECK_THROWS_WITH(parse_catalog(text),
                          Catch::Matchers::ContainsSubstring("jumpy") &&
                              Catch::Matchers::ContainsSubstring("1.0"));
    }
}

TEST_CASE("shipped demo scenario loads and matches the in-code fixture", "[io]") {
    const auto scenario = load_scenario_file(kScenarioDir / "demo.json");
    REQUIRE(scenario.catalog.size() == 3);
    CHECK(scenario.noise.kind() == NoiseKind::Gaussian);
    CHECK(scenario.noise.scale() == 0.1);
    CHECK(scenario.grid.size() == 21);
    CHECK(scenario.grid[1] == 0.5);
    REQUIRE(scenario.tau.has_value());
    REQUIRE(scenario.feasible.has_value());

    const auto reference = testing_support::demo_catalog();
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(scenario.catalog.label(i) == reference.label(i));
        for (double t : {0.3, 1.1, 2.7, 4.9})
            for (int order = 0; order <= 2; ++order)
                CHECK(scenario.catalog.signature(i).eval(t, order) ==
                      reference.signature(i).eval(t, order));
    }
}

TEST_CASE("shipped interchangeable scenario is singular at its schedule", "[io]") {
    const auto scenario = load_scenario_file(kScenarioDir / "interchangeable.json");
    const auto r = r_discrete(scenario.catalog, scenario.require_tau(), scenario.grid);
    const auto bound = bound_unbiased(r, scenario.weights,
                                      fisher_information(scenario.noise));
    CHECK(bound.singular);
    CHECK(std::isinf(bound.value));
}

TEST_CASE("scenario validation catches inconsistent dimensions", "[io]") {
    const std::string base = R"({
        "catalog": [
            {"label": "a", "kind": "raised_cosine_pulse", "amplitude": 1.0, "duration": 2.0}
        ],
        "noise": {"kind": "gaussian", "scale": 0.1},
        "grid": {"start": 0.0, "step": 0.5, "end": 10.0},
        "weights": [1.0, 2.0]
    })";
    CHECK_THROWS_AS(load_scenario(base), ValidationError);

    CHECK_THROWS_WITH(load_scenario(R"({"noise": {"kind": "gaussian", "scale": 0.1}})"),
                      Catch::Matchers::ContainsSubstring("catalog"));
    CHECK_THROWS_WITH(
        load_scenario(R"({
            "catalog": [{"label": "a", "kind": "raised_cosine_pulse",
                         "amplitude": 1.0, "duration": 2.0}],
            "noise": {"kind": "gaussian", "scale": 0.1},
            "grid": {"start": 0.0, "step": 0.5, "end": 10.0},
            "weights": [1.0],
            "typo_field": 1
        })"),
        Catch::Matchers::ContainsSubstring("typo_field"));
}

TEST_CASE("bound results serialize and parse, including the singular sentinel", "[io]") {
    BoundResult finite;
    finite.theorem = BoundTheorem::Thm1;
    finite.value = 0.0025;
    finite.fisher_scalar = 100.0;
    finite.smallest_eigenvalue = 4.0;
    finite.condition_estimate = 1.7;
    const auto round = bound_result_from_json(to_json(finite));
    CHECK(round.value == finite.value);
    CHECK(round.theorem == finite.theorem);

    BoundResult singular;
    singular.theorem = BoundTheorem::Cor2;
    singular.value = std::numeric_limits<double>::infinity();
    singular.singular = true;
    singular.fisher_scalar = 100.0;
    singular.condition_estimate = std::numeric_limits<double>::infinity();
    const auto j = to_json(singular);
    CHECK(j["value"] == "inf");
    const auto back = bound_result_from_json(j);
    CHECK(std::isinf(back.value));
    CHECK(back.singular);
}

TEST_CASE("sweep tables round trip through export and import", "[io]") {
    SweepResult sweep;
    sweep.axis_i = 0;
    sweep.axis_j = 1;
    sweep.flavor = CorrelationFlavor::Discrete;
    sweep.grid_i = {0.0, 1.0};
    sweep.grid_j = {0.0, 0.5, 1.0};
    sweep.values.resize(2, 3);
    sweep.values << 1.0, 2.0, std::numeric_limits<double>::infinity(), 4.0, 5.0e7, 6.0;

    const auto exported = export_sweep(sweep, 1e6);
    CHECK(exported.metadata["capped_cells"].size() == 2);  // the inf and the 5e7
    const auto back = import_sweep(exported.table, &exported.metadata);
    CHECK(back.grid_i == sweep.grid_i);
    CHECK(back.grid_j == sweep.grid_j);
    CHECK(std::isinf(back.values(0, 2)));
    CHECK(back.values(1, 1) == 5.0e7);
    CHECK(back.values(0, 0) == 1.0);

    // uncapped export writes the literal sentinel
    const auto raw = export_sweep(sweep, std::numeric_limits<double>::infinity());
    CHECK(raw.table.find("inf") != std::string::npos);
    const auto back_raw = import_sweep(raw.table);
    CHECK(std::isinf(back_raw.values(0, 2)));
}

TEST_CASE("trial dumps and trace exports have the promised shape", "[io]") {
    EstimatorReport report;
    report.trials = 2;
    report.tau_hats.resize(2, 2);
    report.tau_hats << 1.0, 2.0, 1.1, 2.1;
    report.squared_errors = {0.01, 0.02};
    report.weighted_mse = 0.015;
    report.standard_error = 0.005;
    report.empirical_bias = Eigen::VectorXd::Zero(2);

    const std::string trials = export_trials(report);
    CHECK(trials.find("trial,tau_hat_1,tau_hat_2,weighted_sq_error") == 0);
    CHECK(std::count(trials.begin(), trials.end(), '\n') == 3);  // header + 2 rows

    const auto grid = SamplingGrid::from_range(0.0, 1.0, 2.0);
    Eigen::VectorXd clean(3), noisy(3);
    clean << 0.0, 1.0, 0.5;
    noisy << 0.1, 0.9, 0.6;
    const std::string trace = export_trace(grid, clean, noisy);
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 4);  // header + k rows
    CHECK(trace.find("t,noiseless,noisy") == 0);

    // both delimited exports read back through their own readers
    const auto [tau_hats, errors] = import_trials(trials, 2);
    CHECK(tau_hats == report.tau_hats);
    CHECK(errors == report.squared_errors);
    const auto trace_back = import_trace(trace);
    CHECK(trace_back.noiseless == clean);
    CHECK(trace_back.noisy == noisy);
    CHECK(trace_back.times == grid.times());
}

TEST_CASE("solution serialization round trips through its reader", "[io]") {
    ScheduleProblem problem{testing_support::twins_catalog(),
                            WeightMatrix::identity(3),
                            testing_support::demo_grid(),
                            NoiseModel::gaussian(0.1),
                            FeasibleSet({{0, 10}, {0, 10}, {0, 10}}, 10.0)};
    AscentConfig config;
    config.multistart_count = 4;
    config.max_iterations = 40;
    const auto solution = optimize(problem, config);
    const auto j = to_json(solution);
    CHECK(j["per_start_summaries"].size() == 4);
    if (std::isinf(solution.objective)) CHECK(j["objective"] == "inf");

    const auto back = solution_from_json(j);
    CHECK(back.tau_star == solution.tau_star);
    CHECK(back.objective == solution.objective);
    CHECK(back.termination == solution.termination);
    CHECK(back.trace == solution.trace);
    REQUIRE(back.starts.size() == solution.starts.size());
    for (std::size_t s = 0; s < back.starts.size(); ++s)
        CHECK(back.starts[s].final == solution.starts[s].final);
}

TEST_CASE("estimator reports round trip through their reader", "[io]") {
    EstimatorReport report;
    report.trials = 3;
    report.weighted_mse = 0.012;
    report.standard_error = 0.001;
    report.empirical_bias = Eigen::VectorXd::Constant(2, -0.003);
    BoundResult bound;
    bound.theorem = BoundTheorem::Thm1;
    bound.value = 0.01;
    bound.fisher_scalar = 100.0;
    bound.smallest_eigenvalue = 2.0;
    bound.condition_estimate = 3.0;

    const auto [report_back, bound_back] = report_from_json(to_json(report, bound));
    CHECK(report_back.trials == report.trials);
    CHECK(report_back.weighted_mse == report.weighted_mse);
    CHECK(report_back.standard_error == report.standard_error);
    CHECK(report_back.empirical_bias == report.empirical_bias);
    CHECK(bound_back.value == bound.value);
}
