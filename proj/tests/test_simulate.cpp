#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nilmbound/simulate.hpp"
#include "helpers.hpp"

using namespace nilmbound;
using testing_support::TestRng;

namespace {

SignatureCatalog pair_catalog() {
    std::vector<SignatureCatalog::Entry> entries;
    entries.push_back({"dishwasher", LoadSignature(RaisedCosinePulse{1.0, 5.0})});
    entries.push_back({"kettle", LoadSignature(SmoothTrapezoid{1.5, 3.5, 1.2, 1.6})});
    return SignatureCatalog(std::move(entries));
}

}  // namespace

TEST_CASE("generation adds the configured noise to the aggregate", "[simulate]") {
    const auto catalog = testing_support::demo_catalog();
    const auto grid = testing_support::demo_grid();
    ScheduleVector tau(3);
    tau << 0.5, 4.5, 5.0;
    const auto noise = NoiseModel::gaussian(0.1);

    SECTION("zero-noise debug mode returns the exact aggregate") {
        const auto m = generate(catalog, tau, grid, noise, 1, /*zero_noise=*/true);
        CHECK(m.y == aggregate(catalog, tau, grid));
    }
    SECTION("off-grid schedules leave pure noise") {
        ScheduleVector far(3);
        far << 50.0, 60.0, 70.0;
        const auto m = generate(catalog, far, grid, noise, 5);
        const auto w = sample(noise, 5, grid.size());
        for (std::size_t l = 0; l < grid.size(); ++l)
            CHECK(m.y[static_cast<Eigen::Index>(l)] == w[l]);
    }
    SECTION("determinism per seed") {
        const auto a = generate(catalog, tau, grid, noise, 9);
        const auto b = generate(catalog, tau, grid, noise, 9);
        CHECK(a.y == b.y);
    }
    SECTION("noise variance matches the model") {
        // pool the residuals of many short draws
        const auto clean = aggregate(catalog, tau, grid);
        double sum = 0.0, sum_sq = 0.0;
        std::size_t count = 0;
        for (std::uint64_t seed = 0; seed < 5000; ++seed) {
            const auto m = generate(catalog, tau, grid, noise, seed);
            for (Eigen::Index l = 0; l < m.y.size(); ++l) {
                const double r = m.y[l] - clean[l];
                sum += r;
                sum_sq += r * r;
                ++count;
            }
        }
        const double mean = sum / static_cast<double>(count);
        const double var = sum_sq / static_cast<double>(count) - mean * mean;
        CHECK(var == Catch::Approx(0.01).epsilon(0.01));
    }
}

TEST_CASE("noiseless likelihood search recovers the schedule", "[simulate]") {
    const auto catalog = pair_catalog();
    const auto grid = testing_support::demo_grid();
    const auto noise = NoiseModel::gaussian(0.1);
    const FeasibleSet box({{0.0, 10.0}, {0.0, 10.0}}, 10.0);

    ScheduleVector tau(2);
    tau << 1.3, 5.9;
    const auto m = generate(catalog, tau, grid, noise, 0, /*zero_noise=*/true);
    const auto hat = ml_estimate(m, catalog, noise, box);
    CHECK(std::abs(hat[0] - tau[0]) < 1e-4);
    CHECK(std::abs(hat[1] - tau[1]) < 1e-4);
}

TEST_CASE("single appliance with the true start on the lattice is recovered exactly",
          "[simulate]") {
    std::vector<SignatureCatalog::Entry> entries;
    entries.push_back({"kettle", LoadSignature(SmoothTrapezoid{1.5, 3.5, 1.2, 1.6})});
    const SignatureCatalog catalog(std::move(entries));
    const auto grid = testing_support::demo_grid();
    const auto noise = NoiseModel::gaussian(0.1);
    const FeasibleSet box({{0.0, 6.5}}, std::nullopt);

    // pick the 25th lattice point as the truth so the argmax is bit-exact
    const double step = 0.05;
    const double truth = 0.0 + 25 * step;
    ScheduleVector tau(1);
    tau << truth;
    const auto m = generate(catalog, tau, grid, noise, 0, /*zero_noise=*/true);
    const auto lattice_hat = ml_lattice_search(m, catalog, noise, box, step);
    CHECK(lattice_hat[0] == truth);
}

TEST_CASE("laplace likelihood search works through the same interface", "[simulate]") {
    const auto catalog = pair_catalog();
    const auto grid = testing_support::demo_grid();
    const auto noise = NoiseModel::laplace(0.02);
    const FeasibleSet box({{0.0, 10.0}, {0.0, 10.0}}, 10.0);
    ScheduleVector tau(2);
    tau << 2.2, 5.1;
    const auto m = generate(catalog, tau, grid, noise, 11);
    const auto hat = ml_estimate(m, catalog, noise, box);
    CHECK(std::abs(hat[0] - tau[0]) < 0.2);
    CHECK(std::abs(hat[1] - tau[1]) < 0.2);
}

TEST_CASE("monte carlo reports are deterministic", "[simulate]") {
    const auto catalog = pair_catalog();
    const auto grid = testing_support::demo_grid();
    const FeasibleSet box({{0.0, 10.0}, {0.0, 10.0}}, 10.0);
    ScheduleVector tau(2);
    tau << 1.0, 5.5;
    MlSearchConfig ml;
    ml.lattice_step = 0.1;

    const auto [r1, b1] = monte_carlo(catalog, tau, grid, NoiseModel::gaussian(0.1),
                                      WeightMatrix::identity(2), box, 2, 33, ml);
    const auto [r2, b2] = monte_carlo(catalog, tau, grid, NoiseModel::gaussian(0.1),
                                      WeightMatrix::identity(2), box, 2, 33, ml);
    CHECK(r1.weighted_mse == r2.weighted_mse);
    CHECK(r1.tau_hats == r2.tau_hats);
    CHECK(b1.value == b2.value);

    const auto [r4, b4] = monte_carlo(catalog, tau, grid, NoiseModel::gaussian(0.1),
                                      WeightMatrix::identity(2), box, 16, 33, ml, 4);
    const auto [r5, b5] = monte_carlo(catalog, tau, grid, NoiseModel::gaussian(0.1),
                                      WeightMatrix::identity(2), box, 16, 33, ml, 1);
    CHECK(r4.weighted_mse == r5.weighted_mse);
    CHECK(r4.tau_hats == r5.tau_hats);
}

TEST_CASE("empirical error respects the unbiased bound", "[simulate]") {
    const auto catalog = pair_catalog();
    const auto grid = testing_support::demo_grid();
    const FeasibleSet box({{0.0, 10.0}, {0.0, 10.0}}, 10.0);
    ScheduleVector tau(2);
    tau << 1.0, 5.5;
    MlSearchConfig ml;
    ml.lattice_step = 0.1;

    const auto [report, bound] =
        monte_carlo(catalog, tau, grid, NoiseModel::gaussian(0.05),
                    WeightMatrix::identity(2), box, 120, 202, ml, 0);
    CHECK_FALSE(bound.singular);
    CHECK(report.weighted_mse >= bound.value - 3.0 * report.standard_error);
    // near-unbiasedness at this noise level
    const double per_axis_se =
        std::sqrt(report.weighted_mse / 2.0 / static_cast<double>(report.trials));
    CHECK(report.empirical_bias.norm() < 3.0 * per_axis_se * std::sqrt(2.0));
}

TEST_CASE("random well-conditioned scenarios respect the bound at high snr",
          "[simulate][slow]") {
    TestRng rng(55);
    const auto grid = testing_support::demo_grid();
    int scenarios = 0;
    while (scenarios < 10) {
        const double d1 = rng.uniform(2.5, 5.0);
        const double d2 = rng.uniform(2.0, 4.0);
        std::vector<SignatureCatalog::Entry> entries;
        entries.push_back({"a", LoadSignature(RaisedCosinePulse{rng.uniform(0.5, 2.0), d1})});
        entries.push_back(
            {"b", LoadSignature(SmoothTrapezoid{rng.uniform(0.5, 2.0), d2, 0.3 * d2, 0.4 * d2})});
        const SignatureCatalog catalog(std::move(entries));
        ScheduleVector tau(2);
        tau << rng.uniform(0.5, 4.0), rng.uniform(0.5, 5.0);
        const auto r = r_discrete(catalog, tau, grid);
        if (r.condition_estimate() > 100.0) continue;
        ++scenarios;
        const FeasibleSet box(
            {{std::max(0.0, tau[0] - 1.0), tau[0] + 1.0},
             {std::max(0.0, tau[1] - 1.0), tau[1] + 1.0}},
            std::nullopt);
        MlSearchConfig ml;
        ml.lattice_step = 0.1;
        const auto [report, bound] =
            monte_carlo(catalog, tau, grid, NoiseModel::gaussian(0.02),
                        WeightMatrix::identity(2), box, 60, 900 + scenarios, ml, 0);
        CHECK(report.weighted_mse >= bound.value - 3.0 * report.standard_error);
    }
}

TEST_CASE("estimation error shrinks with the noise level", "[simulate][slow]") {
    const auto catalog = pair_catalog();
    const auto grid = testing_support::demo_grid();
    const FeasibleSet box({{0.0, 4.0}, {2.0, 7.0}}, std::nullopt);
    ScheduleVector tau(2);
    tau << 1.0, 5.5;
    MlSearchConfig ml;
    ml.lattice_step = 0.1;

    double previous = std::numeric_limits<double>::infinity();
    for (double sigma : {0.2, 0.1, 0.05, 0.01}) {
        const auto [report, bound] =
            monte_carlo(catalog, tau, grid, NoiseModel::gaussian(sigma),
                        WeightMatrix::identity(2), box, 60, 404, ml, 0);
        CHECK(report.weighted_mse < previous * 1.05);  // monotone within noise
        previous = report.weighted_mse;
    }
}

TEST_CASE("monte carlo rejects degenerate trial counts", "[simulate]") {
    const auto catalog = pair_catalog();
    ScheduleVector tau(2);
    tau << 1.0, 5.0;
    CHECK_THROWS_AS(monte_carlo(catalog, tau, testing_support::demo_grid(),
                                NoiseModel::gaussian(0.1), WeightMatrix::identity(2),
                                FeasibleSet({{0, 8}, {0, 8}}, std::nullopt), 1, 0),
                    std::invalid_argument);
}
