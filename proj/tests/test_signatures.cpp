#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "nilmbound/signature.hpp"
#include "helpers.hpp"

using namespace nilmbound;
using testing_support::TestRng;

TEST_CASE("evaluation is zero outside the support for every order", "[signatures]") {
    TestRng rng(101);
    const auto catalog = testing_support::demo_catalog();
    for (const auto& entry : catalog) {
        const double T = entry.signature.duration();
        for (int order = 0; order <= 2; ++order) {
            for (int m = 0; m < 10; ++m) {
                CHECK(entry.signature.eval(-rng.uniform(0.0, 100.0) - 1e-12, order) == 0.0);
                CHECK(entry.signature.eval(T + rng.uniform(0.0, 100.0) + 1e-12, order) == 0.0);
            }
        }
    }
    const LoadSignature any(RaisedCosinePulse{2.0, 3.0});
    CHECK(eval(any, -1.0, 0) == 0.0);
    CHECK(eval(any, any.duration() + 5.0, 1) == 0.0);
}

TEST_CASE("raised cosine hits its closed-form values", "[signatures]") {
    const LoadSignature sig(RaisedCosinePulse{1.0, 2.0});
    CHECK(eval(sig, 1.0, 0) == Catch::Approx(1.0).epsilon(1e-14));  // peak a at T/2
    CHECK(eval(sig, 0.5, 0) == Catch::Approx(0.5).epsilon(1e-14));
    const double pi = std::numbers::pi;
    CHECK(eval(sig, 0.5, 1) == Catch::Approx(0.5 * pi).epsilon(1e-14));
    CHECK(eval(sig, 1.0, 2) == Catch::Approx(-0.5 * pi * pi).margin(1e-13));
}

TEST_CASE("derivative orders agree with central finite differences", "[signatures]") {
    const auto catalog = testing_support::demo_catalog();
    TestRng rng(77);
    for (const auto& entry : catalog) {
        const auto& sig = entry.signature;
        const double T = sig.duration();
        const double h = 1e-5 * T;
        int accepted = 0;
        while (accepted < 100) {
            const double t = rng.uniform(0.01 * T, 0.99 * T);
            bool near_break = false;
            for (double b : sig.derivative_breakpoints())
                if (std::abs(t - b) < 10.0 * h) near_break = true;
            if (near_break) continue;
            ++accepted;
            for (int order = 0; order <= 1; ++order) {
                const double fd = testing_support::central_difference(
                    [&](double x) { return sig.eval(x, order); }, t, h);
                const double analytic = sig.eval(t, order + 1);
                const double denom = std::max(std::abs(analytic), 1e-3);
                CHECK(std::abs(fd - analytic) / denom < 1e-6);
            }
        }
    }
}

TEST_CASE("amplitude scaling is exact closure", "[signatures]") {
    const double T = 2.5;
    for (double c : {2.0, 0.25, 8.0}) {
        const LoadSignature base(RaisedCosinePulse{1.3, T});
        const LoadSignature scaled(RaisedCosinePulse{c * 1.3, T});
        for (double t : {0.1, 0.7, 1.9, 2.2})
            for (int order = 0; order <= 2; ++order)
                CHECK(scaled.eval(t, order) == c * base.eval(t, order));
    }
    // Non-dyadic factors are exact to rounding.
    const LoadSignature base(SmoothTrapezoid{1.0, 3.0, 0.8, 1.1});
    const LoadSignature scaled(SmoothTrapezoid{1.7, 3.0, 0.8, 1.1});
    for (double t : {0.3, 1.5, 2.4})
        for (int order = 0; order <= 2; ++order)
            CHECK(scaled.eval(t, order) ==
                  Catch::Approx(1.7 * base.eval(t, order)).epsilon(1e-15).margin(1e-300));
}

TEST_CASE("invalid derivative order is rejected", "[signatures]") {
    const LoadSignature sig(RaisedCosinePulse{1.0, 1.0});
    CHECK_THROWS_AS(sig.eval(0.5, 3), std::invalid_argument);
    CHECK_THROWS_AS(sig.eval(0.5, -1), std::invalid_argument);
}

TEST_CASE("piecewise polynomial evaluates with the right-limit convention",
          "[signatures]") {
    // Smoothstep up on [0,1], mirrored down on [1,2]: C1 on the real line.
    PiecewisePolynomial pw;
    pw.pieces.push_back({1.0, {0.0, 0.0, 3.0, -2.0}});        // 3s^2 - 2s^3
    pw.pieces.push_back({2.0, {1.0, 0.0, -3.0, 2.0}});        // 1 - 3s^2 + 2s^3
    const LoadSignature sig{LoadSignature::Shape{pw}};

    CHECK(sig.eval(0.5, 0) == Catch::Approx(0.5));
    CHECK(sig.eval(1.0, 0) == Catch::Approx(1.0));
    CHECK(sig.eval(1.5, 0) == Catch::Approx(0.5));
    // f'' jumps at t=1: left piece gives 6-12s -> -6, right piece -6+12s -> -6.
    CHECK(sig.eval(1.0, 2) == Catch::Approx(-6.0));
    // Right-limit convention at the support end: zero for all orders.
    CHECK(sig.eval(2.0, 0) == 0.0);
    CHECK(sig.eval(2.0, 2) == 0.0);
}

TEST_CASE("catalog validation rejects discontinuous pieces", "[signatures]") {
    PiecewisePolynomial pw;
    pw.pieces.push_back({1.0, {0.0, 0.0, 3.0, -2.0}});
    pw.pieces.push_back({2.0, {1.1, 0.0, -3.0, 2.0}});  // value jumps by 0.1 at t=1
    std::vector<SignatureCatalog::Entry> entries;
    entries.push_back({"broken", LoadSignature{LoadSignature::Shape{pw}}});
    CHECK_THROWS_AS(SignatureCatalog(std::move(entries)), ValidationError);

    PiecewisePolynomial kinked;
    kinked.pieces.push_back({1.0, {0.0, 1.0, 0.0}});  // f' = 1 at the right edge
    std::vector<SignatureCatalog::Entry> entries2;
    entries2.push_back({"kinked", LoadSignature{LoadSignature::Shape{kinked}}});
    CHECK_THROWS_WITH(SignatureCatalog(std::move(entries2)),
                      Catch::Matchers::ContainsSubstring("kinked"));
}

TEST_CASE("catalog enforces unique labels and non-emptiness", "[signatures]") {
    std::vector<SignatureCatalog::Entry> dup;
    dup.push_back({"a", LoadSignature(RaisedCosinePulse{1.0, 1.0})});
    dup.push_back({"a", LoadSignature(RaisedCosinePulse{2.0, 1.0})});
    CHECK_THROWS_AS(SignatureCatalog(std::move(dup)), ValidationError);
    CHECK_THROWS_AS(SignatureCatalog(std::vector<SignatureCatalog::Entry>{}), ValidationError);
}

TEST_CASE("malformed shape parameters are rejected", "[signatures]") {
    CHECK_THROWS_AS(LoadSignature(RaisedCosinePulse{-1.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(LoadSignature(RaisedCosinePulse{1.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(LoadSignature(SmoothTrapezoid{1.0, 1.0, 0.6, 0.6}), ValidationError);
    PiecewisePolynomial degenerate;
    degenerate.pieces.push_back({1.0, {0.0, 1.0}});  // degree < 2
    CHECK_THROWS_AS(LoadSignature{LoadSignature::Shape{degenerate}}, ValidationError);
}
