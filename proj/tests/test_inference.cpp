#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "surplus/inference.hpp"
#include "surplus/simbench.hpp"

using namespace surplus;

TEST_CASE("normal quantile") {
    // reference values accurate to ~1e-12
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
    CHECK(std::abs(normal_quantile(0.95) - 1.6448536269514722) < 1e-8);
    CHECK(std::abs(normal_quantile(0.975) - 1.959963984540054) < 1e-8);
    CHECK(std::abs(normal_quantile(0.995) - 2.5758293035489004) < 1e-8);
    CHECK(std::abs(normal_quantile(0.75) - 0.6744897501960817) < 1e-8);
    CHECK(std::abs(normal_quantile(1e-6) + 4.753424308822899) < 1e-7);
    CHECK(normal_quantile(0.025) == doctest::Approx(-normal_quantile(0.975)).epsilon(1e-12));
    CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
    CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
}

TEST_CASE("eif variance") {
    SUBCASE("identical centered samples are degenerate") {
        EifSamples s;
        s.psi = {0.0, 0.0, 0.0};
        CHECK(eif_variance(s) == doctest::Approx(0.0));
    }
    SUBCASE("two-point variance") {
        // psi values a=0, b=2 centered at 1 -> {-1, +1} -> variance 1
        EifSamples s;
        s.psi = {-1.0, 1.0};
        CHECK(eif_variance(s) == doctest::Approx(1.0));
    }
    SUBCASE("needs two samples") {
        EifSamples s;
        s.psi = {0.3};
        CHECK_THROWS_AS(static_cast<void>(eif_variance(s)), std::invalid_argument);
    }
}

TEST_CASE("confidence interval construction") {
    SUBCASE("degenerate variance") {
        const ConfidenceInterval ci = confidence_interval(3.5, 0.0, 100, 0.1);
        CHECK(ci.low == doctest::Approx(3.5));
        CHECK(ci.high == doctest::Approx(3.5));
        CHECK(ci.contains(3.5));
    }
    SUBCASE("alpha 0.10 quantile") {
        const ConfidenceInterval ci = confidence_interval(1.0, 400.0, 400, 0.1);
        CHECK(std::abs(ci.low - (1.0 - 1.6449)) < 1e-4);
        CHECK(std::abs(ci.high - (1.0 + 1.6449)) < 1e-4);
    }
    SUBCASE("alpha 0.05 quantile") {
        const ConfidenceInterval ci = confidence_interval(0.0, 900.0, 900, 0.05);
        CHECK(std::abs(ci.high - 1.9600) < 1e-4);
    }
    SUBCASE("width identity") {
        const ConfidenceInterval ci = confidence_interval(2.0, 7.3, 523, 0.08);
        CHECK(std::abs(ci.width() - 2.0 * ci.z * std::sqrt(7.3 / 523)) < 1e-12);
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(confidence_interval(0.0, 1.0, 10, 1.5), std::invalid_argument);
        CHECK_THROWS_AS(confidence_interval(0.0, -1.0, 10, 0.1), std::invalid_argument);
        CHECK_THROWS_AS(confidence_interval(0.0, 1.0, 0, 0.1), std::invalid_argument);
    }
}

TEST_CASE("degenerate intervals almost never cover") {
    // variance forced to zero: the interval is the point itself
    Rng rng(3);
    int hits = 0;
    for (int t = 0; t < 200; ++t) {
        const double point = rng.uniform();
        const ConfidenceInterval ci = confidence_interval(point, 0.0, 50, 0.1);
        if (ci.contains(0.5)) ++hits;
    }
    CHECK(hits == 0);
}

TEST_CASE("variance sandwich at reduced scale") {
    // EIF variance estimates track the spread of point estimates across
    // replications (the full-scale version runs in the acceptance suite)
    StudyConfig cfg;
    cfg.scenario = "ci_coverage";
    cfg.estimators = {"ACPW"};
    cfg.n_grid = {2000};
    cfg.reps = 60;
    cfg.master_seed = 19;
    cfg.mode = Mode::behavior;
    const RunReport report = run_study(cfg);
    const CellReport& cell = report.cell("ACPW", 2000);
    // mean squared CI half-width translates back to the mean EIF variance
    const double z = normal_quantile(0.95);
    double mean_var = 0.0;
    for (const RepRecord& r : cell.reps) {
        const double half = r.ci_width / 2.0;
        mean_var += half * half / (z * z) * 2000.0;
    }
    mean_var /= cell.reps.size();
    const double sample_var = cell.variance * 2000.0;
    CHECK(mean_var / sample_var > 0.70);
    CHECK(mean_var / sample_var < 1.40);
}

TEST_CASE("ci width scales as the root of the sample size") {
    StudyConfig cfg;
    cfg.scenario = "ci_coverage";
    cfg.estimators = {"ACPW"};
    cfg.n_grid = {1000, 4000};
    cfg.reps = 50;
    cfg.master_seed = 23;
    cfg.mode = Mode::behavior;
    const RunReport report = run_study(cfg);
    const double w1 = report.cell("ACPW", 1000).mean_ci_width;
    const double w4 = report.cell("ACPW", 4000).mean_ci_width;
    CHECK(w4 / w1 > 0.5 * 0.85);
    CHECK(w4 / w1 < 0.5 * 1.15);
}

TEST_CASE("coverage experiment at alpha one half") {
    const auto cov = coverage_experiment("ci_coverage", 600, 200, 0.5, 29, Mode::behavior);
    // binomial three-sigma band around 0.5 at 200 replications
    for (const auto& [est, c] : cov) {
        INFO(est);
        CHECK(std::abs(c - 0.5) < 0.11);
    }
}
