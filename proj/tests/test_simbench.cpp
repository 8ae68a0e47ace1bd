#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "surplus/simbench.hpp"

using namespace surplus;

TEST_CASE("scenario registry") {
    const auto names = scenario_names();
    REQUIRE(names.size() == 6);
    for (const char* expected : {"demand_misspec", "propensity_misspec", "convergence",
                                 "inequality_r05", "ci_coverage", "partial_id_gap"})
        CHECK(std::find(names.begin(), names.end(), expected) != names.end());
    CHECK_THROWS_AS(static_cast<void>(find_scenario("nope")), std::invalid_argument);
}

TEST_CASE("generated valuations respect interval arithmetic") {
    const Scenario& scn = find_scenario("demand_misspec");
    const auto [v_lo, v_hi] = scn.valuation_range();
    // V = 90 + 3000 beta x^2 + eps with |beta| <= 0.1, x^2 <= 0.25, eps <= 10
    CHECK(v_lo == doctest::Approx(15.0));
    CHECK(v_hi == doctest::Approx(175.0));

    const GenerateResult g = generate(scn, 300, 99);
    for (double v : g.valuations) {
        CHECK(v >= v_lo - 1e-9);
        CHECK(v <= v_hi + 1e-9);
    }
    // conditional support tracks the drawn coefficient
    CHECK(g.data.support().lo >= v_lo - scn.pad - 1e-9);
    CHECK(g.data.support().hi <= v_hi + scn.pad + 1e-9);
}

TEST_CASE("outcomes are threshold purchases") {
    const GenerateResult g = generate(find_scenario("convergence"), 500, 3);
    for (int i = 0; i < g.data.n(); ++i)
        CHECK(g.data.outcome(i) == (g.valuations[i] > g.data.price(i) ? 1.0 : 0.0));
}

TEST_CASE("gap scenario never draws prices inside the gap") {
    const GenerateResult g = generate(find_scenario("partial_id_gap"), 4000, 11);
    for (double p : g.data.prices()) {
        CHECK(!(p > 9.5 && p < 10.0));
        CHECK(p >= 9.0);
        CHECK(p <= 10.5);
    }
}

TEST_CASE("generation is deterministic per seed") {
    const Scenario& scn = find_scenario("ci_coverage");
    const GenerateResult a = generate(scn, 200, 42, BetaMode::per_observation);
    const GenerateResult b = generate(scn, 200, 42, BetaMode::per_observation);
    CHECK(a.data.prices() == b.data.prices());
    CHECK(a.data.outcomes() == b.data.outcomes());
    CHECK(a.data.features() == b.data.features());
}

TEST_CASE("oracle surplus") {
    SUBCASE("degenerate valuation and point-mass policy") {
        Scenario scn;
        scn.name = "degenerate";
        scn.v_base = 5.0;
        scn.beta_scale = 0.0;
        scn.eps_hi = 0.0;
        scn.price_law = Scenario::PriceLaw::fixed_interval;
        scn.p_lo = 0.0;
        scn.p_hi = 6.0;
        const Beta beta{{0.0}};
        const TargetPolicy pol = TargetPolicy::point_mass(3.0);
        CHECK(scenario_truth(scn, beta, &pol, 1.0, scn.price_support()) ==
              doctest::Approx(2.0).epsilon(1e-9));
        const OracleResult mc = oracle_surplus_mc(scn, &pol, 1.0, 5000, 1, scn.price_support(),
                                                  beta);
        CHECK(mc.value == doctest::Approx(2.0).epsilon(1e-9));
    }
    SUBCASE("uniform valuation closed form") {
        // V ~ U[0,1]: surplus of the uniform policy over [0,1] is
        // int F(z) (1 - z) dz = 1/6
        Scenario scn;
        scn.name = "unit";
        scn.v_base = 0.0;
        scn.beta_scale = 0.0;
        scn.eps_hi = 1.0;
        scn.price_law = Scenario::PriceLaw::fixed_interval;
        scn.p_lo = 0.0;
        scn.p_hi = 1.0;
        const Beta beta{{0.0}};
        const TargetPolicy pol = TargetPolicy::uniform(0.0, 1.0);
        const double closed = scenario_truth(scn, beta, &pol, 1.0, scn.price_support());
        CHECK(closed == doctest::Approx(1.0 / 6.0).epsilon(1e-8));
        const OracleResult mc =
            oracle_surplus_mc(scn, &pol, 1.0, 400000, 7, scn.price_support(), beta);
        CHECK(std::abs(mc.value - closed) < 3.0 * mc.stderr_);
    }
    SUBCASE("closed form and Monte Carlo agree on registered scenarios") {
        for (const char* name : {"convergence", "inequality_r05"}) {
            const Scenario& scn = find_scenario(name);
            const Beta beta = draw_study_beta(scn, 5);
            const PriceSupport sup = [&] {
                GenerateResult g = generate(scn, 2, 5, BetaMode::per_study, SupportRule::theoretical,
                                            &beta);
                return g.data.support();
            }();
            const TargetPolicy pol = TargetPolicy::discrete({sup.lo + 0.3 * sup.width(),
                                                             sup.lo + 0.6 * sup.width()},
                                                            {0.5, 0.5});
            for (double r : {1.0, 0.5}) {
                const double closed = scenario_truth(scn, beta, &pol, r, sup);
                const OracleResult mc = oracle_surplus_mc(scn, &pol, r, 400000, 11, sup, beta);
                INFO(name, " r=", r);
                CHECK(std::abs(mc.value - closed) < 3.0 * mc.stderr_ + 1e-6);
            }
        }
    }
    SUBCASE("doubling draws shrinks the standard error by root two") {
        const Scenario& scn = find_scenario("convergence");
        const Beta beta = draw_study_beta(scn, 9);
        const PriceSupport sup{-200.05, 410.05};
        const OracleResult a = oracle_surplus_mc(scn, nullptr, 1.0, 200000, 3, sup, beta);
        const OracleResult b = oracle_surplus_mc(scn, nullptr, 1.0, 400000, 3, sup, beta);
        CHECK(a.stderr_ / b.stderr_ == doctest::Approx(std::sqrt(2.0)).epsilon(0.10));
    }
}

TEST_CASE("behavior estimates match the logging-policy oracle") {
    StudyConfig cfg;
    cfg.scenario = "convergence";
    cfg.estimators = {"DM", "CPW", "ACPW"};
    cfg.n_grid = {16000};
    cfg.reps = 1;
    cfg.master_seed = 31;
    cfg.mode = Mode::behavior;
    const RunReport report = run_study(cfg);
    for (const char* est : {"DM", "CPW", "ACPW"}) {
        const CellReport& cell = report.cell(est, 16000);
        const RepRecord& rec = cell.reps[0];
        // truth is exact; the CI half-width is three-ish standard errors
        INFO(est);
        CHECK(std::abs(rec.error) < rec.ci_width);
    }
}

TEST_CASE("study reports") {
    StudyConfig cfg;
    cfg.scenario = "inequality_r05";
    cfg.estimators = {"DM", "ACPW", "IA-ACPW"};
    cfg.n_grid = {400, 800};
    cfg.reps = 8;
    cfg.master_seed = 13;
    cfg.mode = Mode::target;
    const RunReport report = run_study(cfg);

    SUBCASE("mse decomposes into bias and variance") {
        for (const CellReport& c : report.cells)
            CHECK(std::abs(c.mse - (c.bias * c.bias + c.variance)) < 1e-10);
    }
    SUBCASE("csv is deterministic") {
        const RunReport again = run_study(cfg);
        CHECK(report.to_csv() == again.to_csv());
        CHECK(report.to_csv().rfind("scenario,estimator,n,rep,error,ci_hit\n", 0) == 0);
    }
    SUBCASE("summary carries the configuration") {
        const auto doc = report.summary();
        CHECK(doc["scenario"] == "inequality_r05");
        CHECK(doc["reps"] == 8);
        CHECK(doc["cells"].size() == 6);
    }
    SUBCASE("unknown estimator and scenario are rejected") {
        StudyConfig bad = cfg;
        bad.estimators = {"IPW"};
        CHECK_THROWS_AS(static_cast<void>(run_study(bad)), std::invalid_argument);
        bad = cfg;
        bad.scenario = "missing";
        CHECK_THROWS_AS(static_cast<void>(run_study(bad)), std::invalid_argument);
    }
    SUBCASE("failed replications abort with the replication id") {
        StudyConfig bad = cfg;
        bad.n_grid = {6};  // too small for any propensity fit
        CHECK_THROWS_WITH_AS(static_cast<void>(run_study(bad)), doctest::Contains("replication"),
                             std::runtime_error);
    }
}
