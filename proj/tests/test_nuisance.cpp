#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "surplus/demand.hpp"
#include "surplus/folds.hpp"
#include "surplus/propensity.hpp"
#include "surplus/simbench.hpp"

using namespace surplus;

namespace {

ObservationSet uniform_price_data(int n, uint64_t seed, double lo = 0.0, double hi = 1.0) {
    Rng rng(seed);
    std::vector<double> f(n), p(n), y(n);
    for (int i = 0; i < n; ++i) {
        f[i] = rng.uniform();
        p[i] = rng.uniform(lo, hi);
        y[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    }
    return ObservationSet(std::move(f), 1, std::move(p), std::move(y), {lo, hi});
}

}  // namespace

TEST_CASE("linear demand recovers an exact linear truth") {
    // mu(x, p) = x + p takes binary values on this design, so the outcomes
    // are both valid indicators and exact regression targets
    std::vector<double> x = {0.0, 1.0, 0.0, 0.5, -0.5, 0.5, 0.25, 1.0};
    std::vector<double> p = {0.0, 0.0, 1.0, 0.5, 0.5, -0.5, 0.75, -1.0};
    std::vector<double> y(8);
    for (int i = 0; i < 8; ++i) y[i] = x[i] + p[i];
    const ObservationSet data(std::move(x), 1, std::move(p), std::move(y), {-1.0, 1.0});

    const auto fit = fit_demand_linear(data);
    const auto& c = fit->coefficients();
    CHECK(std::abs(c[0] - 1.0) < 1e-8);   // slope on x
    CHECK(std::abs(c[1] - 1.0) < 1e-8);   // slope on p
    CHECK(std::abs(c[2] - 0.0) < 1e-8);   // intercept

    SUBCASE("residual orthogonality") {
        double sx = 0.0, sp = 0.0, s1 = 0.0;
        for (int i = 0; i < data.n(); ++i) {
            const double r = data.outcome(i) - fit->raw(data.x(i), data.price(i));
            sx += r * data.x(i)[0];
            sp += r * data.price(i);
            s1 += r;
        }
        CHECK(std::abs(sx) < 1e-8);
        CHECK(std::abs(sp) < 1e-8);
        CHECK(std::abs(s1) < 1e-8);
    }
}

TEST_CASE("linear demand with constant outcomes") {
    Rng rng(3);
    std::vector<double> x(20), p(20), y(20, 1.0);
    for (int i = 0; i < 20; ++i) {
        x[i] = rng.uniform();
        p[i] = rng.uniform();
    }
    const ObservationSet data(std::move(x), 1, std::move(p), std::move(y), {0.0, 1.0});
    const auto fit = fit_demand_linear(data);
    const auto& c = fit->coefficients();
    CHECK(std::abs(c[0]) < 1e-8);
    CHECK(std::abs(c[1]) < 1e-8);
    CHECK(std::abs(c[2] - 1.0) < 1e-8);
}

TEST_CASE("linear demand preconditions") {
    const ObservationSet tiny({0.1, 0.2, 0.3}, 1, {0.1, 0.2, 0.3}, {0.0, 1.0, 1.0}, {0.0, 1.0});
    CHECK_THROWS_AS(static_cast<void>(fit_demand_linear(tiny)), std::invalid_argument);

    // x perfectly collinear with p -> singular design
    std::vector<double> x = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    std::vector<double> p = x;
    const ObservationSet collinear(std::move(x), 1, std::move(p), {0.0, 0.0, 1.0, 1.0, 0.0, 1.0},
                                   {0.0, 1.0});
    CHECK_THROWS_AS(static_cast<void>(fit_demand_linear(collinear)), DegenerateDataError);
}

TEST_CASE("linear demand predictions are affine in price") {
    const auto data = uniform_price_data(200, 17);
    const auto fit = fit_demand_linear(data);
    const std::vector<double> xa = {0.3}, xb = {0.9};
    const double da = fit->raw(xa, 0.2) - fit->raw(xa, 0.7);
    const double db = fit->raw(xb, 0.2) - fit->raw(xb, 0.7);
    CHECK(da == db);  // exactly, to floating point
}

TEST_CASE("DM with correctly specified linear demand matches the oracle") {
    const Scenario& scn = find_scenario("convergence");
    const Beta beta = draw_study_beta(scn, 21);
    const GenerateResult g = generate(scn, 8000, 33, BetaMode::per_study,
                                      SupportRule::theoretical, &beta);
    const auto mu = fit_demand_linear(g.data, /*clamp=*/false);
    const PriceGrid grid = PriceGrid::uniform(g.data.support(), 800);

    double plug = 0.0;
    for (int i = 0; i < g.data.n(); ++i)
        plug += tail_integral(*mu, g.data.x(i), g.data.price(i), grid);
    plug /= g.data.n();

    const OracleResult oracle =
        oracle_surplus_mc(scn, nullptr, 1.0, 1000000, 77, g.data.support(), beta);
    // estimator noise dominates the oracle's; allow 3 x (own se + oracle se)
    const double own_se = 60.0 / std::sqrt(8000.0);
    CHECK(std::abs(plug - oracle.value) < 3.0 * (own_se + oracle.stderr_));
}

TEST_CASE("boosted trees") {
    SUBCASE("single stump on separable data") {
        const int n = 100;
        std::vector<double> f(n), p(n), y(n);
        for (int i = 0; i < n; ++i) {
            f[i] = (i % 10) / 10.0;
            p[i] = 1.0 + (i % 7) / 7.0;
            y[i] = f[i] > 0.45 ? 1.0 : 0.0;
        }
        const ObservationSet data(std::move(f), 1, std::move(p), std::move(y), {1.0, 2.0});
        BoostedTreeParams bp;
        bp.rounds = 1;
        bp.depth = 1;
        bp.learning_rate = 1.0;
        bp.min_leaf = 1;
        const auto fit = fit_demand_boosted(data, bp);
        // perfect threshold split: training MSE equals the within-leaf variance,
        // which is zero here
        CHECK(fit->training_mse().back() == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("zero rounds rejected") {
        const auto data = uniform_price_data(50, 5);
        BoostedTreeParams bp;
        bp.rounds = 0;
        CHECK_THROWS_AS(static_cast<void>(fit_demand_boosted(data, bp)), std::invalid_argument);
    }
    SUBCASE("training MSE nonincreasing in rounds") {
        const auto data = uniform_price_data(500, 9);
        BoostedTreeParams bp;
        bp.rounds = 60;
        const auto fit = fit_demand_boosted(data, bp);
        const auto& mse = fit->training_mse();
        for (size_t r = 1; r < mse.size(); ++r) CHECK(mse[r] <= mse[r - 1] + 1e-12);
    }
    SUBCASE("step demand recovered with small integrated squared error") {
        const int n = 4000;
        Rng rng(41);
        std::vector<double> f(n), p(n), y(n);
        for (int i = 0; i < n; ++i) {
            f[i] = rng.uniform();
            p[i] = rng.uniform(8.0, 12.0);
            y[i] = p[i] < 10.0 ? 1.0 : 0.0;
        }
        const ObservationSet data(std::move(f), 1, std::move(p), std::move(y), {8.0, 12.0});
        const auto fit = fit_demand_boosted(data, BoostedTreeParams{});
        double ise = 0.0;
        const int probes = 400;
        for (int k = 0; k < probes; ++k) {
            const double z = 8.0 + 4.0 * (k + 0.5) / probes;
            const double truth = z < 10.0 ? 1.0 : 0.0;
            const std::vector<double> x = {0.5};
            const double e = fit->prob(x, z) - truth;
            ise += e * e * 4.0 / probes;
        }
        CHECK(ise < 0.01);
    }
    SUBCASE("batched price profile matches pointwise evaluation") {
        const Scenario& scn = find_scenario("ci_coverage");
        const GenerateResult g = generate(scn, 2000, 5, BetaMode::per_observation);
        const auto fit = fit_demand_boosted(g.data, BoostedTreeParams{});
        const PriceGrid grid = PriceGrid::uniform(g.data.support(), 157);
        std::vector<double> prof(grid.size());
        for (int i = 0; i < 20; ++i) {
            fit->price_profile(g.data.x(i * 3), grid.nodes(), prof);
            for (int k = 0; k < grid.size(); ++k)
                CHECK(prof[k] ==
                      doctest::Approx(fit->prob(g.data.x(i * 3), grid.nodes()[k])).epsilon(1e-12));
        }
    }
}

TEST_CASE("ramp demand learner") {
    // V = 3 + 2 x + eps, eps ~ U[0, 4]
    const int n = 3000;
    Rng rng(8);
    std::vector<double> f(n), p(n), y(n);
    for (int i = 0; i < n; ++i) {
        f[i] = rng.uniform();
        p[i] = rng.uniform(2.0, 9.0);
        const double v = 3.0 + 2.0 * f[i] + rng.uniform(0.0, 4.0);
        y[i] = v > p[i] ? 1.0 : 0.0;
    }
    const ObservationSet data(std::move(f), 1, std::move(p), std::move(y), {2.0, 9.0});
    const auto fit = fit_demand_ramp(data, 4.0);
    const auto& c = fit->coefficients();
    CHECK(std::abs(c[0] - 2.0) < 0.25);       // slope on x
    CHECK(std::abs(c[1] - (3.0 + 4.0)) < 0.25);  // index intercept a + w
    const std::vector<double> x = {0.5};
    CHECK(fit->prob(x, 1.0) >= 0.0);
    CHECK(fit->prob(x, 1.0) <= 1.0);
    // price slope is hard-coded at -1/w on the interior
    CHECK(fit->raw(x, 5.0) - fit->raw(x, 6.0) == doctest::Approx(1.0 / 4.0).epsilon(1e-12));
}

TEST_CASE("tophat KDE") {
    SUBCASE("consistent at an interior point") {
        const auto data = uniform_price_data(100000, 1);
        const auto kde = fit_propensity_kde(data, Kernel::tophat);
        const double d = kde->density(0.5, data.x(0));
        CHECK(d > 0.95);
        CHECK(d < 1.05);
    }
    SUBCASE("empirical CDF endpoint") {
        const auto data = uniform_price_data(500, 2);
        const auto kde = fit_propensity_kde(data, Kernel::tophat);
        CHECK(kde->cumulative(data.support().hi, data.x(0)) == doctest::Approx(1.0));
    }
    SUBCASE("doubling a fixed bandwidth smooths the density") {
        const auto data = uniform_price_data(2000, 7);
        const auto rough = fit_propensity_kde(data, Kernel::tophat, BandwidthRule::fixed(0.02));
        const auto smooth = fit_propensity_kde(data, Kernel::tophat, BandwidthRule::fixed(0.04));
        auto total_variation = [&](const KdePropensity& m) {
            double tv = 0.0, prev = m.density(0.0, data.x(0));
            for (int k = 1; k <= 400; ++k) {
                const double cur = m.density(k / 400.0, data.x(0));
                tv += std::abs(cur - prev);
                prev = cur;
            }
            return tv;
        };
        CHECK(total_variation(*smooth) < total_variation(*rough));
    }
    SUBCASE("preconditions") {
        const auto tiny = uniform_price_data(5, 3);
        CHECK_THROWS_AS(static_cast<void>(fit_propensity_kde(tiny, Kernel::tophat)),
                        std::invalid_argument);
        std::vector<double> f(20, 0.5), p(20, 2.0), y(20, 1.0);
        const ObservationSet flat(std::move(f), 1, std::move(p), std::move(y), {1.0, 3.0});
        CHECK_THROWS_AS(static_cast<void>(fit_propensity_kde(flat, Kernel::tophat)),
                        DegenerateDataError);
    }
}

TEST_CASE("gaussian propensity") {
    const auto data = uniform_price_data(100000, 4);
    const auto fit = fit_propensity_gaussian(data);

    double mean = 0.0;
    for (double p : data.prices()) mean += p;
    mean /= data.n();
    CHECK(fit->mean() == doctest::Approx(mean).epsilon(1e-12));

    // plug-in density at the center: 1/(sd sqrt(2 pi)) with sd ~ 1/sqrt(12),
    // visibly different from the true uniform density of 1
    const double at_center = fit->density(0.5, data.x(0));
    CHECK(at_center == doctest::Approx(1.3820).epsilon(0.02));
    CHECK(std::abs(at_center - 1.0) > 0.3);

    SUBCASE("clip floor") {
        CHECK(fit->density(250.0, data.x(0)) == doctest::Approx(1e-3));
    }
}

TEST_CASE("propensity invariants") {
    const auto data = uniform_price_data(5000, 6, 2.0, 5.0);
    std::vector<std::pair<std::shared_ptr<const PropensityModel>, bool>> models;
    models.emplace_back(fit_propensity_kde(data, Kernel::tophat), true);
    models.emplace_back(fit_propensity_kde(data, Kernel::gaussian), true);
    // the parametric normal is deliberately misspecified for uniform prices
    // and leaves part of its mass outside the support
    models.emplace_back(fit_propensity_gaussian(data), false);

    for (const auto& [m, is_kde] : models) {
        double integral = 0.0, prev_cum = -1.0;
        const int probes = 800;
        const double width = data.support().width();
        for (int k = 0; k <= probes; ++k) {
            const double z = data.support().lo + width * k / probes;
            const double dens = m->density(z, data.x(0));
            CHECK(dens >= 1e-3);  // clip floor everywhere
            integral += dens * width / probes * (k == 0 || k == probes ? 0.5 : 1.0);
            const double cum = m->cumulative(z, data.x(0));
            CHECK(cum >= prev_cum - 1e-12);
            CHECK(cum >= 0.0);
            CHECK(cum <= 1.0);
            prev_cum = cum;
        }
        // density and empirical CDF are mutually consistent
        CHECK(integral > (is_kde ? 0.95 : 0.85));
        CHECK(integral < 1.05);
    }
}

TEST_CASE("binned conditional KDE") {
    const int n = 4000;
    Rng rng(12);
    std::vector<double> f(n), p(n), y(n);
    for (int i = 0; i < n; ++i) {
        f[i] = rng.uniform();
        // price law shifts with the feature
        p[i] = rng.uniform(0.0, 1.0) + (f[i] > 0.5 ? 1.0 : 0.0);
        y[i] = 0.0;
    }
    const ObservationSet data(std::move(f), 1, std::move(p), std::move(y), {0.0, 2.0});
    const BinnedKdePropensity model(data, 0, 2, Kernel::tophat, BandwidthRule::silverman(), 1e-3);
    CHECK(model.context_dependent());
    const std::vector<double> lo_ctx = {0.1}, hi_ctx = {0.9};
    CHECK(model.density(0.5, lo_ctx) > model.density(0.5, hi_ctx));
    CHECK(model.density(1.5, hi_ctx) > model.density(1.5, lo_ctx));
}

TEST_CASE("fold assignment") {
    SUBCASE("balanced sizes") {
        const FoldAssignment f1 = make_folds(10, 2, 9);
        std::vector<int> sizes(2, 0);
        for (int id : f1.fold) ++sizes[id];
        CHECK(sizes[0] == 5);
        CHECK(sizes[1] == 5);

        const FoldAssignment f2 = make_folds(7, 3, 9);
        std::vector<int> s2(3, 0);
        for (int id : f2.fold) ++s2[id];
        std::sort(s2.begin(), s2.end());
        CHECK(s2[0] == 2);
        CHECK(s2[1] == 2);
        CHECK(s2[2] == 3);
    }
    SUBCASE("deterministic per seed") {
        CHECK(make_folds(100, 4, 123).fold == make_folds(100, 4, 123).fold);
        CHECK(make_folds(100, 4, 123).fold != make_folds(100, 4, 124).fold);
    }
    SUBCASE("every index exactly once") {
        const FoldAssignment f = make_folds(53, 5, 3);
        CHECK(static_cast<int>(f.fold.size()) == 53);
        int total = 0;
        for (int k = 0; k < 5; ++k) total += static_cast<int>(f.rows_in(k).size());
        CHECK(total == 53);
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(make_folds(5, 6, 1), std::invalid_argument);
        CHECK_THROWS_AS(make_folds(5, 1, 1), std::invalid_argument);
    }
}
