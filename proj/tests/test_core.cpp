#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <fstream>

#include "surplus/data.hpp"
#include "surplus/integrate.hpp"
#include "surplus/policy.hpp"

using namespace surplus;

namespace {

std::shared_ptr<AnalyticDemand> analytic(std::function<double(double)> f) {
    return std::make_shared<AnalyticDemand>(
        [f = std::move(f)](std::span<const double>, double p) { return f(p); });
}

const std::vector<double> kX0 = {0.0};

}  // namespace

TEST_CASE("price grid invariants") {
    const PriceGrid g = PriceGrid::uniform(2.0, 7.0, 200);
    double total = 0.0;
    for (double w : g.weights()) total += w;
    CHECK(std::abs(total - 5.0) < 1e-10);
    CHECK(g.size() == 200);
    CHECK_THROWS_AS(PriceGrid::uniform(1.0, 1.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(PriceGrid::uniform(0.0, 1.0, 1), std::invalid_argument);

    const PriceGrid pw = PriceGrid::piecewise(0.0, 1.0, 5.0, 11, 9);
    total = 0.0;
    for (double w : pw.weights()) total += w;
    CHECK(std::abs(total - 5.0) < 1e-10);

    CHECK_THROWS_AS(PriceGrid::counting({1.0, 1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("observation set validation") {
    CHECK_THROWS_AS(ObservationSet({0.0}, 1, {0.5}, {0.3}, {0.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(ObservationSet({0.0}, 1, {1.5}, {1.0}, {0.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(ObservationSet({}, 1, {}, {}, {0.0, 1.0}), std::invalid_argument);
    const double nan = std::nan("");
    CHECK_THROWS_AS(ObservationSet({nan}, 1, {0.5}, {1.0}, {0.0, 1.0}), std::invalid_argument);

    const ObservationSet ok({0.1, 0.2}, 1, {0.4, 0.6}, {1.0, 0.0}, {0.0, 1.0});
    CHECK(ok.n() == 2);
    CHECK(ok.x(1)[0] == doctest::Approx(0.2));

    const auto sub = ok.subset(std::vector<int>{1});
    CHECK(sub.n() == 1);
    CHECK(sub.price(0) == doctest::Approx(0.6));
}

TEST_CASE("inequality params") {
    const InequalityParams zero_r{0.0, 1e-6};
    CHECK_THROWS_AS(zero_r.validate(), std::invalid_argument);
    const InequalityParams zero_floor{0.5, 0.0};
    CHECK_THROWS_AS(zero_floor.validate(), std::invalid_argument);
    const InequalityParams harmonic{-1.0, 1e-6};
    CHECK_NOTHROW(harmonic.validate());
}

TEST_CASE("tail integral") {
    const PriceGrid grid = PriceGrid::uniform(0.0, 1.0, 200);

    SUBCASE("constant demand") {
        const auto mu = analytic([](double) { return 1.0; });
        CHECK(tail_integral(*mu, kX0, 0.4, grid) == doctest::Approx(0.6).epsilon(1e-10));
    }
    SUBCASE("zero demand") {
        const auto mu = analytic([](double) { return 0.0; });
        CHECK(tail_integral(*mu, kX0, 0.25, grid) == doctest::Approx(0.0));
    }
    SUBCASE("quadratic demand, closed-form antiderivative") {
        // integral of 1 - z^2 from 0 to 1 is z - z^3/3 -> 2/3
        const auto mu = analytic([](double z) { return 1.0 - z * z; });
        CHECK(std::abs(tail_integral(*mu, kX0, 0.0, grid) - 2.0 / 3.0) < 1e-4);
    }
    SUBCASE("nonincreasing in p") {
        const auto mu = analytic([](double z) { return std::exp(-2.0 * z); });
        double prev = tail_integral(*mu, kX0, 0.0, grid);
        for (double p : {0.1, 0.25, 0.5, 0.73, 0.9, 1.0}) {
            const double cur = tail_integral(*mu, kX0, p, grid);
            CHECK(cur <= prev + 1e-12);
            prev = cur;
        }
    }
    SUBCASE("clamps demand into the unit interval") {
        const auto mu = analytic([](double) { return 3.0; });
        CHECK(tail_integral(*mu, kX0, 0.0, grid) == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("price outside the grid span") {
        const auto mu = analytic([](double) { return 1.0; });
        CHECK_THROWS_AS(tail_integral(*mu, kX0, 1.2, grid), std::domain_error);
    }
}

TEST_CASE("policy surplus integral") {
    const PriceGrid grid = PriceGrid::uniform(0.0, 1.0, 200);
    const TargetPolicy uniform = TargetPolicy::uniform(0.0, 1.0);

    SUBCASE("true quadratic demand gives 1/4") {
        const auto mu = analytic([](double z) { return 1.0 - z * z; });
        CHECK(std::abs(policy_surplus_integral(*mu, uniform, kX0, grid) - 0.25) < 1e-4);
    }
    SUBCASE("misspecified linear demand gives 1/3") {
        const auto mu = analytic([](double z) { return 1.0 - z / 2.0; });
        CHECK(std::abs(policy_surplus_integral(*mu, uniform, kX0, grid) - 1.0 / 3.0) < 1e-4);
    }
    SUBCASE("point mass at the top of the support") {
        const auto mu = analytic([](double) { return 1.0; });
        const TargetPolicy point = TargetPolicy::point_mass(1.0);
        CHECK(policy_surplus_integral(*mu, point, kX0, grid) == doctest::Approx(0.0));
    }
}

TEST_CASE("policy cdf") {
    const TargetPolicy tri = TargetPolicy::discrete({0.3, 0.6, 0.8}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    CHECK(tri.cdf(0.45, kX0) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(tri.cdf(0.1, kX0) == doctest::Approx(0.0));
    CHECK(tri.cdf(0.8, kX0) == doctest::Approx(1.0));
    CHECK(tri.cdf(0.95, kX0) == doctest::Approx(1.0));
    // mass at an atom counts as soon as the query reaches it
    CHECK(tri.cdf(0.3, kX0) == doctest::Approx(1.0 / 3));
    CHECK(tri.cdf_left(0.3, kX0) == doctest::Approx(0.0));

    SUBCASE("monotone over random probes") {
        Rng rng(99);
        for (int trial = 0; trial < 1000; ++trial) {
            const double a = rng.uniform(0.0, 0.5);
            const double b = a + rng.uniform(0.1, 1.0);
            const TargetPolicy pol = trial % 2 == 0
                                         ? TargetPolicy::uniform(a, b)
                                         : TargetPolicy::discrete({a, (a + b) / 2, b},
                                                                  {0.2, 0.5, 0.3});
            const double p1 = rng.uniform(a - 0.2, b + 0.2);
            const double p2 = p1 + rng.uniform(0.0, 0.3);
            CHECK(pol.cdf(p2, kX0) >= pol.cdf(p1, kX0) - 1e-12);
        }
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(TargetPolicy::discrete({1.0, 0.5}, {0.5, 0.5}), std::invalid_argument);
        CHECK_THROWS_AS(TargetPolicy::discrete({0.5, 1.0}, {0.6, 0.6}), std::invalid_argument);
    }
}

TEST_CASE("policy sampling") {
    SUBCASE("degenerate grid") {
        const TargetPolicy point = TargetPolicy::point_mass(0.7);
        Rng rng(5);
        for (int t = 0; t < 50; ++t) CHECK(point.sample(kX0, rng) == doctest::Approx(0.7));
    }
    SUBCASE("zero temperature softmax is uniform over the grid") {
        const auto mu = analytic([](double z) { return 1.0 - z; });
        const TargetPolicy pol = TargetPolicy::softmax_revenue(mu, {0.2, 0.4, 0.6, 0.8}, 0.0);
        Rng rng(7);
        std::array<int, 4> counts{};
        const int draws = 10000;
        for (int t = 0; t < draws; ++t) {
            const double p = pol.sample(kX0, rng);
            for (int j = 0; j < 4; ++j)
                if (std::abs(p - (0.2 + 0.2 * j)) < 1e-12) ++counts[j];
        }
        // 3 sigma binomial band around draws/4
        const double sigma = std::sqrt(draws * 0.25 * 0.75);
        for (int j = 0; j < 4; ++j) CHECK(std::abs(counts[j] - draws / 4.0) < 3.0 * sigma);
    }
    SUBCASE("uniform interval mean") {
        const TargetPolicy pol = TargetPolicy::uniform(9.0, 11.0);
        Rng rng(11);
        double mean = 0.0;
        const int draws = 100000;
        for (int t = 0; t < draws; ++t) mean += pol.sample(kX0, rng);
        mean /= draws;
        CHECK(std::abs(mean - 10.0) < 0.02);
    }
    SUBCASE("deterministic per seed") {
        const TargetPolicy pol = TargetPolicy::uniform(0.0, 1.0);
        Rng a(123), b(123);
        for (int t = 0; t < 20; ++t) CHECK(pol.sample(kX0, a) == pol.sample(kX0, b));
    }
}

TEST_CASE("double and single integral forms agree (Fubini)") {
    // outer quadrature of pi(p) * tail_integral(p) against the one-pass
    // cumulative form, for a continuous policy; the outer leg runs over the
    // policy's own span where its density is smooth
    const PriceGrid grid = PriceGrid::uniform(0.0, 2.0, 4001);
    const auto mu = analytic([](double z) { return clamp01(1.2 - 0.4 * z - 0.1 * z * z); });
    const TargetPolicy pol = TargetPolicy::uniform(0.2, 1.7);

    double outer = 0.0;
    const auto& z = grid.nodes();
    for (int g = 0; g + 1 < grid.size(); ++g) {
        const double a = z[g], b = z[g + 1];
        if (b <= pol.lo() || a >= pol.hi()) continue;
        const double fa = pol.density(a, kX0) * tail_integral(*mu, kX0, a, grid);
        const double fb = pol.density(b, kX0) * tail_integral(*mu, kX0, b, grid);
        outer += (b - a) * (fa + fb) / 2.0;
    }
    const double single = policy_surplus_integral(*mu, pol, kX0, grid);
    CHECK(std::abs(outer - single) / single < 1e-6);
}

TEST_CASE("counting grids implement discrete tail sums") {
    const PriceGrid grid = PriceGrid::counting({1.0, 2.0, 3.0});
    const auto mu = std::make_shared<TableDemand>(std::vector<double>{1.0, 2.0, 3.0},
                                                  std::vector<double>{0.8, 0.5, 0.2});
    CHECK(tail_integral(*mu, kX0, 2.0, grid) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(tail_integral(*mu, kX0, 1.0, grid) == doctest::Approx(1.5).epsilon(1e-12));

    const TargetPolicy pol = TargetPolicy::discrete({1.0, 2.0, 3.0}, {0.5, 0.3, 0.2});
    // sum_j pi_j * tail-sum from p_j by hand: 0.5*1.5 + 0.3*0.7 + 0.2*0.2 = 1.0
    CHECK(policy_surplus_integral(*mu, pol, kX0, grid) == doctest::Approx(1.0).epsilon(1e-12));

    const auto missing = std::make_shared<TableDemand>(std::vector<double>{1.0},
                                                       std::vector<double>{0.5});
    CHECK_THROWS_AS(missing->raw(kX0, 2.5), std::domain_error);
}

TEST_CASE("csv round trip") {
    const std::string path = "/tmp/surplus_test_core.csv";
    {
        std::ofstream out(path);
        out << "x0,x1,p,y,segment\n";
        out << "0.1,1.0,0.5,1,alpha\n";
        out << "-0.2,2.0,0.8,0,beta\n";
    }
    const ObservationSet data = ObservationSet::from_csv(path);
    CHECK(data.n() == 2);
    CHECK(data.dim() == 2);
    CHECK(data.x(1)[0] == doctest::Approx(-0.2));
    CHECK(data.has_segments());
    CHECK(data.segments()[0] == "alpha");
    CHECK(data.support().hi == doctest::Approx(1.05 * 0.8));

    const auto filtered = data.filter_segment("beta");
    CHECK(filtered.n() == 1);

    {
        std::ofstream out(path);
        out << "x0,y\n0.1,1\n";
    }
    CHECK_THROWS_AS(static_cast<void>(ObservationSet::from_csv(path)), std::invalid_argument);

    {
        std::ofstream out(path);
        out << "x0,p,y\n0.1,0.5,0.3\n";
    }
    CHECK_THROWS_AS(static_cast<void>(ObservationSet::from_csv(path)), std::invalid_argument);
}
