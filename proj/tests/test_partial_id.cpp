#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "surplus/partial_id.hpp"
#include "surplus/simbench.hpp"

using namespace surplus;

namespace {

const std::vector<double> kX0 = {0.0};

double chord_lower(double (*mu)(double), double z, double z1, double z2) {
    return lower_envelope(mu(z1), mu(z2), z, z1, z2);
}

}  // namespace

TEST_CASE("lower envelope") {
    SUBCASE("midpoint is the geometric mean") {
        CHECK(lower_envelope(0.9, 0.4, 1.5, 1.0, 2.0) ==
              doctest::Approx(std::sqrt(0.36)).epsilon(1e-12));
    }
    SUBCASE("left endpoint") {
        CHECK(lower_envelope(0.9, 0.4, 1.0, 1.0, 2.0) == doctest::Approx(0.9).epsilon(1e-12));
    }
    SUBCASE("zero anchor sends the envelope to zero past it") {
        CHECK(lower_envelope(0.9, 0.0, 1.5, 1.0, 2.0) == doctest::Approx(0.0));
        // at the left endpoint the zero anchor has no weight
        CHECK(lower_envelope(0.9, 0.0, 1.0, 1.0, 2.0) == doctest::Approx(0.9));
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(lower_envelope(0.9, 0.4, 0.5, 1.0, 2.0), std::invalid_argument);
        CHECK_THROWS_AS(lower_envelope(0.9, 0.4, 1.5, 2.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(lower_envelope(1.5, 0.4, 1.5, 1.0, 2.0), std::invalid_argument);
    }
}

TEST_CASE("upper envelope") {
    SUBCASE("one-sided log-linear extrapolation") {
        UpperAnchors a;
        a.z1 = 1.0;
        a.z2 = 2.0;
        a.mu1 = 0.9;
        a.mu2 = 0.4;
        a.z3 = 100.0;  // boundary stand-in with demand 0
        a.mu3 = 0.0;
        const double v = upper_envelope(3.0, a);
        CHECK(v == doctest::Approx(0.4 * 0.4 / 0.9).epsilon(1e-12));
    }
    SUBCASE("no observations on either side") {
        UpperAnchors a;
        a.z2 = 0.0;
        a.mu2 = 1.0;
        a.z3 = 10.0;
        a.mu3 = 0.0;
        CHECK(upper_envelope(5.0, a) == doctest::Approx(1.0));
    }
    SUBCASE("malformed anchor pattern") {
        UpperAnchors a;
        a.z1 = 3.0;  // out of order
        a.z2 = 2.0;
        a.z3 = 4.0;
        CHECK_THROWS_AS(static_cast<void>(upper_envelope(2.5, a)), std::invalid_argument);
    }
}

TEST_CASE("envelope sandwich on analytic log-concave demands") {
    // exponential, truncated-linear and gaussian-tail demands, probed with
    // true anchor values: F_l <= mu <= F_u everywhere
    struct Battery {
        const char* name;
        double (*mu)(double);
    };
    const Battery battery[] = {
        {"exponential", [](double z) { return std::exp(-2.5 * z); }},
        {"linear-truncated", [](double z) { return clamp01(1.0 - z / 2.0 < 0.05 ? 0.05 : 1.0 - z / 2.0); }},
        {"gaussian-tail", [](double z) { return std::exp(-z * z); }},
    };

    for (const auto& b : battery) {
        INFO(b.name);
        const double z1 = 0.2, z2 = 0.7, z3 = 1.1, z4 = 1.6;
        for (int k = 0; k <= 100; ++k) {
            // interpolation region for the lower bound
            const double z = z2 + (z3 - z2) * k / 100.0;
            const double lo = lower_envelope(b.mu(z2), b.mu(z3), z, z2, z3);
            CHECK(lo <= b.mu(z) + 1e-9);

            UpperAnchors a;
            a.z1 = z1;
            a.z2 = z2;
            a.z3 = z3;
            a.z4 = z4;
            a.mu1 = b.mu(z1);
            a.mu2 = b.mu(z2);
            a.mu3 = b.mu(z3);
            a.mu4 = b.mu(z4);
            const double up = upper_envelope(z, a);
            CHECK(up >= b.mu(z) - 1e-9);
        }
    }
}

TEST_CASE("adding an anchor inside the gap never widens the envelopes") {
    auto mu = [](double z) { return std::exp(-1.7 * z); };
    const double z2 = 1.0, z3 = 3.0, extra = 2.0;
    for (int k = 1; k < 20; ++k) {
        const double z = 2.0 + 0.9 * k / 20.0;  // queries right of the new anchor
        const double lo_before = lower_envelope(mu(z2), mu(z3), z, z2, z3);
        const double lo_after = lower_envelope(mu(extra), mu(z3), z, extra, z3);
        CHECK(lo_after >= lo_before - 1e-12);

        UpperAnchors before;
        before.z1 = 0.5;
        before.z2 = z2;
        before.z3 = z3;
        before.z4 = 3.5;
        before.mu1 = mu(0.5);
        before.mu2 = mu(z2);
        before.mu3 = mu(z3);
        before.mu4 = mu(3.5);
        UpperAnchors after = before;
        after.z1 = z2;
        after.z2 = extra;
        after.mu1 = mu(z2);
        after.mu2 = mu(extra);
        CHECK(upper_envelope(z, after) <= upper_envelope(z, before) + 1e-12);
    }
}

TEST_CASE("overlap map") {
    OverlapMap map({1.0, 1.1, 1.2, 2.0, 2.1}, 0.06, 10.0);
    CHECK(map.is_overlap(1.05));
    CHECK(!map.is_overlap(1.5));
    CHECK(!map.is_overlap(3.0));
    CHECK(map.is_overlap(2.05));

    const auto lower = map.lower_anchors(1.5);
    CHECK(lower.z1 == doctest::Approx(1.2));
    CHECK(lower.z2 == doctest::Approx(2.0));

    const auto tail = map.lower_anchors(5.0);
    CHECK(tail.z1 == doctest::Approx(2.1));
    CHECK(tail.z2_is_vmax);

    const auto up = map.upper_anchors(1.5);
    CHECK(up.z2 == doctest::Approx(1.2));
    CHECK(up.z3 == doctest::Approx(2.0));

    CHECK_THROWS_AS(OverlapMap({1.0, 2.0}, 0.1, 1.5), std::invalid_argument);
}

TEST_CASE("full overlap reduces the bounds to the plug-in") {
    Rng rng(4);
    const int n = 400;
    std::vector<double> f(n), p(n), y(n);
    for (int i = 0; i < n; ++i) {
        f[i] = rng.uniform();
        p[i] = rng.uniform(1.0, 2.0);
        y[i] = rng.uniform() < 0.6 ? 1.0 : 0.0;
    }
    const ObservationSet data(std::move(f), 1, std::move(p), std::move(y), {1.0, 2.0});
    const auto mu = fit_demand_linear(data);
    const TargetPolicy pol = TargetPolicy::discrete({1.2, 1.5, 1.8}, {0.3, 0.4, 0.3});
    const PriceGrid grid = PriceGrid::uniform(1.0, 2.0, 200);
    // generous halfwidth: every node counts as overlap, envelopes never fire
    const OverlapMap overlap(data.prices(), 0.5, 2.6);
    const BoundEstimate b = estimate_bounds(data, *mu, pol, overlap, grid);
    CHECK(b.lower == doctest::Approx(b.upper).epsilon(1e-12));

    double dm = 0.0;
    for (int i = 0; i < n; ++i) dm += policy_surplus_integral(*mu, pol, data.x(i), grid);
    dm /= n;
    CHECK(b.lower == doctest::Approx(dm).epsilon(1e-12));
}

TEST_CASE("gap scenario bounds") {
    const Scenario& scn = find_scenario("partial_id_gap");
    const auto recs = run_bound_study(scn, 2000, 10, 404);
    int covered = 0;
    for (const auto& r : recs) {
        covered += r.covered;
        CHECK(r.lower <= r.upper + 1e-12);
        // naive dominance: the log-concave interval nests inside 0/1 imputation
        CHECK(r.naive_lower <= r.lower + 1e-9);
        CHECK(r.upper <= r.naive_upper + 1e-9);
        CHECK(r.upper - r.lower < r.naive_upper - r.naive_lower);
    }
    CHECK(covered >= 8);
}

TEST_CASE("empty overlap region") {
    const ObservationSet data({0.1}, 1, {5.0}, {1.0}, {4.0, 6.0});
    const auto mu = std::make_shared<AnalyticDemand>(
        [](std::span<const double>, double) { return 0.5; });
    const TargetPolicy pol = TargetPolicy::point_mass(5.5);
    const PriceGrid grid = PriceGrid::uniform(4.0, 6.0, 50);
    const OverlapMap overlap({5.0}, 1e-6, 10.0);  // halfwidth so small nothing overlaps
    CHECK_THROWS_AS(static_cast<void>(estimate_bounds(data, *mu, pol, overlap, grid)),
                    DegenerateDataError);
}
