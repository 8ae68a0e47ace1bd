#include "surplus/integrate.hpp"

#include <algorithm>
#include <cmath>

namespace surplus {

double tail_integral(const DemandModel& demand, std::span<const double> x, double p,
                     const PriceGrid& grid) {
    const auto& z = grid.nodes();
    if (p < z.front() - 1e-12 || p > z.back() + 1e-12)
        throw std::domain_error("tail_integral: price outside the grid span");

    if (grid.kind() == PriceGrid::Kind::counting) {
        double s = 0.0;
        for (size_t g = 0; g < z.size(); ++g)
            if (z[g] >= p) s += demand.prob(x, z[g]) * grid.weights()[g];
        return s;
    }

    const auto it = std::upper_bound(z.begin(), z.end(), p);
    const size_t g0 = static_cast<size_t>(it - z.begin());
    if (g0 == z.size()) return 0.0;

    std::vector<double> mu(z.size() - g0);
    demand.price_profile(x, std::span<const double>(z.data() + g0, mu.size()), mu);

    double s = demand.prob(x, p);  // partial first segment [p, z[g0]]
    s = (z[g0] - p) * (s + mu[0]) / 2.0;
    for (size_t g = 0; g + 1 < mu.size(); ++g)
        s += (z[g0 + g + 1] - z[g0 + g]) * (mu[g] + mu[g + 1]) / 2.0;
    return s;
}

std::vector<double> merged_breakpoints(const PriceGrid& grid, const TargetPolicy* policy) {
    std::vector<double> z = grid.nodes();
    if (grid.kind() == PriceGrid::Kind::counting || policy == nullptr || !policy->is_discrete())
        return z;
    for (double a : policy->atoms())
        if (a > z.front() && a < z.back()) z.push_back(a);
    std::sort(z.begin(), z.end());
    z.erase(std::unique(z.begin(), z.end(),
                        [](double a, double b) { return std::abs(a - b) < 1e-12; }),
            z.end());
    return z;
}

namespace {

// product trapezoid of F * mu over breakpoints, with per-segment CDF values
// (right limit at the left end, left limit at the right end)
double product_integral(std::span<const double> z, std::span<const double> mu,
                        std::span<const double> f_right, std::span<const double> f_left) {
    double s = 0.0;
    for (size_t g = 0; g + 1 < z.size(); ++g)
        s += (z[g + 1] - z[g]) * (f_right[g] * mu[g] + f_left[g + 1] * mu[g + 1]) / 2.0;
    return s;
}

}  // namespace

double policy_surplus_integral(const DemandModel& demand, const TargetPolicy& policy,
                               std::span<const double> x, const PriceGrid& grid) {
    if (grid.kind() == PriceGrid::Kind::counting) {
        const auto& z = grid.nodes();
        double s = 0.0;
        for (size_t g = 0; g < z.size(); ++g)
            s += policy.cdf(z[g], x) * demand.prob(x, z[g]) * grid.weights()[g];
        return s;
    }
    const std::vector<double> z = merged_breakpoints(grid, &policy);
    std::vector<double> mu(z.size()), fr(z.size()), fl(z.size());
    demand.price_profile(x, z, mu);
    policy.cdf_profile(x, z, fr, fl);
    return product_integral(z, mu, fr, fl);
}

double behavior_surplus_integral(const DemandModel& demand, const PropensityModel& propensity,
                                 std::span<const double> x, const PriceGrid& grid) {
    const auto& z = grid.nodes();
    if (grid.kind() == PriceGrid::Kind::counting) {
        double s = 0.0;
        for (size_t g = 0; g < z.size(); ++g)
            s += propensity.cumulative(z[g], x) * demand.prob(x, z[g]) * grid.weights()[g];
        return s;
    }
    std::vector<double> mu(z.size()), f(z.size());
    demand.price_profile(x, z, mu);
    for (size_t g = 0; g < z.size(); ++g) f[g] = propensity.cumulative(z[g], x);
    return product_integral(z, mu, f, f);
}

}  // namespace surplus
