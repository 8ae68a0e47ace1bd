#ifndef SURPLUS_INTEGRATE_HPP
#define SURPLUS_INTEGRATE_HPP

#include <span>

#include "surplus/data.hpp"
#include "surplus/demand.hpp"
#include "surplus/policy.hpp"
#include "surplus/propensity.hpp"

namespace surplus {

// int_p^{hi} clamp(mu(x,z), 0, 1) dz. Trapezoid on the grid with p spliced in;
// on counting grids, the tail sum over nodes >= p. Nonincreasing in p.
double tail_integral(const DemandModel& demand, std::span<const double> x, double p,
                     const PriceGrid& grid);

// int F^pi(z|x) clamp(mu(x,z),0,1) dz — the single-integral (Fubini) form of
// the policy/demand double integral. Policy atoms are spliced into the grid so
// step CDFs integrate exactly; each segment uses the right-continuous CDF at
// its left end and the left limit at its right end.
double policy_surplus_integral(const DemandModel& demand, const TargetPolicy& policy,
                               std::span<const double> x, const PriceGrid& grid);

// Same with the fitted behavior CDF F^{pi_D} in place of F^pi, used by the
// inequality-aware behavior-mode plug-in.
double behavior_surplus_integral(const DemandModel& demand, const PropensityModel& propensity,
                                 std::span<const double> x, const PriceGrid& grid);

// Grid breakpoints with policy atoms (and optionally one extra point) merged
// in. Shared by the estimators' batched plug-in evaluation.
std::vector<double> merged_breakpoints(const PriceGrid& grid, const TargetPolicy* policy);

}  // namespace surplus

#endif
