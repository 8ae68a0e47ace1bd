#ifndef SURPLUS_PARTIAL_ID_HPP
#define SURPLUS_PARTIAL_ID_HPP

#include <optional>
#include <vector>

#include "surplus/data.hpp"
#include "surplus/demand.hpp"
#include "surplus/integrate.hpp"
#include "surplus/policy.hpp"

namespace surplus {

// Log-scale chord between (z1, mu1) and (z2, mu2), evaluated at z in [z1, z2].
// A zero demand value at an anchor sends the envelope to zero past it.
double lower_envelope(double mu1, double mu2, double z, double z1, double z2);

// Anchors for the two-sided upper envelope. Inner anchors (z2, z3) always
// exist, possibly as the boundary points 0 (demand 1) and V_max (demand 0);
// outer anchors (z1, z4) may be absent.
struct UpperAnchors {
    std::optional<double> z1, z4;
    double z2 = 0.0, z3 = 0.0;
    double mu1 = 1.0, mu2 = 1.0, mu3 = 0.0, mu4 = 0.0;
};

// Minimum of the log-linear extrapolations that are available, per the
// four-case table; clamped to [0, 1].
double upper_envelope(double z, const UpperAnchors& a);

// Non-overlap detection over the price axis plus neighbor lookups against the
// sorted observed prices, with boundary sentinels 0 and V_max. The outer
// anchors of the upper-envelope pairs honor a minimum separation from their
// inner anchors: a wider secant still bounds a log-concave tail (slopes are
// nonincreasing) and is far less sensitive to the fitted demand's local
// derivative.
class OverlapMap {
public:
    OverlapMap(std::vector<double> observed_prices, double overlap_halfwidth, double v_max,
               double min_anchor_separation = 0.0);

    bool is_overlap(double z) const;
    double v_max() const { return v_max_; }

    struct LowerAnchors {
        double z1 = 0.0, z2 = 0.0;
        bool z1_is_origin = false;  // boundary at 0, demand 1
        bool z2_is_vmax = false;    // boundary at V_max, demand 0
    };
    LowerAnchors lower_anchors(double z) const;

    struct RawUpperAnchors {
        std::optional<double> z1, z4;
        double z2 = 0.0, z3 = 0.0;
        bool z2_is_origin = false;
        bool z3_is_vmax = false;
        bool z4_is_vmax = false;
    };
    RawUpperAnchors upper_anchors(double z) const;

    const std::vector<double>& observed() const { return observed_; }

private:
    std::vector<double> observed_;  // sorted unique
    double halfwidth_ = 0.0;
    double v_max_ = 0.0;
    double min_sep_ = 0.0;
};

struct BoundOptions {
    double anchor_floor = 1e-6;  // floor on fitted anchor demand before logs
    bool tighten_lower_with_neighbor = false;  // optional: max of the chord with
                                               // the neighboring observed level
};

struct BoundEstimate {
    double lower = 0.0;
    double upper = 0.0;
    double naive_lower = 0.0;  // demand imputed 0 on non-overlap
    double naive_upper = 0.0;  // demand imputed 1 on non-overlap
    // audit traces, averaged over observations at each non-overlap node
    std::vector<double> nodes;
    std::vector<bool> overlap;
    std::vector<double> envelope_lower;
    std::vector<double> envelope_upper;
};

// Grid integral of F^pi(z|x) times: fitted demand on overlap nodes, the
// log-concave envelopes on non-overlap nodes; averaged over observations.
// pre: at least one overlap node (otherwise nothing anchors the envelopes).
BoundEstimate estimate_bounds(const ObservationSet& data, const DemandModel& demand,
                              const TargetPolicy& policy, const OverlapMap& overlap,
                              const PriceGrid& grid, const BoundOptions& options = {});

// Fine nodes over the observed span plus a coarser tail up to v_max.
PriceGrid make_bounds_grid(const PriceSupport& support, double v_max, int fine_nodes = 400,
                           int tail_nodes = 200);

}  // namespace surplus

#endif
