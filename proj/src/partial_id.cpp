#include "surplus/partial_id.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace surplus {

namespace {

// a * log(mu) with the 0 * log(0) = 0 limit convention
double weighted_log(double a, double mu) {
    if (a == 0.0) return 0.0;
    return a * std::log(mu);
}

}  // namespace

double lower_envelope(double mu1, double mu2, double z, double z1, double z2) {
    if (!(z1 < z2)) throw std::invalid_argument("lower_envelope: need z1 < z2");
    if (z < z1 - 1e-12 || z > z2 + 1e-12)
        throw std::invalid_argument("lower_envelope: query outside [z1, z2]");
    if (mu1 < 0.0 || mu1 > 1.0 || mu2 < 0.0 || mu2 > 1.0)
        throw std::invalid_argument("lower_envelope: demand values must lie in [0, 1]");

    const double a = (z - z2) / (z1 - z2);  // weight on log mu1
    const double b = (z1 - z) / (z1 - z2);  // weight on log mu2
    const double l = weighted_log(a, mu1) + weighted_log(b, mu2);
    return clamp01(std::exp(l));
}

double upper_envelope(double z, const UpperAnchors& a) {
    if (!(a.z2 <= z && z <= a.z3))
        throw std::invalid_argument("upper_envelope: query outside [z2, z3]");
    if (a.z1 && !(*a.z1 < a.z2))
        throw std::invalid_argument("upper_envelope: anchors out of order (z1 >= z2)");
    if (a.z4 && !(a.z3 < *a.z4))
        throw std::invalid_argument("upper_envelope: anchors out of order (z4 <= z3)");

    auto u1 = [&]() {
        const double slope = (std::log(a.mu2) - std::log(a.mu1)) / (a.z2 - *a.z1);
        return std::log(a.mu2) + (z - a.z2) * slope;
    };
    auto u2 = [&]() {
        const double slope = (std::log(a.mu4) - std::log(a.mu3)) / (*a.z4 - a.z3);
        return std::log(a.mu3) - (a.z3 - z) * slope;
    };

    double v;
    if (a.z1 && a.z4) {
        v = std::min(std::exp(u1()), std::exp(u2()));
    } else if (a.z1) {
        v = std::min(std::exp(u1()), a.mu2);
    } else if (a.z4) {
        v = std::min(std::exp(u2()), a.mu2);
    } else {
        v = 1.0;
    }
    if (std::isnan(v)) v = 1.0;  // 0-demand anchors can produce inf - inf in the slopes
    return clamp01(v);
}

OverlapMap::OverlapMap(std::vector<double> observed_prices, double overlap_halfwidth, double v_max,
                       double min_anchor_separation)
    : observed_(std::move(observed_prices)), halfwidth_(overlap_halfwidth), v_max_(v_max),
      min_sep_(min_anchor_separation) {
    if (observed_.empty()) throw std::invalid_argument("OverlapMap: no observed prices");
    if (!(halfwidth_ > 0.0)) throw std::invalid_argument("OverlapMap: halfwidth must be positive");
    std::sort(observed_.begin(), observed_.end());
    observed_.erase(std::unique(observed_.begin(), observed_.end()), observed_.end());
    if (!(v_max_ > observed_.back()))
        throw std::invalid_argument("OverlapMap: V_max must exceed the largest observed price");
}

bool OverlapMap::is_overlap(double z) const {
    const auto it = std::lower_bound(observed_.begin(), observed_.end(), z);
    double dist = std::numeric_limits<double>::infinity();
    if (it != observed_.end()) dist = std::min(dist, *it - z);
    if (it != observed_.begin()) dist = std::min(dist, z - *(it - 1));
    return dist <= halfwidth_;
}

OverlapMap::LowerAnchors OverlapMap::lower_anchors(double z) const {
    LowerAnchors a;
    const auto it = std::lower_bound(observed_.begin(), observed_.end(), z);
    if (it == observed_.begin()) {
        a.z1 = 0.0;
        a.z1_is_origin = true;
    } else {
        a.z1 = *(it - 1);
    }
    if (it == observed_.end()) {
        a.z2 = v_max_;
        a.z2_is_vmax = true;
    } else {
        a.z2 = *it;
    }
    return a;
}

OverlapMap::RawUpperAnchors OverlapMap::upper_anchors(double z) const {
    RawUpperAnchors a;
    const auto it = std::lower_bound(observed_.begin(), observed_.end(), z);
    const auto below = static_cast<size_t>(it - observed_.begin());  // # observed < z (or == z)
    const size_t above = observed_.size() - below;

    if (below >= 1) {
        a.z2 = observed_[below - 1];
        // outer left anchor: farthest-in candidate at least min_sep_ away,
        // falling back to the 0 boundary (demand 1)
        const auto lim = std::upper_bound(observed_.begin(), observed_.begin() + (below - 1),
                                          a.z2 - min_sep_);
        if (lim != observed_.begin()) {
            a.z1 = *(lim - 1);
        } else if (a.z2 > min_sep_ && a.z2 > 0.0) {
            a.z1 = 0.0;  // boundary with demand 1
        }
    } else {
        a.z2 = 0.0;
        a.z2_is_origin = true;
    }
    if (above >= 1) {
        a.z3 = observed_[below];
        const auto lim = std::lower_bound(observed_.begin() + below + 1, observed_.end(),
                                          a.z3 + min_sep_);
        if (lim != observed_.end()) {
            a.z4 = *lim;
        } else {
            a.z4 = v_max_;
            a.z4_is_vmax = true;
        }
    } else {
        a.z3 = v_max_;
        a.z3_is_vmax = true;
    }
    return a;
}

PriceGrid make_bounds_grid(const PriceSupport& support, double v_max, int fine_nodes,
                           int tail_nodes) {
    if (v_max > support.hi + 1e-12)
        return PriceGrid::piecewise(support.lo, support.hi, v_max, fine_nodes, tail_nodes);
    return PriceGrid::uniform(support.lo, support.hi, fine_nodes);
}

namespace {

// demand at an anchor price, with boundary sentinels and the log floor
struct AnchorEval {
    const DemandModel& demand;
    std::span<const double> x;
    double floor;
    mutable std::map<double, double> cache;

    double at(double price, bool is_origin, bool is_vmax) const {
        if (is_origin) return 1.0;
        if (is_vmax) return 0.0;
        const auto it = cache.find(price);
        if (it != cache.end()) return it->second;
        const double v = std::max(clamp01(demand.prob(x, price)), floor);
        cache.emplace(price, v);
        return v;
    }
};

}  // namespace

BoundEstimate estimate_bounds(const ObservationSet& data, const DemandModel& demand,
                              const TargetPolicy& policy, const OverlapMap& overlap,
                              const PriceGrid& grid, const BoundOptions& options) {
    const std::vector<double> z = merged_breakpoints(grid, &policy);
    const size_t m = z.size();

    std::vector<char> is_over(m);
    size_t n_overlap = 0;
    for (size_t g = 0; g < m; ++g) {
        is_over[g] = overlap.is_overlap(z[g]) ? 1 : 0;
        n_overlap += is_over[g];
    }
    if (n_overlap == 0)
        throw DegenerateDataError("estimate_bounds: empty overlap region, nothing anchors the envelopes");

    // anchor geometry per non-overlap node (shared across observations)
    std::vector<OverlapMap::LowerAnchors> lo_anchor(m);
    std::vector<OverlapMap::RawUpperAnchors> up_anchor(m);
    for (size_t g = 0; g < m; ++g) {
        if (is_over[g]) continue;
        lo_anchor[g] = overlap.lower_anchors(z[g]);
        up_anchor[g] = overlap.upper_anchors(z[g]);
    }

    const int n = data.n();
    std::vector<double> mu(m), fr(m), fl(m);
    std::vector<double> node_lo(m), node_up(m), node_naive_lo(m), node_naive_up(m);
    std::vector<double> trace_lo(m, 0.0), trace_up(m, 0.0);

    double sum_lo = 0.0, sum_up = 0.0, sum_nlo = 0.0, sum_nup = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto x = data.x(i);
        demand.price_profile(x, z, mu);
        policy.cdf_profile(x, z, fr, fl);
        AnchorEval anchors{demand, x, options.anchor_floor, {}};

        for (size_t g = 0; g < m; ++g) {
            if (is_over[g]) {
                node_lo[g] = node_up[g] = node_naive_lo[g] = node_naive_up[g] = clamp01(mu[g]);
                continue;
            }
            const auto& la = lo_anchor[g];
            const double mu_l1 = anchors.at(la.z1, la.z1_is_origin, false);
            const double mu_l2 = anchors.at(la.z2, false, la.z2_is_vmax);
            double flo = lower_envelope(mu_l1, mu_l2, z[g], la.z1, la.z2);
            if (options.tighten_lower_with_neighbor && !la.z2_is_vmax)
                flo = std::max(flo, mu_l2);

            const auto& ua = up_anchor[g];
            UpperAnchors u;
            u.z1 = ua.z1;
            u.z4 = ua.z4;
            u.z2 = ua.z2;
            u.z3 = ua.z3;
            if (ua.z1) u.mu1 = anchors.at(*ua.z1, *ua.z1 == 0.0, false);
            u.mu2 = anchors.at(ua.z2, ua.z2_is_origin || ua.z2 == 0.0, false);
            u.mu3 = anchors.at(ua.z3, false, ua.z3_is_vmax);
            if (ua.z4) u.mu4 = anchors.at(*ua.z4, false, ua.z4_is_vmax);
            double fup = upper_envelope(z[g], u);

            fup = std::max(fup, flo);  // keep estimated envelopes ordered
            node_lo[g] = flo;
            node_up[g] = fup;
            node_naive_lo[g] = 0.0;
            node_naive_up[g] = 1.0;
            trace_lo[g] += flo;
            trace_up[g] += fup;
        }

        auto integrate = [&](const std::vector<double>& v) {
            double s = 0.0;
            for (size_t g = 0; g + 1 < m; ++g)
                s += (z[g + 1] - z[g]) * (fr[g] * v[g] + fl[g + 1] * v[g + 1]) / 2.0;
            return s;
        };
        sum_lo += integrate(node_lo);
        sum_up += integrate(node_up);
        sum_nlo += integrate(node_naive_lo);
        sum_nup += integrate(node_naive_up);
    }

    BoundEstimate out;
    out.lower = sum_lo / n;
    out.upper = sum_up / n;
    out.naive_lower = sum_nlo / n;
    out.naive_upper = sum_nup / n;
    out.nodes = z;
    out.overlap.assign(m, false);
    out.envelope_lower.assign(m, 0.0);
    out.envelope_upper.assign(m, 0.0);
    for (size_t g = 0; g < m; ++g) {
        out.overlap[g] = is_over[g] != 0;
        if (!is_over[g]) {
            out.envelope_lower[g] = trace_lo[g] / n;
            out.envelope_upper[g] = trace_up[g] / n;
        }
    }
    return out;
}

}  // namespace surplus
