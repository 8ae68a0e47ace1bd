#include "surplus/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace surplus {

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::target: return "target";
        case Mode::behavior: return "behavior";
        case Mode::delta: return "delta";
    }
    return "?";
}

std::shared_ptr<const DemandModel> DemandLearner::fit(const ObservationSet& data) const {
    switch (kind) {
        case Kind::linear: return fit_demand_linear(data, linear_clamp);
        case Kind::boosted: return fit_demand_boosted(data, boosted_params);
        case Kind::ramp: return fit_demand_ramp(data, ramp_width);
        case Kind::fixed:
            if (!fixed_model) throw std::invalid_argument("DemandLearner: missing fixed model");
            return fixed_model;
    }
    throw std::logic_error("DemandLearner: unknown kind");
}

PropensityLearner PropensityLearner::kde(Kernel kernel, BandwidthRule bw, double clip) {
    PropensityLearner l;
    l.kind = kernel == Kernel::tophat ? Kind::kde_tophat : Kind::kde_gaussian;
    l.bandwidth = bw;
    l.clip = clip;
    return l;
}

PropensityLearner PropensityLearner::gaussian(double clip) {
    PropensityLearner l;
    l.kind = Kind::parametric_gaussian;
    l.clip = clip;
    return l;
}

PropensityLearner PropensityLearner::binned(int feature, int bins, double clip) {
    PropensityLearner l;
    l.kind = Kind::binned_kde;
    l.feature = feature;
    l.bins = bins;
    l.clip = clip;
    return l;
}

PropensityLearner PropensityLearner::exact(std::shared_ptr<const PropensityModel> m) {
    PropensityLearner l;
    l.kind = Kind::fixed;
    l.fixed_model = std::move(m);
    return l;
}

std::shared_ptr<const PropensityModel> PropensityLearner::fit(const ObservationSet& data) const {
    switch (kind) {
        case Kind::kde_tophat: return fit_propensity_kde(data, Kernel::tophat, bandwidth, clip);
        case Kind::kde_gaussian: return fit_propensity_kde(data, Kernel::gaussian, bandwidth, clip);
        case Kind::parametric_gaussian: return fit_propensity_gaussian(data, clip);
        case Kind::binned_kde:
            return std::make_shared<BinnedKdePropensity>(data, feature, bins, Kernel::tophat,
                                                         bandwidth, clip);
        case Kind::fixed:
            if (!fixed_model) throw std::invalid_argument("PropensityLearner: missing fixed model");
            return fixed_model;
    }
    throw std::logic_error("PropensityLearner: unknown kind");
}

FoldModels cross_fit(const ObservationSet& data, const DemandLearner& demand,
                     const PropensityLearner& propensity, const FoldAssignment& folds) {
    if (folds.n != data.n()) throw std::invalid_argument("cross_fit: fold assignment size mismatch");
    FoldModels out;
    out.folds = folds;
    out.demand.resize(folds.k);
    out.propensity.resize(folds.k);

    const bool demand_fixed = demand.kind == DemandLearner::Kind::fixed;
    const bool prop_fixed = propensity.kind == PropensityLearner::Kind::fixed;
    for (int k = 0; k < folds.k; ++k) {
        if (demand_fixed && prop_fixed) {
            out.demand[k] = demand.fixed_model;
            out.propensity[k] = propensity.fixed_model;
            continue;
        }
        const auto rows = folds.rows_excluding(k);
        if (rows.empty())
            throw std::invalid_argument("cross_fit: empty training set for fold " + std::to_string(k));
        const ObservationSet train = data.subset(rows);
        try {
            out.demand[k] = demand_fixed ? demand.fixed_model : demand.fit(train);
            out.propensity[k] = prop_fixed ? propensity.fixed_model : propensity.fit(train);
        } catch (const DegenerateDataError& e) {
            throw DegenerateDataError("fold " + std::to_string(k) + ": " + e.what());
        }
    }
    return out;
}

namespace {

using DemandFor = std::function<const DemandModel&(int)>;
using PropensityFor = std::function<const PropensityModel&(int)>;

// h_i = int F^pi(z|x_i) mu_i(x_i,z) dz for every row, via one price profile
// per row over the merged breakpoints.
std::vector<double> target_plugins(const ObservationSet& data, const DemandFor& demand,
                                   const TargetPolicy& policy, const PriceGrid& grid) {
    const int n = data.n();
    std::vector<double> out(n);

    if (grid.kind() == PriceGrid::Kind::counting) {
        for (int i = 0; i < n; ++i)
            out[i] = policy_surplus_integral(demand(i), policy, data.x(i), grid);
        return out;
    }

    const std::vector<double> z = merged_breakpoints(grid, &policy);
    const size_t m = z.size();
    std::vector<double> mu(m), fr(m), fl(m);
    for (int i = 0; i < n; ++i) {
        const auto x = data.x(i);
        demand(i).price_profile(x, z, mu);
        policy.cdf_profile(x, z, fr, fl);
        double s = 0.0;
        for (size_t g = 0; g + 1 < m; ++g)
            s += (z[g + 1] - z[g]) * (fr[g] * mu[g] + fl[g + 1] * mu[g + 1]) / 2.0;
        out[i] = s;
    }
    return out;
}

// g_i = int_{P_i}^{hi} mu_i dz via per-row suffix sums of the trapezoid grid.
std::vector<double> behavior_tails(const ObservationSet& data, const DemandFor& demand,
                                   const PriceGrid& grid) {
    const int n = data.n();
    std::vector<double> out(n);

    if (grid.kind() == PriceGrid::Kind::counting) {
        for (int i = 0; i < n; ++i)
            out[i] = tail_integral(demand(i), data.x(i), data.price(i), grid);
        return out;
    }

    const auto& z = grid.nodes();
    const size_t m = z.size();
    std::vector<double> mu(m), suffix(m);
    for (int i = 0; i < n; ++i) {
        const auto x = data.x(i);
        const DemandModel& d = demand(i);
        d.price_profile(x, z, mu);
        suffix[m - 1] = 0.0;
        for (size_t g = m - 1; g-- > 0;)
            suffix[g] = suffix[g + 1] + (z[g + 1] - z[g]) * (mu[g] + mu[g + 1]) / 2.0;

        const double p = data.price(i);
        const auto it = std::upper_bound(z.begin(), z.end(), p);
        const size_t g0 = static_cast<size_t>(it - z.begin());
        if (g0 == m) {
            out[i] = 0.0;
        } else {
            out[i] = suffix[g0] + (z[g0] - p) * (d.prob(x, p) + mu[g0]) / 2.0;
        }
    }
    return out;
}

// h_i = int F^{pi_D}(z|x_i) mu_i dz (inequality-aware behavior plug-in).
std::vector<double> behavior_plugins(const ObservationSet& data, const DemandFor& demand,
                                     const PropensityFor& propensity, const PriceGrid& grid) {
    const int n = data.n();
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i)
        out[i] = behavior_surplus_integral(demand(i), propensity(i), data.x(i), grid);
    return out;
}

std::vector<double> cumulative_weights(const ObservationSet& data, const PropensityFor& propensity,
                                       const TargetPolicy* policy) {
    const int n = data.n();
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) {
        const auto x = data.x(i);
        const double p = data.price(i);
        const PropensityModel& pd = propensity(i);
        const double numer = policy ? policy->cdf(p, x) : pd.cumulative(p, x);
        const double denom = pd.density(p, x);
        if (!(denom > 0.0))
            throw DegenerateDataError("propensity density vanished at an observed price");
        w[i] = numer / denom;
        if (!std::isfinite(w[i]) || w[i] < 0.0)
            throw std::runtime_error("invalid cumulative weight at row " + std::to_string(i));
        if (w[i] > pd.weight_cap() * (1.0 + 1e-9))
            throw std::runtime_error("cumulative weight exceeds 1/clip: clip guarantee broken");
    }
    return w;
}

std::vector<double> residuals(const ObservationSet& data, const DemandFor& demand) {
    const int n = data.n();
    std::vector<double> r(n);
    for (int i = 0; i < n; ++i)
        r[i] = data.outcome(i) - demand(i).prob(data.x(i), data.price(i));
    return r;
}

EifSamples build_eif(std::vector<double> plug, std::vector<double> w, std::vector<double> resid,
                     double center) {
    EifSamples s;
    const size_t n = plug.size();
    s.psi.resize(n);
    for (size_t i = 0; i < n; ++i) s.psi[i] = plug[i] + w[i] * resid[i] - center;
    s.plug_in = std::move(plug);
    s.weight = std::move(w);
    s.residual = std::move(resid);
    return s;
}

double psi_second_moment(const std::vector<double>& psi) {
    std::vector<double> sq(psi.size());
    for (size_t i = 0; i < psi.size(); ++i) sq[i] = psi[i] * psi[i];
    return pairwise_mean(sq);
}

DemandFor single(const DemandModel& m) {
    return [&m](int) -> const DemandModel& { return m; };
}
PropensityFor single(const PropensityModel& m) {
    return [&m](int) -> const PropensityModel& { return m; };
}
DemandFor per_fold_demand(const FoldModels& fm) {
    return [&fm](int i) -> const DemandModel& { return fm.demand_for(i); };
}
PropensityFor per_fold_propensity(const FoldModels& fm) {
    return [&fm](int i) -> const PropensityModel& { return fm.propensity_for(i); };
}

}  // namespace

EstimateResult estimate_dm(const ObservationSet& data, const DemandModel& demand,
                           const TargetPolicy* policy, const PriceGrid& grid,
                           const PropensityModel* for_variance) {
    std::vector<double> plug = policy ? target_plugins(data, single(demand), *policy, grid)
                                      : behavior_tails(data, single(demand), grid);
    EstimateResult out;
    out.estimate.value = pairwise_mean(plug);
    out.estimate.n = data.n();
    out.estimate.method = "DM";
    out.estimate.mode = policy ? Mode::target : Mode::behavior;
    out.estimate.nuisance["demand"] = demand.descriptor();

    if (for_variance != nullptr) {
        out.estimate.nuisance["propensity"] = for_variance->descriptor();
        out.eif = build_eif(std::move(plug), cumulative_weights(data, single(*for_variance), policy),
                            residuals(data, single(demand)), out.estimate.value);
        out.estimate.variance = psi_second_moment(out.eif.psi);
        out.estimate.has_variance = true;
    } else {
        out.eif.plug_in = std::move(plug);
    }
    return out;
}

EstimateResult estimate_cpw(const ObservationSet& data, const PropensityModel& propensity,
                            const TargetPolicy* policy, const PriceGrid& grid,
                            const DemandModel* for_variance) {
    std::vector<double> w = cumulative_weights(data, single(propensity), policy);
    std::vector<double> wy(w.size());
    for (size_t i = 0; i < w.size(); ++i) wy[i] = w[i] * data.outcome(i);

    EstimateResult out;
    out.estimate.value = pairwise_mean(wy);
    out.estimate.n = data.n();
    out.estimate.method = "CPW";
    out.estimate.mode = policy ? Mode::target : Mode::behavior;
    out.estimate.nuisance["propensity"] = propensity.descriptor();

    if (for_variance != nullptr) {
        // demand fit enters the EIF only; the point estimate above is model-free
        out.estimate.nuisance["demand"] = for_variance->descriptor();
        std::vector<double> plug = policy ? target_plugins(data, single(*for_variance), *policy, grid)
                                          : behavior_tails(data, single(*for_variance), grid);
        out.eif = build_eif(std::move(plug), std::move(w), residuals(data, single(*for_variance)),
                            out.estimate.value);
        out.estimate.variance = psi_second_moment(out.eif.psi);
        out.estimate.has_variance = true;
    } else {
        out.eif.weight = std::move(w);
    }
    return out;
}

EstimateResult estimate_acpw(const ObservationSet& data, const FoldModels& nuisances,
                             const TargetPolicy* policy, const PriceGrid& grid) {
    const DemandFor demand = per_fold_demand(nuisances);
    const PropensityFor prop = per_fold_propensity(nuisances);

    std::vector<double> plug = policy ? target_plugins(data, demand, *policy, grid)
                                      : behavior_tails(data, demand, grid);
    std::vector<double> w = cumulative_weights(data, prop, policy);
    std::vector<double> resid = residuals(data, demand);

    std::vector<double> contrib(plug.size());
    for (size_t i = 0; i < plug.size(); ++i) contrib[i] = plug[i] + w[i] * resid[i];

    EstimateResult out;
    out.estimate.value = pairwise_mean(contrib);
    out.estimate.n = data.n();
    out.estimate.method = "ACPW";
    out.estimate.mode = policy ? Mode::target : Mode::behavior;
    out.estimate.folds = nuisances.folds.k;
    out.estimate.nuisance["demand"] = nuisances.demand[0]->descriptor();
    out.estimate.nuisance["propensity"] = nuisances.propensity[0]->descriptor();
    out.eif = build_eif(std::move(plug), std::move(w), std::move(resid), out.estimate.value);
    out.estimate.variance = psi_second_moment(out.eif.psi);
    out.estimate.has_variance = true;
    return out;
}

EstimateResult estimate_acpw(const ObservationSet& data, const DemandLearner& demand,
                             const PropensityLearner& propensity, const TargetPolicy* policy,
                             const FoldAssignment& folds, const PriceGrid& grid) {
    return estimate_acpw(data, cross_fit(data, demand, propensity, folds), policy, grid);
}

EstimateResult estimate_ia(const ObservationSet& data, const FoldModels& nuisances,
                           const TargetPolicy* policy, const InequalityParams& params,
                           const PriceGrid& grid) {
    params.validate();
    const double r = params.r;
    const DemandFor demand = per_fold_demand(nuisances);
    const PropensityFor prop = per_fold_propensity(nuisances);

    std::vector<double> w = cumulative_weights(data, prop, policy);
    std::vector<double> resid = residuals(data, demand);

    const int n = data.n();
    std::vector<double> contrib(n), plug(n);
    if (policy != nullptr) {
        plug = target_plugins(data, demand, *policy, grid);
        for (int i = 0; i < n; ++i) {
            const double h = std::max(plug[i], params.floor);
            contrib[i] = r * w[i] * resid[i] * std::pow(h, r - 1.0) + std::pow(h, r);
        }
    } else {
        plug = behavior_tails(data, demand, grid);  // g_i
        const std::vector<double> hd = behavior_plugins(data, demand, prop, grid);
        for (int i = 0; i < n; ++i) {
            const double h = std::max(hd[i], params.floor);
            contrib[i] =
                r * (w[i] * resid[i] + plug[i]) * std::pow(h, r - 1.0) + (1.0 - r) * std::pow(h, r);
        }
    }

    EstimateResult out;
    out.estimate.value = pairwise_mean(contrib);
    out.estimate.n = n;
    out.estimate.method = "IA-ACPW";
    out.estimate.mode = policy ? Mode::target : Mode::behavior;
    out.estimate.r = r;
    out.estimate.folds = nuisances.folds.k;
    out.estimate.nuisance["demand"] = nuisances.demand[0]->descriptor();
    out.estimate.nuisance["propensity"] = nuisances.propensity[0]->descriptor();

    if (out.estimate.value > 0.0) {
        out.estimate.generalized_mean = std::pow(out.estimate.value, 1.0 / r);
        out.estimate.generalized_mean_valid = true;
    }

    out.eif.psi.resize(n);
    for (int i = 0; i < n; ++i) out.eif.psi[i] = contrib[i] - out.estimate.value;
    out.eif.plug_in = std::move(plug);
    out.eif.weight = std::move(w);
    out.eif.residual = std::move(resid);
    out.estimate.variance = psi_second_moment(out.eif.psi);
    out.estimate.has_variance = true;
    return out;
}

EstimateResult estimate_ia(const ObservationSet& data, const DemandLearner& demand,
                           const PropensityLearner& propensity, const TargetPolicy* policy,
                           const FoldAssignment& folds, const InequalityParams& params,
                           const PriceGrid& grid) {
    return estimate_ia(data, cross_fit(data, demand, propensity, folds), policy, params, grid);
}

EstimateResult estimate_delta(const EstimateResult& target, const EstimateResult& behavior) {
    if (target.estimate.n != behavior.estimate.n)
        throw std::invalid_argument("estimate_delta: mismatched sample sizes");
    if (target.estimate.mode != Mode::target || behavior.estimate.mode != Mode::behavior)
        throw std::invalid_argument("estimate_delta: expects one target-mode and one behavior-mode estimate");
    if (target.estimate.method != behavior.estimate.method)
        throw std::invalid_argument("estimate_delta: estimates come from different methods");
    if (target.estimate.r != behavior.estimate.r)
        throw std::invalid_argument("estimate_delta: mismatched inequality exponents");

    EstimateResult out;
    out.estimate = target.estimate;
    out.estimate.mode = Mode::delta;
    out.estimate.value = target.estimate.value - behavior.estimate.value;

    const bool have_eif = !target.eif.empty() && !behavior.eif.empty();
    if (have_eif) {
        const int n = target.eif.n();
        out.eif.psi.resize(n);
        for (int i = 0; i < n; ++i) out.eif.psi[i] = target.eif.psi[i] - behavior.eif.psi[i];
        out.estimate.variance = psi_second_moment(out.eif.psi);
        out.estimate.has_variance = true;
    } else {
        out.estimate.variance = 0.0;
        out.estimate.has_variance = false;
    }
    out.estimate.generalized_mean_valid = false;
    if (out.estimate.method == "IA-ACPW" && out.estimate.value > 0.0) {
        out.estimate.generalized_mean = std::pow(out.estimate.value, 1.0 / out.estimate.r);
        out.estimate.generalized_mean_valid = true;
    }
    return out;
}

}  // namespace surplus
