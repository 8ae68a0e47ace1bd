#include "surplus/api.hpp"

#include <algorithm>
#include <sstream>

namespace surplus {

namespace {

std::vector<double> parse_number_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    if (out.empty()) throw std::invalid_argument("empty number list: '" + s + "'");
    return out;
}

}  // namespace

TargetPolicy parse_policy(const std::string& spec, const ObservationSet& data,
                          const PriceSupport& support, const BoostedTreeParams& gbt) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("policy spec needs the form kind:args, got '" + spec + "'");
    const std::string kind = spec.substr(0, colon);
    const std::string args = spec.substr(colon + 1);

    if (kind == "uniform") {
        const auto v = parse_number_list(args);
        if (v.size() != 2) throw std::invalid_argument("uniform policy needs two bounds");
        return TargetPolicy::uniform(v[0], v[1]);
    }
    if (kind == "point") {
        const auto v = parse_number_list(args);
        if (v.size() != 1) throw std::invalid_argument("point policy needs one price");
        return TargetPolicy::point_mass(v[0]);
    }
    if (kind == "grid") {
        const auto at = args.find('@');
        std::vector<double> pts =
            parse_number_list(at == std::string::npos ? args : args.substr(0, at));
        std::vector<double> probs;
        if (at == std::string::npos) {
            probs.assign(pts.size(), 1.0 / static_cast<double>(pts.size()));
        } else {
            probs = parse_number_list(args.substr(at + 1));
        }
        return TargetPolicy::discrete(std::move(pts), std::move(probs));
    }
    if (kind == "softmax") {
        const auto v = parse_number_list(args);
        if (v.size() != 2)
            throw std::invalid_argument("softmax policy needs grid size and temperature");
        const int npts = static_cast<int>(v[0]);
        if (npts < 2) throw std::invalid_argument("softmax policy needs at least 2 grid points");
        std::shared_ptr<const DemandModel> revenue = fit_demand_boosted(data, gbt);
        std::vector<double> pts(npts);
        for (int j = 0; j < npts; ++j)
            pts[j] = support.lo + (support.hi - support.lo) * j / (npts - 1.0);
        return TargetPolicy::softmax_revenue(std::move(revenue), std::move(pts), v[1]);
    }
    throw std::invalid_argument("unknown policy kind '" + kind + "'");
}

DemandLearner parse_demand_learner(const std::string& name, const BoostedTreeParams& gbt) {
    if (name == "linear") return DemandLearner::linear();
    if (name == "linear_raw") return DemandLearner::linear(false);
    if (name == "boosted") return DemandLearner::boosted(gbt);
    if (name.rfind("ramp", 0) == 0) {
        const auto colon = name.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("ramp demand needs a noise width, e.g. ramp:10");
        return DemandLearner::ramp(std::stod(name.substr(colon + 1)));
    }
    throw std::invalid_argument("unknown demand learner '" + name + "'");
}

PropensityLearner parse_propensity_learner(const std::string& spec, double clip) {
    if (spec == "kde_tophat")
        return PropensityLearner::kde(Kernel::tophat, BandwidthRule::silverman(), clip);
    if (spec == "kde_gaussian")
        return PropensityLearner::kde(Kernel::gaussian, BandwidthRule::silverman(), clip);
    if (spec == "gaussian") return PropensityLearner::gaussian(clip);
    if (spec.rfind("binned_kde", 0) == 0) {
        int feature = 0, bins = 5;
        const auto colon = spec.find(':');
        if (colon != std::string::npos) {
            const auto v = parse_number_list(spec.substr(colon + 1));
            if (!v.empty()) feature = static_cast<int>(v[0]);
            if (v.size() > 1) bins = static_cast<int>(v[1]);
        }
        return PropensityLearner::binned(feature, bins, clip);
    }
    if (spec.rfind("uniform", 0) == 0) {
        const auto colon = spec.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("known uniform propensity needs bounds, e.g. uniform:0,1");
        const auto v = parse_number_list(spec.substr(colon + 1));
        if (v.size() != 2) throw std::invalid_argument("uniform propensity needs two bounds");
        return PropensityLearner::exact(KnownAnalyticPropensity::uniform(v[0], v[1]));
    }
    throw std::invalid_argument("unknown propensity learner '" + spec + "'");
}

nlohmann::json run_estimate(const ObservationSet& data, const EstimateSpec& spec) {
    if (!(spec.alpha > 0.0 && spec.alpha < 1.0))
        throw std::invalid_argument("estimate: alpha must lie in (0, 1)");

    const PriceGrid grid = PriceGrid::uniform(data.support(), spec.grid_size);
    const DemandLearner demand = parse_demand_learner(spec.demand, spec.gbt);
    const PropensityLearner propensity = parse_propensity_learner(spec.propensity, spec.clip_floor);

    std::optional<TargetPolicy> policy;
    if (spec.mode != "behavior") {
        if (spec.mode != "target" && spec.mode != "delta")
            throw std::invalid_argument("estimate: mode must be target|behavior|delta");
        if (spec.policy.empty())
            throw std::invalid_argument("estimate: a policy is required unless mode=behavior");
        policy = parse_policy(spec.policy, data, data.support(), spec.gbt);
        policy->validate(data.x(0));
    }

    auto fit_demand_opt = [&]() -> std::shared_ptr<const DemandModel> {
        try {
            return demand.fit(data);
        } catch (const std::invalid_argument&) {
            return nullptr;  // too few rows for a variance-only fit
        }
    };

    EstimateResult result;
    const TargetPolicy* pol = policy ? &*policy : nullptr;
    if (spec.estimator == "dm") {
        const auto mu = demand.fit(data);
        std::shared_ptr<const PropensityModel> pd;
        try {
            pd = propensity.fit(data);
        } catch (const std::invalid_argument&) {
            pd = nullptr;
        }
        result = spec.mode == "delta"
                     ? estimate_delta(estimate_dm(data, *mu, pol, grid, pd.get()),
                                      estimate_dm(data, *mu, nullptr, grid, pd.get()))
                     : estimate_dm(data, *mu, pol, grid, pd.get());
    } else if (spec.estimator == "cpw") {
        const auto pd = propensity.fit(data);
        const auto mu = fit_demand_opt();
        result = spec.mode == "delta"
                     ? estimate_delta(estimate_cpw(data, *pd, pol, grid, mu.get()),
                                      estimate_cpw(data, *pd, nullptr, grid, mu.get()))
                     : estimate_cpw(data, *pd, pol, grid, mu.get());
    } else if (spec.estimator == "acpw" || spec.estimator == "ia") {
        if (spec.folds < 2 || spec.folds > 10)
            throw std::invalid_argument("estimate: folds must lie in [2, 10]");
        const FoldAssignment folds = make_folds(data.n(), spec.folds, derive_seed(spec.seed, 11));
        const FoldModels fm = cross_fit(data, demand, propensity, folds);
        auto leg = [&](const TargetPolicy* m) {
            return spec.estimator == "acpw"
                       ? estimate_acpw(data, fm, m, grid)
                       : estimate_ia(data, fm, m, InequalityParams{spec.r, 1e-6}, grid);
        };
        result = spec.mode == "delta" ? estimate_delta(leg(pol), leg(nullptr)) : leg(pol);
    } else {
        throw std::invalid_argument("estimate: unknown estimator '" + spec.estimator +
                                    "' (dm|cpw|acpw|ia)");
    }

    nlohmann::json report = {{"format_version", 1},
                             {"method", result.estimate.method},
                             {"mode", to_string(result.estimate.mode)},
                             {"r", result.estimate.r},
                             {"value", result.estimate.value},
                             {"n", result.estimate.n},
                             {"K", result.estimate.folds},
                             {"nuisance", result.estimate.nuisance},
                             {"seed", spec.seed},
                             {"support", {data.support().lo, data.support().hi}}};
    if (result.estimate.has_variance) {
        const ConfidenceInterval ci = confidence_interval(result.estimate, spec.alpha);
        report["variance"] = result.estimate.variance;
        report["ci_low"] = ci.low;
        report["ci_high"] = ci.high;
        report["alpha"] = spec.alpha;
    } else {
        report["variance"] = nullptr;
    }
    if (result.estimate.generalized_mean_valid)
        report["generalized_mean"] = result.estimate.generalized_mean;
    return report;
}

nlohmann::json run_bounds(const ObservationSet& data, const BoundsSpec& spec) {
    if (spec.policy.empty()) throw std::invalid_argument("bounds: a policy is required");

    const double max_price = *std::max_element(data.prices().begin(), data.prices().end());
    const double v_max = spec.v_max > 0.0 ? spec.v_max : 1.05 * max_price;

    const DemandLearner demand = parse_demand_learner(spec.demand, spec.gbt);
    const auto mu = demand.fit(data);
    const TargetPolicy policy = parse_policy(spec.policy, data, data.support(), spec.gbt);

    const PriceGrid grid = make_bounds_grid(data.support(), v_max, spec.fine_nodes, spec.tail_nodes);
    const double halfwidth = 0.5 * data.support().width() / (spec.fine_nodes - 1);
    const double separation = spec.anchor_separation >= 0.0 ? spec.anchor_separation
                                                            : 0.25 * data.support().width();
    const OverlapMap overlap(data.prices(), halfwidth, v_max, separation);

    BoundOptions opt;
    opt.anchor_floor = spec.anchor_floor;
    opt.tighten_lower_with_neighbor = spec.tighten_lower;
    const BoundEstimate b = estimate_bounds(data, *mu, policy, overlap, grid, opt);

    nlohmann::json trace = nlohmann::json::array();
    for (size_t g = 0; g < b.nodes.size(); ++g) {
        if (b.overlap[g]) continue;
        trace.push_back({{"z", b.nodes[g]},
                         {"envelope_lower", b.envelope_lower[g]},
                         {"envelope_upper", b.envelope_upper[g]}});
    }
    return {{"format_version", 1},
            {"lower", b.lower},
            {"upper", b.upper},
            {"length", b.upper - b.lower},
            {"naive_lower", b.naive_lower},
            {"naive_upper", b.naive_upper},
            {"naive_length", b.naive_upper - b.naive_lower},
            {"v_max", v_max},
            {"n", data.n()},
            {"envelope_trace", trace}};
}

}  // namespace surplus
