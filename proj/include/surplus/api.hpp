#ifndef SURPLUS_API_HPP
#define SURPLUS_API_HPP

#include <string>

#include "surplus/estimators.hpp"
#include "surplus/inference.hpp"
#include "surplus/partial_id.hpp"

#include "json.hpp"

namespace surplus {

// String specs shared by the CLI and the python module.
//   policy:     uniform:a,b | point:p | grid:p1,..[@q1,..] | softmax:G,gamma
//   demand:     linear | boosted
//   propensity: kde_tophat | kde_gaussian | gaussian | binned_kde[:feat,bins] | uniform:a,b
TargetPolicy parse_policy(const std::string& spec, const ObservationSet& data,
                          const PriceSupport& support, const BoostedTreeParams& gbt);
DemandLearner parse_demand_learner(const std::string& name, const BoostedTreeParams& gbt);
PropensityLearner parse_propensity_learner(const std::string& spec, double clip);

struct EstimateSpec {
    std::string estimator = "acpw";  // dm | cpw | acpw | ia
    std::string mode = "target";     // target | behavior | delta
    std::string policy;              // required unless mode == behavior
    std::string demand = "linear";
    std::string propensity = "kde_tophat";
    double r = 1.0;
    double alpha = 0.10;
    double clip_floor = 1e-3;
    int folds = 2;
    int grid_size = 200;
    uint64_t seed = 1;
    BoostedTreeParams gbt;
};

// Full estimation pipeline: nuisance fits, estimator dispatch, CI. Returns the
// report document {method, mode, r, value, variance, ci_low, ci_high, n, K,
// nuisance, seed, ...}.
nlohmann::json run_estimate(const ObservationSet& data, const EstimateSpec& spec);

struct BoundsSpec {
    std::string policy;  // required
    std::string demand = "linear";
    double v_max = 0.0;  // 0: 1.05 * max observed price
    int fine_nodes = 400;
    int tail_nodes = 200;
    double anchor_floor = 1e-6;
    double anchor_separation = -1.0;  // negative: a quarter of the observed span
    bool tighten_lower = false;
    BoostedTreeParams gbt;
};

nlohmann::json run_bounds(const ObservationSet& data, const BoundsSpec& spec);

}  // namespace surplus

#endif
