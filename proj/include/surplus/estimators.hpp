#ifndef SURPLUS_ESTIMATORS_HPP
#define SURPLUS_ESTIMATORS_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "surplus/data.hpp"
#include "surplus/demand.hpp"
#include "surplus/folds.hpp"
#include "surplus/integrate.hpp"
#include "surplus/policy.hpp"
#include "surplus/propensity.hpp"

#include "json.hpp"

namespace surplus {

enum class Mode { target, behavior, delta };
std::string to_string(Mode mode);

// Per-observation influence components. plug_in holds h_i (target mode) or
// g_i (behavior mode); psi is already centered at the point estimate.
struct EifSamples {
    std::vector<double> plug_in;
    std::vector<double> weight;
    std::vector<double> residual;
    std::vector<double> psi;

    bool empty() const { return psi.empty(); }
    int n() const { return static_cast<int>(psi.size()); }
};

struct SurplusEstimate {
    double value = 0.0;
    double variance = 0.0;  // empirical second moment of the centered EIF
    bool has_variance = false;
    int n = 0;
    std::string method;  // DM | CPW | ACPW | IA-ACPW
    Mode mode = Mode::target;
    double r = 1.0;
    int folds = 0;  // K, 0 when no cross-fitting
    double generalized_mean = 0.0;
    bool generalized_mean_valid = false;
    nlohmann::json nuisance = nlohmann::json::object();
};

struct EstimateResult {
    SurplusEstimate estimate;
    EifSamples eif;
};

// Factory specs so cross-fitting can retrain nuisances per fold complement.
struct DemandLearner {
    enum class Kind { linear, boosted, ramp, fixed };
    Kind kind = Kind::linear;
    bool linear_clamp = true;  // clamp LPM predictions to [0,1] inside integrals
    double ramp_width = 1.0;   // known noise width of the valuation ramp
    BoostedTreeParams boosted_params;
    std::shared_ptr<const DemandModel> fixed_model;  // table/analytic closures

    static DemandLearner linear(bool clamp_predictions = true) {
        DemandLearner l;
        l.linear_clamp = clamp_predictions;
        return l;
    }
    static DemandLearner ramp(double noise_width) {
        DemandLearner l;
        l.kind = Kind::ramp;
        l.ramp_width = noise_width;
        return l;
    }
    static DemandLearner boosted(const BoostedTreeParams& p) {
        DemandLearner l;
        l.kind = Kind::boosted;
        l.boosted_params = p;
        return l;
    }
    static DemandLearner exact(std::shared_ptr<const DemandModel> m) {
        DemandLearner l;
        l.kind = Kind::fixed;
        l.fixed_model = std::move(m);
        return l;
    }

    std::shared_ptr<const DemandModel> fit(const ObservationSet& data) const;
};

struct PropensityLearner {
    enum class Kind { kde_tophat, kde_gaussian, parametric_gaussian, binned_kde, fixed };
    Kind kind = Kind::kde_tophat;
    BandwidthRule bandwidth = BandwidthRule::silverman();
    double clip = 1e-3;
    int bins = 5;     // binned_kde
    int feature = 0;  // binned_kde
    std::shared_ptr<const PropensityModel> fixed_model;

    static PropensityLearner kde(Kernel kernel, BandwidthRule bw = BandwidthRule::silverman(),
                                 double clip = 1e-3);
    static PropensityLearner gaussian(double clip = 1e-3);
    static PropensityLearner binned(int feature, int bins, double clip = 1e-3);
    static PropensityLearner exact(std::shared_ptr<const PropensityModel> m);

    std::shared_ptr<const PropensityModel> fit(const ObservationSet& data) const;
};

// Fold-complement nuisance fits. demand[k] / propensity[k] were trained
// without fold k's rows.
struct FoldModels {
    FoldAssignment folds;
    std::vector<std::shared_ptr<const DemandModel>> demand;
    std::vector<std::shared_ptr<const PropensityModel>> propensity;

    const DemandModel& demand_for(int row) const { return *demand[folds.fold[row]]; }
    const PropensityModel& propensity_for(int row) const { return *propensity[folds.fold[row]]; }
};

FoldModels cross_fit(const ObservationSet& data, const DemandLearner& demand,
                     const PropensityLearner& propensity, const FoldAssignment& folds);

// Direct method. Target mode averages the policy-weighted demand integral,
// behavior mode the tail integral at the logged price. The point estimate
// never touches a propensity model; `for_variance` supplies one so the EIF
// (and hence a variance) can be formed.
EstimateResult estimate_dm(const ObservationSet& data, const DemandModel& demand,
                           const TargetPolicy* policy, const PriceGrid& grid,
                           const PropensityModel* for_variance = nullptr);

// Cumulative propensity weighting: mean of F(P_i|X_i)/pi_D(P_i|X_i) * Y_i
// with F = F^pi (target) or the fitted cumulative (behavior). `for_variance`
// supplies a demand fit used only to build the EIF.
EstimateResult estimate_cpw(const ObservationSet& data, const PropensityModel& propensity,
                            const TargetPolicy* policy, const PriceGrid& grid,
                            const DemandModel* for_variance = nullptr);

// Augmented CPW with cross-fitted nuisances: plug-in + weighted residual.
EstimateResult estimate_acpw(const ObservationSet& data, const FoldModels& nuisances,
                             const TargetPolicy* policy, const PriceGrid& grid);
EstimateResult estimate_acpw(const ObservationSet& data, const DemandLearner& demand,
                             const PropensityLearner& propensity, const TargetPolicy* policy,
                             const FoldAssignment& folds, const PriceGrid& grid);

// Inequality-aware estimator of S^r; collapses to ACPW at r=1.
EstimateResult estimate_ia(const ObservationSet& data, const FoldModels& nuisances,
                           const TargetPolicy* policy, const InequalityParams& params,
                           const PriceGrid& grid);
EstimateResult estimate_ia(const ObservationSet& data, const DemandLearner& demand,
                           const PropensityLearner& propensity, const TargetPolicy* policy,
                           const FoldAssignment& folds, const InequalityParams& params,
                           const PriceGrid& grid);

// Difference-in-surplus from a target-mode and behavior-mode estimate that
// share data and nuisance fits. psi_delta = psi_target - psi_behavior.
EstimateResult estimate_delta(const EstimateResult& target, const EstimateResult& behavior);

}  // namespace surplus

#endif
