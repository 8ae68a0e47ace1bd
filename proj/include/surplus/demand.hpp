#ifndef SURPLUS_DEMAND_HPP
#define SURPLUS_DEMAND_HPP

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "surplus/data.hpp"

#include "json.hpp"

namespace surplus {

// Fitted demand function mu(x, p) = P[purchase | x, p]. prob() is clamped to
// [0,1]; raw() exposes the unclamped prediction (LPM fits can leave the unit
// interval).
class DemandModel {
public:
    virtual ~DemandModel() = default;

    virtual double raw(std::span<const double> x, double p) const = 0;

    virtual double prob(std::span<const double> x, double p) const { return clamp01(raw(x, p)); }

    // Clamped predictions over a sorted price vector for a fixed x. Overridden
    // where a batched evaluation is much cheaper than per-node calls.
    virtual void price_profile(std::span<const double> x, std::span<const double> prices,
                               std::span<double> out) const {
        for (size_t g = 0; g < prices.size(); ++g) out[g] = prob(x, prices[g]);
    }

    // Split thresholds on one feature column, where the prediction can jump;
    // used to align quadrature grids with tree-based fits.
    virtual void collect_feature_thresholds(int, std::vector<double>&) const {}

    virtual nlohmann::json descriptor() const = 0;
};

// OLS linear probability model on regressors [x_0..x_{d-1}, p, 1]. With
// clamp_predictions off, the raw plane feeds the integrals; the positive and
// negative extrapolation errors then cancel on average through the residual
// orthogonality of the fit.
class LinearDemand : public DemandModel {
public:
    explicit LinearDemand(std::vector<double> coef, bool clamp_predictions = true)
        : coef_(std::move(coef)), clamp_(clamp_predictions) {}

    double raw(std::span<const double> x, double p) const override {
        const size_t d = coef_.size() - 2;
        double v = coef_[d] * p + coef_[d + 1];
        for (size_t j = 0; j < d; ++j) v += coef_[j] * x[j];
        return v;
    }

    double prob(std::span<const double> x, double p) const override {
        const double v = raw(x, p);
        return clamp_ ? clamp01(v) : v;
    }

    const std::vector<double>& coefficients() const { return coef_; }

    nlohmann::json descriptor() const override {
        return {{"learner", "linear_lpm"}, {"coefficients", coef_}, {"clamped", clamp_}};
    }

private:
    std::vector<double> coef_;  // [slopes on x..., slope on p, intercept]
    bool clamp_ = true;
};

struct BoostedTreeParams {
    int rounds = 100;
    int depth = 2;
    double learning_rate = 0.1;
    int max_bins = 50000;  // effectively exact split search at our sample sizes
    int min_leaf = 20;
    uint64_t seed = 0;

    void validate() const {
        if (rounds < 1) throw std::invalid_argument("BoostedTrees: rounds must be >= 1");
        if (depth < 1) throw std::invalid_argument("BoostedTrees: depth must be >= 1");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0))
            throw std::invalid_argument("BoostedTrees: learning rate must be in (0,1]");
        if (max_bins < 2) throw std::invalid_argument("BoostedTrees: max_bins must be >= 2");
        if (min_leaf < 1) throw std::invalid_argument("BoostedTrees: min_leaf must be >= 1");
    }
};

// Least-squares gradient boosting with depth-limited regression trees over
// (x, p). Splits are searched on per-feature quantile bins.
class BoostedTreeDemand : public DemandModel {
public:
    struct Node {
        int feature = -1;        // -1: leaf
        double threshold = 0.0;  // go left if value <= threshold
        double value = 0.0;      // leaf prediction
        int left = -1, right = -1;
    };
    struct Tree {
        std::vector<Node> nodes;  // nodes[0] is the root
    };

    BoostedTreeDemand(double base, std::vector<Tree> trees, BoostedTreeParams params,
                      std::vector<double> train_mse)
        : base_(base), trees_(std::move(trees)), params_(params), train_mse_(std::move(train_mse)) {}

    double raw(std::span<const double> x, double p) const override;
    void price_profile(std::span<const double> x, std::span<const double> prices,
                       std::span<double> out) const override;
    void collect_feature_thresholds(int feature, std::vector<double>& out) const override;

    const std::vector<double>& training_mse() const { return train_mse_; }
    nlohmann::json descriptor() const override {
        return {{"learner", "boosted_trees"},
                {"rounds", params_.rounds},
                {"depth", params_.depth},
                {"learning_rate", params_.learning_rate}};
    }

private:
    double base_ = 0.0;
    std::vector<Tree> trees_;
    BoostedTreeParams params_;
    std::vector<double> train_mse_;
};

// Demand implied by a linear valuation model with uniform noise of known
// width: V = a + b.x + eps, eps ~ U[0, w], so mu(x,p) = clamp((a + b.x + w -
// p)/w, 0, 1). The price slope is -1/w by construction, which keeps
// log-concave envelope extrapolations stable.
class RampDemand : public DemandModel {
public:
    RampDemand(std::vector<double> index_coef, double noise_width)
        : coef_(std::move(index_coef)), width_(noise_width) {
        if (!(width_ > 0.0)) throw std::invalid_argument("RampDemand: noise width must be positive");
    }

    // index = a + w + b.x; raw = (index - p)/w before clamping
    double raw(std::span<const double> x, double p) const override {
        double idx = coef_.back();
        for (size_t j = 0; j + 1 < coef_.size(); ++j) idx += coef_[j] * x[j];
        return (idx - p) / width_;
    }
    double prob(std::span<const double> x, double p) const override { return clamp01(raw(x, p)); }

    const std::vector<double>& coefficients() const { return coef_; }
    double noise_width() const { return width_; }

    nlohmann::json descriptor() const override {
        return {{"learner", "linear_valuation_ramp"}, {"noise_width", width_}};
    }

private:
    std::vector<double> coef_;  // [b..., a + w]
    double width_;
};

// Exact-match lookup for discrete oracle instances, keyed by price.
class TableDemand : public DemandModel {
public:
    TableDemand(std::vector<double> prices, std::vector<double> values);

    double raw(std::span<const double>, double p) const override;

    nlohmann::json descriptor() const override {
        return {{"learner", "table_lookup"}, {"grid_size", prices_.size()}};
    }

private:
    std::vector<double> prices_;
    std::vector<double> values_;
};

// Exact closure, for simulation truth and worked examples with known mu.
class AnalyticDemand : public DemandModel {
public:
    using Fn = std::function<double(std::span<const double>, double)>;
    AnalyticDemand(Fn fn, std::string label = "analytic") : fn_(std::move(fn)), label_(std::move(label)) {}

    double raw(std::span<const double> x, double p) const override { return fn_(x, p); }

    nlohmann::json descriptor() const override { return {{"learner", "analytic"}, {"label", label_}}; }

private:
    Fn fn_;
    std::string label_;
};

// pre: n > d+2 and full-rank design; throws on singular designs.
std::unique_ptr<LinearDemand> fit_demand_linear(const ObservationSet& data,
                                                bool clamp_predictions = true);

std::unique_ptr<BoostedTreeDemand> fit_demand_boosted(const ObservationSet& data,
                                                      const BoostedTreeParams& params);

// Gauss-Newton least squares for the ramp demand's index coefficients, the
// noise width being known.
std::unique_ptr<RampDemand> fit_demand_ramp(const ObservationSet& data, double noise_width,
                                            int iterations = 50);

}  // namespace surplus

#endif
