#ifndef SURPLUS_PROPENSITY_HPP
#define SURPLUS_PROPENSITY_HPP

#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "surplus/data.hpp"

#include "json.hpp"

namespace surplus {

// Step CDF of observed prices, right-continuous.
class EmpiricalCdf {
public:
    explicit EmpiricalCdf(std::vector<double> values);
    double operator()(double p) const;

private:
    std::vector<double> sorted_;
};

// Behavior-policy model: density pi_D(p|x) (clip-floored) and cumulative
// F^{pi_D}(p|x). Fitted variants are marginal in p by default, matching data
// where prices were drawn independently of x; a feature-binned conditional
// variant sits behind the same interface.
class PropensityModel {
public:
    virtual ~PropensityModel() = default;

    virtual double density(double p, std::span<const double> x) const = 0;
    virtual double cumulative(double p, std::span<const double> x) const = 0;

    virtual bool context_dependent() const { return false; }

    double clip_floor() const { return clip_; }
    double weight_cap() const {
        return clip_ > 0.0 ? 1.0 / clip_ : std::numeric_limits<double>::infinity();
    }

    virtual nlohmann::json descriptor() const = 0;

protected:
    double clip_ = 0.0;
};

// Exact closures for known logging policies; no clipping applied.
class KnownAnalyticPropensity : public PropensityModel {
public:
    using Fn = std::function<double(double, std::span<const double>)>;
    KnownAnalyticPropensity(Fn density, Fn cdf, std::string label = "known")
        : density_(std::move(density)), cdf_(std::move(cdf)), label_(std::move(label)) {}

    static std::unique_ptr<KnownAnalyticPropensity> uniform(double lo, double hi);

    double density(double p, std::span<const double> x) const override { return density_(p, x); }
    double cumulative(double p, std::span<const double> x) const override { return cdf_(p, x); }
    nlohmann::json descriptor() const override {
        return {{"learner", "known_analytic"}, {"label", label_}};
    }

private:
    Fn density_;
    Fn cdf_;
    std::string label_;
};

enum class Kernel { tophat, gaussian };

struct BandwidthRule {
    enum class Kind { silverman, fixed };
    Kind kind = Kind::silverman;
    double value = 0.0;  // bandwidth when fixed

    static BandwidthRule silverman() { return {Kind::silverman, 0.0}; }
    static BandwidthRule fixed(double h) {
        if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
        return {Kind::fixed, h};
    }
};

// Marginal KDE density paired with the empirical CDF. Kernel windows are
// renormalized by their overlap with the price support, which removes the
// boundary bias of the plain estimator near the support edges.
class KdePropensity : public PropensityModel {
public:
    KdePropensity(std::vector<double> prices, Kernel kernel, double bandwidth, double clip,
                  PriceSupport support);

    double density(double p, std::span<const double> x) const override;
    double cumulative(double p, std::span<const double> x) const override { return ecdf_(p); }
    double bandwidth() const { return h_; }

    nlohmann::json descriptor() const override {
        return {{"learner", kernel_ == Kernel::tophat ? "kde_tophat" : "kde_gaussian"},
                {"bandwidth", h_},
                {"clip_floor", clip_}};
    }

private:
    std::vector<double> sorted_;
    EmpiricalCdf ecdf_;
    Kernel kernel_;
    double h_;
    PriceSupport support_;
};

// Moment-matched normal density; deliberately misspecified for uniform price
// laws. Cumulative is the empirical CDF.
class GaussianPropensity : public PropensityModel {
public:
    GaussianPropensity(std::vector<double> prices, double clip);

    double density(double p, std::span<const double> x) const override;
    double cumulative(double p, std::span<const double> x) const override { return ecdf_(p); }
    double mean() const { return mean_; }
    double sd() const { return sd_; }

    nlohmann::json descriptor() const override {
        return {{"learner", "parametric_gaussian"}, {"mean", mean_}, {"sd", sd_}, {"clip_floor", clip_}};
    }

private:
    EmpiricalCdf ecdf_;
    double mean_ = 0.0;
    double sd_ = 1.0;
};

// Conditional variant: quantile-bin one feature column and fit a marginal KDE
// plus empirical CDF inside each bin.
class BinnedKdePropensity : public PropensityModel {
public:
    BinnedKdePropensity(const ObservationSet& data, int feature, int bins, Kernel kernel,
                        BandwidthRule bw, double clip);

    double density(double p, std::span<const double> x) const override;
    double cumulative(double p, std::span<const double> x) const override;
    bool context_dependent() const override { return true; }

    nlohmann::json descriptor() const override {
        return {{"learner", "binned_kde"}, {"feature", feature_}, {"bins", static_cast<int>(models_.size())}};
    }

private:
    int bin_of(std::span<const double> x) const;

    int feature_ = 0;
    std::vector<double> edges_;  // upper bin edges
    std::vector<std::unique_ptr<KdePropensity>> models_;
};

// pre: n >= 10; throws DegenerateDataError on zero-variance prices.
std::unique_ptr<KdePropensity> fit_propensity_kde(const ObservationSet& data, Kernel kernel,
                                                  BandwidthRule bw = BandwidthRule::silverman(),
                                                  double clip = 1e-3);

// pre: n >= 2.
std::unique_ptr<GaussianPropensity> fit_propensity_gaussian(const ObservationSet& data,
                                                            double clip = 1e-3);

}  // namespace surplus

#endif
