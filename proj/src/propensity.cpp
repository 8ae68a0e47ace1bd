#include "surplus/propensity.hpp"

#include <algorithm>
#include <cmath>

namespace surplus {

namespace {
constexpr double kSqrt2Pi = 2.5066282746310002;

double silverman_bandwidth(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double p : v) mean += p;
    mean /= n;
    double var = 0.0;
    for (double p : v) var += (p - mean) * (p - mean);
    var /= n;
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) throw DegenerateDataError("KDE: zero-variance prices");
    return 1.06 * sd * std::pow(n, -0.2);
}
}  // namespace

EmpiricalCdf::EmpiricalCdf(std::vector<double> values) : sorted_(std::move(values)) {
    if (sorted_.empty()) throw std::invalid_argument("EmpiricalCdf: empty sample");
    std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double p) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), p);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

std::unique_ptr<KnownAnalyticPropensity> KnownAnalyticPropensity::uniform(double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("uniform propensity: lo must be below hi");
    const double dens = 1.0 / (hi - lo);
    return std::make_unique<KnownAnalyticPropensity>(
        [=](double p, std::span<const double>) { return (p >= lo && p <= hi) ? dens : 0.0; },
        [=](double p, std::span<const double>) { return clamp01((p - lo) / (hi - lo)); },
        "uniform");
}

KdePropensity::KdePropensity(std::vector<double> prices, Kernel kernel, double bandwidth,
                             double clip, PriceSupport support)
    : sorted_(std::move(prices)), ecdf_(sorted_), kernel_(kernel), h_(bandwidth),
      support_(support) {
    clip_ = clip;
    if (!(h_ > 0.0)) throw std::invalid_argument("KDE: bandwidth must be positive");
    if (!(clip_ > 0.0)) throw std::invalid_argument("KDE: clip floor must be positive");
    std::sort(sorted_.begin(), sorted_.end());
}

double KdePropensity::density(double p, std::span<const double>) const {
    const double n = static_cast<double>(sorted_.size());
    double dens = 0.0;
    if (kernel_ == Kernel::tophat) {
        const auto lo = std::lower_bound(sorted_.begin(), sorted_.end(), p - h_);
        const auto hi = std::upper_bound(sorted_.begin(), sorted_.end(), p + h_);
        const double window = std::min(p + h_, support_.hi) - std::max(p - h_, support_.lo);
        if (window > 0.0) dens = static_cast<double>(hi - lo) / (window * n);
    } else {
        for (double v : sorted_) {
            const double u = (p - v) / h_;
            dens += std::exp(-0.5 * u * u);
        }
        dens /= n * h_ * kSqrt2Pi;
        // in-support gaussian mass
        const double z = 0.5 * (std::erf((support_.hi - p) / (h_ * std::sqrt(2.0))) -
                                std::erf((support_.lo - p) / (h_ * std::sqrt(2.0))));
        if (z > 1e-12) dens /= z;
    }
    return std::max(dens, clip_);
}

std::unique_ptr<KdePropensity> fit_propensity_kde(const ObservationSet& data, Kernel kernel,
                                                  BandwidthRule bw, double clip) {
    if (data.n() < 10) throw std::invalid_argument("fit_propensity_kde: need n >= 10");
    const double h = bw.kind == BandwidthRule::Kind::fixed ? bw.value
                                                           : silverman_bandwidth(data.prices());
    return std::make_unique<KdePropensity>(data.prices(), kernel, h, clip, data.support());
}

GaussianPropensity::GaussianPropensity(std::vector<double> prices, double clip)
    : ecdf_(prices) {
    clip_ = clip;
    const double n = static_cast<double>(prices.size());
    if (n < 2) throw std::invalid_argument("GaussianPropensity: need n >= 2");
    for (double p : prices) mean_ += p;
    mean_ /= n;
    double var = 0.0;
    for (double p : prices) var += (p - mean_) * (p - mean_);
    var /= n;
    sd_ = std::sqrt(var);
    if (!(sd_ > 0.0)) throw DegenerateDataError("GaussianPropensity: zero-variance prices");
}

double GaussianPropensity::density(double p, std::span<const double>) const {
    const double u = (p - mean_) / sd_;
    return std::max(std::exp(-0.5 * u * u) / (sd_ * kSqrt2Pi), clip_);
}

std::unique_ptr<GaussianPropensity> fit_propensity_gaussian(const ObservationSet& data,
                                                            double clip) {
    if (data.n() < 2) throw std::invalid_argument("fit_propensity_gaussian: need n >= 2");
    return std::make_unique<GaussianPropensity>(data.prices(), clip);
}

BinnedKdePropensity::BinnedKdePropensity(const ObservationSet& data, int feature, int bins,
                                         Kernel kernel, BandwidthRule bw, double clip)
    : feature_(feature) {
    clip_ = clip;
    if (feature < 0 || feature >= data.dim())
        throw std::invalid_argument("BinnedKdePropensity: feature index out of range");
    if (bins < 1) throw std::invalid_argument("BinnedKdePropensity: need at least one bin");

    std::vector<double> col(data.n());
    for (int i = 0; i < data.n(); ++i) col[i] = data.x(i)[feature];
    std::vector<double> sorted = col;
    std::sort(sorted.begin(), sorted.end());
    for (int b = 1; b < bins; ++b)
        edges_.push_back(sorted[static_cast<size_t>(sorted.size() * static_cast<double>(b) / bins)]);
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

    const int nbins = static_cast<int>(edges_.size()) + 1;
    std::vector<std::vector<double>> by_bin(nbins);
    for (int i = 0; i < data.n(); ++i) {
        const int b = static_cast<int>(std::upper_bound(edges_.begin(), edges_.end(), col[i]) -
                                       edges_.begin());
        by_bin[b].push_back(data.price(i));
    }
    for (int b = 0; b < nbins; ++b) {
        if (static_cast<int>(by_bin[b].size()) < 10)
            throw DegenerateDataError("BinnedKdePropensity: bin " + std::to_string(b) +
                                      " has fewer than 10 observations");
        const double h = bw.kind == BandwidthRule::Kind::fixed ? bw.value
                                                               : silverman_bandwidth(by_bin[b]);
        models_.push_back(std::make_unique<KdePropensity>(by_bin[b], kernel, h, clip,
                                                          data.support()));
    }
}

int BinnedKdePropensity::bin_of(std::span<const double> x) const {
    return static_cast<int>(std::upper_bound(edges_.begin(), edges_.end(), x[feature_]) -
                            edges_.begin());
}

double BinnedKdePropensity::density(double p, std::span<const double> x) const {
    return models_[bin_of(x)]->density(p, x);
}

double BinnedKdePropensity::cumulative(double p, std::span<const double> x) const {
    return models_[bin_of(x)]->cumulative(p, x);
}

}  // namespace surplus
