#ifndef SURPLUS_INFERENCE_HPP
#define SURPLUS_INFERENCE_HPP

#include "surplus/estimators.hpp"

namespace surplus {

struct ConfidenceInterval {
    double alpha = 0.1;
    double low = 0.0;
    double high = 0.0;
    double z = 0.0;  // z_{1-alpha/2}

    bool contains(double v) const { return v >= low && v <= high; }
    double width() const { return high - low; }
};

// Inverse standard normal CDF, Acklam's rational approximation plus one
// Halley refinement step (absolute error well below 1e-9).
double normal_quantile(double p);

// (1/n) sum psi_i^2 of the centered EIF samples. pre: n >= 2.
double eif_variance(const EifSamples& samples);

// [point +- z_{1-alpha/2} sqrt(variance / n)]
ConfidenceInterval confidence_interval(double point, double variance, int n, double alpha);

inline ConfidenceInterval confidence_interval(const SurplusEstimate& est, double alpha) {
    if (!est.has_variance)
        throw std::invalid_argument("confidence_interval: estimate has no EIF variance");
    return confidence_interval(est.value, est.variance, est.n, alpha);
}

}  // namespace surplus

#endif
