#include "surplus/policy.hpp"

#include <algorithm>
#include <cmath>

namespace surplus {

namespace {

void check_points(const std::vector<double>& pts) {
    if (pts.empty()) throw std::invalid_argument("policy: empty price grid");
    for (size_t j = 1; j < pts.size(); ++j)
        if (!(pts[j] > pts[j - 1]))
            throw std::invalid_argument("policy: grid points must be strictly increasing");
}

}  // namespace

TargetPolicy TargetPolicy::uniform(double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("uniform policy: lo must be below hi");
    TargetPolicy p;
    p.kind_ = Kind::uniform_interval;
    p.lo_ = lo;
    p.hi_ = hi;
    return p;
}

TargetPolicy TargetPolicy::point_mass(double at) { return discrete({at}, {1.0}); }

TargetPolicy TargetPolicy::discrete(std::vector<double> points, std::vector<double> probs) {
    check_points(points);
    if (points.size() != probs.size())
        throw std::invalid_argument("discrete policy: points/probs size mismatch");
    double total = 0.0;
    for (double q : probs) {
        if (q < 0.0) throw std::invalid_argument("discrete policy: negative mass");
        total += q;
    }
    if (std::abs(total - 1.0) > 1e-8)
        throw std::invalid_argument("discrete policy: masses must sum to 1");
    TargetPolicy p;
    p.kind_ = Kind::discrete_fixed;
    p.points_ = std::move(points);
    p.probs_ = std::move(probs);
    p.lo_ = p.points_.front();
    p.hi_ = p.points_.back();
    return p;
}

TargetPolicy TargetPolicy::discrete_contextual(std::vector<double> points, ProbsFn probs) {
    check_points(points);
    TargetPolicy p;
    p.kind_ = Kind::discrete_ctx;
    p.points_ = std::move(points);
    p.probs_fn_ = std::move(probs);
    p.lo_ = p.points_.front();
    p.hi_ = p.points_.back();
    return p;
}

TargetPolicy TargetPolicy::softmax_revenue(std::shared_ptr<const DemandModel> demand,
                                           std::vector<double> grid, double temperature) {
    check_points(grid);
    if (!demand) throw std::invalid_argument("softmax policy: null demand model");
    if (temperature < 0.0) throw std::invalid_argument("softmax policy: temperature must be >= 0");
    TargetPolicy p;
    p.kind_ = Kind::softmax;
    p.points_ = std::move(grid);
    p.demand_ = std::move(demand);
    p.gamma_ = temperature;
    p.lo_ = p.points_.front();
    p.hi_ = p.points_.back();
    return p;
}

void TargetPolicy::atom_probs(std::span<const double> x, std::span<double> out) const {
    switch (kind_) {
        case Kind::discrete_fixed:
            std::copy(probs_.begin(), probs_.end(), out.begin());
            return;
        case Kind::discrete_ctx: {
            const std::vector<double> q = probs_fn_(x);
            if (q.size() != points_.size())
                throw std::invalid_argument("contextual policy: wrong mass vector length");
            std::copy(q.begin(), q.end(), out.begin());
            return;
        }
        case Kind::softmax: {
            // masses proportional to exp(gamma * p * demand(x, p))
            double mx = -std::numeric_limits<double>::infinity();
            for (size_t j = 0; j < points_.size(); ++j) {
                out[j] = gamma_ * points_[j] * demand_->prob(x, points_[j]);
                mx = std::max(mx, out[j]);
            }
            double total = 0.0;
            for (size_t j = 0; j < points_.size(); ++j) {
                out[j] = std::exp(out[j] - mx);
                total += out[j];
            }
            for (size_t j = 0; j < points_.size(); ++j) out[j] /= total;
            return;
        }
        case Kind::uniform_interval:
            throw std::logic_error("atom_probs: continuous policy has no atoms");
    }
}

double TargetPolicy::cdf(double p, std::span<const double> x) const {
    if (kind_ == Kind::uniform_interval)
        return clamp01((p - lo_) / (hi_ - lo_));
    std::vector<double> q(points_.size());
    atom_probs(x, q);
    double f = 0.0;
    for (size_t j = 0; j < points_.size() && points_[j] <= p; ++j) f += q[j];
    return std::min(f, 1.0);
}

double TargetPolicy::cdf_left(double p, std::span<const double> x) const {
    if (kind_ == Kind::uniform_interval)
        return clamp01((p - lo_) / (hi_ - lo_));
    std::vector<double> q(points_.size());
    atom_probs(x, q);
    double f = 0.0;
    for (size_t j = 0; j < points_.size() && points_[j] < p; ++j) f += q[j];
    return std::min(f, 1.0);
}

void TargetPolicy::cdf_profile(std::span<const double> x, std::span<const double> zs,
                               std::span<double> f_right, std::span<double> f_left) const {
    if (kind_ == Kind::uniform_interval) {
        for (size_t g = 0; g < zs.size(); ++g) {
            const double f = clamp01((zs[g] - lo_) / (hi_ - lo_));
            f_right[g] = f;
            f_left[g] = f;
        }
        return;
    }
    std::vector<double> q(points_.size());
    atom_probs(x, q);
    size_t j = 0;
    double below = 0.0;  // mass strictly below zs[g]
    for (size_t g = 0; g < zs.size(); ++g) {
        while (j < points_.size() && points_[j] < zs[g]) below += q[j++];
        double at = 0.0;
        if (j < points_.size() && points_[j] == zs[g]) at = q[j];
        f_left[g] = std::min(below, 1.0);
        f_right[g] = std::min(below + at, 1.0);
    }
}

double TargetPolicy::density(double p, std::span<const double>) const {
    if (kind_ != Kind::uniform_interval)
        throw std::logic_error("density: discrete policy has point masses, not a density");
    return (p >= lo_ && p <= hi_) ? 1.0 / (hi_ - lo_) : 0.0;
}

double TargetPolicy::sample(std::span<const double> x, Rng& rng) const {
    if (kind_ == Kind::uniform_interval) return rng.uniform(lo_, hi_);
    std::vector<double> q(points_.size());
    atom_probs(x, q);
    const double u = rng.uniform();
    double acc = 0.0;
    for (size_t j = 0; j < points_.size(); ++j) {
        acc += q[j];
        if (u < acc) return points_[j];
    }
    return points_.back();
}

std::vector<double> TargetPolicy::context_breakpoints(int feature) const {
    std::vector<double> out;
    if (kind_ == Kind::softmax) demand_->collect_feature_thresholds(feature, out);
    return out;
}

void TargetPolicy::validate(std::span<const double> x) const {
    if (kind_ == Kind::uniform_interval) return;  // normalized by construction
    std::vector<double> q(points_.size());
    atom_probs(x, q);
    double total = 0.0;
    for (double v : q) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("policy: invalid mass value");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-8)
        throw std::invalid_argument("policy: masses do not sum to 1");
}

double TargetPolicy::lo() const { return lo_; }
double TargetPolicy::hi() const { return hi_; }

nlohmann::json TargetPolicy::descriptor() const {
    switch (kind_) {
        case Kind::uniform_interval:
            return {{"policy", "uniform"}, {"lo", lo_}, {"hi", hi_}};
        case Kind::discrete_fixed:
            return {{"policy", "discrete"}, {"points", points_}, {"probs", probs_}};
        case Kind::discrete_ctx:
            return {{"policy", "discrete_contextual"}, {"points", points_}};
        case Kind::softmax:
            return {{"policy", "softmax_revenue"},
                    {"points", points_},
                    {"temperature", gamma_},
                    {"demand", demand_->descriptor()}};
    }
    return {};
}

}  // namespace surplus
