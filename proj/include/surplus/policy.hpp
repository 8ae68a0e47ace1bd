#ifndef SURPLUS_POLICY_HPP
#define SURPLUS_POLICY_HPP

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "surplus/common.hpp"
#include "surplus/demand.hpp"

#include "json.hpp"

namespace surplus {

// Conditional price distribution pi(p|x) with an analytic CDF F(p|x).
// Variants: uniform interval, discrete grid (fixed or contextual masses), and
// softmax-over-revenue on a price grid. The CDF is right-continuous: mass at
// an atom counts as soon as the query reaches it.
class TargetPolicy {
public:
    using ProbsFn = std::function<std::vector<double>(std::span<const double>)>;

    static TargetPolicy uniform(double lo, double hi);
    static TargetPolicy point_mass(double p);
    static TargetPolicy discrete(std::vector<double> points, std::vector<double> probs);
    static TargetPolicy discrete_contextual(std::vector<double> points, ProbsFn probs);
    static TargetPolicy softmax_revenue(std::shared_ptr<const DemandModel> demand,
                                        std::vector<double> grid, double temperature);

    bool is_discrete() const { return kind_ != Kind::uniform_interval; }
    bool context_dependent() const {
        return kind_ == Kind::softmax || kind_ == Kind::discrete_ctx;
    }

    double cdf(double p, std::span<const double> x) const;
    double cdf_left(double p, std::span<const double> x) const;

    // density for continuous variants; throws for discrete grids
    double density(double p, std::span<const double> x) const;

    // atoms/masses for discrete variants (atoms() is empty for continuous)
    const std::vector<double>& atoms() const { return points_; }
    void atom_probs(std::span<const double> x, std::span<double> out) const;

    // Right-continuous CDF at zs[g] into f_right, left limit into f_left.
    void cdf_profile(std::span<const double> x, std::span<const double> zs,
                     std::span<double> f_right, std::span<double> f_left) const;

    double sample(std::span<const double> x, Rng& rng) const;

    // context values where the masses can jump (softmax over tree fits);
    // empty for context-free variants
    std::vector<double> context_breakpoints(int feature) const;

    // probe-grid checks: masses/density normalize to 1 (1e-8), CDF monotone
    void validate(std::span<const double> x) const;

    double lo() const;
    double hi() const;
    nlohmann::json descriptor() const;

private:
    enum class Kind { uniform_interval, discrete_fixed, discrete_ctx, softmax };

    TargetPolicy() = default;

    Kind kind_ = Kind::uniform_interval;
    double lo_ = 0.0, hi_ = 1.0;        // uniform interval bounds
    std::vector<double> points_;        // discrete/softmax grid, strictly increasing
    std::vector<double> probs_;         // fixed masses
    ProbsFn probs_fn_;                  // contextual masses
    std::shared_ptr<const DemandModel> demand_;  // softmax revenue model
    double gamma_ = 1.0;
};

}  // namespace surplus

#endif
