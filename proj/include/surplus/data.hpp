#ifndef SURPLUS_DATA_HPP
#define SURPLUS_DATA_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surplus/common.hpp"

namespace surplus {

struct PriceSupport {
    double lo = 0.0;
    double hi = 1.0;
    double width() const { return hi - lo; }
    bool contains(double p) const { return p >= lo && p <= hi; }
};

// Logged pricing data: features (n x d, row-major), offered prices, binary
// purchase outcomes. Immutable after construction.
class ObservationSet {
public:
    ObservationSet(std::vector<double> features, int dim, std::vector<double> prices,
                   std::vector<double> outcomes, PriceSupport support);

    // CSV with header row: x0..x{d-1}, p, y. Extra columns are ignored except
    // `segment`, exposed via segments(). Missing support -> inferred as
    // [min price, 1.05 * max price].
    static ObservationSet from_csv(const std::string& path,
                                   std::optional<PriceSupport> support = std::nullopt);

    int n() const { return n_; }
    int dim() const { return dim_; }
    std::span<const double> x(int i) const {
        return {features_.data() + static_cast<size_t>(i) * dim_, static_cast<size_t>(dim_)};
    }
    double price(int i) const { return prices_[i]; }
    double outcome(int i) const { return outcomes_[i]; }
    const std::vector<double>& prices() const { return prices_; }
    const std::vector<double>& outcomes() const { return outcomes_; }
    const std::vector<double>& features() const { return features_; }
    const PriceSupport& support() const { return support_; }
    const std::vector<std::string>& segments() const { return segments_; }
    bool has_segments() const { return !segments_.empty(); }

    ObservationSet subset(std::span<const int> rows) const;
    ObservationSet filter_segment(const std::string& label) const;

private:
    void validate() const;

    std::vector<double> features_;
    std::vector<double> prices_;
    std::vector<double> outcomes_;
    std::vector<std::string> segments_;  // optional, parallel to rows
    int n_ = 0;
    int dim_ = 0;
    PriceSupport support_;
};

// Quadrature grid over the price support. Two kinds:
//  - uniform: composite trapezoid nodes/weights, sum(weights) = hi - lo;
//  - counting: discrete instance nodes with unit weights, tail "integrals"
//    become tail sums that include the query node.
class PriceGrid {
public:
    enum class Kind { trapezoid, counting };

    static PriceGrid uniform(double lo, double hi, int nodes = 200);
    static PriceGrid uniform(const PriceSupport& s, int nodes = 200) {
        return uniform(s.lo, s.hi, nodes);
    }
    // Two uniform segments with different resolutions, e.g. a fine grid over
    // the observed span plus a coarser tail up to V_max.
    static PriceGrid piecewise(double lo, double mid, double hi, int nodes_lo, int nodes_hi);
    static PriceGrid counting(std::vector<double> points);

    Kind kind() const { return kind_; }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }
    double lo() const { return nodes_.front(); }
    double hi() const { return nodes_.back(); }
    int size() const { return static_cast<int>(nodes_.size()); }

private:
    PriceGrid(Kind kind, std::vector<double> nodes, std::vector<double> weights);

    Kind kind_;
    std::vector<double> nodes_;    // strictly increasing
    std::vector<double> weights_;  // trapezoid weights / unit weights
};

// Inequality-aversion parameters for the generalized-mean surplus.
struct InequalityParams {
    double r = 1.0;         // exponent, must be nonzero
    double floor = 1e-6;    // clamp on the inner surplus before raising to r-1

    void validate() const {
        if (r == 0.0) throw std::invalid_argument("InequalityParams: r must be nonzero");
        if (!(floor > 0.0 && floor <= 1.0))
            throw std::invalid_argument("InequalityParams: floor must be in (0, 1]");
    }
};

}  // namespace surplus

#endif
