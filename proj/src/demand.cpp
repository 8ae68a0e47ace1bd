#include "surplus/demand.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace surplus {

namespace {

// Solve the symmetric positive definite system A b = rhs (normal equations)
// by Cholesky. Throws on rank deficiency.
std::vector<double> solve_spd(std::vector<double> a, std::vector<double> rhs, int m) {
    std::vector<double> l(static_cast<size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a[static_cast<size_t>(i) * m + j];
            for (int k = 0; k < j; ++k) s -= l[static_cast<size_t>(i) * m + k] * l[static_cast<size_t>(j) * m + k];
            if (i == j) {
                if (s <= 1e-12 * std::max(1.0, a[static_cast<size_t>(i) * m + i]))
                    throw DegenerateDataError("singular design matrix in linear demand fit");
                l[static_cast<size_t>(i) * m + i] = std::sqrt(s);
            } else {
                l[static_cast<size_t>(i) * m + j] = s / l[static_cast<size_t>(j) * m + j];
            }
        }
    }
    // forward then backward substitution
    std::vector<double> y(m), b(m);
    for (int i = 0; i < m; ++i) {
        double s = rhs[i];
        for (int k = 0; k < i; ++k) s -= l[static_cast<size_t>(i) * m + k] * y[k];
        y[i] = s / l[static_cast<size_t>(i) * m + i];
    }
    for (int i = m - 1; i >= 0; --i) {
        double s = y[i];
        for (int k = i + 1; k < m; ++k) s -= l[static_cast<size_t>(k) * m + i] * b[k];
        b[i] = s / l[static_cast<size_t>(i) * m + i];
    }
    return b;
}

}  // namespace

std::unique_ptr<LinearDemand> fit_demand_linear(const ObservationSet& data,
                                                bool clamp_predictions) {
    const int d = data.dim();
    const int m = d + 2;  // [x..., p, 1]
    if (data.n() <= d + 2)
        throw std::invalid_argument("fit_demand_linear: need n > d + 2 observations");

    std::vector<double> xtx(static_cast<size_t>(m) * m, 0.0);
    std::vector<double> xty(m, 0.0);
    std::vector<double> reg(m);
    for (int i = 0; i < data.n(); ++i) {
        auto xi = data.x(i);
        for (int j = 0; j < d; ++j) reg[j] = xi[j];
        reg[d] = data.price(i);
        reg[d + 1] = 1.0;
        const double yi = data.outcome(i);
        for (int a = 0; a < m; ++a) {
            xty[a] += reg[a] * yi;
            for (int b = 0; b <= a; ++b) xtx[static_cast<size_t>(a) * m + b] += reg[a] * reg[b];
        }
    }
    for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b) xtx[static_cast<size_t>(a) * m + b] = xtx[static_cast<size_t>(b) * m + a];

    return std::make_unique<LinearDemand>(solve_spd(std::move(xtx), std::move(xty), m),
                                          clamp_predictions);
}

double BoostedTreeDemand::raw(std::span<const double> x, double p) const {
    double v = base_;
    for (const Tree& t : trees_) {
        int id = 0;
        while (t.nodes[id].feature >= 0) {
            const Node& nd = t.nodes[id];
            const double feat = nd.feature < static_cast<int>(x.size()) ? x[nd.feature] : p;
            id = feat <= nd.threshold ? nd.left : nd.right;
        }
        v += t.nodes[id].value;
    }
    return v;
}

// For a fixed x each tree collapses to a step function of p; accumulate all
// steps into a difference array over the sorted price nodes instead of
// walking every tree at every node.
void BoostedTreeDemand::price_profile(std::span<const double> x, std::span<const double> prices,
                                      std::span<double> out) const {
    const size_t m = prices.size();
    std::vector<double> diff(m + 1, 0.0);
    diff[0] = base_;

    const int pfeat = static_cast<int>(x.size());  // feature index of the price column

    // (lo, hi] segments of constant tree value, expressed over node indices
    struct Seg { double lo, hi; int node; };
    std::vector<Seg> stack;
    for (const Tree& t : trees_) {
        stack.push_back({-std::numeric_limits<double>::infinity(),
                         std::numeric_limits<double>::infinity(), 0});
        while (!stack.empty()) {
            Seg s = stack.back();
            stack.pop_back();
            const Node& nd = t.nodes[s.node];
            if (nd.feature < 0) {
                // add nd.value on price range (s.lo, s.hi]
                const auto b = std::lower_bound(prices.begin(), prices.end(),
                                                std::nextafter(s.lo, s.hi)) - prices.begin();
                const auto e = std::upper_bound(prices.begin(), prices.end(), s.hi) - prices.begin();
                if (b < e) {
                    diff[b] += nd.value;
                    diff[e] -= nd.value;
                }
                continue;
            }
            if (nd.feature == pfeat) {
                if (s.lo <= nd.threshold)
                    stack.push_back({s.lo, std::min(s.hi, nd.threshold), nd.left});
                if (s.hi > nd.threshold)
                    stack.push_back({std::max(s.lo, nd.threshold), s.hi, nd.right});
            } else {
                stack.push_back({s.lo, s.hi, x[nd.feature] <= nd.threshold ? nd.left : nd.right});
            }
        }
    }
    double acc = 0.0;
    for (size_t g = 0; g < m; ++g) {
        acc += diff[g];
        out[g] = clamp01(acc);
    }
}

void BoostedTreeDemand::collect_feature_thresholds(int feature, std::vector<double>& out) const {
    for (const Tree& t : trees_)
        for (const Node& nd : t.nodes)
            if (nd.feature == feature) out.push_back(nd.threshold);
}

namespace {

struct BinnedData {
    // per feature: bin edges (upper bounds) and per-sample bin index
    std::vector<std::vector<double>> edges;
    std::vector<std::vector<int>> bin;
    int n = 0;
    int nfeat = 0;
};

BinnedData bin_features(const ObservationSet& data, int max_bins) {
    const int d = data.dim();
    const int nfeat = d + 1;  // x columns plus price
    BinnedData bd;
    bd.n = data.n();
    bd.nfeat = nfeat;
    bd.edges.resize(nfeat);
    bd.bin.assign(nfeat, std::vector<int>(bd.n));

    std::vector<double> col(bd.n);
    for (int f = 0; f < nfeat; ++f) {
        for (int i = 0; i < bd.n; ++i) col[i] = f < d ? data.x(i)[f] : data.price(i);
        std::vector<double> sorted = col;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

        std::vector<double>& e = bd.edges[f];
        if (static_cast<int>(sorted.size()) <= max_bins) {
            // one bin per distinct value; edge = the value itself
            e = sorted;
        } else {
            e.reserve(max_bins);
            for (int b = 1; b <= max_bins; ++b) {
                const size_t idx = std::min(sorted.size() - 1,
                                            static_cast<size_t>(sorted.size() * static_cast<double>(b) / max_bins));
                e.push_back(sorted[idx == 0 ? 0 : idx - 1]);
            }
            e.back() = sorted.back();
            e.erase(std::unique(e.begin(), e.end()), e.end());
        }
        for (int i = 0; i < bd.n; ++i) {
            const auto it = std::lower_bound(e.begin(), e.end(), col[i]);
            bd.bin[f][i] = static_cast<int>(it - e.begin());
        }
    }
    return bd;
}

struct SplitResult {
    bool found = false;
    int feature = -1;
    int bin = -1;       // split at edges[feature][bin] (value <= edge goes left)
    double gain = 0.0;  // SSE reduction
};

SplitResult best_split(const BinnedData& bd, const std::vector<int>& rows,
                       const std::vector<double>& resid, int min_leaf) {
    SplitResult best;
    const double total_sum = std::accumulate(rows.begin(), rows.end(), 0.0,
                                             [&](double s, int i) { return s + resid[i]; });
    const double total_cnt = static_cast<double>(rows.size());
    if (rows.size() < 2) return best;

    std::vector<double> sum;
    std::vector<int> cnt;
    for (int f = 0; f < bd.nfeat; ++f) {
        const size_t nb = bd.edges[f].size();
        if (nb < 2) continue;
        sum.assign(nb, 0.0);
        cnt.assign(nb, 0);
        for (int i : rows) {
            sum[bd.bin[f][i]] += resid[i];
            ++cnt[bd.bin[f][i]];
        }
        double lsum = 0.0;
        int lcnt = 0;
        for (size_t b = 0; b + 1 < nb; ++b) {
            lsum += sum[b];
            lcnt += cnt[b];
            if (lcnt < min_leaf || static_cast<int>(rows.size()) - lcnt < min_leaf) continue;
            const double rsum = total_sum - lsum;
            const double rcnt = total_cnt - lcnt;
            const double gain = lsum * lsum / lcnt + rsum * rsum / rcnt - total_sum * total_sum / total_cnt;
            if (gain > best.gain + 1e-12) {
                best = {true, f, static_cast<int>(b), gain};
            }
        }
    }
    return best;
}

void grow_node(BoostedTreeDemand::Tree& tree, const BinnedData& bd, std::vector<int>&& rows,
               const std::vector<double>& resid, int node_id, int depth_left, int min_leaf) {
    auto& nodes = tree.nodes;
    double sum = 0.0;
    for (int i : rows) sum += resid[i];
    const double mean = rows.empty() ? 0.0 : sum / rows.size();

    if (depth_left == 0 || static_cast<int>(rows.size()) < 2 * min_leaf) {
        nodes[node_id].feature = -1;
        nodes[node_id].value = mean;
        return;
    }
    const SplitResult sp = best_split(bd, rows, resid, min_leaf);
    if (!sp.found) {
        nodes[node_id].feature = -1;
        nodes[node_id].value = mean;
        return;
    }
    std::vector<int> left, right;
    left.reserve(rows.size());
    right.reserve(rows.size());
    for (int i : rows)
        (bd.bin[sp.feature][i] <= sp.bin ? left : right).push_back(i);

    nodes[node_id].feature = sp.feature;
    nodes[node_id].threshold = bd.edges[sp.feature][sp.bin];
    nodes[node_id].left = static_cast<int>(nodes.size());
    nodes.push_back({});
    nodes[node_id].right = static_cast<int>(nodes.size());
    nodes.push_back({});
    grow_node(tree, bd, std::move(left), resid, nodes[node_id].left, depth_left - 1, min_leaf);
    grow_node(tree, bd, std::move(right), resid, nodes[node_id].right, depth_left - 1, min_leaf);
}

double tree_predict(const BoostedTreeDemand::Tree& tree, const BinnedData& bd, int i) {
    int id = 0;
    while (tree.nodes[id].feature >= 0) {
        const auto& nd = tree.nodes[id];
        // compare through the bin index to stay consistent with training
        const double edge = nd.threshold;
        const auto& e = bd.edges[nd.feature];
        const int split_bin = static_cast<int>(std::lower_bound(e.begin(), e.end(), edge) - e.begin());
        id = bd.bin[nd.feature][i] <= split_bin ? nd.left : nd.right;
    }
    return tree.nodes[id].value;
}

}  // namespace

std::unique_ptr<BoostedTreeDemand> fit_demand_boosted(const ObservationSet& data,
                                                      const BoostedTreeParams& params) {
    params.validate();
    const int n = data.n();
    const BinnedData bd = bin_features(data, params.max_bins);

    double base = 0.0;
    for (int i = 0; i < n; ++i) base += data.outcome(i);
    base /= n;

    std::vector<double> pred(n, base);
    std::vector<double> resid(n);
    std::vector<BoostedTreeDemand::Tree> trees;
    trees.reserve(params.rounds);
    std::vector<double> train_mse;
    train_mse.reserve(params.rounds);

    std::vector<int> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0);

    for (int round = 0; round < params.rounds; ++round) {
        for (int i = 0; i < n; ++i) resid[i] = data.outcome(i) - pred[i];
        BoostedTreeDemand::Tree tree;
        tree.nodes.push_back({});
        grow_node(tree, bd, std::vector<int>(all_rows), resid, 0, params.depth, params.min_leaf);

        // bake the shrinkage into the stored leaf values
        for (auto& nd : tree.nodes)
            if (nd.feature < 0) nd.value *= params.learning_rate;

        double mse = 0.0;
        for (int i = 0; i < n; ++i) {
            pred[i] += tree_predict(tree, bd, i);
            const double e = data.outcome(i) - pred[i];
            mse += e * e;
        }
        train_mse.push_back(mse / n);
        trees.push_back(std::move(tree));
    }
    return std::make_unique<BoostedTreeDemand>(base, std::move(trees), params, std::move(train_mse));
}

std::unique_ptr<RampDemand> fit_demand_ramp(const ObservationSet& data, double noise_width,
                                            int iterations) {
    if (!(noise_width > 0.0))
        throw std::invalid_argument("fit_demand_ramp: noise width must be positive");
    const int d = data.dim();
    const int m = d + 1;  // [b..., index intercept]
    const int n = data.n();
    if (n <= m + 1) throw std::invalid_argument("fit_demand_ramp: need n > d + 2 observations");

    // initialize from the LPM: the ramp's population regression attenuates
    // both slopes by the same interior fraction, so -beta/gamma recovers b
    const auto lpm = fit_demand_linear(data);
    const auto& c = lpm->coefficients();  // [beta..., gamma, alpha]
    const double gamma = c[d];
    std::vector<double> theta(m, 0.0);
    if (gamma < -1e-12) {
        for (int j = 0; j < d; ++j) theta[j] = -c[j] / gamma;
    }
    // pick the intercept so the mean predicted demand matches the mean outcome
    double ybar = 0.0;
    for (int i = 0; i < n; ++i) ybar += data.outcome(i);
    ybar /= n;
    auto mean_mu = [&](double intercept) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            double idx = intercept;
            auto xi = data.x(i);
            for (int j = 0; j < d; ++j) idx += theta[j] * xi[j];
            s += clamp01((idx - data.price(i)) / noise_width);
        }
        return s / n;
    };
    {
        double lo = -1e6, hi = 1e6;
        for (int it = 0; it < 80; ++it) {
            const double mid = (lo + hi) / 2.0;
            (mean_mu(mid) < ybar ? lo : hi) = mid;
        }
        theta[m - 1] = (lo + hi) / 2.0;
    }

    auto sse_of = [&](const std::vector<double>& th) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            double idx = th[m - 1];
            auto xi = data.x(i);
            for (int j = 0; j < d; ++j) idx += th[j] * xi[j];
            const double e = data.outcome(i) - clamp01((idx - data.price(i)) / noise_width);
            s += e * e;
        }
        return s;
    };

    // Gauss-Newton on the interior (unclamped) rows
    std::vector<double> best = theta;
    double best_sse = sse_of(theta);
    std::vector<double> jtj(static_cast<size_t>(m) * m), jtr(m), reg(m);
    for (int it = 0; it < iterations; ++it) {
        std::fill(jtj.begin(), jtj.end(), 0.0);
        std::fill(jtr.begin(), jtr.end(), 0.0);
        int interior = 0;
        for (int i = 0; i < n; ++i) {
            double idx = theta[m - 1];
            auto xi = data.x(i);
            for (int j = 0; j < d; ++j) idx += theta[j] * xi[j];
            const double z = (idx - data.price(i)) / noise_width;
            if (z <= 0.0 || z >= 1.0) continue;
            ++interior;
            for (int j = 0; j < d; ++j) reg[j] = xi[j] / noise_width;
            reg[m - 1] = 1.0 / noise_width;
            const double r = data.outcome(i) - z;
            for (int a = 0; a < m; ++a) {
                jtr[a] += reg[a] * r;
                for (int b = 0; b <= a; ++b) jtj[static_cast<size_t>(a) * m + b] += reg[a] * reg[b];
            }
        }
        if (interior <= m) break;
        for (int a = 0; a < m; ++a) {
            jtj[static_cast<size_t>(a) * m + a] += 1e-8 * (jtj[static_cast<size_t>(a) * m + a] + 1.0);
            for (int b = a + 1; b < m; ++b)
                jtj[static_cast<size_t>(a) * m + b] = jtj[static_cast<size_t>(b) * m + a];
        }
        std::vector<double> step;
        try {
            step = solve_spd(jtj, jtr, m);
        } catch (const DegenerateDataError&) {
            break;
        }
        double norm = 0.0;
        for (int a = 0; a < m; ++a) {
            theta[a] += step[a];
            norm += step[a] * step[a];
        }
        const double sse = sse_of(theta);
        if (sse < best_sse) {
            best_sse = sse;
            best = theta;
        }
        if (norm < 1e-16) break;
    }
    return std::make_unique<RampDemand>(std::move(best), noise_width);
}

TableDemand::TableDemand(std::vector<double> prices, std::vector<double> values)
    : prices_(std::move(prices)), values_(std::move(values)) {
    if (prices_.size() != values_.size() || prices_.empty())
        throw std::invalid_argument("TableDemand: prices/values size mismatch");
    if (!std::is_sorted(prices_.begin(), prices_.end()))
        throw std::invalid_argument("TableDemand: prices must be sorted");
}

double TableDemand::raw(std::span<const double>, double p) const {
    const auto it = std::lower_bound(prices_.begin(), prices_.end(), p - 1e-9);
    if (it == prices_.end() || std::abs(*it - p) > 1e-9)
        throw std::domain_error("TableDemand: price " + std::to_string(p) + " not in table");
    return values_[it - prices_.begin()];
}

}  // namespace surplus
