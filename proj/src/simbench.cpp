#include "surplus/simbench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <tuple>
#include <sstream>
#include <thread>

namespace surplus {

std::pair<double, double> Scenario::valuation_range() const {
    // per-coordinate range of f(x)
    double f_lo, f_hi;
    if (x_bernoulli) {
        f_lo = 0.0;
        f_hi = 1.0;
    } else if (x_squared) {
        f_lo = (x_lo <= 0.0 && x_hi >= 0.0) ? 0.0 : std::min(x_lo * x_lo, x_hi * x_hi);
        f_hi = std::max(x_lo * x_lo, x_hi * x_hi);
    } else {
        f_lo = x_lo;
        f_hi = x_hi;
    }
    const double corners[4] = {beta_lo * f_lo, beta_lo * f_hi, beta_hi * f_lo, beta_hi * f_hi};
    const double bf_lo = *std::min_element(corners, corners + 4);
    const double bf_hi = *std::max_element(corners, corners + 4);
    return {v_base + beta_scale * d * bf_lo, v_base + beta_scale * d * bf_hi + eps_hi};
}

PriceSupport Scenario::price_support() const {
    switch (price_law) {
        case PriceLaw::support_pad: {
            const auto [v_lo, v_hi] = valuation_range();
            return {v_lo - pad, v_hi + pad};
        }
        case PriceLaw::fixed_interval:
            return {p_lo, p_hi};
        case PriceLaw::gap:
            return {gap_segments.front().first, gap_segments.back().second};
    }
    throw std::logic_error("unknown price law");
}

const std::vector<Scenario>& scenario_registry() {
    static const std::vector<Scenario> registry = [] {
        std::vector<Scenario> v;

        {
            Scenario s;
            s.name = "demand_misspec";
            s.x_lo = -0.5;
            s.x_hi = 0.5;
            s.x_squared = true;
            s.beta_lo = -0.1;
            s.beta_hi = 0.1;
            s.v_base = 90.0;
            s.beta_scale = 3000.0;
            s.eps_hi = 10.0;
            s.price_law = Scenario::PriceLaw::support_pad;
            s.demand = DemandLearner::linear(false);  // misspecified: truth is quadratic in x
            s.propensity = PropensityLearner::kde(Kernel::tophat);
            s.grid_size = 800;
            v.push_back(s);
        }
        {
            Scenario s;
            s.name = "propensity_misspec";
            s.x_lo = 0.0;
            s.x_hi = 1.0;
            s.beta_lo = -1.0;
            s.beta_hi = 1.0;
            s.v_base = 100.0;
            s.beta_scale = 300.0;
            s.eps_hi = 10.0;
            s.price_law = Scenario::PriceLaw::support_pad;
            s.demand = DemandLearner::linear(false);
            s.propensity = PropensityLearner::gaussian();  // misspecified: prices are uniform
            s.grid_size = 800;
            v.push_back(s);
        }
        {
            Scenario s;
            s.name = "convergence";
            s.x_lo = 0.0;
            s.x_hi = 1.0;
            s.v_base = 100.0;
            s.beta_scale = 300.0;
            s.eps_hi = 10.0;
            s.price_law = Scenario::PriceLaw::support_pad;
            s.demand = DemandLearner::linear(false);
            s.propensity = PropensityLearner::kde(Kernel::tophat);
            s.grid_size = 800;
            v.push_back(s);
        }
        {
            Scenario s;
            s.name = "inequality_r05";
            s.v_base = 100.0;
            s.beta_scale = 300.0;
            s.eps_hi = 1.0;
            s.price_law = Scenario::PriceLaw::fixed_interval;
            s.p_lo = 9.0;
            s.p_hi = 12.0;
            s.demand = DemandLearner::linear();
            s.propensity = PropensityLearner::kde(Kernel::tophat);
            s.default_r = 0.5;
            v.push_back(s);
        }
        {
            Scenario s;
            s.name = "ci_coverage";
            s.v_base = 10.0;
            s.beta_scale = 300.0;
            s.eps_hi = 1.0;
            s.price_law = Scenario::PriceLaw::fixed_interval;
            s.p_lo = 9.0;
            s.p_hi = 11.0;
            s.demand = DemandLearner::boosted(BoostedTreeParams{});
            s.propensity = PropensityLearner::kde(Kernel::tophat);
            // a shared beta leaves purchases degenerate over U[9,11]; the
            // per-row draw gives the smooth marginal demand the coverage
            // study needs
            s.beta_default = Scenario::BetaDefault::per_observation;
            v.push_back(s);
        }
        {
            Scenario s;
            s.name = "partial_id_gap";
            s.d = 10;
            s.x_bernoulli = true;
            s.v_base = 100.0;
            s.beta_scale = 300.0;
            s.eps_hi = 10.0;
            s.price_law = Scenario::PriceLaw::gap;
            s.gap_segments = {{9.0, 9.5}, {10.0, 10.5}};
            s.demand = DemandLearner::ramp(10.0);  // valuation-model demand, noise width known
            s.target_points = {9.1, 9.425, 9.75, 10.075, 10.4};
            v.push_back(s);
        }
        return v;
    }();
    return registry;
}

const Scenario& find_scenario(const std::string& name) {
    for (const Scenario& s : scenario_registry())
        if (s.name == name) return s;
    throw std::invalid_argument("unknown scenario '" + name + "'");
}

std::vector<std::string> scenario_names() {
    std::vector<std::string> out;
    for (const Scenario& s : scenario_registry()) out.push_back(s.name);
    return out;
}

namespace {

double feature_transform(const Scenario& scn, double x) { return scn.x_squared ? x * x : x; }

double latent_mean(const Scenario& scn, const Beta& beta, std::span<const double> x) {
    double dot = 0.0;
    for (int j = 0; j < scn.d; ++j) dot += beta.values[j] * feature_transform(scn, x[j]);
    return scn.v_base + scn.beta_scale * dot;
}

double draw_price(const Scenario& scn, const PriceSupport& sup, Rng& rng) {
    switch (scn.price_law) {
        case Scenario::PriceLaw::support_pad:
            return rng.uniform(sup.lo, sup.hi);
        case Scenario::PriceLaw::fixed_interval:
            return rng.uniform(scn.p_lo, scn.p_hi);
        case Scenario::PriceLaw::gap: {
            double total = 0.0;
            for (const auto& seg : scn.gap_segments) total += seg.second - seg.first;
            double u = rng.uniform() * total;
            for (const auto& seg : scn.gap_segments) {
                const double len = seg.second - seg.first;
                if (u <= len) return seg.first + u;
                u -= len;
            }
            return scn.gap_segments.back().second;
        }
    }
    throw std::logic_error("unknown price law");
}

Beta draw_beta(const Scenario& scn, Rng& rng) {
    Beta b;
    b.values.resize(scn.d);
    for (int j = 0; j < scn.d; ++j) b.values[j] = rng.uniform(scn.beta_lo, scn.beta_hi);
    return b;
}

// valuation interval implied by one drawn beta (interval arithmetic over x, eps)
std::pair<double, double> conditional_valuation_range(const Scenario& scn, const Beta& beta) {
    double f_lo, f_hi;
    if (scn.x_bernoulli) {
        f_lo = 0.0;
        f_hi = 1.0;
    } else if (scn.x_squared) {
        f_lo = (scn.x_lo <= 0.0 && scn.x_hi >= 0.0) ? 0.0 : std::min(scn.x_lo * scn.x_lo, scn.x_hi * scn.x_hi);
        f_hi = std::max(scn.x_lo * scn.x_lo, scn.x_hi * scn.x_hi);
    } else {
        f_lo = scn.x_lo;
        f_hi = scn.x_hi;
    }
    double dot_lo = 0.0, dot_max = 0.0;
    for (int j = 0; j < scn.d; ++j) {
        dot_lo += std::min(beta.values[j] * f_lo, beta.values[j] * f_hi);
        dot_max += std::max(beta.values[j] * f_lo, beta.values[j] * f_hi);
    }
    return {scn.v_base + scn.beta_scale * dot_lo,
            scn.v_base + scn.beta_scale * dot_max + scn.eps_hi};
}

}  // namespace

Beta draw_study_beta(const Scenario& scn, uint64_t master_seed) {
    Rng rng(derive_seed(master_seed, 0xBE7AULL));
    return draw_beta(scn, rng);
}

GenerateResult generate(const Scenario& scn, int n, uint64_t seed, BetaMode beta_mode,
                        SupportRule support_rule, const Beta* fixed_beta) {
    if (n < 1) throw std::invalid_argument("generate: n must be positive");
    Rng rng(seed);

    const bool shared_beta = beta_mode != BetaMode::per_observation;
    Beta beta;
    if (fixed_beta != nullptr) {
        if (static_cast<int>(fixed_beta->values.size()) != scn.d)
            throw std::invalid_argument("generate: fixed beta dimension mismatch");
        beta = *fixed_beta;
    } else if (beta_mode == BetaMode::per_study) {
        beta = draw_study_beta(scn, seed);
    } else if (beta_mode == BetaMode::per_replication) {
        beta = draw_beta(scn, rng);
    }

    std::vector<double> features(static_cast<size_t>(n) * scn.d);
    std::vector<double> prices(n), outcomes(n), valuations(n);
    for (int i = 0; i < n; ++i) {
        Beta row_beta;
        const Beta& b = shared_beta ? beta : (row_beta = draw_beta(scn, rng));
        for (int j = 0; j < scn.d; ++j) {
            const double xj = scn.x_bernoulli ? (rng.uniform() < 0.5 ? 0.0 : 1.0)
                                              : rng.uniform(scn.x_lo, scn.x_hi);
            features[static_cast<size_t>(i) * scn.d + j] = xj;
        }
        const double eps = rng.uniform(0.0, scn.eps_hi);
        const std::span<const double> xi(features.data() + static_cast<size_t>(i) * scn.d,
                                         static_cast<size_t>(scn.d));
        valuations[i] = latent_mean(scn, b, xi) + eps;
    }

    // the support_pad law pads the valuation interval of this population
    PriceSupport sup = scn.price_support();
    if (scn.price_law == Scenario::PriceLaw::support_pad) {
        if (support_rule == SupportRule::realized) {
            const auto [lo, hi] = std::minmax_element(valuations.begin(), valuations.end());
            sup = {*lo - scn.pad, *hi + scn.pad};
        } else if (shared_beta) {
            const auto [lo, hi] = conditional_valuation_range(scn, beta);
            sup = {lo - scn.pad, hi + scn.pad};
        }
    }

    for (int i = 0; i < n; ++i) {
        prices[i] = draw_price(scn, sup, rng);
        outcomes[i] = valuations[i] > prices[i] ? 1.0 : 0.0;
    }

    GenerateResult out{
        ObservationSet(std::move(features), scn.d, std::move(prices), std::move(outcomes), sup),
        std::move(valuations), beta, 0.0};
    out.v_max_conditional = shared_beta ? conditional_valuation_range(scn, beta).second
                                        : scn.valuation_range().second;
    return out;
}

namespace {

// int_p^{hi} P(m + eps > z) dz for eps ~ U[0, w]; equals E[(min(V,hi) - p)_+ | m]
double uniform_tail(double m, double w, double p, double hi) {
    if (p >= hi) return 0.0;
    if (w <= 0.0) return std::max(0.0, std::min(m, hi) - p);
    double s = std::max(0.0, std::min(m, hi) - p);  // region where demand is 1
    const double z1 = std::max(p, m), z2 = std::min(m + w, hi);
    if (z2 > z1) s += ((m + w - z1) * (m + w - z1) - (m + w - z2) * (m + w - z2)) / (2.0 * w);
    return s;
}

// average of uniform_tail over p ~ U[a, b]; exact by per-piece Simpson (the
// integrand is at most quadratic between breakpoints)
double avg_tail_uniform_price(double m, double w, double a, double b, double hi) {
    std::vector<double> cuts = {a, b, m, m + w, hi};
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double lo = std::max(a, cuts[k]);
        const double up = std::min(b, cuts[k + 1]);
        if (up <= lo) continue;
        const double mid = (lo + up) / 2.0;
        total += (up - lo) / 6.0 *
                 (uniform_tail(m, w, lo, hi) + 4.0 * uniform_tail(m, w, mid, hi) +
                  uniform_tail(m, w, up, hi));
    }
    return total / (b - a);
}

// conditional surplus S(policy | x) under the scenario's latent law, censored
// at sup.hi; policy == nullptr means the scenario's own price law
double conditional_surplus(const Scenario& scn, double m, const TargetPolicy* policy,
                           std::span<const double> x, const PriceSupport& sup) {
    if (policy != nullptr) {
        if (!policy->is_discrete())
            return avg_tail_uniform_price(m, scn.eps_hi, policy->lo(), policy->hi(), sup.hi);
        const auto& pts = policy->atoms();
        std::vector<double> q(pts.size());
        policy->atom_probs(x, q);
        double s = 0.0;
        for (size_t j = 0; j < pts.size(); ++j)
            s += q[j] * uniform_tail(m, scn.eps_hi, pts[j], sup.hi);
        return s;
    }
    switch (scn.price_law) {
        case Scenario::PriceLaw::support_pad:
            return avg_tail_uniform_price(m, scn.eps_hi, sup.lo, sup.hi, sup.hi);
        case Scenario::PriceLaw::fixed_interval:
            return avg_tail_uniform_price(m, scn.eps_hi, scn.p_lo, scn.p_hi, sup.hi);
        case Scenario::PriceLaw::gap: {
            double total = 0.0, s = 0.0;
            for (const auto& seg : scn.gap_segments) total += seg.second - seg.first;
            for (const auto& seg : scn.gap_segments)
                s += (seg.second - seg.first) / total *
                     avg_tail_uniform_price(m, scn.eps_hi, seg.first, seg.second, sup.hi);
            return s;
        }
    }
    throw std::logic_error("unknown price law");
}

constexpr int kTruthXNodes = 8193;

// quadrature nodes over x aligned with the policy's context jump points
std::vector<double> truth_x_nodes(const Scenario& scn, const TargetPolicy* policy, int base) {
    std::vector<double> xs(base);
    const double h = (scn.x_hi - scn.x_lo) / (base - 1);
    for (int g = 0; g < base; ++g) xs[g] = scn.x_lo + h * g;
    xs.back() = scn.x_hi;
    if (policy != nullptr) {
        for (double b : policy->context_breakpoints(0))
            if (b > scn.x_lo && b < scn.x_hi) xs.push_back(b);
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    }
    return xs;
}

// mean of f over x ~ U[x_lo, x_hi]: per-segment Simpson with endpoints nudged
// inward, exact across the jump points sitting on segment boundaries
double segment_average(const std::vector<double>& xs, const std::function<double(double)>& f) {
    double acc = 0.0;
    for (size_t k = 0; k + 1 < xs.size(); ++k) {
        const double a = xs[k], b = xs[k + 1];
        const double d = (b - a) * 1e-9;
        acc += (b - a) / 6.0 * (f(a + d) + 4.0 * f((a + b) / 2.0) + f(b - d));
    }
    return acc / (xs.back() - xs.front());
}

}  // namespace

double scenario_truth(const Scenario& scn, const Beta& beta, const TargetPolicy* policy, double r,
                      const PriceSupport& sup) {
    if (static_cast<int>(beta.values.size()) != scn.d)
        throw std::invalid_argument("scenario_truth: beta dimension mismatch");

    if (scn.x_bernoulli) {
        if (scn.d > 20) throw std::invalid_argument("scenario_truth: Bernoulli enumeration too large");
        const long combos = 1L << scn.d;
        std::vector<double> x(scn.d);
        double acc = 0.0;
        for (long mask = 0; mask < combos; ++mask) {
            double dot = 0.0;
            for (int j = 0; j < scn.d; ++j) {
                x[j] = (mask >> j) & 1 ? 1.0 : 0.0;
                dot += beta.values[j] * x[j];
            }
            const double m = scn.v_base + scn.beta_scale * dot;
            acc += std::pow(conditional_surplus(scn, m, policy, x, sup), r);
        }
        return acc / static_cast<double>(combos);
    }

    if (scn.d != 1)
        throw std::invalid_argument("scenario_truth: closed form needs d = 1 or Bernoulli features");

    const std::vector<double> xs = truth_x_nodes(scn, policy, kTruthXNodes);
    return segment_average(xs, [&](double xv) {
        const double m = scn.v_base + scn.beta_scale * beta.values[0] * feature_transform(scn, xv);
        return std::pow(conditional_surplus(scn, m, policy, std::span(&xv, 1), sup), r);
    });
}

double scenario_truth_beta_marginal(const Scenario& scn, const TargetPolicy* policy, double r,
                                    const PriceSupport& sup) {
    if (scn.d != 1)
        throw std::invalid_argument("scenario_truth_beta_marginal: implemented for d = 1 only");

    // the behavior-policy value is a pure function of (scenario, r, support)
    // and gets requested once per replication; memoize it
    static std::mutex memo_mutex;
    static std::map<std::tuple<std::string, double, double, double>, double> memo;
    const bool cacheable = policy == nullptr;
    const auto key = std::make_tuple(scn.name, r, sup.lo, sup.hi);
    if (cacheable) {
        std::lock_guard<std::mutex> lock(memo_mutex);
        const auto it = memo.find(key);
        if (it != memo.end()) return it->second;
    }
    // outer quadrature in x (aligned with policy jump points), inner trapezoid
    // over the per-observation beta law; the power applies after the beta
    // average since S(policy|x) already marginalizes beta
    const int nb = 513;
    const double hb = (scn.beta_hi - scn.beta_lo) / (nb - 1);

    std::vector<double> pts;
    const bool discrete_policy = policy != nullptr && policy->is_discrete();
    if (discrete_policy) pts = policy->atoms();

    const std::vector<double> xs = truth_x_nodes(scn, policy, 2049);
    const double value = segment_average(xs, [&](double xv) {
        std::vector<double> q(pts.size());
        if (discrete_policy) policy->atom_probs(std::span(&xv, 1), q);
        const double fx = feature_transform(scn, xv);
        double sx = 0.0;  // E_beta[ S(policy | x, beta) ]
        for (int gb = 0; gb < nb; ++gb) {
            const double bv = scn.beta_lo + hb * gb;
            const double m = scn.v_base + scn.beta_scale * bv * fx;
            double s;
            if (!discrete_policy) {
                s = conditional_surplus(scn, m, policy, std::span(&xv, 1), sup);
            } else {
                s = 0.0;
                for (size_t j = 0; j < pts.size(); ++j)
                    s += q[j] * uniform_tail(m, scn.eps_hi, pts[j], sup.hi);
            }
            sx += (gb == 0 || gb == nb - 1) ? s / 2.0 : s;
        }
        sx *= hb / (scn.beta_hi - scn.beta_lo);
        return std::pow(sx, r);
    });
    if (cacheable) {
        std::lock_guard<std::mutex> lock(memo_mutex);
        memo.emplace(key, value);
    }
    return value;
}

OracleResult oracle_surplus_mc(const Scenario& scn, const TargetPolicy* policy, double r,
                               long draws, uint64_t seed, const PriceSupport& sup,
                               std::optional<Beta> beta) {
    if (draws < 2) throw std::invalid_argument("oracle_surplus_mc: need at least 2 draws");
    Rng rng(seed);
    double sum = 0.0, sumsq = 0.0;
    std::vector<double> x(scn.d);
    for (long t = 0; t < draws; ++t) {
        const Beta b = beta ? *beta : draw_beta(scn, rng);
        for (int j = 0; j < scn.d; ++j)
            x[j] = scn.x_bernoulli ? (rng.uniform() < 0.5 ? 0.0 : 1.0)
                                   : rng.uniform(scn.x_lo, scn.x_hi);
        const double m = latent_mean(scn, b, x);

        double v;
        if (r == 1.0) {
            // draw the valuation and integrate the policy analytically
            const double val = m + rng.uniform(0.0, scn.eps_hi);
            const double w = std::min(val, sup.hi);
            if (policy == nullptr) {
                const double p = draw_price(scn, sup, rng);
                v = std::max(0.0, w - p);
            } else if (policy->is_discrete()) {
                const auto& pts = policy->atoms();
                std::vector<double> q(pts.size());
                policy->atom_probs(x, q);
                v = 0.0;
                for (size_t j = 0; j < pts.size(); ++j) v += q[j] * std::max(0.0, w - pts[j]);
            } else {
                const double a = policy->lo(), bb = policy->hi();
                const double up = std::min(w, bb);
                v = w <= a ? 0.0 : ((w - a) * (w - a) - (w - up) * (w - up)) / (2.0 * (bb - a));
            }
        } else {
            // inner conditional expectation in closed form, then the power
            v = std::pow(conditional_surplus(scn, m, policy, x, sup), r);
        }
        sum += v;
        sumsq += v * v;
    }
    OracleResult out;
    out.value = sum / draws;
    const double var = std::max(0.0, sumsq / draws - out.value * out.value);
    out.stderr_ = std::sqrt(var / draws);
    return out;
}

const CellReport& RunReport::cell(const std::string& estimator, int n) const {
    for (const CellReport& c : cells)
        if (c.estimator == estimator && c.n == n) return c;
    throw std::invalid_argument("RunReport: no cell for " + estimator + " at n=" + std::to_string(n));
}

std::string RunReport::to_csv() const {
    std::string out = "scenario,estimator,n,rep,error,ci_hit\n";
    char buf[160];
    for (const CellReport& c : cells) {
        for (const RepRecord& rr : c.reps) {
            std::snprintf(buf, sizeof(buf), "%s,%s,%d,%d,%.12g,%d\n", scenario.c_str(),
                          c.estimator.c_str(), c.n, rr.rep, rr.error, rr.ci_hit ? 1 : 0);
            out += buf;
        }
    }
    return out;
}

nlohmann::json RunReport::summary() const {
    nlohmann::json cells_json = nlohmann::json::array();
    for (const CellReport& c : cells) {
        cells_json.push_back({{"estimator", c.estimator},
                              {"n", c.n},
                              {"mse", c.mse},
                              {"bias", c.bias},
                              {"variance", c.variance},
                              {"coverage", c.coverage},
                              {"mean_ci_width", c.mean_ci_width}});
    }
    return {{"scenario", scenario}, {"mode", to_string(mode)},
            {"r", r},               {"alpha", alpha},
            {"reps", reps},         {"master_seed", master_seed},
            {"wall_seconds", wall_seconds}, {"cells", cells_json}};
}

namespace {

struct RepOutput {
    std::vector<RepRecord> records;  // one per estimator, in config order
};

TargetPolicy build_target_policy(const Scenario& scn, const ObservationSet& data,
                                 const PriceSupport& sup) {
    if (!scn.target_points.empty()) {
        std::vector<double> probs(scn.target_points.size(),
                                  1.0 / static_cast<double>(scn.target_points.size()));
        return TargetPolicy::discrete(scn.target_points, probs);
    }
    std::shared_ptr<const DemandModel> revenue_model = fit_demand_boosted(data, scn.policy_demand);
    std::vector<double> pts(scn.softmax_points);
    for (int j = 0; j < scn.softmax_points; ++j)
        pts[j] = sup.lo + (sup.hi - sup.lo) * j / (scn.softmax_points - 1.0);
    return TargetPolicy::softmax_revenue(std::move(revenue_model), std::move(pts),
                                         scn.softmax_temperature);
}

RepOutput run_one_rep(const Scenario& scn, const StudyConfig& cfg, int n, int rep, double r,
                      int folds_k, BetaMode beta_mode, const Beta* study_beta) {
    const uint64_t seed = derive_seed(cfg.master_seed, static_cast<uint64_t>(n),
                                      static_cast<uint64_t>(rep));
    const GenerateResult g = generate(scn, n, seed, beta_mode, cfg.support_rule, study_beta);
    const PriceSupport sup = g.data.support();
    const PriceGrid grid = PriceGrid::uniform(sup, scn.grid_size);
    const bool need_target = cfg.mode != Mode::behavior;
    const bool need_behavior = cfg.mode != Mode::target;

    std::optional<TargetPolicy> policy;
    if (need_target) policy = build_target_policy(scn, g.data, sup);

    auto truth_of = [&](const TargetPolicy* pol, double rr) {
        if (beta_mode == BetaMode::per_observation)
            return scenario_truth_beta_marginal(scn, pol, rr, sup);
        return scenario_truth(scn, g.beta, pol, rr, sup);
    };

    const std::shared_ptr<const DemandModel> demand_full = scn.demand.fit(g.data);
    const std::shared_ptr<const PropensityModel> prop_full = scn.propensity.fit(g.data);
    const FoldAssignment folds = make_folds(n, folds_k, derive_seed(seed, 77));
    const FoldModels fm = cross_fit(g.data, scn.demand, scn.propensity, folds);

    auto leg = [&](const std::string& est, const TargetPolicy* pol) -> EstimateResult {
        if (est == "DM") return estimate_dm(g.data, *demand_full, pol, grid, prop_full.get());
        if (est == "CPW") return estimate_cpw(g.data, *prop_full, pol, grid, demand_full.get());
        if (est == "ACPW") return estimate_acpw(g.data, fm, pol, grid);
        if (est == "IA-ACPW") return estimate_ia(g.data, fm, pol, InequalityParams{r, 1e-6}, grid);
        throw std::invalid_argument("unknown estimator '" + est + "'");
    };

    RepOutput out;
    for (const std::string& est : cfg.estimators) {
        const double rr = est == "IA-ACPW" ? r : 1.0;
        EstimateResult res;
        double truth = 0.0;
        switch (cfg.mode) {
            case Mode::target:
                res = leg(est, &*policy);
                truth = truth_of(&*policy, rr);
                break;
            case Mode::behavior:
                res = leg(est, nullptr);
                truth = truth_of(nullptr, rr);
                break;
            case Mode::delta: {
                res = estimate_delta(leg(est, &*policy), leg(est, nullptr));
                truth = truth_of(&*policy, rr) - truth_of(nullptr, rr);
                break;
            }
        }
        const ConfidenceInterval ci = confidence_interval(res.estimate, cfg.alpha);
        RepRecord rr_out;
        rr_out.rep = rep;
        rr_out.seed = seed;
        rr_out.estimate = res.estimate.value;
        rr_out.truth = truth;
        rr_out.error = res.estimate.value - truth;
        rr_out.ci_low = ci.low;
        rr_out.ci_high = ci.high;
        rr_out.ci_hit = ci.contains(truth);
        rr_out.ci_width = ci.width();
        out.records.push_back(rr_out);
    }
    return out;
}

void parallel_reps(int reps, int threads, const std::function<void(int)>& body) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, reps));
    if (threads == 1) {
        for (int rep = 0; rep < reps; ++rep) body(rep);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int rep = next.fetch_add(1); rep < reps; rep = next.fetch_add(1)) body(rep);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

RunReport run_study(const StudyConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const Scenario& scn = find_scenario(cfg.scenario);
    if (cfg.reps < 1) throw std::invalid_argument("run_study: reps must be positive");
    for (const std::string& est : cfg.estimators)
        if (est != "DM" && est != "CPW" && est != "ACPW" && est != "IA-ACPW")
            throw std::invalid_argument("run_study: unknown estimator '" + est + "'");

    const double r = cfg.r.value_or(scn.default_r);
    const int folds_k = cfg.cross_folds > 0 ? cfg.cross_folds : scn.cross_folds;
    if (folds_k < 2 || folds_k > 10)
        throw std::invalid_argument("run_study: cross_folds must be in [2, 10]");

    RunReport report;
    report.scenario = scn.name;
    report.mode = cfg.mode;
    report.r = r;
    report.alpha = cfg.alpha;
    report.reps = cfg.reps;
    report.master_seed = cfg.master_seed;

    // one population draw per study
    const BetaMode beta_mode = cfg.beta_mode.value_or(
        scn.beta_default == Scenario::BetaDefault::per_observation ? BetaMode::per_observation
                                                                   : BetaMode::per_study);
    Beta study_beta;
    const Beta* beta_ptr = nullptr;
    if (beta_mode == BetaMode::per_study) {
        study_beta = draw_study_beta(scn, cfg.master_seed);
        beta_ptr = &study_beta;
    }

    for (int n : cfg.n_grid) {
        std::vector<RepOutput> per_rep(cfg.reps);
        std::vector<std::exception_ptr> errors(cfg.reps);
        parallel_reps(cfg.reps, cfg.threads, [&](int rep) {
            try {
                per_rep[rep] = run_one_rep(scn, cfg, n, rep, r, folds_k, beta_mode, beta_ptr);
            } catch (...) {
                errors[rep] = std::current_exception();
            }
        });
        for (int rep = 0; rep < cfg.reps; ++rep) {
            if (!errors[rep]) continue;
            try {
                std::rethrow_exception(errors[rep]);
            } catch (const std::exception& e) {
                throw std::runtime_error("replication " + std::to_string(rep) + " (n=" +
                                         std::to_string(n) + ") failed: " + e.what());
            }
        }

        for (size_t e = 0; e < cfg.estimators.size(); ++e) {
            CellReport cell;
            cell.estimator = cfg.estimators[e];
            cell.n = n;
            std::vector<double> errs(cfg.reps);
            double hits = 0.0, widths = 0.0;
            for (int rep = 0; rep < cfg.reps; ++rep) {
                const RepRecord& rr = per_rep[rep].records[e];
                cell.reps.push_back(rr);
                errs[rep] = rr.error;
                hits += rr.ci_hit ? 1.0 : 0.0;
                widths += rr.ci_width;
            }
            cell.bias = pairwise_mean(errs);
            std::vector<double> sq(cfg.reps), dev(cfg.reps);
            for (int rep = 0; rep < cfg.reps; ++rep) {
                sq[rep] = errs[rep] * errs[rep];
                dev[rep] = (errs[rep] - cell.bias) * (errs[rep] - cell.bias);
            }
            cell.mse = pairwise_mean(sq);
            cell.variance = pairwise_mean(dev);
            cell.coverage = hits / cfg.reps;
            cell.mean_ci_width = widths / cfg.reps;
            report.cells.push_back(std::move(cell));
        }
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

std::map<std::string, double> coverage_experiment(const std::string& scenario, int n, int reps,
                                                  double alpha, uint64_t seed, Mode mode) {
    StudyConfig cfg;
    cfg.scenario = scenario;
    cfg.estimators = {"DM", "CPW", "ACPW", "IA-ACPW"};
    cfg.n_grid = {n};
    cfg.reps = reps;
    cfg.alpha = alpha;
    cfg.mode = mode;
    cfg.master_seed = seed;
    const RunReport report = run_study(cfg);
    std::map<std::string, double> out;
    for (const CellReport& c : report.cells) out[c.estimator] = c.coverage;
    return out;
}

std::vector<BoundRunRecord> run_bound_study(const Scenario& scn, int n, int reps,
                                            uint64_t master_seed, int fine_nodes, int tail_nodes) {
    if (scn.target_points.empty())
        throw std::invalid_argument("run_bound_study: scenario needs a fixed target grid");
    const PriceSupport sup = scn.price_support();
    std::vector<double> probs(scn.target_points.size(),
                              1.0 / static_cast<double>(scn.target_points.size()));
    const TargetPolicy policy = TargetPolicy::discrete(scn.target_points, probs);

    const Beta study_beta = draw_study_beta(scn, master_seed);
    std::vector<BoundRunRecord> out(reps);
    std::vector<std::exception_ptr> errors(reps);
    parallel_reps(reps, 0, [&](int rep) {
        try {
            const uint64_t seed = derive_seed(master_seed, static_cast<uint64_t>(n),
                                              static_cast<uint64_t>(rep));
            const GenerateResult g = generate(scn, n, seed, BetaMode::per_study,
                                              SupportRule::theoretical, &study_beta);
            const double v_max = g.v_max_conditional;
            // uncensored truth: integrate the demand tail all the way to V_max
            const PriceSupport full{sup.lo, v_max};
            const double truth = scenario_truth(scn, g.beta, &policy, 1.0, full);

            const std::shared_ptr<const DemandModel> demand = scn.demand.fit(g.data);
            const PriceGrid grid = make_bounds_grid(sup, v_max, fine_nodes, tail_nodes);
            const double halfwidth = 0.5 * sup.width() / (fine_nodes - 1);
            const OverlapMap overlap(g.data.prices(), halfwidth, v_max, 0.25 * sup.width());
            const BoundEstimate b = estimate_bounds(g.data, *demand, policy, overlap, grid);

            BoundRunRecord rec;
            rec.rep = rep;
            rec.truth = truth;
            rec.lower = b.lower;
            rec.upper = b.upper;
            rec.naive_lower = b.naive_lower;
            rec.naive_upper = b.naive_upper;
            rec.covered = b.lower <= truth && truth <= b.upper;
            out[rep] = rec;
        } catch (...) {
            errors[rep] = std::current_exception();
        }
    });
    for (int rep = 0; rep < reps; ++rep) {
        if (!errors[rep]) continue;
        try {
            std::rethrow_exception(errors[rep]);
        } catch (const std::exception& e) {
            throw std::runtime_error("bound replication " + std::to_string(rep) +
                                     " failed: " + e.what());
        }
    }
    return out;
}

}  // namespace surplus
