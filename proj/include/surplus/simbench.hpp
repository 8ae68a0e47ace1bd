#ifndef SURPLUS_SIMBENCH_HPP
#define SURPLUS_SIMBENCH_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "surplus/estimators.hpp"
#include "surplus/inference.hpp"
#include "surplus/partial_id.hpp"

#include "json.hpp"

namespace surplus {

// Registered data-generating process plus its estimation recipe. The named
// instances mirror the simulation studies; ad-hoc instances can be built
// directly for tests.
struct Scenario {
    std::string name;

    // latent law: V = v_base + beta_scale * beta . f(X) + eps,  Y = 1{V > P}
    int d = 1;
    bool x_bernoulli = false;  // X ~ U{0,1}^d instead of U[x_lo, x_hi]^d
    double x_lo = 0.0, x_hi = 1.0;
    bool x_squared = false;  // f(x) = x^2 coordinatewise
    double beta_lo = -1.0, beta_hi = 1.0;
    double v_base = 100.0;
    double beta_scale = 300.0;
    double eps_hi = 10.0;  // eps ~ U[0, eps_hi]

    // price law
    enum class PriceLaw { support_pad, fixed_interval, gap };
    PriceLaw price_law = PriceLaw::support_pad;
    double pad = 0.05;                                   // support_pad
    double p_lo = 0.0, p_hi = 1.0;                       // fixed_interval
    std::vector<std::pair<double, double>> gap_segments; // gap

    // estimation recipe
    DemandLearner demand = DemandLearner::linear();
    PropensityLearner propensity = PropensityLearner::kde(Kernel::tophat);
    int grid_size = 200;
    int cross_folds = 2;
    double default_r = 1.0;

    // target policy: softmax over a revenue model unless fixed points given
    std::vector<double> target_points;  // fixed uniform grid policy when nonempty
    int softmax_points = 5;
    double softmax_temperature = 1.0;
    BoostedTreeParams policy_demand;  // revenue model behind the softmax policy

    enum class BetaDefault { per_study, per_observation };
    BetaDefault beta_default = BetaDefault::per_study;

    // theoretical bounds via interval arithmetic over the full DGP
    std::pair<double, double> valuation_range() const;
    PriceSupport price_support() const;
};

const std::vector<Scenario>& scenario_registry();
const Scenario& find_scenario(const std::string& name);
std::vector<std::string> scenario_names();

struct Beta {
    std::vector<double> values;
};

struct GenerateResult {
    ObservationSet data;
    std::vector<double> valuations;  // hidden, for oracle use
    Beta beta;
    double v_max_conditional = 0.0;  // smallest price with Y = 0 a.s. given beta
};

// How the DGP coefficients are drawn:
//   per_study:       one beta fixes the population for an entire study;
//   per_replication: each replication redraws beta (its own estimand);
//   per_observation: every row gets its own beta.
enum class BetaMode { per_study, per_replication, per_observation };


// How the support_pad price law resolves "U[min(V)-pad, max(V)+pad]":
//   theoretical: the valuation interval implied by the drawn beta;
//   realized:    the sample min/max of the replication's valuations.
enum class SupportRule { theoretical, realized };

// Deterministic per seed. fixed_beta pins the population coefficients (the
// per_study path); otherwise beta is drawn here according to beta_mode.
GenerateResult generate(const Scenario& scn, int n, uint64_t seed,
                        BetaMode beta_mode = BetaMode::per_replication,
                        SupportRule support_rule = SupportRule::theoretical,
                        const Beta* fixed_beta = nullptr);

// The study-level population draw used by per_study mode.
Beta draw_study_beta(const Scenario& scn, uint64_t master_seed);

// Truncated-surplus truth conditional on beta, computed by exact piecewise
// integration in p and quadrature/enumeration over x:
//   E_X [ (int pi(p|X) (min(V, sup.hi) - p)_+ dp)^r ]  restricted to sup.
// policy == nullptr evaluates the scenario's own price law (behavior policy).
double scenario_truth(const Scenario& scn, const Beta& beta, const TargetPolicy* policy, double r,
                      const PriceSupport& sup);

struct OracleResult {
    double value = 0.0;
    double stderr_ = 0.0;
};

// Monte Carlo oracle over fresh draws; beta fixed (conditional truth) or
// redrawn per draw (marginal truth).
OracleResult oracle_surplus_mc(const Scenario& scn, const TargetPolicy* policy, double r,
                               long draws, uint64_t seed, const PriceSupport& sup,
                               std::optional<Beta> beta = std::nullopt);

// Marginal truth for per-observation beta mode (d = 1 only), by 2-D quadrature.
double scenario_truth_beta_marginal(const Scenario& scn, const TargetPolicy* policy, double r,
                                    const PriceSupport& sup);

struct StudyConfig {
    std::string scenario;
    std::vector<std::string> estimators = {"DM", "CPW", "ACPW"};
    std::vector<int> n_grid = {500, 1000, 2000, 4000};
    int reps = 200;
    double alpha = 0.10;
    std::optional<double> r;  // defaults to the scenario's r
    int cross_folds = 0;      // 0: scenario default
    Mode mode = Mode::target;
    uint64_t master_seed = 1;
    std::optional<BetaMode> beta_mode;  // empty: scenario default
    SupportRule support_rule = SupportRule::theoretical;
    int threads = 0;  // 0: hardware concurrency
};

struct RepRecord {
    int rep = 0;
    uint64_t seed = 0;
    double estimate = 0.0;
    double truth = 0.0;
    double error = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool ci_hit = false;
    double ci_width = 0.0;
};

struct CellReport {
    std::string estimator;
    int n = 0;
    std::vector<RepRecord> reps;
    double mse = 0.0;
    double bias = 0.0;
    double variance = 0.0;  // of the errors; mse = bias^2 + variance
    double coverage = 0.0;
    double mean_ci_width = 0.0;
};

struct RunReport {
    std::string scenario;
    Mode mode = Mode::target;
    double r = 1.0;
    double alpha = 0.1;
    int reps = 0;
    uint64_t master_seed = 0;
    double wall_seconds = 0.0;
    std::vector<CellReport> cells;

    const CellReport& cell(const std::string& estimator, int n) const;
    std::string to_csv() const;  // long format: scenario,estimator,n,rep,error,ci_hit
    nlohmann::json summary() const;
};

// pre: valid scenario + estimator names; a failed replication aborts with its
// replication id attached.
RunReport run_study(const StudyConfig& cfg);

// Coverage fraction per estimator at one sample size.
std::map<std::string, double> coverage_experiment(const std::string& scenario, int n, int reps,
                                                  double alpha, uint64_t seed,
                                                  Mode mode = Mode::target);

// Partial-identification study on a gap scenario: per run, bound interval vs
// conditional truth and vs the naive 0/1 imputation.
struct BoundRunRecord {
    int rep = 0;
    double truth = 0.0;
    double lower = 0.0, upper = 0.0;
    double naive_lower = 0.0, naive_upper = 0.0;
    bool covered = false;
};

std::vector<BoundRunRecord> run_bound_study(const Scenario& scn, int n, int reps,
                                            uint64_t master_seed, int fine_nodes = 400,
                                            int tail_nodes = 200);

}  // namespace surplus

#endif
