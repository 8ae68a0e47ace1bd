// Command-line front end: dataset estimation, simulation studies, partial-ID
// bound audits, and synthetic auto-loan-style data generation.
//
// Exit codes: 0 success, 2 user/config error, 3 data/estimation degeneracy.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "surplus/api.hpp"
#include "surplus/simbench.hpp"

using nlohmann::json;
using namespace surplus;

namespace {

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!cfg.is_object()) throw std::invalid_argument("config file must hold a JSON object");
    return cfg;
}

uint64_t resolve_seed(const CLI::App* cmd, const json& cfg, uint64_t flag_value) {
    if (cmd->count("--seed")) return flag_value;
    if (cfg.contains("seed")) return cfg["seed"].get<uint64_t>();
    if (const char* env = std::getenv("SURPLUS_OPE_SEED")) return std::strtoull(env, nullptr, 10);
    return 1;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write output file: " + path);
    out << text;
}

void write_json(const std::string& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
    std::string data_path, config_path, out_path = "report.json", segment;
    std::vector<double> support;
    EstimateSpec spec;
};

int cmd_estimate(EstimateArgs& a, const CLI::App* cmd) {
    json cfg = a.config_path.empty() ? json::object() : load_config_file(a.config_path);
    auto pick_str = [&](const char* flag, const char* key, std::string& slot) {
        if (!cmd->count(flag) && cfg.contains(key)) slot = cfg[key].get<std::string>();
    };
    auto pick_num = [&](const char* flag, const char* key, auto& slot) {
        using T = std::decay_t<decltype(slot)>;
        if (!cmd->count(flag) && cfg.contains(key)) slot = cfg[key].get<T>();
    };
    pick_str("--data", "data", a.data_path);
    pick_str("--estimator", "estimator", a.spec.estimator);
    pick_str("--mode", "mode", a.spec.mode);
    pick_str("--policy", "policy", a.spec.policy);
    pick_str("--demand", "demand", a.spec.demand);
    pick_str("--propensity", "propensity", a.spec.propensity);
    pick_str("--segment", "segment", a.segment);
    pick_str("--out", "out", a.out_path);
    pick_num("--r", "r", a.spec.r);
    pick_num("--alpha", "alpha", a.spec.alpha);
    pick_num("--clip-floor", "clip_floor", a.spec.clip_floor);
    pick_num("--folds", "folds", a.spec.folds);
    pick_num("--grid-size", "grid_size", a.spec.grid_size);
    if (!cmd->count("--support") && cfg.contains("support"))
        a.support = cfg["support"].get<std::vector<double>>();
    a.spec.seed = resolve_seed(cmd, cfg, a.spec.seed);

    if (a.data_path.empty()) throw std::invalid_argument("estimate: --data is required");

    std::optional<PriceSupport> sup;
    if (!a.support.empty()) {
        if (a.support.size() != 2) throw std::invalid_argument("--support needs lo,hi");
        sup = PriceSupport{a.support[0], a.support[1]};
    }
    ObservationSet data = ObservationSet::from_csv(a.data_path, sup);
    if (!a.segment.empty()) data = data.filter_segment(a.segment);

    json report = run_estimate(data, a.spec);
    report["config"] = {{"command", "estimate"},
                        {"data", a.data_path},
                        {"estimator", a.spec.estimator},
                        {"mode", a.spec.mode},
                        {"policy", a.spec.policy},
                        {"demand", a.spec.demand},
                        {"propensity", a.spec.propensity},
                        {"segment", a.segment},
                        {"r", a.spec.r},
                        {"alpha", a.spec.alpha},
                        {"clip_floor", a.spec.clip_floor},
                        {"folds", a.spec.folds},
                        {"grid_size", a.spec.grid_size},
                        {"support", {data.support().lo, data.support().hi}},
                        {"seed", a.spec.seed},
                        {"out", a.out_path}};
    write_json(a.out_path, report);
    std::cout << report.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string scenario, config_path, out_prefix = "study", estimators = "DM,CPW,ACPW",
                mode = "target", n_grid = "500,1000,2000,4000";
    int reps = 200, folds = 0, threads = 0;
    double alpha = 0.10;
    double r = -1.0;  // negative: scenario default
    uint64_t seed = 1;
    bool list = false;
    std::string beta_mode = "scenario";
    bool realized_support = false;
};

int cmd_simulate(SimulateArgs& a, const CLI::App* cmd) {
    if (a.list) {
        for (const auto& name : scenario_names()) std::cout << name << "\n";
        return 0;
    }
    json cfg = a.config_path.empty() ? json::object() : load_config_file(a.config_path);
    auto pick_str = [&](const char* flag, const char* key, std::string& slot) {
        if (!cmd->count(flag) && cfg.contains(key)) slot = cfg[key].get<std::string>();
    };
    auto pick_num = [&](const char* flag, const char* key, auto& slot) {
        using T = std::decay_t<decltype(slot)>;
        if (!cmd->count(flag) && cfg.contains(key)) slot = cfg[key].get<T>();
    };
    pick_str("--scenario", "scenario", a.scenario);
    pick_str("--estimators", "estimators", a.estimators);
    pick_str("--mode", "mode", a.mode);
    pick_str("--n-grid", "n_grid", a.n_grid);
    pick_str("--out-prefix", "out_prefix", a.out_prefix);
    pick_num("--reps", "reps", a.reps);
    pick_num("--alpha", "alpha", a.alpha);
    pick_num("--folds", "folds", a.folds);
    pick_num("--threads", "threads", a.threads);
    pick_num("--r", "r", a.r);
    a.seed = resolve_seed(cmd, cfg, a.seed);

    if (a.scenario.empty()) {
        std::ostringstream msg;
        msg << "simulate: --scenario is required; registered scenarios:";
        for (const auto& name : scenario_names()) msg << " " << name;
        throw std::invalid_argument(msg.str());
    }
    try {
        find_scenario(a.scenario);
    } catch (const std::invalid_argument&) {
        std::ostringstream msg;
        msg << "unknown scenario '" << a.scenario << "'; registered scenarios:";
        for (const auto& name : scenario_names()) msg << " " << name;
        throw std::invalid_argument(msg.str());
    }

    StudyConfig sc;
    sc.scenario = a.scenario;
    sc.reps = a.reps;
    sc.alpha = a.alpha;
    sc.master_seed = a.seed;
    sc.threads = a.threads;
    sc.cross_folds = a.folds;
    if (a.r >= 0.0) sc.r = a.r;
    pick_str("--beta-mode", "beta_mode", a.beta_mode);
    if (a.beta_mode == "study") sc.beta_mode = BetaMode::per_study;
    else if (a.beta_mode == "replication") sc.beta_mode = BetaMode::per_replication;
    else if (a.beta_mode == "observation") sc.beta_mode = BetaMode::per_observation;
    else if (a.beta_mode != "scenario")
        throw std::invalid_argument("simulate: beta-mode must be scenario|study|replication|observation");
    sc.support_rule = a.realized_support ? SupportRule::realized : SupportRule::theoretical;
    if (a.mode == "target") sc.mode = Mode::target;
    else if (a.mode == "behavior") sc.mode = Mode::behavior;
    else if (a.mode == "delta") sc.mode = Mode::delta;
    else throw std::invalid_argument("simulate: mode must be target|behavior|delta");

    sc.estimators = split_list(a.estimators);
    sc.n_grid.clear();
    for (const std::string& tok : split_list(a.n_grid)) sc.n_grid.push_back(std::stoi(tok));
    if (sc.n_grid.empty()) throw std::invalid_argument("simulate: empty n grid");

    const RunReport report = run_study(sc);

    const json config_echo = {{"command", "simulate"}, {"scenario", a.scenario},
                              {"estimators", a.estimators}, {"mode", a.mode},
                              {"n_grid", a.n_grid},   {"reps", a.reps},
                              {"alpha", a.alpha},     {"folds", a.folds},
                              {"r", a.r},             {"seed", a.seed},
                              {"beta_mode", a.beta_mode},
                              {"realized_support", a.realized_support},
                              {"out_prefix", a.out_prefix}};

    write_text(a.out_prefix + ".csv", report.to_csv());
    json summary = report.summary();
    summary["config"] = config_echo;
    write_json(a.out_prefix + ".json", summary);

    std::string cov = "scenario,estimator,n,reps,alpha,coverage,mean_ci_width\n";
    char buf[200];
    for (const CellReport& c : report.cells) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%d,%d,%.12g,%.12g,%.12g\n", report.scenario.c_str(),
                      c.estimator.c_str(), c.n, report.reps, report.alpha, c.coverage,
                      c.mean_ci_width);
        cov += buf;
    }
    write_text(a.out_prefix + "_coverage.csv", cov);

    std::cout << summary.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------- bounds

struct BoundsArgs {
    std::string data_path, config_path, out_path = "bounds.json";
    std::vector<double> support;
    uint64_t seed = 1;
    BoundsSpec spec;
};

int cmd_bounds(BoundsArgs& a, const CLI::App* cmd) {
    json cfg = a.config_path.empty() ? json::object() : load_config_file(a.config_path);
    auto pick_str = [&](const char* flag, const char* key, std::string& slot) {
        if (!cmd->count(flag) && cfg.contains(key)) slot = cfg[key].get<std::string>();
    };
    auto pick_num = [&](const char* flag, const char* key, auto& slot) {
        using T = std::decay_t<decltype(slot)>;
        if (!cmd->count(flag) && cfg.contains(key)) slot = cfg[key].get<T>();
    };
    pick_str("--data", "data", a.data_path);
    pick_str("--policy", "policy", a.spec.policy);
    pick_str("--demand", "demand", a.spec.demand);
    pick_str("--out", "out", a.out_path);
    pick_num("--vmax", "vmax", a.spec.v_max);
    pick_num("--grid-size", "grid_size", a.spec.fine_nodes);
    pick_num("--tail-size", "tail_size", a.spec.tail_nodes);
    pick_num("--anchor-floor", "anchor_floor", a.spec.anchor_floor);
    pick_num("--anchor-separation", "anchor_separation", a.spec.anchor_separation);
    if (!cmd->count("--support") && cfg.contains("support"))
        a.support = cfg["support"].get<std::vector<double>>();
    if (!cmd->count("--tighten-lower") && cfg.contains("tighten_lower"))
        a.spec.tighten_lower = cfg["tighten_lower"].get<bool>();
    a.seed = resolve_seed(cmd, cfg, a.seed);

    if (a.data_path.empty()) throw std::invalid_argument("bounds: --data is required");

    std::optional<PriceSupport> sup;
    if (!a.support.empty()) {
        if (a.support.size() != 2) throw std::invalid_argument("--support needs lo,hi");
        sup = PriceSupport{a.support[0], a.support[1]};
    }
    const ObservationSet data = ObservationSet::from_csv(a.data_path, sup);

    json report = run_bounds(data, a.spec);
    report["config"] = {{"command", "bounds"},
                        {"data", a.data_path},
                        {"policy", a.spec.policy},
                        {"demand", a.spec.demand},
                        {"vmax", report["v_max"]},
                        {"grid_size", a.spec.fine_nodes},
                        {"tail_size", a.spec.tail_nodes},
                        {"anchor_floor", a.spec.anchor_floor},
                        {"anchor_separation", a.spec.anchor_separation},
                        {"tighten_lower", a.spec.tighten_lower},
                        {"support", {data.support().lo, data.support().hi}},
                        {"seed", a.seed},
                        {"out", a.out_path}};
    write_json(a.out_path, report);
    std::cout << report.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------- gen-synth

struct GenSynthArgs {
    std::string out_path = "synth.csv", config_path;
    int n = 1000, d = 5;
    uint64_t seed = 1;
};

// Schema-compatible synthetic auto-loan generator. Continuous features are
// standardized; the price is the net present value of the payment stream
// minus the loan amount, clipped to [0, 7500]; segment crosses credit tier
// with region.
int cmd_gen_synth(GenSynthArgs& a, const CLI::App* cmd) {
    json cfg = a.config_path.empty() ? json::object() : load_config_file(a.config_path);
    if (!cmd->count("--n") && cfg.contains("n")) a.n = cfg["n"].get<int>();
    if (!cmd->count("--d") && cfg.contains("d")) a.d = cfg["d"].get<int>();
    if (!cmd->count("--out") && cfg.contains("out")) a.out_path = cfg["out"].get<std::string>();
    a.seed = resolve_seed(cmd, cfg, a.seed);

    if (a.n < 1) throw std::invalid_argument("gen-synth: n must be positive");
    if (a.d < 1) throw std::invalid_argument("gen-synth: d must be positive");

    Rng rng(a.seed);
    const int term_choices[4] = {36, 48, 60, 72};

    std::vector<std::vector<double>> raw(a.n);
    std::vector<double> price(a.n), y(a.n);
    std::vector<std::string> segment(a.n);

    for (int i = 0; i < a.n; ++i) {
        const double fico = 480.0 + 400.0 * rng.uniform();
        const int term = term_choices[rng.uniform_int(4)];
        const double amount = 6000.0 + 34000.0 * rng.uniform();
        const double libor_m = 0.004 + rng.uniform(-0.0005, 0.0005);  // one-month rate
        const double competitor_apr = 0.055 + rng.uniform(-0.01, 0.01);
        const bool good_credit = fico >= 680.0;
        const bool blue_state = rng.uniform() < 0.5;

        // historical pricing rule with exploration jitter
        const double apr = (good_credit ? 0.045 : 0.085) + rng.uniform(-0.02, 0.02);
        const double m = apr / 12.0;
        const double payment = amount * m / (1.0 - std::pow(1.0 + m, -term));
        double npv = 0.0;
        for (int tau = 1; tau <= term; ++tau) npv += std::pow(1.0 + libor_m, -tau);
        double p = payment * npv - amount;
        p = std::min(std::max(p, 0.0), 7500.0);

        // latent willingness to pay for the financing markup
        const double v = 200.0 + 2.2 * (fico - 480.0) + 0.055 * amount +
                         30000.0 * (competitor_apr - 0.045) + rng.uniform(0.0, 900.0);

        raw[i] = {fico, static_cast<double>(term), amount, libor_m, competitor_apr};
        while (static_cast<int>(raw[i].size()) < a.d) raw[i].push_back(rng.uniform());
        raw[i].resize(a.d);
        price[i] = p;
        y[i] = v > p ? 1.0 : 0.0;
        segment[i] = std::string(good_credit ? "good" : "bad") + "_" + (blue_state ? "blue" : "red");
    }

    for (int j = 0; j < a.d; ++j) {
        double mean = 0.0;
        for (int i = 0; i < a.n; ++i) mean += raw[i][j];
        mean /= a.n;
        double var = 0.0;
        for (int i = 0; i < a.n; ++i) var += (raw[i][j] - mean) * (raw[i][j] - mean);
        const double sd = std::sqrt(var / std::max(1, a.n));
        for (int i = 0; i < a.n; ++i) raw[i][j] = sd > 0.0 ? (raw[i][j] - mean) / sd : 0.0;
    }

    std::string out;
    for (int j = 0; j < a.d; ++j) out += "x" + std::to_string(j) + ",";
    out += "p,y,segment\n";
    char buf[64];
    for (int i = 0; i < a.n; ++i) {
        for (int j = 0; j < a.d; ++j) {
            std::snprintf(buf, sizeof(buf), "%.9g,", raw[i][j]);
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), "%.6f,%d,", price[i], static_cast<int>(y[i]));
        out += buf;
        out += segment[i];
        out += "\n";
    }
    write_text(a.out_path, out);
    std::cout << "wrote " << a.n << " rows to " << a.out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"consumer-surplus off-policy evaluation toolkit"};
    app.require_subcommand(1);

    EstimateArgs ea;
    CLI::App* est = app.add_subcommand("estimate", "estimate surplus from a logged dataset");
    est->add_option("--data", ea.data_path, "CSV with columns x0..x{d-1},p,y");
    est->add_option("--config", ea.config_path, "JSON config file (flags override)");
    est->add_option("--estimator", ea.spec.estimator, "dm|cpw|acpw|ia");
    est->add_option("--mode", ea.spec.mode, "target|behavior|delta");
    est->add_option("--policy", ea.spec.policy,
                    "uniform:a,b | point:p | grid:p1,..[@q1,..] | softmax:G,gamma");
    est->add_option("--demand", ea.spec.demand, "linear|boosted");
    est->add_option("--propensity", ea.spec.propensity,
                    "kde_tophat|kde_gaussian|gaussian|binned_kde[:feat,bins]|uniform:a,b");
    est->add_option("--segment", ea.segment, "restrict to one segment label");
    est->add_option("--r", ea.spec.r, "inequality exponent for ia");
    est->add_option("--alpha", ea.spec.alpha, "CI level");
    est->add_option("--clip-floor", ea.spec.clip_floor, "propensity density clip floor");
    est->add_option("--folds", ea.spec.folds, "cross-fitting folds K");
    est->add_option("--grid-size", ea.spec.grid_size, "quadrature nodes");
    est->add_option("--support", ea.support, "price support lo hi")->expected(2);
    est->add_option("--seed", ea.spec.seed, "rng seed");
    est->add_option("--out", ea.out_path, "report path");

    SimulateArgs sa;
    CLI::App* sim = app.add_subcommand("simulate", "run a registered simulation study");
    sim->add_option("--scenario", sa.scenario, "scenario name (see --list)");
    sim->add_option("--config", sa.config_path, "JSON config file (flags override)");
    sim->add_option("--estimators", sa.estimators, "comma list of DM,CPW,ACPW,IA-ACPW");
    sim->add_option("--mode", sa.mode, "target|behavior|delta");
    sim->add_option("--n-grid", sa.n_grid, "comma list of sample sizes");
    sim->add_option("--reps", sa.reps, "replications");
    sim->add_option("--alpha", sa.alpha, "CI level");
    sim->add_option("--folds", sa.folds, "cross-fitting folds K (0: scenario default)");
    sim->add_option("--r", sa.r, "inequality exponent (negative: scenario default)");
    sim->add_option("--threads", sa.threads, "worker threads (0: hardware)");
    sim->add_option("--seed", sa.seed, "master seed");
    sim->add_option("--out-prefix", sa.out_prefix, "output prefix for .csv/.json");
    sim->add_flag("--list", sa.list, "print registered scenarios and exit");
    sim->add_option("--beta-mode", sa.beta_mode,
                    "DGP coefficient draw: scenario|study|replication|observation");
    sim->add_flag("--realized-price-support", sa.realized_support,
                  "pad the realized valuation min/max instead of the theoretical interval");

    BoundsArgs ba;
    CLI::App* bnd = app.add_subcommand("bounds", "partial-identification surplus bounds");
    bnd->add_option("--data", ba.data_path, "CSV with columns x0..x{d-1},p,y");
    bnd->add_option("--config", ba.config_path, "JSON config file (flags override)");
    bnd->add_option("--policy", ba.spec.policy, "target policy spec");
    bnd->add_option("--demand", ba.spec.demand, "linear|boosted");
    bnd->add_option("--vmax", ba.spec.v_max, "price at which demand is zero (default 1.05 * max price)");
    bnd->add_option("--grid-size", ba.spec.fine_nodes, "nodes over the observed span");
    bnd->add_option("--tail-size", ba.spec.tail_nodes, "nodes over the tail up to vmax");
    bnd->add_option("--anchor-floor", ba.spec.anchor_floor, "floor on anchor demand before logs");
    bnd->add_option("--anchor-separation", ba.spec.anchor_separation,
                    "minimum spacing of the outer envelope anchors (negative: quarter of the span)");
    bnd->add_flag("--tighten-lower", ba.spec.tighten_lower,
                  "max the lower chord with the neighboring observed level");
    bnd->add_option("--support", ba.support, "price support lo hi")->expected(2);
    bnd->add_option("--seed", ba.seed, "rng seed");
    bnd->add_option("--out", ba.out_path, "report path");

    GenSynthArgs ga;
    CLI::App* gen = app.add_subcommand("gen-synth", "write a synthetic auto-loan-style CSV");
    gen->add_option("--n", ga.n, "rows");
    gen->add_option("--d", ga.d, "feature columns");
    gen->add_option("--config", ga.config_path, "JSON config file (flags override)");
    gen->add_option("--seed", ga.seed, "rng seed");
    gen->add_option("--out", ga.out_path, "output CSV path");

    try {
        app.parse(argc, argv);
        if (est->parsed()) return cmd_estimate(ea, est);
        if (sim->parsed()) return cmd_simulate(sa, sim);
        if (bnd->parsed()) return cmd_bounds(ba, bnd);
        if (gen->parsed()) return cmd_gen_synth(ga, gen);
        return 2;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const DegenerateDataError& e) {
        std::cerr << "error (data/estimation degeneracy): " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error (configuration): " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error (configuration): " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
