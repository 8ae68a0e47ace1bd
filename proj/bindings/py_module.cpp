#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "surplus/api.hpp"
#include "surplus/simbench.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace surplus;

namespace {

py::object json_to_py(const json& j) {
    switch (j.type()) {
        case json::value_t::null: return py::none();
        case json::value_t::boolean: return py::bool_(j.get<bool>());
        case json::value_t::number_integer: return py::int_(j.get<long long>());
        case json::value_t::number_unsigned: return py::int_(j.get<unsigned long long>());
        case json::value_t::number_float: return py::float_(j.get<double>());
        case json::value_t::string: return py::str(j.get<std::string>());
        case json::value_t::array: {
            py::list out;
            for (const auto& item : j) out.append(json_to_py(item));
            return out;
        }
        case json::value_t::object: {
            py::dict out;
            for (auto it = j.begin(); it != j.end(); ++it)
                out[py::str(it.key())] = json_to_py(it.value());
            return out;
        }
        default: return py::none();
    }
}

ObservationSet make_dataset(const std::vector<std::vector<double>>& features,
                            const std::vector<double>& prices, const std::vector<double>& outcomes,
                            std::optional<std::pair<double, double>> support) {
    if (features.size() != prices.size() || prices.size() != outcomes.size())
        throw std::invalid_argument("features, prices, outcomes must have equal length");
    if (features.empty()) throw std::invalid_argument("empty dataset");
    const int d = static_cast<int>(features[0].size());
    std::vector<double> flat;
    flat.reserve(features.size() * d);
    for (const auto& row : features) {
        if (static_cast<int>(row.size()) != d)
            throw std::invalid_argument("ragged feature rows");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    PriceSupport sup;
    if (support) {
        sup = {support->first, support->second};
    } else {
        const auto [lo, hi] = std::minmax_element(prices.begin(), prices.end());
        sup = {*lo, 1.05 * *hi};
        if (!(sup.lo < sup.hi)) sup.hi = sup.lo + 1.0;
    }
    return ObservationSet(std::move(flat), d, prices, outcomes, sup);
}

}  // namespace

PYBIND11_MODULE(surplus_ope, m) {
    m.doc() = "consumer-surplus off-policy evaluation: DM, CPW, ACPW and "
              "inequality-aware estimators with EIF-based confidence intervals";

    m.def(
        "estimate",
        [](const std::vector<std::vector<double>>& features, const std::vector<double>& prices,
           const std::vector<double>& outcomes, const std::string& estimator,
           const std::string& mode, const std::string& policy, const std::string& demand,
           const std::string& propensity, double r, double alpha, double clip_floor, int folds,
           int grid_size, uint64_t seed,
           std::optional<std::pair<double, double>> support) -> py::object {
            EstimateSpec spec;
            spec.estimator = estimator;
            spec.mode = mode;
            spec.policy = policy;
            spec.demand = demand;
            spec.propensity = propensity;
            spec.r = r;
            spec.alpha = alpha;
            spec.clip_floor = clip_floor;
            spec.folds = folds;
            spec.grid_size = grid_size;
            spec.seed = seed;
            const ObservationSet data = make_dataset(features, prices, outcomes, support);
            return json_to_py(run_estimate(data, spec));
        },
        py::arg("features"), py::arg("prices"), py::arg("outcomes"),
        py::arg("estimator") = "acpw", py::arg("mode") = "target", py::arg("policy") = "",
        py::arg("demand") = "linear", py::arg("propensity") = "kde_tophat", py::arg("r") = 1.0,
        py::arg("alpha") = 0.10, py::arg("clip_floor") = 1e-3, py::arg("folds") = 2,
        py::arg("grid_size") = 200, py::arg("seed") = 1, py::arg("support") = std::nullopt,
        "Estimate consumer surplus from logged (features, price, outcome) rows.");

    m.def(
        "estimate_csv",
        [](const std::string& path, const std::string& estimator, const std::string& mode,
           const std::string& policy, const std::string& demand, const std::string& propensity,
           double r, double alpha, double clip_floor, int folds, int grid_size, uint64_t seed,
           std::optional<std::pair<double, double>> support,
           const std::string& segment) -> py::object {
            EstimateSpec spec;
            spec.estimator = estimator;
            spec.mode = mode;
            spec.policy = policy;
            spec.demand = demand;
            spec.propensity = propensity;
            spec.r = r;
            spec.alpha = alpha;
            spec.clip_floor = clip_floor;
            spec.folds = folds;
            spec.grid_size = grid_size;
            spec.seed = seed;
            std::optional<PriceSupport> sup;
            if (support) sup = PriceSupport{support->first, support->second};
            ObservationSet data = ObservationSet::from_csv(path, sup);
            if (!segment.empty()) data = data.filter_segment(segment);
            return json_to_py(run_estimate(data, spec));
        },
        py::arg("path"), py::arg("estimator") = "acpw", py::arg("mode") = "target",
        py::arg("policy") = "", py::arg("demand") = "linear",
        py::arg("propensity") = "kde_tophat", py::arg("r") = 1.0, py::arg("alpha") = 0.10,
        py::arg("clip_floor") = 1e-3, py::arg("folds") = 2, py::arg("grid_size") = 200,
        py::arg("seed") = 1, py::arg("support") = std::nullopt, py::arg("segment") = "",
        "Estimate consumer surplus from a CSV with columns x0..x{d-1}, p, y.");

    m.def(
        "bounds",
        [](const std::vector<std::vector<double>>& features, const std::vector<double>& prices,
           const std::vector<double>& outcomes, const std::string& policy, double v_max,
           const std::string& demand, int fine_nodes, int tail_nodes,
           std::optional<std::pair<double, double>> support) -> py::object {
            BoundsSpec spec;
            spec.policy = policy;
            spec.v_max = v_max;
            spec.demand = demand;
            spec.fine_nodes = fine_nodes;
            spec.tail_nodes = tail_nodes;
            const ObservationSet data = make_dataset(features, prices, outcomes, support);
            return json_to_py(run_bounds(data, spec));
        },
        py::arg("features"), py::arg("prices"), py::arg("outcomes"), py::arg("policy"),
        py::arg("v_max") = 0.0, py::arg("demand") = "linear", py::arg("fine_nodes") = 400,
        py::arg("tail_nodes") = 200, py::arg("support") = std::nullopt,
        "Partial-identification surplus bounds under monotone log-concave demand.");

    m.def("scenario_names", [] { return scenario_names(); },
          "Names of the registered simulation scenarios.");

    m.def(
        "generate_scenario",
        [](const std::string& name, int n, uint64_t seed) -> py::object {
            const GenerateResult g = generate(find_scenario(name), n, seed);
            py::dict out;
            std::vector<std::vector<double>> rows(g.data.n());
            for (int i = 0; i < g.data.n(); ++i) {
                auto xi = g.data.x(i);
                rows[i].assign(xi.begin(), xi.end());
            }
            out["features"] = rows;
            out["prices"] = g.data.prices();
            out["outcomes"] = g.data.outcomes();
            out["valuations"] = g.valuations;
            out["beta"] = g.beta.values;
            out["support"] = py::make_tuple(g.data.support().lo, g.data.support().hi);
            return out;
        },
        py::arg("name"), py::arg("n"), py::arg("seed") = 1,
        "Draw a dataset (with hidden valuations) from a registered scenario.");

    m.def(
        "run_study",
        [](const std::string& scenario, const std::vector<std::string>& estimators,
           const std::vector<int>& n_grid, int reps, double alpha, const std::string& mode,
           double r, uint64_t seed, int threads, const std::string& beta_mode) -> py::object {
            StudyConfig cfg;
            cfg.scenario = scenario;
            cfg.estimators = estimators;
            cfg.n_grid = n_grid;
            cfg.reps = reps;
            cfg.alpha = alpha;
            cfg.master_seed = seed;
            cfg.threads = threads;
            if (r >= 0.0) cfg.r = r;
            if (beta_mode == "study") cfg.beta_mode = BetaMode::per_study;
            else if (beta_mode == "replication") cfg.beta_mode = BetaMode::per_replication;
            else if (beta_mode == "observation") cfg.beta_mode = BetaMode::per_observation;
            else if (beta_mode != "scenario")
                throw std::invalid_argument("beta_mode must be scenario|study|replication|observation");
            if (mode == "target") cfg.mode = Mode::target;
            else if (mode == "behavior") cfg.mode = Mode::behavior;
            else if (mode == "delta") cfg.mode = Mode::delta;
            else throw std::invalid_argument("mode must be target|behavior|delta");
            return json_to_py(run_study(cfg).summary());
        },
        py::arg("scenario"), py::arg("estimators") = std::vector<std::string>{"DM", "CPW", "ACPW"},
        py::arg("n_grid") = std::vector<int>{500, 1000}, py::arg("reps") = 20,
        py::arg("alpha") = 0.10, py::arg("mode") = "target", py::arg("r") = -1.0,
        py::arg("seed") = 1, py::arg("threads") = 0, py::arg("beta_mode") = "scenario",
        "Run a seeded Monte Carlo study and return the aggregate report.");

    m.def("oracle_surplus",
          [](const std::string& scenario, long draws, uint64_t seed, double r) {
              const Scenario& scn = find_scenario(scenario);
              const OracleResult res =
                  oracle_surplus_mc(scn, nullptr, r, draws, seed, scn.price_support());
              return py::make_tuple(res.value, res.stderr_);
          },
          py::arg("scenario"), py::arg("draws") = 100000, py::arg("seed") = 1, py::arg("r") = 1.0,
          "Monte Carlo oracle of the behavior-policy surplus; returns (value, stderr).");

    m.def("normal_quantile", &normal_quantile, py::arg("p"),
          "Inverse standard normal CDF.");
}
