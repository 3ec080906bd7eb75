#include <sstream>
#include <string>
#include <vector>

#include <pybind11/gil_safe_call_once.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dcm/bootstrap.hpp"
#include "dcm/config.hpp"
#include "dcm/error.hpp"
#include "dcm/estimator.hpp"
#include "dcm/panel.hpp"
#include "dcm/pipeline.hpp"
#include "dcm/scorer.hpp"
#include "dcm/shapley.hpp"
#include "dcm/synth.hpp"

namespace py = pybind11;

namespace {

dcm::PanelTensor panel_from_csv(const std::string& csv, const dcm::ModelConfig& config) {
    std::istringstream in(csv);
    return dcm::read_panel(in, config);
}

dcm::CoefficientSet model_from_json(const std::string& text) {
    try {
        return dcm::artifact_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
        throw dcm::Error(dcm::ErrorKind::ParseError, std::string("model: ") + e.what());
    }
}

dcm::ShockSpec single_shock(const std::string& text, const dcm::ModelConfig& config) {
    auto shocks = dcm::parse_shocks(text, config);
    if (shocks.size() != 1) throw dcm::Error(dcm::ErrorKind::InvalidArgument, "expected exactly one scenario");
    return shocks.front();
}

py::dict result_dict(const dcm::CounterfactualResult& r) {
    py::dict d;
    d["scenario"] = r.scenario;
    d["outcomes"] = r.outcome_names;
    d["n_periods"] = r.n_periods;
    d["factual"] = r.factual;
    d["counterfactual"] = r.counterfactual;
    d["delta"] = r.delta;
    d["total_delta"] = r.total_delta();
    py::dict groups;
    for (const auto& g : r.groups) groups[py::str(g.name)] = g.delta;
    d["group_delta"] = groups;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Dynamic causal model engine: synth, train, score, attribute";

    PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> dcm_error;
    dcm_error.call_once_and_store_result([&]() { return py::exception<dcm::Error>(m, "DcmError"); });
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const dcm::Error& e) {
            py::set_error(dcm_error.get_stored(), (std::string(dcm::to_string(e.kind())) + ": " + e.what()).c_str());
        }
    });

    m.attr("__version__") = dcm::kVersion;

    m.def(
        "run",
        [](const std::vector<std::string>& args) {
            std::ostringstream out;
            std::ostringstream err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = dcm::run_pipeline(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run a dcm subcommand; returns (exit_code, stdout, stderr).");

    m.def(
        "synth",
        [](const std::string& spec_json) {
            const auto data = dcm::generate_panel(dcm::parse_synth_spec(spec_json));
            std::ostringstream csv;
            dcm::write_panel(csv, data.panel);
            py::dict d;
            d["config"] = dcm::config_to_json(data.config).dump();
            d["truth"] = dcm::artifact_to_json(data.truth).dump();
            d["panel"] = csv.str();
            return d;
        },
        py::arg("spec_json"), "Generate a synthetic economy; returns config, truth and panel CSV text.");

    m.def(
        "train",
        [](const std::string& config_json, const std::string& panel_csv) {
            const auto config = dcm::parse_config(config_json);
            const auto panel = panel_from_csv(panel_csv, config);
            dcm::CoefficientSet coeffs;
            {
                py::gil_scoped_release release;
                coeffs = dcm::fit_dcm(panel, config);
            }
            return dcm::artifact_to_json(coeffs).dump();
        },
        py::arg("config_json"), py::arg("panel_csv"), "Fit a model; returns the artifact JSON text.");

    m.def(
        "score",
        [](const std::string& model_json, const std::string& panel_csv, const std::string& shock_json,
           const std::string& mode) {
            const auto coeffs = model_from_json(model_json);
            const auto panel = panel_from_csv(panel_csv, coeffs.config());
            const auto shock = single_shock(shock_json, coeffs.config());
            return result_dict(dcm::score_counterfactual(coeffs, panel, shock, dcm::parse_score_mode(mode)));
        },
        py::arg("model_json"), py::arg("panel_csv"), py::arg("shock_json"), py::arg("mode") = "deterministic");

    m.def(
        "oracle_score",
        [](const std::string& truth_json, const std::string& panel_csv, const std::string& shock_json) {
            const auto truth = model_from_json(truth_json);
            const auto panel = panel_from_csv(panel_csv, truth.config());
            return dcm::oracle_score(truth, panel, single_shock(shock_json, truth.config()));
        },
        py::arg("truth_json"), py::arg("panel_csv"), py::arg("shock_json"),
        "Independent brute-force aggregate delta.");

    m.def(
        "shapley",
        [](const std::string& model_json, const std::string& panel_csv, const std::string& players_json,
           int permutations, std::uint64_t seed) {
            const auto coeffs = model_from_json(model_json);
            const auto panel = panel_from_csv(panel_csv, coeffs.config());
            const auto players = dcm::parse_players(players_json, coeffs.config());
            dcm::CharacteristicCache cache(coeffs, panel, players);
            const bool sample = permutations > 0 || players.size() > static_cast<std::size_t>(dcm::kExactPlayerLimit);
            const auto r = sample ? dcm::shapley_sampled(players, [&](std::uint64_t c) { return cache(c); },
                                                         permutations > 0 ? permutations : 1000, seed)
                                  : dcm::shapley_exact(players, cache.all_coalitions());
            py::dict d;
            d["players"] = r.players;
            d["phi"] = r.phi;
            d["se"] = r.standard_errors;
            d["standalone"] = r.standalone;
            d["method"] = r.method;
            d["grand_value"] = r.grand_value;
            d["efficiency_gap"] = r.efficiency_gap;
            return d;
        },
        py::arg("model_json"), py::arg("panel_csv"), py::arg("players_json"), py::arg("permutations") = 0,
        py::arg("seed") = 0);

    m.def(
        "bootstrap",
        [](const std::string& config_json, const std::string& panel_csv, const std::string& shock_json, int replicates,
           double level, std::uint64_t seed) {
            const auto config = dcm::parse_config(config_json);
            const auto panel = panel_from_csv(panel_csv, config);
            const auto shock = single_shock(shock_json, config);
            dcm::BootstrapReport r;
            {
                py::gil_scoped_release release;
                r = dcm::bootstrap_value(panel, config, shock, replicates, level, seed);
            }
            py::dict d;
            d["point"] = r.point_estimate;
            d["lower"] = r.lower;
            d["upper"] = r.upper;
            d["level"] = r.level;
            d["replicates"] = r.replicates;
            return d;
        },
        py::arg("config_json"), py::arg("panel_csv"), py::arg("shock_json"), py::arg("replicates") = 200,
        py::arg("level") = 0.95, py::arg("seed") = 0);
}
