#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "splan/cliapp.hpp"

namespace py = pybind11;
using ojson = nlohmann::ordered_json;

namespace {

splan::RunConfig cfg_from(const std::string& doc) {
    return splan::RunConfig::from_json(doc.empty() ? ojson::object() : ojson::parse(doc));
}

} // namespace

// The Python surface mirrors the command-line surface: six pipeline
// operations plus a few pure helpers. Structured data crosses the boundary
// as JSON text; the package wrapper turns it into dicts.
PYBIND11_MODULE(_core, m) {
    m.doc() = "supply-network planning core (data synthesis, offline RL, planning, evaluation)";

    m.def(
        "default_config_json",
        [] { return splan::RunConfig::from_json(ojson::object()).to_json().dump(); },
        "Fully-defaulted run configuration as JSON text.");
    m.def(
        "normalize_config_json",
        [](const std::string& doc) { return cfg_from(doc).to_json().dump(); },
        py::arg("config_json"), "Validates a partial config and returns the full document.");

    m.def(
        "gen",
        [](const std::string& cfg, const std::string& out) {
            return splan::cmd_gen(cfg_from(cfg), out).dump();
        },
        py::arg("config_json"), py::arg("out_dir"), py::call_guard<py::gil_scoped_release>(),
        "Synthesize a corpus; returns the manifest as JSON text.");
    m.def(
        "train",
        [](const std::string& cfg, const std::string& data, const std::string& out) {
            return splan::cmd_train(cfg_from(cfg), data, out).dump();
        },
        py::arg("config_json"), py::arg("data_dir"), py::arg("out_dir"),
        py::call_guard<py::gil_scoped_release>(),
        "Train the policy/value networks offline; returns the manifest as JSON text.");
    m.def(
        "validate",
        [](const std::string& cfg, const std::string& data, const std::string& model,
           const std::string& out) {
            return splan::cmd_validate(cfg_from(cfg), data, model, out).dump();
        },
        py::arg("config_json"), py::arg("data_dir"), py::arg("model_path"), py::arg("out_dir"),
        py::call_guard<py::gil_scoped_release>(),
        "Select a risk preference per objective on the validation window.");
    m.def(
        "plan",
        [](const std::string& cfg, const std::string& data, const std::string& model,
           const std::string& sku, int week, int objective, const std::string& out) {
            return splan::cmd_plan(cfg_from(cfg), data, model, sku, week, objective, out)
                .dump();
        },
        py::arg("config_json"), py::arg("data_dir"), py::arg("model_path"), py::arg("sku_id"),
        py::arg("week"), py::arg("objective_index"), py::arg("out_dir"),
        py::call_guard<py::gil_scoped_release>(),
        "Monte-Carlo plan for one SKU and start week.");
    m.def(
        "evaluate",
        [](const std::string& cfg, const std::string& data, const std::string& model,
           const std::string& out, int lambda_override) {
            return splan::cmd_evaluate(cfg_from(cfg), data, model, out, lambda_override)
                .dump();
        },
        py::arg("config_json"), py::arg("data_dir"), py::arg("model_path"), py::arg("out_dir"),
        py::arg("lambda_override") = -1, py::call_guard<py::gil_scoped_release>(),
        "Receding-horizon evaluation against the rule baseline and logged history.");
    m.def(
        "report",
        [](const std::string& eval_dir, const std::string& out) {
            return splan::cmd_report(eval_dir, out).dump();
        },
        py::arg("eval_dir"), py::arg("out_dir"), py::call_guard<py::gil_scoped_release>(),
        "Render an evaluation into CSV tables and a comparison summary.");

    m.def(
        "node_reward",
        [](double f, double c1, double c2, double f_ref) {
            return splan::node_reward(f, splan::RiskPreference{c1, c2, f_ref});
        },
        py::arg("f"), py::arg("c1"), py::arg("c2"), py::arg("f_ref"),
        "Piecewise node reward: peak 1 at f_ref, slopes -c1/-c2, floored at -1.");
    m.def("safety_stock", &splan::safety_stock, py::arg("forecast"), py::arg("dos"),
          "Predicted demand over a days-of-supply window (fractional weeks prorated).");
    m.def("wmape_sigma", &splan::wmape_sigma, py::arg("wmape"),
          "Lognormal dispersion whose unbiased multiplicative noise hits the target WMAPE.");
    m.def("sha256_file", &splan::sha256_file, py::arg("path"));
}
