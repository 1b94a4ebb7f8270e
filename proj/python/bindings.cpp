// Python bindings for the scoring, metric, bundle and sweep entry points.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vlmood/bundle.hpp"
#include "vlmood/metrics.hpp"
#include "vlmood/scoring.hpp"
#include "vlmood/sweep.hpp"
#include "vlmood/synthetic.hpp"

namespace py = pybind11;
using namespace vlmood;

namespace {

SimilarityRow make_row(std::vector<double> sims, std::size_t id_count) {
  if (id_count == 0 || id_count > sims.size()) throw InvalidArgument("id_count must be in [1, len(similarities)]");
  SimilarityRow row{std::move(sims), 0};
  for (std::size_t i = 1; i < id_count; ++i) {
    if (row.values[i] > row.values[row.k_hat]) row.k_hat = i;
  }
  return row;
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Prompt-based OOD scoring and exact detection metrics";

  py::register_exception<BundleError>(m, "BundleError");
  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  m.def("cosine", [](std::vector<float> a, std::vector<float> b) { return cosine(a, b); }, py::arg("a"),
        py::arg("b"));
  m.def(
      "score_id",
      [](std::vector<double> sims, std::size_t id_count, double tau) {
        return score_id(make_row(std::move(sims), id_count), id_count, tau);
      },
      py::arg("similarities"), py::arg("id_count"), py::arg("tau") = 1.0,
      "Softmax over the first id_count similarities, evaluated at the best ID entry.");
  m.def(
      "score_id_ood",
      [](std::vector<double> sims, std::size_t id_count, double tau) {
        const std::size_t n = sims.size();
        return score_id_ood(make_row(std::move(sims), id_count), id_count, n - id_count, tau);
      },
      py::arg("similarities"), py::arg("id_count"), py::arg("tau") = 1.0,
      "Like score_id, with the remaining entries (OOD prompts) added to the denominator.");
  m.def("score_msp", [](std::vector<double> z) { return score_msp(z); }, py::arg("logits"));
  m.def("score_maxlogit", [](std::vector<double> z) { return score_maxlogit(z); }, py::arg("logits"));
  m.def("score_energy", [](std::vector<double> z) { return score_energy(z); }, py::arg("logits"));
  m.def("score_odin", [](std::vector<double> z, double t) { return score_odin(z, t); }, py::arg("logits"),
        py::arg("tau_odin") = 1000.0);

  m.def("auroc", [](std::vector<double> id, std::vector<double> ood) { return auroc(id, ood); }, py::arg("id"),
        py::arg("ood"));
  m.def(
      "fpr_at_tpr",
      [](std::vector<double> id, std::vector<double> ood, double target) {
        const auto r = fpr_at_tpr(id, ood, target);
        return py::make_tuple(r.fpr, r.threshold);
      },
      py::arg("id"), py::arg("ood"), py::arg("tpr_target") = 0.95, "Returns (fpr, threshold).");
  m.def("pearson_r", [](std::vector<double> x, std::vector<double> y) { return pearson_r(x, y); }, py::arg("x"),
        py::arg("y"));

  m.def(
      "validate_bundle",
      [](const std::filesystem::path& dir) {
        const auto raw = load_bundle_unchecked(dir);
        std::vector<std::string> problems;
        for (const auto& v : validate_bundle(raw.bundle)) problems.push_back(v.describe());
        for (const auto& name : raw.checksum_failures) problems.push_back("checksum mismatch: " + name);
        return problems;
      },
      py::arg("path"), "Violations found in a bundle directory; empty when valid.");
  m.def(
      "score_bundle",
      [](const std::filesystem::path& dir, const std::string& rule, double tau, std::size_t jobs) {
        ScoreParams params;
        params.tau = tau;
        const auto s = score_bundle(read_bundle(dir), parse_rule(rule), params, jobs);
        std::map<std::string, std::vector<double>> out{{"id", s.id.values}};
        for (const auto& [name, v] : s.ood) out["ood:" + name] = v.values;
        return out;
      },
      py::arg("path"), py::arg("rule") = "score_id_ood", py::arg("tau") = 1.0, py::arg("jobs") = 1,
      "Scores keyed by \"id\" and \"ood:<split>\".");
  m.def(
      "generate_synthetic",
      [](const std::filesystem::path& out, const py::dict& config) {
        const auto text = py::module_::import("json").attr("dumps")(config).cast<std::string>();
        write_bundle(generate(synth_config_from_json(nlohmann::json::parse(text))), out);
      },
      py::arg("out"), py::arg("config") = py::dict(), "Writes a synthetic bundle; config keys as in SynthConfig.");
  m.def(
      "run_sweep",
      [](const std::filesystem::path& spec, std::optional<std::filesystem::path> out, std::size_t jobs) {
        const auto report = run_sweep(read_sweep_spec(spec), jobs);
        if (out) write_report(report, *out);
        return json_to_py(to_json(report));
      },
      py::arg("spec"), py::arg("out") = py::none(), py::arg("jobs") = 1,
      "Runs a sweep spec and returns the report as a dict.");
}
