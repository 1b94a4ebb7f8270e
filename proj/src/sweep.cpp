#include "vlmood/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "text.hpp"
#include "vlmood/parallel.hpp"

namespace vlmood {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Per-split rows followed by an "average" row for one (bundle, rule).
std::vector<ReportRow> evaluate_rule(const Bundle& bundle, Rule rule, const ScoreParams& params,
                                     double tpr_target, std::size_t jobs) {
  const auto scores = score_bundle(bundle, rule, params, jobs);
  std::vector<ReportRow> rows;
  ReportRow avg;
  avg.rule = std::string(to_string(rule));
  avg.dataset = kAverageDataset;
  avg.metrics.tpr_target = tpr_target;
  avg.metrics.threshold_at_tpr95 = kNaN;
  avg.metrics.n_id = scores.id.values.size();
  for (const auto& [name, ood] : scores.ood) {
    ReportRow row;
    row.rule = avg.rule;
    row.dataset = name;
    row.metrics = evaluate(scores.id.values, ood.values, tpr_target);
    avg.metrics.auroc += row.metrics.auroc;
    avg.metrics.fpr95 += row.metrics.fpr95;
    avg.metrics.n_ood += row.metrics.n_ood;
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidArgument("bundle has no OOD splits to evaluate");
  avg.metrics.auroc /= static_cast<double>(rows.size());
  avg.metrics.fpr95 /= static_cast<double>(rows.size());
  rows.push_back(std::move(avg));
  return rows;
}

std::vector<ReportRow> evaluate_rules(const Bundle& bundle, const std::vector<Rule>& rules, const ScoreParams& params,
                                      double tpr_target, std::size_t jobs) {
  std::vector<ReportRow> rows;
  for (Rule r : rules) {
    auto part = evaluate_rule(bundle, r, params, tpr_target, jobs);
    rows.insert(rows.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return rows;
}

void check_rules(const std::vector<Rule>& rules) {
  if (rules.empty()) throw InvalidArgument("sweep: no scoring rules given");
}

void check_tpr(double tpr) {
  if (!(tpr > 0.0 && tpr <= 1.0)) throw InvalidArgument("tpr_target must be in (0, 1]");
}

EvalReport make_report(std::string kind, const ScoreParams& params, const RunOptions& options) {
  params.validate();
  check_tpr(options.tpr_target);
  EvalReport r;
  r.kind = std::move(kind);
  r.params = params;
  r.tpr_target = options.tpr_target;
  return r;
}

Provenance provenance_of(const LabeledBundle& b) { return {b.label, b.source, bundle_digest(b.bundle)}; }

// Evaluates points concurrently (one thread per point, scoring inside each
// point sequential) and returns their row blocks in input order.
template <class Fn>
std::vector<std::vector<ReportRow>> per_point(std::size_t n, std::size_t jobs, Fn&& fn) {
  std::vector<std::vector<ReportRow>> blocks(n);
  parallel_for(n, jobs, [&](std::size_t i) { blocks[i] = fn(i); });
  return blocks;
}

void append(EvalReport& report, std::vector<ReportRow> rows) {
  report.rows.insert(report.rows.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
}

double metric_for(const std::vector<ReportRow>& rows, const std::string& dataset) {
  for (const auto& r : rows) {
    if (r.dataset == dataset) return r.metrics.auroc;
  }
  throw InvalidArgument("missing dataset " + dataset);
}

}  // namespace

// ---------------------------------------------------------------------------
// Report serialization

namespace {

json number_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

}  // namespace

json to_json(const EvalReport& r) {
  json j;
  j["schema"] = "vlmood.eval_report";
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = r.kind;
  j["params"] = {{"tau", r.params.tau}, {"tau_odin", r.params.tau_odin}, {"tpr_target", r.tpr_target}};
  j["provenance"] = json::array();
  for (const auto& p : r.provenance) {
    j["provenance"].push_back({{"label", p.label}, {"source", p.source}, {"digest", p.digest}});
  }
  j["rows"] = json::array();
  for (const auto& row : r.rows) {
    json jr;
    jr["point"] = row.point;
    jr["series"] = row.series;
    jr["rule"] = row.rule;
    jr["dataset"] = row.dataset;
    jr["axis"] = json::object();
    for (const auto& [k, v] : row.axis) jr["axis"][k] = number_or_null(v);
    jr["auroc"] = row.metrics.auroc;
    jr["fpr95"] = row.metrics.fpr95;
    jr["threshold"] = number_or_null(row.metrics.threshold_at_tpr95);
    jr["n_id"] = row.metrics.n_id;
    jr["n_ood"] = row.metrics.n_ood;
    j["rows"].push_back(std::move(jr));
  }
  j["stats"] = json::object();
  for (const auto& [k, v] : r.stats) j["stats"][k] = number_or_null(v);
  j["warnings"] = r.warnings;
  return j;
}

std::string report_json(const EvalReport& r) { return to_json(r).dump(2) + "\n"; }

std::string report_csv(const EvalReport& r) {
  using detail::csv_field;
  using detail::format_double;
  std::set<std::string> axes;
  for (const auto& row : r.rows) {
    for (const auto& [k, v] : row.axis) axes.insert(k);
  }
  std::string out = "kind,point,series,rule,dataset";
  for (const auto& a : axes) out += "," + csv_field(a);
  out += ",auroc,fpr95,threshold,tpr_target,n_id,n_ood\n";
  for (const auto& row : r.rows) {
    out += csv_field(r.kind) + ',' + csv_field(row.point) + ',' + csv_field(row.series) + ',' + csv_field(row.rule) +
           ',' + csv_field(row.dataset);
    for (const auto& a : axes) {
      auto it = row.axis.find(a);
      out += ',' + (it == row.axis.end() ? std::string() : format_double(it->second));
    }
    out += ',' + format_double(row.metrics.auroc) + ',' + format_double(row.metrics.fpr95) + ',' +
           format_double(row.metrics.threshold_at_tpr95) + ',' + format_double(row.metrics.tpr_target) + ',' +
           std::to_string(row.metrics.n_id) + ',' + std::to_string(row.metrics.n_ood) + '\n';
  }
  return out;
}

void write_report(const EvalReport& r, const std::filesystem::path& dir) {
  detail::write_text(dir / "report.json", report_json(r));
  detail::write_text(dir / "report.csv", report_csv(r));
}

// ---------------------------------------------------------------------------
// Sweeps

EvalReport run_comparison(const std::vector<LabeledBundle>& bundles, const std::vector<Rule>& rules,
                          const ScoreParams& params, const RunOptions& options) {
  auto report = make_report("comparison", params, options);
  check_rules(rules);
  if (bundles.empty()) throw InvalidArgument("run_comparison: no bundles");
  auto blocks = per_point(bundles.size(), options.jobs, [&](std::size_t i) {
    auto rows = evaluate_rules(bundles[i].bundle, rules, params, options.tpr_target, 1);
    for (auto& row : rows) row.point = bundles[i].label;
    return rows;
  });
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    report.provenance.push_back(provenance_of(bundles[i]));
    append(report, std::move(blocks[i]));
  }
  return report;
}

EvalReport run_severity_sweep(const std::vector<SeverityPoint>& points, const std::vector<Rule>& rules,
                              const ScoreParams& params, const RunOptions& options) {
  auto report = make_report("severity", params, options);
  check_rules(rules);
  std::optional<std::size_t> baseline;
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> curves;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(p.severity >= 0.0) || !std::isfinite(p.severity)) {
      throw InvalidArgument("severity sweep: point " + p.bundle.label + " has invalid severity");
    }
    if (p.severity == 0.0) {
      if (baseline) throw InvalidArgument("severity sweep: more than one clean (severity 0) point");
      baseline = i;
      continue;
    }
    auto& curve = curves[p.corruption];
    if (curve.empty()) order.push_back(p.corruption);
    if (!curve.empty() && !(points[curve.back()].severity < p.severity)) {
      throw InvalidArgument("severity sweep: severities for " + p.corruption + " are not strictly increasing");
    }
    curve.push_back(i);
  }
  if (!baseline) throw InvalidArgument("severity sweep: missing clean baseline (severity 0)");

  auto blocks = per_point(points.size(), options.jobs, [&](std::size_t i) {
    auto rows = evaluate_rules(points[i].bundle.bundle, rules, params, options.tpr_target, 1);
    for (auto& row : rows) {
      row.point = points[i].bundle.label;
      row.axis["severity"] = points[i].severity;
    }
    return rows;
  });

  for (const auto& p : points) report.provenance.push_back(provenance_of(p.bundle));
  for (const auto& row : blocks[*baseline]) {
    report.stats["baseline_auroc/" + row.rule + "/" + row.dataset] = row.metrics.auroc;
    report.stats["baseline_fpr95/" + row.rule + "/" + row.dataset] = row.metrics.fpr95;
  }
  if (order.empty()) {
    auto rows = blocks[*baseline];
    for (auto& row : rows) row.series = "clean";
    append(report, std::move(rows));
  }
  for (const auto& corruption : order) {
    auto rows = blocks[*baseline];
    for (auto& row : rows) row.series = corruption;
    append(report, std::move(rows));
    for (std::size_t i : curves[corruption]) {
      rows = blocks[i];
      for (auto& row : rows) row.series = corruption;
      append(report, std::move(rows));
    }
  }
  return report;
}

namespace {

void require_same(const EmbeddingMatrix& a, const EmbeddingMatrix& b, const std::string& what,
                  const std::string& variant) {
  if (!bit_equal(a, b)) {
    throw InvalidArgument("prompt variation: variant " + variant + " changes " + what +
                          "; only id_prompts may differ from the baseline");
  }
}

}  // namespace

EvalReport run_prompt_variation(const LabeledBundle& baseline, const std::vector<LabeledBundle>& variants, Rule rule,
                                const ScoreParams& params, const RunOptions& options) {
  auto report = make_report("prompt-variation", params, options);
  if (rule_needs_logits(rule)) throw InvalidArgument("prompt variation needs a prompt-based rule");
  const Bundle& base = baseline.bundle;
  for (const auto& v : variants) {
    require_same(base.id_images, v.bundle.id_images, "id_images", v.label);
    require_same(base.ood_prompts, v.bundle.ood_prompts, "ood_prompts", v.label);
    if (base.ood_images.size() != v.bundle.ood_images.size()) {
      throw InvalidArgument("prompt variation: variant " + v.label + " changes the OOD splits");
    }
    for (const auto& [name, m] : base.ood_images) {
      auto it = v.bundle.ood_images.find(name);
      if (it == v.bundle.ood_images.end()) {
        throw InvalidArgument("prompt variation: variant " + v.label + " lacks OOD split " + name);
      }
      require_same(m, it->second, "ood_images/" + name, v.label);
    }
    if (v.bundle.id_prompts.rows() != base.id_prompts.rows()) {
      throw InvalidArgument("prompt variation: variant " + v.label + " has a different number of ID prompts");
    }
  }
  if (variants.size() < 2) {
    throw UndefinedStatistic("prompt variation: Pearson r needs at least 2 variants, got " +
                             std::to_string(variants.size()));
  }

  // Block 0 is the baseline, block i + 1 variant i.
  auto blocks = per_point(variants.size() + 1, options.jobs, [&](std::size_t i) {
    const auto& lb = i == 0 ? baseline : variants[i - 1];
    auto rows = evaluate_rule(lb.bundle, rule, params, options.tpr_target, 1);
    const double distance = i == 0 ? 0.0 : prompt_set_distance(base.id_prompts, lb.bundle.id_prompts);
    for (auto& row : rows) {
      row.point = lb.label;
      row.axis["prompt_distance"] = distance;
    }
    return rows;
  });

  std::vector<double> distances;
  std::map<std::string, std::vector<double>> deltas;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    for (auto& row : blocks[i]) {
      const double delta = row.metrics.auroc - metric_for(blocks[0], row.dataset);
      row.axis["delta_auroc"] = delta;
      if (i > 0) deltas[row.dataset].push_back(delta);
    }
    if (i > 0) distances.push_back(blocks[i].front().axis.at("prompt_distance"));
  }
  report.provenance.push_back(provenance_of(baseline));
  for (const auto& v : variants) report.provenance.push_back(provenance_of(v));
  for (auto& b : blocks) append(report, std::move(b));

  report.stats["pearson_r"] = pearson_r(distances, deltas.at(kAverageDataset));
  for (const auto& [dataset, d] : deltas) {
    if (dataset == kAverageDataset) continue;
    report.stats["pearson_r/" + dataset] = pearson_r(distances, d);
  }
  return report;
}

EvalReport run_complexity_sweep(const std::vector<ComplexityPoint>& points, const std::vector<Rule>& rules,
                                const ScoreParams& params, const RunOptions& options) {
  auto report = make_report("prompt-complexity", params, options);
  check_rules(rules);
  if (points.empty()) throw InvalidArgument("complexity sweep: no points");
  std::vector<PromptComplexity> stats(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (p.ood_prompts.rendered.size() != p.bundle.bundle.ood_prompt_count()) {
      throw InvalidArgument("complexity sweep: point " + p.bundle.label + " has " +
                            std::to_string(p.ood_prompts.rendered.size()) + " prompt texts but " +
                            std::to_string(p.bundle.bundle.ood_prompt_count()) + " OOD prompt embeddings");
    }
    stats[i] = complexity(p.ood_prompts);
  }
  auto blocks = per_point(points.size(), options.jobs, [&](std::size_t i) {
    auto rows = evaluate_rules(points[i].bundle.bundle, rules, params, options.tpr_target, 1);
    for (auto& row : rows) {
      row.point = points[i].bundle.label;
      row.axis["avg_word_count"] = stats[i].avg_word_count;
      row.axis["unique_word_ratio"] = stats[i].unique_word_ratio;
    }
    return rows;
  });
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return stats[a].avg_word_count < stats[b].avg_word_count; });
  for (std::size_t i : order) {
    report.provenance.push_back(provenance_of(points[i].bundle));
    append(report, std::move(blocks[i]));
  }
  return report;
}

EvalReport run_temperature_sweep(const LabeledBundle& bundle, const std::vector<double>& taus,
                                 const ScoreParams& params, const RunOptions& options) {
  auto report = make_report("temperature", params, options);
  if (taus.empty()) throw InvalidArgument("temperature sweep: no tau values");
  std::vector<double> grid;
  for (double t : taus) {
    if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("temperature sweep: tau must be finite and > 0");
    if (std::find(grid.begin(), grid.end(), t) != grid.end()) {
      report.warnings.push_back("duplicate tau " + detail::format_double(t) + " ignored");
      continue;
    }
    grid.push_back(t);
  }
  std::sort(grid.begin(), grid.end());
  const std::vector<Rule> rules{Rule::score_id, Rule::score_id_ood};
  auto blocks = per_point(grid.size(), options.jobs, [&](std::size_t i) {
    ScoreParams p = params;
    p.tau = grid[i];
    auto rows = evaluate_rules(bundle.bundle, rules, p, options.tpr_target, 1);
    for (auto& row : rows) {
      row.point = bundle.label;
      row.axis["tau"] = grid[i];
      row.axis["log10_tau"] = std::log10(grid[i]);
    }
    return rows;
  });
  report.provenance.push_back(provenance_of(bundle));
  for (auto& b : blocks) append(report, std::move(b));
  return report;
}

// ---------------------------------------------------------------------------
// JSON-driven sweeps

std::string_view to_string(SweepKind kind) noexcept {
  switch (kind) {
    case SweepKind::comparison: return "comparison";
    case SweepKind::severity: return "severity";
    case SweepKind::prompt_variation: return "prompt-variation";
    case SweepKind::prompt_complexity: return "prompt-complexity";
    case SweepKind::temperature: return "temperature";
  }
  return "unknown";
}

SweepKind parse_sweep_kind(std::string_view name) {
  for (auto k : {SweepKind::comparison, SweepKind::severity, SweepKind::prompt_variation,
                 SweepKind::prompt_complexity, SweepKind::temperature}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown sweep kind \"" + std::string(name) + "\"");
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

PerturbSpec perturb_from_json(const json& j) {
  PerturbSpec p;
  for (const auto& [key, value] : j.items()) {
    if (key == "target") p.target = parse_perturb_target(value.get<std::string>());
    else if (key == "scale") p.scale = value.get<double>();
    else if (key == "seed") p.seed = value.get<std::uint64_t>();
    else throw ConfigError("perturb: unknown key \"" + key + "\"");
  }
  return p;
}

std::vector<PointSpec> points_from_json(const json& j, const std::filesystem::path& base, std::size_t index) {
  if (!j.is_object()) throw ConfigError("sweep point must be an object");
  PointSpec p;
  std::optional<json> ladder;
  for (const auto& [key, value] : j.items()) {
    if (key == "label") p.label = value.get<std::string>();
    else if (key == "bundle") p.bundle = resolve(base, value.get<std::string>());
    else if (key == "synthetic") {
      p.synthetic = value.is_string() ? read_synth_config(resolve(base, value.get<std::string>()))
                                      : synth_config_from_json(value);
    } else if (key == "perturb") p.perturb = perturb_from_json(value);
    else if (key == "severity") p.severity = value.get<double>();
    else if (key == "corruption") p.corruption = value.get<std::string>();
    else if (key == "ood_prompt_file") p.ood_prompt_file = resolve(base, value.get<std::string>());
    else if (key == "ood_prompts") p.ood_prompt_texts = value.get<std::vector<std::string>>();
    else if (key == "noise_ladder") ladder = value;
    else throw ConfigError("sweep point: unknown key \"" + key + "\"");
  }
  if (p.bundle.has_value() == p.synthetic.has_value()) {
    throw ConfigError("sweep point needs exactly one of \"bundle\" or \"synthetic\"");
  }
  if (p.label.empty()) p.label = p.bundle ? p.bundle->string() : "point" + std::to_string(index);
  if (!ladder) return {p};

  if (p.perturb) throw ConfigError("sweep point: \"perturb\" and \"noise_ladder\" are exclusive");
  PerturbSpec base_perturb;
  std::vector<double> scales;
  for (const auto& [key, value] : ladder->items()) {
    if (key == "target") base_perturb.target = parse_perturb_target(value.get<std::string>());
    else if (key == "seed") base_perturb.seed = value.get<std::uint64_t>();
    else if (key == "scales") scales = value.get<std::vector<double>>();
    else throw ConfigError("noise_ladder: unknown key \"" + key + "\"");
  }
  if (scales.empty()) throw ConfigError("noise_ladder: no scales");
  std::vector<PointSpec> out;
  for (double s : scales) {
    PointSpec q = p;
    q.perturb = base_perturb;
    q.perturb->scale = s;
    q.label = p.label + "@" + detail::format_double(s);
    if (!q.severity) q.severity = s;
    if (!q.corruption) q.corruption = "embedding_noise_" + std::string(to_string(base_perturb.target));
    out.push_back(std::move(q));
  }
  return out;
}

double metadata_severity(const LabeledBundle& b) {
  auto it = b.bundle.metadata.find("severity");
  if (it == b.bundle.metadata.end()) {
    throw ConfigError("severity sweep: point " + b.label + " has no severity (spec or bundle metadata)");
  }
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ConfigError("severity sweep: point " + b.label + " has non-numeric severity metadata");
  }
}

}  // namespace

SweepSpec sweep_spec_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("sweep spec must be a JSON object");
  SweepSpec s;
  try {
    bool have_kind = false;
    for (const auto& [key, value] : j.items()) {
      if (key == "kind") {
        s.kind = parse_sweep_kind(value.get<std::string>());
        have_kind = true;
      } else if (key == "rules") {
        s.rules.clear();
        for (const auto& r : value) s.rules.push_back(parse_rule(r.get<std::string>()));
      } else if (key == "tau") s.params.tau = value.get<double>();
      else if (key == "tau_odin") s.params.tau_odin = value.get<double>();
      else if (key == "taus") s.taus = value.get<std::vector<double>>();
      else if (key == "tpr_target") s.tpr_target = value.get<double>();
      else if (key == "output") s.output = resolve(base_dir, value.get<std::string>());
      else if (key == "baseline") {
        auto pts = points_from_json(value, base_dir, 0);
        if (pts.size() != 1) throw ConfigError("baseline must be a single point");
        s.baseline = std::move(pts.front());
      } else if (key == "points") {
        for (const auto& p : value) {
          auto pts = points_from_json(p, base_dir, s.points.size());
          s.points.insert(s.points.end(), pts.begin(), pts.end());
        }
      } else if (key == "description") {
        // free text, ignored
      } else {
        throw ConfigError("sweep spec: unknown key \"" + key + "\"");
      }
    }
    if (!have_kind) throw ConfigError("sweep spec: missing \"kind\"");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sweep spec: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("sweep spec: ") + e.what());
  }
  if (s.points.empty()) throw ConfigError("sweep spec: needs at least one point");
  if (s.kind == SweepKind::prompt_variation && !s.baseline) throw ConfigError("prompt-variation sweep needs a baseline");
  return s;
}

SweepSpec read_sweep_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sweep spec " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return sweep_spec_from_json(j, path.parent_path());
}

LabeledBundle load_point(const PointSpec& p) {
  LabeledBundle out;
  out.label = p.label;
  if (p.bundle) {
    out.bundle = read_bundle(*p.bundle);
    out.source = p.bundle->string();
  } else {
    out.bundle = generate(*p.synthetic);
    out.source = "synthetic:" + to_json(*p.synthetic).dump();
  }
  if (p.perturb) {
    out.bundle = perturb_embeddings(out.bundle, p.perturb->target, p.perturb->scale, p.perturb->seed);
    out.source += " perturb:" + std::string(to_string(p.perturb->target)) + "@" +
                  detail::format_double(p.perturb->scale) + "#" + std::to_string(p.perturb->seed);
  }
  return out;
}

EvalReport run_sweep(const SweepSpec& spec, std::size_t jobs) {
  RunOptions options{spec.tpr_target, jobs};
  std::vector<LabeledBundle> bundles(spec.points.size());
  parallel_for(spec.points.size(), jobs, [&](std::size_t i) { bundles[i] = load_point(spec.points[i]); });

  switch (spec.kind) {
    case SweepKind::comparison:
      return run_comparison(bundles, spec.rules, spec.params, options);
    case SweepKind::severity: {
      std::vector<SeverityPoint> points;
      for (std::size_t i = 0; i < bundles.size(); ++i) {
        const auto& ps = spec.points[i];
        SeverityPoint sp;
        sp.severity = ps.severity ? *ps.severity : metadata_severity(bundles[i]);
        if (ps.corruption) {
          sp.corruption = *ps.corruption;
        } else {
          auto it = bundles[i].bundle.metadata.find("corruption");
          sp.corruption = it == bundles[i].bundle.metadata.end() ? "unknown" : it->second;
        }
        sp.bundle = std::move(bundles[i]);
        points.push_back(std::move(sp));
      }
      return run_severity_sweep(points, spec.rules, spec.params, options);
    }
    case SweepKind::prompt_variation: {
      if (spec.rules.size() != 1) throw ConfigError("prompt-variation sweep takes exactly one rule");
      return run_prompt_variation(load_point(*spec.baseline), bundles, spec.rules.front(), spec.params, options);
    }
    case SweepKind::prompt_complexity: {
      std::vector<ComplexityPoint> points;
      for (std::size_t i = 0; i < bundles.size(); ++i) {
        const auto& ps = spec.points[i];
        std::vector<std::string> texts = ps.ood_prompt_texts;
        if (ps.ood_prompt_file) texts = read_prompt_lines(*ps.ood_prompt_file);
        if (texts.empty()) throw ConfigError("complexity sweep: point " + ps.label + " needs OOD prompt texts");
        points.push_back({std::move(bundles[i]), load_ood_prompts(texts, ps.label)});
      }
      return run_complexity_sweep(points, spec.rules, spec.params, options);
    }
    case SweepKind::temperature:
      if (bundles.size() != 1) throw ConfigError("temperature sweep takes exactly one point");
      return run_temperature_sweep(bundles.front(), spec.taus, spec.params, options);
  }
  throw ConfigError("unhandled sweep kind");
}

}  // namespace vlmood
