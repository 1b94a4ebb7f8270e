#include "vlmood/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "text.hpp"
#include "vlmood/bundle.hpp"
#include "vlmood/insights.hpp"
#include "vlmood/metrics.hpp"
#include "vlmood/scoring.hpp"
#include "vlmood/sweep.hpp"
#include "vlmood/synthetic.hpp"

namespace vlmood::cli {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Raised for input problems detected after parsing (missing paths, bad
// combinations); maps to the usage exit code.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::filesystem::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "vlmood-out";
}

void require_dir(const std::string& path, const char* what) {
  if (!std::filesystem::is_directory(path)) throw UsageError(std::string(what) + " is not a directory: " + path);
}

void require_file(const std::string& path, const char* what) {
  if (!std::filesystem::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

// Writes to `path`, or to `out` when path is empty or "-".
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    detail::write_text(path, text);
  }
}

json summary_json(const Summary& s) {
  return {{"n", s.n}, {"mean", s.mean}, {"stddev", s.stddev}, {"min", s.min}, {"max", s.max}};
}

json contrast_json(const PopulationContrast& c) {
  return {{"sid", summary_json(c.sid)}, {"max_cosine", summary_json(c.max_cosine)}};
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back().push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back().push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else {
      fields.back().push_back(ch);
    }
  }
  return fields;
}

const char* kScoreHeader = "rule,population,index,score";
const char* kMetricHeader = "rule,dataset,auroc,fpr95,threshold,tpr_target,n_id,n_ood";

std::string metric_line(const std::string& rule, const std::string& dataset, const MetricResult& m) {
  using detail::csv_field;
  using detail::format_double;
  return csv_field(rule) + ',' + csv_field(dataset) + ',' + format_double(m.auroc) + ',' + format_double(m.fpr95) +
         ',' + format_double(m.threshold_at_tpr95) + ',' + format_double(m.tpr_target) + ',' +
         std::to_string(m.n_id) + ',' + std::to_string(m.n_ood) + '\n';
}

// Score CSV grouped by rule: id scores plus per-split OOD scores.
struct ScoreTable {
  std::vector<double> id;
  std::map<std::string, std::vector<double>> ood;
};

std::map<std::string, ScoreTable> read_score_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || (line.size() && line.back() == '\r' ? line.substr(0, line.size() - 1) : line) !=
                                     kScoreHeader) {
    throw Error(path + ": expected header \"" + std::string(kScoreHeader) + "\"");
  }
  std::map<std::string, ScoreTable> tables;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 4) throw Error(path + ":" + std::to_string(lineno) + ": expected 4 fields");
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(path + ":" + std::to_string(lineno) + ": bad score \"" + f[3] + "\"");
    }
    auto& t = tables[f[0]];
    (f[1] == "id" ? t.id : t.ood[f[1]]).push_back(v);
  }
  if (tables.empty()) throw Error(path + ": no scores");
  return tables;
}

struct Common {
  std::size_t jobs = 1;
  bool verbose = false;
};

struct ParamFlags {
  ScoreParams params;
  void attach(CLI::App* app) {
    app->add_option("--tau", params.tau, "Softmax temperature for prompt scores")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--tau-odin", params.tau_odin, "Temperature for the odin rule")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  }
};

void log(const Common& c, std::ostream& err, const std::string& msg) {
  if (c.verbose) err << "vlmood: " << msg << '\n';
}

// Name lookups that fail are usage errors, not runtime failures.
template <class Fn>
auto as_usage(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

std::vector<Rule> parse_rules(const std::vector<std::string>& names) {
  std::vector<Rule> rules;
  for (const auto& n : names) rules.push_back(as_usage([&] { return parse_rule(n); }));
  return rules;
}

std::string rule_names() {
  std::string s;
  for (Rule r : all_rules()) s += (s.empty() ? "" : ", ") + std::string(to_string(r));
  return s;
}

// ---------------------------------------------------------------------------

int do_validate(const std::string& dir, const Common& c, std::ostream& out, std::ostream& err) {
  require_dir(dir, "bundle");
  RawBundle raw;
  try {
    raw = load_bundle_unchecked(dir);
  } catch (const BundleError& e) {
    err << "vlmood validate: " << e.what() << '\n';
    return kExitFailure;
  }
  const auto violations = validate_bundle(raw.bundle);
  for (const auto& v : violations) err << "violation: " << v.describe() << '\n';
  for (const auto& m : raw.checksum_failures) err << "checksum mismatch: " << m << '\n';
  if (!violations.empty() || !raw.checksum_failures.empty()) {
    err << "vlmood validate: " << dir << ": " << violations.size() << " violation(s), "
        << raw.checksum_failures.size() << " checksum failure(s)\n";
    return kExitFailure;
  }
  const Bundle& b = raw.bundle;
  out << "ok " << bundle_digest(b) << '\n';
  out << "dim " << b.dim() << '\n';
  out << "id_classes " << b.id_class_count() << '\n';
  out << "ood_prompts " << b.ood_prompt_count() << '\n';
  out << "id_images " << b.id_images.rows() << '\n';
  for (const auto& [name, m] : b.ood_images) out << "ood_images " << name << ' ' << m.rows() << '\n';
  out << "labels " << (b.id_labels ? "yes" : "no") << '\n';
  out << "logits " << (b.has_logits() ? "yes" : "no") << '\n';
  log(c, err, "bundle " + dir + " is valid");
  return kExitOk;
}

int do_score(const std::string& dir, const std::vector<std::string>& rule_list, const ScoreParams& params,
             const std::string& out_path, const Common& c, std::ostream& out, std::ostream& err) {
  require_dir(dir, "bundle");
  const auto rules = parse_rules(rule_list);
  const Bundle b = read_bundle(dir);
  std::string text = std::string(kScoreHeader) + '\n';
  for (Rule r : rules) {
    log(c, err, "scoring with " + std::string(to_string(r)));
    const auto scores = score_bundle(b, r, params, c.jobs);
    const std::string name = detail::csv_field(std::string(to_string(r)));
    auto put = [&](const ScoreVector& v) {
      const std::string pop = detail::csv_field(v.population);
      for (std::size_t i = 0; i < v.values.size(); ++i) {
        text += name + ',' + pop + ',' + std::to_string(i) + ',' + detail::format_double(v.values[i]) + '\n';
      }
    };
    put(scores.id);
    for (const auto& [_, v] : scores.ood) put(v);
  }
  emit(out_path, text, out);
  return kExitOk;
}

int do_metrics(const std::string& dir, const std::string& scores_path, const std::vector<std::string>& rule_list,
               const ScoreParams& params, double tpr, const std::string& out_path, const Common& c,
               std::ostream& out, std::ostream& err) {
  if (dir.empty() == scores_path.empty()) throw UsageError("metrics needs exactly one of --bundle or --scores");
  std::string text = std::string(kMetricHeader) + '\n';
  auto add = [&](const std::string& rule, const std::vector<double>& id,
                 const std::map<std::string, std::vector<double>>& ood) {
    if (id.empty()) throw Error("no ID scores for rule " + rule);
    for (const auto& [name, v] : ood) text += metric_line(rule, name, evaluate(id, v, tpr));
  };
  if (!scores_path.empty()) {
    require_file(scores_path, "score file");
    for (const auto& [rule, t] : read_score_csv(scores_path)) add(rule, t.id, t.ood);
  } else {
    require_dir(dir, "bundle");
    const Bundle b = read_bundle(dir);
    for (Rule r : parse_rules(rule_list)) {
      log(c, err, "evaluating " + std::string(to_string(r)));
      const auto s = score_bundle(b, r, params, c.jobs);
      std::map<std::string, std::vector<double>> ood;
      for (const auto& [name, v] : s.ood) ood[name] = v.values;
      add(std::string(to_string(r)), s.id.values, ood);
    }
  }
  emit(out_path, text, out);
  return kExitOk;
}

int do_insights(const std::string& dir, const ScoreParams& params, InsightOptions opts, const std::string& out_flag,
                const Common& c, std::ostream& err) {
  require_dir(dir, "bundle");
  const Bundle b = read_bundle(dir);
  const auto out_dir = output_dir(out_flag);
  opts.jobs = c.jobs;
  json j;
  j["bundle"] = bundle_digest(b);
  j["tau"] = params.tau;
  j["coverage"] = opts.coverage;
  j["bins"] = opts.bins;
  j["warnings"] = json::array();

  if (b.id_labels && b.id_class_count() >= 2) {
    const auto a = check_alignment(b, opts);
    export_distributions(a, out_dir / "alignment.csv");
    j["alignment"] = {{"true_class", summary_json(a.true_class)},
                      {"max_wrong_class", summary_json(a.max_wrong_class)},
                      {"fraction_above_diagonal", a.fraction_above_diagonal}};
    log(c, err, "alignment written");
  } else {
    const std::string w = "alignment skipped: bundle has no ID labels or fewer than 2 classes";
    err << "vlmood insights: warning: " << w << '\n';
    j["warnings"].push_back(w);
    j["alignment"] = nullptr;
  }

  const auto ct = check_contrast(b, params, opts);
  export_distributions(ct, out_dir / "contrast.csv");
  json jc;
  jc["id"] = contrast_json(ct.id);
  jc["ood"] = json::object();
  for (const auto& [name, o] : ct.ood) {
    jc["ood"][name] = {{"scores", contrast_json(o.scores)},
                       {"sid_margin", o.sid_margin},
                       {"max_cosine_margin", o.max_cosine_margin},
                       {"sid_threshold", o.sid_threshold},
                       {"id_fraction_above_threshold", o.id_fraction_above_threshold}};
  }
  j["contrast"] = jc;
  log(c, err, "contrast written");

  if (b.ood_prompt_count() >= 1) {
    const auto s = check_separation(b, params, opts);
    export_distributions(s, out_dir / "separation.csv");
    json js;
    js["auroc_id_only"] = s.auroc_id_only;
    js["auroc_id_ood"] = s.auroc_id_ood;
    js["delta"] = s.delta;
    js["id_difference"] = summary_json(s.id_difference);
    js["datasets"] = json::object();
    for (const auto& [name, e] : s.datasets) {
      js["datasets"][name] = {{"auroc_id_only", e.auroc_id_only}, {"auroc_id_ood", e.auroc_id_ood},
                              {"delta", e.delta},                 {"fpr95_id_only", e.fpr95_id_only},
                              {"fpr95_id_ood", e.fpr95_id_ood},   {"difference", summary_json(e.difference)}};
    }
    j["separation"] = js;
    log(c, err, "separation written");
  } else {
    const std::string w = "separation skipped: bundle has no OOD prompts";
    err << "vlmood insights: warning: " << w << '\n';
    j["warnings"].push_back(w);
    j["separation"] = nullptr;
  }
  detail::write_text(out_dir / "insights.json", j.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prompt-based out-of-distribution scoring on precomputed VLM embedding bundles.", "vlmood"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", kVersion);
  app.footer(std::string("Exit codes: 0 ok, 1 validation or runtime error, 2 usage error.\n") +
             "When --out is omitted, outputs go to $" + kOutputDirEnv + " or ./vlmood-out.");

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-j,--jobs", common.jobs, "Worker threads (0 = all cores); results do not depend on it")
        ->capture_default_str();
    sub->add_flag("-v,--verbose", common.verbose, "Progress messages on stderr");
  };

  // validate
  std::string v_bundle;
  auto* validate = app.add_subcommand("validate", "Check a bundle's structure, contents and checksums");
  validate->add_option("bundle,--bundle", v_bundle, "Bundle directory")->required();
  add_common(validate);

  // score
  std::string s_bundle, s_out;
  std::vector<std::string> s_rules{"score_id_ood"};
  ParamFlags s_params;
  auto* score = app.add_subcommand("score", "Per-image scores as CSV (" + std::string(kScoreHeader) + ")");
  score->add_option("--bundle", s_bundle, "Bundle directory")->required();
  score->add_option("-r,--rule", s_rules, "Scoring rule, repeatable: " + rule_names())->capture_default_str();
  score->add_option("-o,--out", s_out, "Output CSV file (default: standard output)");
  s_params.attach(score);
  add_common(score);

  // metrics
  std::string m_bundle, m_scores, m_out;
  std::vector<std::string> m_rules{"score_id_ood"};
  ParamFlags m_params;
  double m_tpr = 0.95;
  auto* metrics = app.add_subcommand("metrics", "AUROC and FPR at a TPR target, from a bundle or a score CSV");
  metrics->add_option("--bundle", m_bundle, "Bundle directory to score");
  metrics->add_option("--scores", m_scores, "Score CSV written by `vlmood score`");
  metrics->add_option("-r,--rule", m_rules, "Scoring rule when reading a bundle, repeatable: " + rule_names())
      ->capture_default_str();
  metrics->add_option("--tpr", m_tpr, "TPR target for the FPR metric")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  metrics->add_option("-o,--out", m_out, "Output CSV file (default: standard output)");
  m_params.attach(metrics);
  add_common(metrics);

  // insights
  std::string i_bundle, i_out;
  ParamFlags i_params;
  InsightOptions i_opts;
  auto* insights = app.add_subcommand("insights", "Alignment, contrast and separation reports for a bundle");
  insights->add_option("--bundle", i_bundle, "Bundle directory")->required();
  insights->add_option("-o,--out", i_out, "Output directory");
  insights->add_option("--bins", i_opts.bins, "Histogram bins")->capture_default_str()->check(CLI::PositiveNumber);
  insights->add_option("--coverage", i_opts.coverage, "Quantile level of the per-split S_ID threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  i_params.attach(insights);
  add_common(insights);

  // synth
  std::string y_config, y_out, y_placement, y_conc, y_target = "images";
  SynthConfig y_cfg;
  std::optional<std::uint64_t> y_seed;
  std::optional<std::size_t> y_dim, y_k, y_m, y_nid, y_nood, y_splits;
  std::optional<double> y_offset, y_noise;
  std::uint64_t y_noise_seed = 1;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic bundle (flags override --config)");
  synth->add_option("-c,--config", y_config, "SynthConfig JSON file");
  synth->add_option("-o,--out", y_out, "Output bundle directory");
  synth->add_option("--seed", y_seed, "Generator seed");
  synth->add_option("--dim", y_dim, "Embedding dimension");
  synth->add_option("--id-classes", y_k, "Number of ID classes (K)");
  synth->add_option("--ood-prompts", y_m, "Number of OOD prompts (M)");
  synth->add_option("--n-id", y_nid, "ID images");
  synth->add_option("--n-ood", y_nood, "OOD images per split");
  synth->add_option("--ood-splits", y_splits, "Number of OOD splits");
  synth->add_option("--id-concentration", y_conc, "ID image concentration, a positive number or \"inf\"");
  synth->add_option("--ood-offset", y_offset, "Angle in radians between ID prototypes and OOD cluster centers");
  synth->add_option("--placement", y_placement, "OOD prompt placement: at-ood-mean, random, at-id-superclass");
  synth->add_option("--noise-scale", y_noise, "Perturb the generated bundle with embedding noise of this scale");
  synth->add_option("--noise-target", y_target, "Noise target: images, prompts, id_prompts")->capture_default_str();
  synth->add_option("--noise-seed", y_noise_seed, "Noise seed")->capture_default_str();
  add_common(synth);

  // sweep
  std::string w_spec, w_out;
  auto* sweep = app.add_subcommand("sweep", "Run a sweep described by a JSON spec; writes report.json and report.csv");
  sweep->add_option("-s,--spec", w_spec, "Sweep spec JSON file")->required();
  sweep->add_option("-o,--out", w_out, "Output directory (overrides the spec's \"output\")");
  add_common(sweep);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    const auto subs = app.get_subcommands();
    err << '\n' << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (*validate) return do_validate(v_bundle, common, out, err);
    if (*score) return do_score(s_bundle, s_rules, s_params.params, s_out, common, out, err);
    if (*metrics) {
      return do_metrics(m_bundle, m_scores, m_rules, m_params.params, m_tpr, m_out, common, out, err);
    }
    if (*insights) return do_insights(i_bundle, i_params.params, i_opts, i_out, common, err);
    if (*synth) {
      as_usage([&] {
        if (!y_config.empty()) {
          require_file(y_config, "config");
          y_cfg = read_synth_config(y_config);
        }
        if (y_seed) y_cfg.seed = *y_seed;
        if (y_dim) y_cfg.dim = *y_dim;
        if (y_k) y_cfg.id_classes = *y_k;
        if (y_m) y_cfg.ood_prompts = *y_m;
        if (y_nid) y_cfg.n_id = *y_nid;
        if (y_nood) y_cfg.n_ood = *y_nood;
        if (y_splits) y_cfg.ood_splits = *y_splits;
        if (y_offset) y_cfg.ood_offset = *y_offset;
        if (!y_placement.empty()) y_cfg.placement = parse_placement(y_placement);
        if (!y_conc.empty()) y_cfg = synth_config_from_json([&] {
          json j = to_json(y_cfg);
          j["id_concentration"] = y_conc == "inf" ? json(y_conc) : json(std::stod(y_conc));
          return j;
        }());
        y_cfg.validate();
      });
      const auto target = as_usage([&] { return parse_perturb_target(y_target); });
      Bundle b = generate(y_cfg);
      if (y_noise) b = perturb_embeddings(b, target, *y_noise, y_noise_seed);
      const auto dir = output_dir(y_out);
      write_bundle(b, dir);
      log(common, err, "bundle written to " + dir.string());
      return kExitOk;
    }
    if (*sweep) {
      require_file(w_spec, "spec");
      const auto spec = read_sweep_spec(w_spec);
      const auto dir = !w_out.empty() ? std::filesystem::path(w_out)
                       : spec.output  ? *spec.output
                                      : output_dir({});
      log(common, err, "running " + std::string(to_string(spec.kind)) + " sweep over " +
                           std::to_string(spec.points.size()) + " point(s)");
      const auto report = run_sweep(spec, common.jobs);
      for (const auto& w : report.warnings) err << "vlmood sweep: warning: " << w << '\n';
      write_report(report, dir);
      log(common, err, "report written to " + dir.string());
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "vlmood: " << e.what() << "\nRun with --help for more information.\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "vlmood: config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    // std::stod on a malformed --id-concentration
    err << "vlmood: invalid value: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "vlmood: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + (argc > 0 ? 1 : 0), argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace vlmood::cli
