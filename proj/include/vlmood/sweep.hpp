#pragma once
/*
 * Experiment sweeps. Every sweep consumes one bundle per point, scores it
 * with the requested rules and reports AUROC / FPR95 per OOD split, plus a
 * per-point "average" row. Points are independent and may be evaluated
 * concurrently; rows are assembled in a fixed order so reports are
 * byte-identical for any degree of parallelism.
 *
 * Report schema (JSON and CSV) is documented in docs/formats.md.
 */

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlmood/bundle.hpp"
#include "vlmood/metrics.hpp"
#include "vlmood/prompts.hpp"
#include "vlmood/scoring.hpp"
#include "vlmood/synthetic.hpp"

namespace vlmood {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kAverageDataset = "average";

struct LabeledBundle {
  std::string label;
  std::string source;  // path or generator description, echoed in provenance
  Bundle bundle;
};

struct RunOptions {
  double tpr_target = 0.95;
  std::size_t jobs = 1;
};

struct ReportRow {
  std::string point;
  std::string series;  // corruption type for severity sweeps, else empty
  std::string rule;
  std::string dataset;  // OOD split or "average"
  std::map<std::string, double> axis;
  MetricResult metrics;  // threshold is NaN on average rows
};

struct Provenance {
  std::string label;
  std::string source;
  std::string digest;  // bundle_digest of the evaluated bundle
};

struct EvalReport {
  std::string kind;
  ScoreParams params;
  double tpr_target = 0.95;
  std::vector<Provenance> provenance;
  std::vector<ReportRow> rows;
  std::map<std::string, double> stats;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const EvalReport& report);
std::string report_json(const EvalReport& report);
std::string report_csv(const EvalReport& report);
/// Writes report.json and report.csv into `dir`.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

/// FPR95 / AUROC per (bundle, rule, OOD split) plus per-(bundle, rule) averages.
EvalReport run_comparison(const std::vector<LabeledBundle>& bundles, const std::vector<Rule>& rules,
                          const ScoreParams& params, const RunOptions& options = {});

struct SeverityPoint {
  LabeledBundle bundle;
  std::string corruption;
  double severity = 0.0;
};

/// Exactly one point must have severity 0 (the clean baseline). Within each
/// corruption type severities must be strictly increasing in input order.
/// Each curve starts with the clean baseline.
EvalReport run_severity_sweep(const std::vector<SeverityPoint>& points, const std::vector<Rule>& rules,
                              const ScoreParams& params, const RunOptions& options = {});

/// Variants may differ from the baseline only in id_prompts. Reports
/// (prompt distance, delta AUROC) per variant and the Pearson r over them;
/// fewer than two variants leave r undefined and throw UndefinedStatistic.
EvalReport run_prompt_variation(const LabeledBundle& baseline, const std::vector<LabeledBundle>& variants,
                                Rule rule, const ScoreParams& params, const RunOptions& options = {});

struct ComplexityPoint {
  LabeledBundle bundle;
  PromptSet ood_prompts;  // texts behind bundle.ood_prompts, same count
};

/// Rows sorted by average OOD prompt word count, ascending (stable).
EvalReport run_complexity_sweep(const std::vector<ComplexityPoint>& points, const std::vector<Rule>& rules,
                                const ScoreParams& params, const RunOptions& options = {});

inline const std::vector<double> kDefaultTauGrid{0.001, 0.01, 0.1, 0.5, 1.0, 2.0};

/// score_id and score_id_ood at each tau. Duplicate taus are dropped with a
/// warning; the axis is sorted ascending and echoed as tau and log10_tau.
EvalReport run_temperature_sweep(const LabeledBundle& bundle, const std::vector<double>& taus,
                                 const ScoreParams& params = {}, const RunOptions& options = {});

// ---------------------------------------------------------------------------
// JSON-driven sweeps

enum class SweepKind { comparison, severity, prompt_variation, prompt_complexity, temperature };

std::string_view to_string(SweepKind kind) noexcept;
SweepKind parse_sweep_kind(std::string_view name);

struct PerturbSpec {
  PerturbTarget target = PerturbTarget::images;
  double scale = 0.0;
  std::uint64_t seed = 1;
};

struct PointSpec {
  std::string label;
  std::optional<std::filesystem::path> bundle;
  std::optional<SynthConfig> synthetic;
  std::optional<PerturbSpec> perturb;
  std::optional<double> severity;
  std::optional<std::string> corruption;
  std::optional<std::filesystem::path> ood_prompt_file;
  std::vector<std::string> ood_prompt_texts;
};

struct SweepSpec {
  SweepKind kind = SweepKind::comparison;
  std::vector<PointSpec> points;
  std::optional<PointSpec> baseline;  // prompt-variation only
  std::vector<Rule> rules{Rule::score_id_ood};
  ScoreParams params;
  std::vector<double> taus = kDefaultTauGrid;
  double tpr_target = 0.95;
  std::optional<std::filesystem::path> output;
};

/// Relative paths are resolved against `base_dir`. A point with a
/// "noise_ladder" entry expands into one point per scale.
SweepSpec sweep_spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
SweepSpec read_sweep_spec(const std::filesystem::path& path);

/// Reads or generates the point's bundle (applying any perturbation).
LabeledBundle load_point(const PointSpec& point);

EvalReport run_sweep(const SweepSpec& spec, std::size_t jobs = 1);

}  // namespace vlmood
