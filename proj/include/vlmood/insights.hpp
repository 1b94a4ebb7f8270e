#pragma once
/*
 * Embedding-space property checks on a bundle:
 *
 *  - alignment:  ID images are most similar to their own class prompt;
 *  - contrast:   the ID score S_ID is higher on ID images than on OOD images;
 *  - separation: adding OOD prompts to the normalization separates ID from
 *                OOD better than ID prompts alone.
 *
 * Reports carry sample sizes, means and standard deviations rather than
 * pass/fail verdicts. Summary statistics are accumulated over sorted values,
 * so every statistic is invariant under permutation of image rows.
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vlmood/bundle.hpp"
#include "vlmood/scoring.hpp"

namespace vlmood {

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 when n == 1
  double min = 0.0;
  double max = 0.0;
};

/// Equal-width bins over [lower, upper]; the last bin is closed.
struct Histogram {
  double lower = 0.0;
  double upper = 0.0;
  std::vector<std::uint64_t> counts;

  double edge(std::size_t i) const;
};

Summary summarize(const std::vector<double>& sorted_values);
Histogram histogram(const std::vector<double>& values, std::size_t bins, double lower, double upper);

struct InsightOptions {
  std::size_t bins = 50;
  double coverage = 0.95;  // quantile level for the empirical S_ID threshold
  std::size_t jobs = 1;
};

struct AlignmentReport {
  Summary true_class;       // cosine to the labelled class prompt
  Summary max_wrong_class;  // max cosine over the other ID prompts
  double fraction_above_diagonal = 0.0;
  Histogram true_class_hist;
  Histogram max_wrong_class_hist;
  std::vector<double> true_class_cdf;  // sorted values
  std::vector<double> max_wrong_class_cdf;
};

struct PopulationContrast {
  Summary sid;         // softmax S_ID over ID prompts
  Summary max_cosine;  // raw max cosine to ID prompts
  Histogram sid_hist;
  Histogram max_cosine_hist;
  std::vector<double> sid_cdf;
  std::vector<double> max_cosine_cdf;
};

struct OodContrast {
  PopulationContrast scores;
  double sid_margin = 0.0;         // mean S_ID(ID) - mean S_ID(this split)
  double max_cosine_margin = 0.0;
  double sid_threshold = 0.0;      // empirical `coverage` quantile of S_ID on this split
  double id_fraction_above_threshold = 0.0;
};

struct ContrastReport {
  double tau = 1.0;
  double coverage = 0.95;
  PopulationContrast id;
  std::map<std::string, OodContrast> ood;
};

struct SeparationEntry {
  double auroc_id_only = 0.0;
  double auroc_id_ood = 0.0;
  double delta = 0.0;  // auroc_id_ood - auroc_id_only
  double fpr95_id_only = 0.0;
  double fpr95_id_ood = 0.0;
  Summary difference;  // max ID cosine - max OOD-prompt cosine on this split
};

struct SeparationReport {
  double tau = 1.0;
  double auroc_id_only = 0.0;  // means over OOD splits
  double auroc_id_ood = 0.0;
  double delta = 0.0;
  Summary id_difference;       // max ID cosine - max OOD-prompt cosine on ID images
  std::map<std::string, SeparationEntry> datasets;
};

/// Needs id_labels and K >= 2.
AlignmentReport check_alignment(const Bundle& bundle, const InsightOptions& options = {});
ContrastReport check_contrast(const Bundle& bundle, const ScoreParams& params, const InsightOptions& options = {});
/// Needs M >= 1.
SeparationReport check_separation(const Bundle& bundle, const ScoreParams& params,
                                  const InsightOptions& options = {});

/// One line of the long-format distribution CSV. Columns:
///   report,population,series,kind,index,x0,x1,y
/// kind=stat: series names the statistic, y holds it.
/// kind=hist: index is the bin, [x0, x1] its edges, y the count.
/// kind=cdf:  index is the rank, x0 the sorted value, y = (index + 1) / n.
struct DistributionRow {
  std::string report;
  std::string population;
  std::string series;
  std::string kind;
  std::size_t index = 0;
  double x0 = 0.0;
  double x1 = 0.0;
  double y = 0.0;
};

inline constexpr const char* kDistributionHeader = "report,population,series,kind,index,x0,x1,y";

std::vector<DistributionRow> distribution_rows(const AlignmentReport& report);
std::vector<DistributionRow> distribution_rows(const ContrastReport& report);
std::vector<DistributionRow> distribution_rows(const SeparationReport& report);

std::string distribution_csv(const std::vector<DistributionRow>& rows);

void export_distributions(const AlignmentReport& report, const std::filesystem::path& path);
void export_distributions(const ContrastReport& report, const std::filesystem::path& path);
void export_distributions(const SeparationReport& report, const std::filesystem::path& path);

}  // namespace vlmood
