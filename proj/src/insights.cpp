#include "vlmood/insights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "text.hpp"
#include "vlmood/metrics.hpp"
#include "vlmood/parallel.hpp"

namespace vlmood {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

void check_options(const InsightOptions& o) {
  if (o.bins == 0) throw InvalidArgument("insights: bins must be >= 1");
  if (!(o.coverage > 0.0 && o.coverage <= 1.0)) throw InvalidArgument("insights: coverage must be in (0, 1]");
}

void require_valid(const Bundle& b) {
  const auto violations = validate_bundle(b);
  if (!violations.empty()) throw BundleError(BundleErrc::validation, violations.front().describe());
}

std::pair<double, double> joint_range(std::initializer_list<const std::vector<double>*> sets) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto* s : sets) {
    if (s->empty()) continue;
    lo = std::min(lo, s->front());
    hi = std::max(hi, s->back());
  }
  if (lo > hi) return {0.0, 0.0};
  return {lo, hi};
}

}  // namespace

double Histogram::edge(std::size_t i) const {
  if (counts.empty()) return lower;
  return lower + (upper - lower) * static_cast<double>(i) / static_cast<double>(counts.size());
}

Summary summarize(const std::vector<double>& v) {
  Summary s;
  s.n = v.size();
  if (v.empty()) {
    s.mean = s.stddev = s.min = s.max = kNaN;
    return s;
  }
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - s.mean) * (x - s.mean);
  s.stddev = v.size() > 1 ? std::sqrt(sq / static_cast<double>(v.size() - 1)) : 0.0;
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  return s;
}

Histogram histogram(const std::vector<double>& values, std::size_t bins, double lower, double upper) {
  if (bins == 0) throw InvalidArgument("histogram: bins must be >= 1");
  Histogram h;
  h.lower = lower;
  h.upper = upper;
  h.counts.assign(bins, 0);
  const double width = upper - lower;
  for (double x : values) {
    std::size_t bin = 0;
    if (width > 0.0) {
      const double pos = (x - lower) / width * static_cast<double>(bins);
      bin = pos <= 0.0 ? 0 : std::min(bins - 1, static_cast<std::size_t>(pos));
    }
    ++h.counts[bin];
  }
  return h;
}

// ---------------------------------------------------------------------------

AlignmentReport check_alignment(const Bundle& b, const InsightOptions& options) {
  check_options(options);
  require_valid(b);
  if (!b.id_labels) throw InvalidArgument("check_alignment: bundle has no id_labels");
  const std::size_t k = b.id_class_count();
  if (k < 2) throw InvalidArgument("check_alignment: need K >= 2 so that a wrong class exists");

  const std::size_t n = b.id_images.rows();
  std::vector<double> truth(n), wrong(n);
  std::vector<char> above(n);
  parallel_for(n, options.jobs, [&](std::size_t i) {
    const auto row = cosine_similarities(b.id_images.row(i), b.id_prompts, k);
    const auto label = static_cast<std::size_t>((*b.id_labels)[i]);
    double best_wrong = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c != label) best_wrong = std::max(best_wrong, row.values[c]);
    }
    truth[i] = row.values[label];
    wrong[i] = best_wrong;
    above[i] = truth[i] > best_wrong ? 1 : 0;
  });

  AlignmentReport r;
  r.true_class_cdf = sorted(truth);
  r.max_wrong_class_cdf = sorted(wrong);
  r.true_class = summarize(r.true_class_cdf);
  r.max_wrong_class = summarize(r.max_wrong_class_cdf);
  std::size_t count = 0;
  for (char a : above) count += static_cast<std::size_t>(a);
  r.fraction_above_diagonal = static_cast<double>(count) / static_cast<double>(n);
  const auto [lo, hi] = joint_range({&r.true_class_cdf, &r.max_wrong_class_cdf});
  r.true_class_hist = histogram(r.true_class_cdf, options.bins, lo, hi);
  r.max_wrong_class_hist = histogram(r.max_wrong_class_cdf, options.bins, lo, hi);
  return r;
}

ContrastReport check_contrast(const Bundle& b, const ScoreParams& params, const InsightOptions& options) {
  check_options(options);
  require_valid(b);
  const auto sid = score_bundle(b, Rule::score_id, params, options.jobs);
  const auto raw = score_bundle(b, Rule::max_cosine, params, options.jobs);

  ContrastReport r;
  r.tau = params.tau;
  r.coverage = options.coverage;
  r.id.sid_cdf = sorted(sid.id.values);
  r.id.max_cosine_cdf = sorted(raw.id.values);
  for (const auto& [name, v] : sid.ood) {
    auto& entry = r.ood[name];
    entry.scores.sid_cdf = sorted(v.values);
    entry.scores.max_cosine_cdf = sorted(raw.ood.at(name).values);
  }

  double sid_lo = 0, sid_hi = 0, raw_lo = 0, raw_hi = 0;
  std::tie(sid_lo, sid_hi) = joint_range({&r.id.sid_cdf});
  std::tie(raw_lo, raw_hi) = joint_range({&r.id.max_cosine_cdf});
  for (const auto& [name, e] : r.ood) {
    sid_lo = std::min(sid_lo, e.scores.sid_cdf.front());
    sid_hi = std::max(sid_hi, e.scores.sid_cdf.back());
    raw_lo = std::min(raw_lo, e.scores.max_cosine_cdf.front());
    raw_hi = std::max(raw_hi, e.scores.max_cosine_cdf.back());
  }

  auto finish = [&](PopulationContrast& p) {
    p.sid = summarize(p.sid_cdf);
    p.max_cosine = summarize(p.max_cosine_cdf);
    p.sid_hist = histogram(p.sid_cdf, options.bins, sid_lo, sid_hi);
    p.max_cosine_hist = histogram(p.max_cosine_cdf, options.bins, raw_lo, raw_hi);
  };
  finish(r.id);
  for (auto& [name, e] : r.ood) {
    finish(e.scores);
    e.sid_margin = r.id.sid.mean - e.scores.sid.mean;
    e.max_cosine_margin = r.id.max_cosine.mean - e.scores.max_cosine.mean;
    const auto& s = e.scores.sid_cdf;
    const auto rank = static_cast<std::size_t>(std::ceil(options.coverage * static_cast<double>(s.size())));
    e.sid_threshold = s[std::clamp<std::size_t>(rank, 1, s.size()) - 1];
    const auto above = r.id.sid_cdf.end() - std::upper_bound(r.id.sid_cdf.begin(), r.id.sid_cdf.end(), e.sid_threshold);
    e.id_fraction_above_threshold = static_cast<double>(above) / static_cast<double>(r.id.sid_cdf.size());
  }
  return r;
}

SeparationReport check_separation(const Bundle& b, const ScoreParams& params, const InsightOptions& options) {
  check_options(options);
  require_valid(b);
  if (b.ood_prompt_count() == 0) throw InvalidArgument("check_separation: bundle has no OOD prompts (M = 0)");
  const auto id_only = score_bundle(b, Rule::score_id, params, options.jobs);
  const auto id_ood = score_bundle(b, Rule::score_id_ood, params, options.jobs);

  const std::size_t k = b.id_class_count();
  auto differences = [&](const EmbeddingMatrix& images) {
    std::vector<double> out(images.rows());
    parallel_for(images.rows(), options.jobs, [&](std::size_t i) {
      const auto row = cosine_similarities(images.row(i), b.id_prompts, b.ood_prompts);
      const double best_ood = *std::max_element(row.values.begin() + static_cast<std::ptrdiff_t>(k), row.values.end());
      out[i] = row.values[row.k_hat] - best_ood;
    });
    return sorted(std::move(out));
  };

  SeparationReport r;
  r.tau = params.tau;
  r.id_difference = summarize(differences(b.id_images));
  for (const auto& [name, imgs] : b.ood_images) {
    SeparationEntry e;
    const auto only = evaluate(id_only.id.values, id_only.ood.at(name).values);
    const auto both = evaluate(id_ood.id.values, id_ood.ood.at(name).values);
    e.auroc_id_only = only.auroc;
    e.auroc_id_ood = both.auroc;
    e.delta = both.auroc - only.auroc;
    e.fpr95_id_only = only.fpr95;
    e.fpr95_id_ood = both.fpr95;
    e.difference = summarize(differences(imgs));
    r.auroc_id_only += e.auroc_id_only;
    r.auroc_id_ood += e.auroc_id_ood;
    r.datasets.emplace(name, e);
  }
  if (!r.datasets.empty()) {
    r.auroc_id_only /= static_cast<double>(r.datasets.size());
    r.auroc_id_ood /= static_cast<double>(r.datasets.size());
  } else {
    r.auroc_id_only = r.auroc_id_ood = kNaN;
  }
  r.delta = r.auroc_id_ood - r.auroc_id_only;
  return r;
}

// ---------------------------------------------------------------------------
// Distribution export

namespace {

void add_stat(std::vector<DistributionRow>& rows, const std::string& report, const std::string& population,
              const std::string& name, double value) {
  rows.push_back({report, population, name, "stat", 0, kNaN, kNaN, value});
}

void add_summary(std::vector<DistributionRow>& rows, const std::string& report, const std::string& population,
                 const std::string& series, const Summary& s) {
  add_stat(rows, report, population, series + ".n", static_cast<double>(s.n));
  add_stat(rows, report, population, series + ".mean", s.mean);
  add_stat(rows, report, population, series + ".stddev", s.stddev);
  add_stat(rows, report, population, series + ".min", s.min);
  add_stat(rows, report, population, series + ".max", s.max);
}

void add_hist(std::vector<DistributionRow>& rows, const std::string& report, const std::string& population,
              const std::string& series, const Histogram& h) {
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    rows.push_back({report, population, series, "hist", i, h.edge(i), h.edge(i + 1), static_cast<double>(h.counts[i])});
  }
}

void add_cdf(std::vector<DistributionRow>& rows, const std::string& report, const std::string& population,
             const std::string& series, const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    rows.push_back({report, population, series, "cdf", i, values[i], kNaN, static_cast<double>(i + 1) / n});
  }
}

void add_population(std::vector<DistributionRow>& rows, const std::string& population, const PopulationContrast& p) {
  add_summary(rows, "contrast", population, "sid", p.sid);
  add_summary(rows, "contrast", population, "max_cosine", p.max_cosine);
  add_hist(rows, "contrast", population, "sid", p.sid_hist);
  add_hist(rows, "contrast", population, "max_cosine", p.max_cosine_hist);
  add_cdf(rows, "contrast", population, "sid", p.sid_cdf);
  add_cdf(rows, "contrast", population, "max_cosine", p.max_cosine_cdf);
}

}  // namespace

std::vector<DistributionRow> distribution_rows(const AlignmentReport& r) {
  std::vector<DistributionRow> rows;
  add_stat(rows, "alignment", "id", "fraction_above_diagonal", r.fraction_above_diagonal);
  add_summary(rows, "alignment", "id", "true_class", r.true_class);
  add_summary(rows, "alignment", "id", "max_wrong_class", r.max_wrong_class);
  add_hist(rows, "alignment", "id", "true_class", r.true_class_hist);
  add_hist(rows, "alignment", "id", "max_wrong_class", r.max_wrong_class_hist);
  add_cdf(rows, "alignment", "id", "true_class", r.true_class_cdf);
  add_cdf(rows, "alignment", "id", "max_wrong_class", r.max_wrong_class_cdf);
  return rows;
}

std::vector<DistributionRow> distribution_rows(const ContrastReport& r) {
  std::vector<DistributionRow> rows;
  add_stat(rows, "contrast", "id", "tau", r.tau);
  add_stat(rows, "contrast", "id", "coverage", r.coverage);
  add_population(rows, "id", r.id);
  for (const auto& [name, e] : r.ood) {
    add_stat(rows, "contrast", name, "sid_margin", e.sid_margin);
    add_stat(rows, "contrast", name, "max_cosine_margin", e.max_cosine_margin);
    add_stat(rows, "contrast", name, "sid_threshold", e.sid_threshold);
    add_stat(rows, "contrast", name, "id_fraction_above_threshold", e.id_fraction_above_threshold);
    add_population(rows, name, e.scores);
  }
  return rows;
}

std::vector<DistributionRow> distribution_rows(const SeparationReport& r) {
  std::vector<DistributionRow> rows;
  add_stat(rows, "separation", "all", "tau", r.tau);
  add_stat(rows, "separation", "all", "auroc_id_only", r.auroc_id_only);
  add_stat(rows, "separation", "all", "auroc_id_ood", r.auroc_id_ood);
  add_stat(rows, "separation", "all", "delta", r.delta);
  add_summary(rows, "separation", "id", "difference", r.id_difference);
  for (const auto& [name, e] : r.datasets) {
    add_stat(rows, "separation", name, "auroc_id_only", e.auroc_id_only);
    add_stat(rows, "separation", name, "auroc_id_ood", e.auroc_id_ood);
    add_stat(rows, "separation", name, "delta", e.delta);
    add_stat(rows, "separation", name, "fpr95_id_only", e.fpr95_id_only);
    add_stat(rows, "separation", name, "fpr95_id_ood", e.fpr95_id_ood);
    add_summary(rows, "separation", name, "difference", e.difference);
  }
  return rows;
}

std::string distribution_csv(const std::vector<DistributionRow>& rows) {
  using detail::csv_field;
  using detail::format_double;
  std::string out = kDistributionHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += csv_field(r.report) + ',' + csv_field(r.population) + ',' + csv_field(r.series) + ',' + r.kind + ',' +
           std::to_string(r.index) + ',' + format_double(r.x0) + ',' + format_double(r.x1) + ',' +
           format_double(r.y) + '\n';
  }
  return out;
}

void export_distributions(const AlignmentReport& report, const std::filesystem::path& path) {
  detail::write_text(path, distribution_csv(distribution_rows(report)));
}

void export_distributions(const ContrastReport& report, const std::filesystem::path& path) {
  detail::write_text(path, distribution_csv(distribution_rows(report)));
}

void export_distributions(const SeparationReport& report, const std::filesystem::path& path) {
  detail::write_text(path, distribution_csv(distribution_rows(report)));
}

}  // namespace vlmood
