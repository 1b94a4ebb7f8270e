#pragma once

#include <cstddef>
#include <span>

#include "vlmood/error.hpp"

namespace vlmood {

/// A sample is classified ID when its score >= threshold.
struct MetricResult {
  double auroc = 0.0;
  double fpr95 = 0.0;               // FPR at the requested TPR target (0.95 by default)
  double threshold_at_tpr95 = 0.0;
  double tpr_target = 0.95;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
};

struct FprAtTpr {
  double fpr = 0.0;
  double threshold = 0.0;
};

/// (#{id > ood} + 0.5 #{id == ood}) / (n_id n_ood), computed exactly from
/// integer pair counts.
double auroc(std::span<const double> id, std::span<const double> ood);

/// threshold = largest ID score t with #{id >= t}/n_id >= tpr_target;
/// fpr = #{ood >= t}/n_ood. No interpolation between ROC points.
FprAtTpr fpr_at_tpr(std::span<const double> id, std::span<const double> ood, double tpr_target = 0.95);

/// Sample Pearson correlation (two-pass). Throws UndefinedStatistic when
/// either series has zero variance.
double pearson_r(std::span<const double> x, std::span<const double> y);

MetricResult evaluate(std::span<const double> id, std::span<const double> ood, double tpr_target = 0.95);

}  // namespace vlmood
