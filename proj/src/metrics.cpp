#include "vlmood/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace vlmood {

namespace {

void check_scores(std::span<const double> v, const char* what) {
  if (v.empty()) throw InvalidArgument(std::string(what) + ": empty score vector");
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidArgument(std::string(what) + ": non-finite score");
  }
}

std::vector<double> sorted_copy(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

double auroc(std::span<const double> id, std::span<const double> ood) {
  check_scores(id, "auroc");
  check_scores(ood, "auroc");
  const auto sorted_ood = sorted_copy(ood);
  // Twice the Mann-Whitney U statistic; stays an exact integer.
  std::uint64_t twice_u = 0;
  for (double x : id) {
    const auto lo = std::lower_bound(sorted_ood.begin(), sorted_ood.end(), x);
    const auto hi = std::upper_bound(lo, sorted_ood.end(), x);
    twice_u += 2 * static_cast<std::uint64_t>(lo - sorted_ood.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = static_cast<double>(id.size()) * static_cast<double>(ood.size());
  return static_cast<double>(twice_u) / (2.0 * pairs);
}

FprAtTpr fpr_at_tpr(std::span<const double> id, std::span<const double> ood, double tpr_target) {
  check_scores(id, "fpr_at_tpr");
  check_scores(ood, "fpr_at_tpr");
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) throw InvalidArgument("fpr_at_tpr: tpr_target must be in (0, 1]");
  const double n_id = static_cast<double>(id.size());

  // Smallest count c with c / n_id >= target; the c-th largest ID score is
  // then the largest threshold meeting the target.
  std::size_t needed = 1;
  while (needed < id.size() && static_cast<double>(needed) / n_id < tpr_target) ++needed;

  auto desc = std::vector<double>(id.begin(), id.end());
  std::sort(desc.begin(), desc.end(), std::greater<>());
  const double threshold = desc[needed - 1];

  std::size_t false_pos = 0;
  for (double x : ood) false_pos += x >= threshold ? 1 : 0;
  return {static_cast<double>(false_pos) / static_cast<double>(ood.size()), threshold};
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("pearson_r: length mismatch");
  if (x.size() < 2) throw UndefinedStatistic("pearson_r: need at least 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedStatistic("pearson_r: zero variance, correlation undefined");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

MetricResult evaluate(std::span<const double> id, std::span<const double> ood, double tpr_target) {
  MetricResult out;
  out.auroc = auroc(id, ood);
  const auto f = fpr_at_tpr(id, ood, tpr_target);
  out.fpr95 = f.fpr;
  out.threshold_at_tpr95 = f.threshold;
  out.tpr_target = tpr_target;
  out.n_id = id.size();
  out.n_ood = ood.size();
  return out;
}

}  // namespace vlmood
