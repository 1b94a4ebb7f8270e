#pragma once
// Reference implementations used only by tests. They favour the most literal
// reading of each definition over speed: pairwise counting, exhaustive
// threshold scans and 50-digit arithmetic without max-subtraction.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace oracle {

using Real = boost::multiprecision::cpp_bin_float_50;

/// Fraction of (id, ood) pairs ranked correctly, ties counting one half.
inline double auroc_pairwise(std::span<const double> id, std::span<const double> ood) {
  long long wins = 0;
  long long ties = 0;
  for (double a : id) {
    for (double b : ood) {
      if (a > b) ++wins;
      else if (a == b) ++ties;
    }
  }
  const Real num = Real(wins) + Real(ties) / 2;
  return static_cast<double>(num / (Real(id.size()) * Real(ood.size())));
}

struct Fpr {
  double fpr;
  double threshold;
};

/// Tries every distinct score as a threshold, from high to low, and keeps the
/// first whose TPR reaches the target.
inline Fpr fpr_scan(std::span<const double> id, std::span<const double> ood, double target) {
  std::vector<double> candidates(id.begin(), id.end());
  std::sort(candidates.begin(), candidates.end(), std::greater<>());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (double t : candidates) {
    std::size_t tp = 0;
    for (double v : id) tp += v >= t;
    const double tpr = static_cast<double>(tp) / static_cast<double>(id.size());
    if (tpr >= target) {
      std::size_t fp = 0;
      for (double v : ood) fp += v >= t;
      return {static_cast<double>(fp) / static_cast<double>(ood.size()), t};
    }
  }
  return {1.0, candidates.back()};
}

inline Real cosine(std::span<const float> a, std::span<const float> b) {
  Real dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += Real(a[i]) * Real(b[i]);
    na += Real(a[i]) * Real(a[i]);
    nb += Real(b[i]) * Real(b[i]);
  }
  return dot / sqrt(na * nb);
}

inline std::size_t argmax_first(std::span<const Real> s, std::size_t k) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < k; ++i) {
    if (s[i] > s[best]) best = i;
  }
  return best;
}

/// exp(s_best / tau) / sum_{i < count} exp(s_i / tau), best taken over the first k.
inline double softmax_at_best(std::span<const Real> s, std::size_t k, std::size_t count, double tau) {
  const Real t(tau);
  const std::size_t best = argmax_first(s, k);
  Real denom = 0;
  for (std::size_t i = 0; i < count; ++i) denom += exp(s[i] / t);
  return static_cast<double>(exp(s[best] / t) / denom);
}

inline double score_id(std::span<const Real> s, std::size_t k, double tau) { return softmax_at_best(s, k, k, tau); }

inline double score_id_ood(std::span<const Real> s, std::size_t k, double tau) {
  return softmax_at_best(s, k, s.size(), tau);
}

inline double msp(std::span<const double> z, double temperature = 1.0) {
  std::vector<Real> r;
  for (double v : z) r.emplace_back(Real(v) / Real(temperature));
  Real denom = 0, top = r[0];
  for (const auto& v : r) {
    denom += exp(v);
    if (v > top) top = v;
  }
  return static_cast<double>(exp(top) / denom);
}

inline double energy(std::span<const double> z) {
  Real sum = 0;
  for (double v : z) sum += exp(Real(v));
  return static_cast<double>(log(sum));
}

}  // namespace oracle
