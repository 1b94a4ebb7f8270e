#include "vlmood/scoring.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "vlmood/parallel.hpp"

namespace vlmood {

void ScoreParams::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("tau must be finite and > 0");
  if (!(tau_odin > 0.0) || !std::isfinite(tau_odin)) {
    throw InvalidArgument("tau_odin must be finite and > 0");
  }
  if (!(epsilon_odin >= 0.0)) throw InvalidArgument("epsilon_odin must be >= 0");
}

namespace {

double squared_norm(std::span<const float> v) {
  double acc = 0.0;
  for (float x : v) acc += static_cast<double>(x) * static_cast<double>(x);
  return acc;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

// dot / sqrt(|a|^2 |b|^2) gives exactly 1 for a == b.
double cosine_with_norms(std::span<const float> a, double a2, std::span<const float> b, double b2) {
  return dot(a, b) / std::sqrt(a2 * b2);
}

std::vector<double> row_norms(const EmbeddingMatrix& m) {
  std::vector<double> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out[r] = squared_norm(m.row(r));
    if (out[r] == 0.0) throw InvalidArgument("cosine similarity: zero prompt vector at row " + std::to_string(r));
  }
  return out;
}

std::size_t argmax_prefix(const std::vector<double>& values, std::size_t count) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < count; ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

// Fills `row` from precomputed prompt norms. Shared by the public entry
// points and score_bundle so both produce identical bits.
void fill_similarities(std::span<const float> image, const EmbeddingMatrix& id_prompts,
                       const std::vector<double>& id_norms, const EmbeddingMatrix* ood_prompts,
                       const std::vector<double>* ood_norms, SimilarityRow& row) {
  if (image.size() != id_prompts.dim() || (ood_prompts && ood_prompts->rows() > 0 && image.size() != ood_prompts->dim())) {
    throw InvalidArgument("cosine similarity: dimension mismatch");
  }
  const double v2 = squared_norm(image);
  if (v2 == 0.0) throw InvalidArgument("cosine similarity: zero image vector");
  const std::size_t k = id_prompts.rows();
  const std::size_t m = ood_prompts ? ood_prompts->rows() : 0;
  row.values.resize(k + m);
  for (std::size_t i = 0; i < k; ++i) row.values[i] = cosine_with_norms(image, v2, id_prompts.row(i), id_norms[i]);
  for (std::size_t i = 0; i < m; ++i) {
    row.values[k + i] = cosine_with_norms(image, v2, ood_prompts->row(i), (*ood_norms)[i]);
  }
  row.k_hat = k == 0 ? 0 : argmax_prefix(row.values, k);
}

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("tau must be finite and > 0");
}

double normalized_share(const SimilarityRow& sims, std::size_t id_count, std::size_t total, double tau) {
  check_tau(tau);
  if (id_count == 0) throw InvalidArgument("score: need at least one ID prompt");
  if (sims.values.size() < total) throw InvalidArgument("score: similarity row shorter than K + M");
  if (sims.k_hat >= id_count) throw InvalidArgument("score: k_hat outside the ID prompts");
  double peak = sims.values[0];
  for (std::size_t i = 1; i < total; ++i) peak = std::max(peak, sims.values[i]);
  double denom = 0.0;
  for (std::size_t i = 0; i < total; ++i) denom += std::exp((sims.values[i] - peak) / tau);
  return std::exp((sims.values[sims.k_hat] - peak) / tau) / denom;
}

double max_softmax(std::span<const double> z, double scale) {
  if (z.empty()) throw InvalidArgument("softmax: empty logits");
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : z) peak = std::max(peak, v / scale);
  double denom = 0.0;
  for (double v : z) denom += std::exp(v / scale - peak);
  return 1.0 / denom;
}

}  // namespace

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine: dimension mismatch");
  const double a2 = squared_norm(a);
  const double b2 = squared_norm(b);
  if (a2 == 0.0 || b2 == 0.0) throw InvalidArgument("cosine: zero vector");
  return cosine_with_norms(a, a2, b, b2);
}

SimilarityRow cosine_similarities(std::span<const float> image, const EmbeddingMatrix& prompts,
                                  std::size_t id_count) {
  if (id_count > prompts.rows()) throw InvalidArgument("cosine_similarities: id_count exceeds prompt rows");
  SimilarityRow row;
  const auto norms = row_norms(prompts);
  fill_similarities(image, prompts, norms, nullptr, nullptr, row);
  row.k_hat = id_count == 0 ? 0 : argmax_prefix(row.values, id_count);
  return row;
}

SimilarityRow cosine_similarities(std::span<const float> image, const EmbeddingMatrix& id_prompts,
                                  const EmbeddingMatrix& ood_prompts) {
  SimilarityRow row;
  const auto id_norms = row_norms(id_prompts);
  const auto ood_norms = row_norms(ood_prompts);
  fill_similarities(image, id_prompts, id_norms, &ood_prompts, &ood_norms, row);
  return row;
}

double score_id(const SimilarityRow& sims, std::size_t id_count, double tau) {
  return normalized_share(sims, id_count, id_count, tau);
}

double score_id_ood(const SimilarityRow& sims, std::size_t id_count, std::size_t ood_count, double tau) {
  return normalized_share(sims, id_count, id_count + ood_count, tau);
}

Decision decide(double score, double lambda) noexcept {
  return score >= lambda ? Decision::id : Decision::ood;
}

double score_msp(std::span<const double> logits) { return max_softmax(logits, 1.0); }

double score_maxlogit(std::span<const double> logits) {
  if (logits.empty()) throw InvalidArgument("maxlogit: empty logits");
  return *std::max_element(logits.begin(), logits.end());
}

double score_energy(std::span<const double> logits) {
  if (logits.empty()) throw InvalidArgument("energy: empty logits");
  const double peak = *std::max_element(logits.begin(), logits.end());
  double acc = 0.0;
  for (double v : logits) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

double score_odin(std::span<const double> logits, double tau_odin) {
  check_tau(tau_odin);
  return max_softmax(logits, tau_odin);
}

// ---------------------------------------------------------------------------

namespace {

struct RuleName {
  Rule rule;
  std::string_view name;
};

constexpr std::array<RuleName, 7> kRuleNames{{
    {Rule::max_cosine, "max_cosine"},
    {Rule::score_id, "score_id"},
    {Rule::score_id_ood, "score_id_ood"},
    {Rule::msp, "msp"},
    {Rule::maxlogit, "maxlogit"},
    {Rule::energy, "energy"},
    {Rule::odin, "odin"},
}};

}  // namespace

std::string_view to_string(Rule rule) noexcept {
  for (const auto& r : kRuleNames) {
    if (r.rule == rule) return r.name;
  }
  return "unknown";
}

Rule parse_rule(std::string_view name) {
  for (const auto& r : kRuleNames) {
    if (r.name == name) return r.rule;
  }
  throw InvalidArgument("unknown scoring rule \"" + std::string(name) + "\"");
}

std::vector<Rule> all_rules() {
  std::vector<Rule> out;
  for (const auto& r : kRuleNames) out.push_back(r.rule);
  return out;
}

bool rule_needs_logits(Rule rule) noexcept {
  return rule == Rule::msp || rule == Rule::maxlogit || rule == Rule::energy || rule == Rule::odin;
}

namespace {

std::vector<double> score_prompt_rule(const EmbeddingMatrix& images, const Bundle& b, Rule rule,
                                      const ScoreParams& params, const std::vector<double>& id_norms,
                                      const std::vector<double>& ood_norms, std::size_t jobs) {
  const std::size_t k = b.id_prompts.rows();
  const std::size_t m = b.ood_prompts.rows();
  std::vector<double> out(images.rows());
  parallel_for(images.rows(), jobs, [&](std::size_t r) {
    SimilarityRow row;
    fill_similarities(images.row(r), b.id_prompts, id_norms, &b.ood_prompts, &ood_norms, row);
    switch (rule) {
      case Rule::max_cosine: out[r] = row.values[row.k_hat]; break;
      case Rule::score_id: out[r] = score_id(row, k, params.tau); break;
      default: out[r] = score_id_ood(row, k, m, params.tau); break;
    }
  });
  return out;
}

std::vector<double> score_logit_rule(const EmbeddingMatrix& logits, Rule rule, const ScoreParams& params,
                                     std::size_t jobs) {
  std::vector<double> out(logits.rows());
  parallel_for(logits.rows(), jobs, [&](std::size_t r) {
    const auto src = logits.row(r);
    std::vector<double> z(src.begin(), src.end());
    switch (rule) {
      case Rule::msp: out[r] = score_msp(z); break;
      case Rule::maxlogit: out[r] = score_maxlogit(z); break;
      case Rule::energy: out[r] = score_energy(z); break;
      default: out[r] = score_odin(z, params.tau_odin); break;
    }
  });
  return out;
}

}  // namespace

BundleScores score_bundle(const Bundle& b, Rule rule, const ScoreParams& params, std::size_t jobs) {
  params.validate();
  BundleScores out;
  auto make = [&](std::string population, std::vector<double> values) {
    ScoreVector v;
    v.population = std::move(population);
    v.rule = rule;
    v.params = params;
    v.values = std::move(values);
    return v;
  };

  if (rule_needs_logits(rule)) {
    if (!b.id_logits) {
      throw InvalidArgument("rule " + std::string(to_string(rule)) + " needs logits but the bundle has none");
    }
    out.id = make("id", score_logit_rule(*b.id_logits, rule, params, jobs));
    for (const auto& [name, imgs] : b.ood_images) {
      auto it = b.ood_logits.find(name);
      if (it == b.ood_logits.end()) {
        throw InvalidArgument("rule " + std::string(to_string(rule)) + " needs logits for OOD split " + name);
      }
      out.ood.emplace(name, make(name, score_logit_rule(it->second, rule, params, jobs)));
    }
    return out;
  }

  if (b.id_prompts.rows() == 0) {
    throw InvalidArgument("rule " + std::string(to_string(rule)) + " needs ID prompts but the bundle has none");
  }
  const auto id_norms = row_norms(b.id_prompts);
  const auto ood_norms = row_norms(b.ood_prompts);
  out.id = make("id", score_prompt_rule(b.id_images, b, rule, params, id_norms, ood_norms, jobs));
  for (const auto& [name, imgs] : b.ood_images) {
    out.ood.emplace(name, make(name, score_prompt_rule(imgs, b, rule, params, id_norms, ood_norms, jobs)));
  }
  return out;
}

}  // namespace vlmood
