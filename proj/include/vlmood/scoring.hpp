#pragma once
/*
 * Detector scoring rules. Every rule follows the convention that a higher
 * score means "more in-distribution".
 *
 * Prompt-based rules work on cosine similarities between an image embedding
 * and the K ID prompts followed by the M OOD prompts. Baseline rules work on
 * classifier logits. All arithmetic is binary64; softmax-style reductions
 * subtract the maximum first and sum in index order, so a row's score does
 * not depend on how rows are distributed over threads.
 */

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vlmood/bundle.hpp"

namespace vlmood {

struct ScoreParams {
  double tau = 1.0;                // softmax temperature for prompt-based rules
  std::optional<double> lambda;    // decision threshold
  double tau_odin = 1000.0;        // ODIN temperature
  double epsilon_odin = 0.0014;    // ODIN input perturbation, applied upstream of this library

  /// Throws InvalidArgument unless tau > 0 and tau_odin > 0.
  void validate() const;
};

struct SimilarityRow {
  std::vector<double> values;  // K ID entries followed by M OOD entries
  std::size_t k_hat = 0;       // argmax over the ID entries, lowest index on ties
};

/// Cosine similarity of two equal-length, non-zero vectors.
double cosine(std::span<const float> a, std::span<const float> b);

/// Similarities of `image` to every row of `prompts`; the first `id_count`
/// rows are ID prompts and determine k_hat.
SimilarityRow cosine_similarities(std::span<const float> image, const EmbeddingMatrix& prompts,
                                  std::size_t id_count);

/// Same, with ID prompts and OOD prompts held in separate matrices.
SimilarityRow cosine_similarities(std::span<const float> image, const EmbeddingMatrix& id_prompts,
                                  const EmbeddingMatrix& ood_prompts);

/// exp(s_khat/tau) / sum_{i<K} exp(s_i/tau).
double score_id(const SimilarityRow& sims, std::size_t id_count, double tau);

/// exp(s_khat/tau) / sum_{i<K+M} exp(s_i/tau). The numerator only uses the
/// best ID entry; OOD entries only enlarge the denominator.
double score_id_ood(const SimilarityRow& sims, std::size_t id_count, std::size_t ood_count, double tau);

enum class Decision { id, ood };

/// ID iff score >= lambda.
Decision decide(double score, double lambda) noexcept;

double score_msp(std::span<const double> logits);
double score_maxlogit(std::span<const double> logits);
/// log sum exp(z); the negated energy so that higher means ID.
double score_energy(std::span<const double> logits);
/// Max softmax of logits / tau_odin. Input-perturbed logits are expected to
/// come from the model adapter.
double score_odin(std::span<const double> logits, double tau_odin);

enum class Rule {
  max_cosine,    // raw max ID similarity
  score_id,      // softmax over ID prompts
  score_id_ood,  // softmax over ID + OOD prompts, numerator from the best ID prompt
  msp,
  maxlogit,
  energy,
  odin,
};

std::string_view to_string(Rule rule) noexcept;
Rule parse_rule(std::string_view name);
std::vector<Rule> all_rules();
bool rule_needs_logits(Rule rule) noexcept;

struct ScoreVector {
  std::string population;  // "id" or the OOD split name
  Rule rule = Rule::score_id_ood;
  ScoreParams params;
  std::vector<double> values;
};

struct BundleScores {
  ScoreVector id;
  std::map<std::string, ScoreVector> ood;
};

/// Scores every image in the bundle under `rule`. Output order matches row
/// order. `jobs` bounds the worker threads (0 = hardware concurrency); the
/// result is bit-identical for every value of `jobs`.
BundleScores score_bundle(const Bundle& bundle, Rule rule, const ScoreParams& params,
                          std::size_t jobs = 1);

}  // namespace vlmood
