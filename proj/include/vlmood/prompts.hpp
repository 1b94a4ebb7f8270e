#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "vlmood/bundle.hpp"

namespace vlmood {

enum class PromptRole { id, ood };

struct PromptSet {
  PromptRole role = PromptRole::id;
  std::vector<std::string> templates;  // `{label}` templates (ID) or the literal strings (OOD)
  std::vector<std::string> rendered;
  std::string set_id;
};

struct PromptComplexity {
  double avg_word_count = 0.0;
  double unique_word_ratio = 0.0;
};

inline constexpr const char* kLabelPlaceholder = "{label}";

/// rendered[i * T + j] is templates[j] with `{label}` replaced by labels[i].
PromptSet render_id_prompts(const std::vector<std::string>& labels,
                            const std::vector<std::string>& templates,
                            std::string set_id = "id");

PromptSet load_ood_prompts(const std::vector<std::string>& prompts, std::string set_id = "ood");

/// Reads a UTF-8 line-delimited prompt file. A trailing newline and CR line
/// endings are accepted; any other empty line is an error.
std::vector<std::string> read_prompt_lines(const std::filesystem::path& path);

/// Tokens are lowercased (ASCII) and split on ASCII whitespace; punctuation
/// stays attached to its token.
PromptComplexity complexity(const PromptSet& prompts);

/// Mean over paired rows of (1 - cosine). Both matrices must have the same
/// shape. Result lies in [0, 2].
double prompt_set_distance(const EmbeddingMatrix& a, const EmbeddingMatrix& b);

}  // namespace vlmood
