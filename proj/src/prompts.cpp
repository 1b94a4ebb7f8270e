#include "vlmood/prompts.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "vlmood/scoring.hpp"

namespace vlmood {

namespace {

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t\n\v\f\r") == std::string::npos;
}

std::size_t count_occurrences(const std::string& s, const std::string& needle) {
  std::size_t count = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + needle.size())) ++count;
  return count;
}

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> out;
  std::string token;
  for (char ch : s) {
    if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\v' || ch == '\f' || ch == '\r') {
      if (!token.empty()) out.push_back(std::move(token));
      token.clear();
    } else {
      token.push_back((ch >= 'A' && ch <= 'Z') ? static_cast<char>(ch - 'A' + 'a') : ch);
    }
  }
  if (!token.empty()) out.push_back(std::move(token));
  return out;
}

}  // namespace

PromptSet render_id_prompts(const std::vector<std::string>& labels, const std::vector<std::string>& templates,
                            std::string set_id) {
  if (labels.empty()) throw InvalidArgument("render_id_prompts: no labels");
  if (templates.empty()) throw InvalidArgument("render_id_prompts: no templates");
  const std::string placeholder = kLabelPlaceholder;
  for (const auto& t : templates) {
    if (count_occurrences(t, placeholder) != 1) {
      throw InvalidArgument("render_id_prompts: template \"" + t + "\" must contain exactly one {label}");
    }
  }
  PromptSet out;
  out.role = PromptRole::id;
  out.templates = templates;
  out.set_id = std::move(set_id);
  out.rendered.reserve(labels.size() * templates.size());
  for (const auto& label : labels) {
    if (is_blank(label)) throw InvalidArgument("render_id_prompts: empty label");
    for (const auto& t : templates) {
      std::string s = t;
      s.replace(s.find(placeholder), placeholder.size(), label);
      out.rendered.push_back(std::move(s));
    }
  }
  return out;
}

PromptSet load_ood_prompts(const std::vector<std::string>& prompts, std::string set_id) {
  if (prompts.empty()) throw InvalidArgument("load_ood_prompts: no prompts");
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (is_blank(prompts[i])) throw InvalidArgument("load_ood_prompts: prompt " + std::to_string(i) + " is empty");
  }
  PromptSet out;
  out.role = PromptRole::ood;
  out.templates = prompts;
  out.rendered = prompts;
  out.set_id = std::move(set_id);
  return out;
}

std::vector<std::string> read_prompt_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open prompt file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) {
      throw InvalidArgument(path.string() + ":" + std::to_string(i + 1) + ": empty prompt line");
    }
  }
  if (lines.empty()) throw InvalidArgument(path.string() + ": no prompts");
  return lines;
}

PromptComplexity complexity(const PromptSet& prompts) {
  if (prompts.rendered.empty()) throw InvalidArgument("complexity: empty prompt set");
  std::size_t total = 0;
  std::set<std::string> distinct;
  for (const auto& p : prompts.rendered) {
    auto tokens = tokenize(p);
    total += tokens.size();
    distinct.insert(std::make_move_iterator(tokens.begin()), std::make_move_iterator(tokens.end()));
  }
  if (total == 0) throw InvalidArgument("complexity: prompts contain no tokens");
  PromptComplexity out;
  out.avg_word_count = static_cast<double>(total) / static_cast<double>(prompts.rendered.size());
  out.unique_word_ratio = static_cast<double>(distinct.size()) / static_cast<double>(total);
  return out;
}

double prompt_set_distance(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  if (a.rows() != b.rows()) throw InvalidArgument("prompt_set_distance: row-count mismatch");
  if (a.dim() != b.dim()) throw InvalidArgument("prompt_set_distance: dimension mismatch");
  if (a.rows() == 0) throw InvalidArgument("prompt_set_distance: empty prompt sets");
  double acc = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) acc += 1.0 - cosine(a.row(r), b.row(r));
  return acc / static_cast<double>(a.rows());
}

}  // namespace vlmood
