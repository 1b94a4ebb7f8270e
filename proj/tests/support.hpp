#pragma once
// Shared fixtures for the test binaries.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <unistd.h>

#include "vlmood/bundle.hpp"
#include "vlmood/synthetic.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("vlmood-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

/// Small synthetic bundle, cheap enough for unit tests.
inline vlmood::Bundle small_bundle(std::uint64_t seed = 7, std::size_t splits = 1) {
  vlmood::SynthConfig c;
  c.dim = 16;
  c.id_classes = 4;
  c.ood_prompts = 4;
  c.n_id = 40;
  c.n_ood = 30;
  c.ood_splits = splits;
  c.seed = seed;
  return vlmood::generate(c);
}

/// Adds seeded random logits (K columns) for every image population.
inline void add_logits(vlmood::Bundle& b, std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 2.0f);
  auto make = [&](std::size_t rows) {
    vlmood::EmbeddingMatrix m(rows, b.id_class_count());
    for (auto& v : m.values()) v = g(rng);
    return m;
  };
  b.id_logits = make(b.id_images.rows());
  for (const auto& [name, m] : b.ood_images) b.ood_logits[name] = make(m.rows());
}

}  // namespace testing
