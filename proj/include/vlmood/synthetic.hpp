#pragma once
/*
 * Synthetic VLM-like embedding spaces.
 *
 * K unit class prototypes are drawn uniformly on the sphere and serve as the
 * ID prompt embeddings. ID images are noisy copies of their prototype; OOD
 * images cluster around prototypes rotated by `ood_offset` radians towards a
 * random orthogonal direction. OOD prompt embeddings are placed according to
 * OodPromptPlacement.
 *
 * Randomness comes from xoshiro256** seeded through splitmix64. Gaussian
 * variates use the Box-Muller cosine branch, one variate per two uniforms:
 *   u1 = ((x >> 11) + 1) * 2^-53   in (0, 1]
 *   u2 =  (y >> 11)      * 2^-53   in [0, 1)
 *   z  = sqrt(-2 ln u1) * cos(2 pi u2)
 * so a given seed yields the same bundle bytes on any platform whose libm
 * rounds log/cos/sqrt identically.
 */

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include <json.hpp>

#include "vlmood/bundle.hpp"

namespace vlmood {

class Xoshiro256ss {
 public:
  explicit Xoshiro256ss(std::uint64_t seed) noexcept;

  std::uint64_t next() noexcept;
  double uniform() noexcept;           // [0, 1)
  double uniform_open_low() noexcept;  // (0, 1]
  double normal() noexcept;

 private:
  std::uint64_t s_[4];
};

enum class OodPromptPlacement {
  at_ood_mean,       // each OOD prompt sits at the mean of one OOD image cluster
  random,            // uniform on the sphere
  at_id_superclass,  // prompt 0 at the mean of all ID prototypes, the rest as at_ood_mean
};

std::string_view to_string(OodPromptPlacement p) noexcept;
OodPromptPlacement parse_placement(std::string_view name);

struct SynthConfig {
  std::size_t dim = 64;
  std::size_t id_classes = 10;  // K
  std::size_t ood_prompts = 10;  // M
  std::size_t n_id = 500;
  std::size_t n_ood = 500;       // per OOD split
  std::size_t ood_splits = 1;
  // Noise norm around a prototype is 1 / id_concentration; infinity means
  // noise-free images that equal their prototype exactly.
  double id_concentration = 1.5;
  double ood_offset = 0.5;       // radians between an ID prototype and its OOD cluster center
  OodPromptPlacement placement = OodPromptPlacement::at_ood_mean;
  std::uint64_t seed = 42;

  /// Throws InvalidArgument on counts < 1, dim < 2, concentration <= 0 or negative offset.
  void validate() const;
};

/// Parses a config object; absent keys keep their defaults, unknown keys are
/// rejected. `id_concentration` accepts a number or the string "inf".
SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthConfig& c);
SynthConfig read_synth_config(const std::filesystem::path& path);

/// Name of OOD split `s` in generated bundles.
std::string synthetic_split_name(const SynthConfig& c, std::size_t s);

Bundle generate(const SynthConfig& config);

enum class PerturbTarget {
  images,      // id_images and every OOD split
  prompts,     // id_prompts and ood_prompts
  id_prompts,  // id_prompts only (prompt-variation experiments)
};

std::string_view to_string(PerturbTarget t) noexcept;
PerturbTarget parse_perturb_target(std::string_view name);

/// Adds Gaussian noise to the targeted matrices without renormalizing. A row
/// x receives per-coordinate standard deviation noise_scale * |x| / sqrt(d),
/// so the expected noise norm is about noise_scale * |x|. With a fixed seed
/// the noise direction is shared across scales, so a ladder of scales is a
/// nested family. Metadata records the target and scale.
Bundle perturb_embeddings(const Bundle& bundle, PerturbTarget target, double noise_scale, std::uint64_t seed);

}  // namespace vlmood
