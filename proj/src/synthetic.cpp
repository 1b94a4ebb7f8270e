#include "vlmood/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <vector>

#include "text.hpp"

namespace vlmood {

using nlohmann::json;

// ---------------------------------------------------------------------------
// xoshiro256** (Blackman & Vigna), seeded with splitmix64.

namespace {

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace

Xoshiro256ss::Xoshiro256ss(std::uint64_t seed) noexcept {
  std::uint64_t state = seed;
  for (auto& s : s_) s = splitmix64(state);
}

std::uint64_t Xoshiro256ss::next() noexcept {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Xoshiro256ss::uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Xoshiro256ss::uniform_open_low() noexcept {
  return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
}

double Xoshiro256ss::normal() noexcept {
  const double u1 = uniform_open_low();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------------------
// Config

std::string_view to_string(OodPromptPlacement p) noexcept {
  switch (p) {
    case OodPromptPlacement::at_ood_mean: return "at-ood-mean";
    case OodPromptPlacement::random: return "random";
    case OodPromptPlacement::at_id_superclass: return "at-id-superclass";
  }
  return "unknown";
}

OodPromptPlacement parse_placement(std::string_view name) {
  if (name == "at-ood-mean") return OodPromptPlacement::at_ood_mean;
  if (name == "random") return OodPromptPlacement::random;
  if (name == "at-id-superclass") return OodPromptPlacement::at_id_superclass;
  throw InvalidArgument("unknown OOD prompt placement \"" + std::string(name) + "\"");
}

void SynthConfig::validate() const {
  if (dim < 2) throw InvalidArgument("synth config: dim must be >= 2");
  if (id_classes < 1 || n_id < 1 || n_ood < 1 || ood_splits < 1) {
    throw InvalidArgument("synth config: id_classes, n_id, n_ood and ood_splits must be >= 1");
  }
  if (!(id_concentration > 0.0)) throw InvalidArgument("synth config: id_concentration must be > 0");
  if (!(ood_offset >= 0.0) || !std::isfinite(ood_offset)) {
    throw InvalidArgument("synth config: ood_offset must be finite and >= 0");
  }
}

SynthConfig synth_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("synth config must be a JSON object");
  SynthConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "dim") c.dim = value.get<std::size_t>();
      else if (key == "id_classes") c.id_classes = value.get<std::size_t>();
      else if (key == "ood_prompts") c.ood_prompts = value.get<std::size_t>();
      else if (key == "n_id") c.n_id = value.get<std::size_t>();
      else if (key == "n_ood") c.n_ood = value.get<std::size_t>();
      else if (key == "ood_splits") c.ood_splits = value.get<std::size_t>();
      else if (key == "id_concentration") {
        if (value.is_string() && value.get<std::string>() == "inf") {
          c.id_concentration = std::numeric_limits<double>::infinity();
        } else {
          c.id_concentration = value.get<double>();
        }
      } else if (key == "ood_offset") c.ood_offset = value.get<double>();
      else if (key == "placement") c.placement = parse_placement(value.get<std::string>());
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ConfigError("synth config: unknown key \"" + key + "\"");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

json to_json(const SynthConfig& c) {
  json j;
  j["dim"] = c.dim;
  j["id_classes"] = c.id_classes;
  j["ood_prompts"] = c.ood_prompts;
  j["n_id"] = c.n_id;
  j["n_ood"] = c.n_ood;
  j["ood_splits"] = c.ood_splits;
  if (std::isinf(c.id_concentration)) {
    j["id_concentration"] = "inf";
  } else {
    j["id_concentration"] = c.id_concentration;
  }
  j["ood_offset"] = c.ood_offset;
  j["placement"] = std::string(to_string(c.placement));
  j["seed"] = c.seed;
  return j;
}

SynthConfig read_synth_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synth config " + path.string());
  try {
    return synth_config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string synthetic_split_name(const SynthConfig& c, std::size_t s) {
  if (c.ood_splits == 1) return "synthetic_ood";
  return "synthetic_ood_" + std::to_string(s);
}

// ---------------------------------------------------------------------------
// Generation

namespace {

using Vec = std::vector<double>;

Vec gaussian(Xoshiro256ss& rng, std::size_t d) {
  Vec v(d);
  for (auto& x : v) x = rng.normal();
  return v;
}

double norm(const Vec& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

void normalize(Vec& v) {
  const double n = norm(v);
  if (n == 0.0) throw Error("synthetic: degenerate zero vector");
  for (auto& x : v) x /= n;
}

Vec unit(Xoshiro256ss& rng, std::size_t d) {
  Vec v = gaussian(rng, d);
  normalize(v);
  return v;
}

// Unit vector drawn uniformly from the sphere orthogonal to `axis` (unit).
Vec orthogonal_unit(Xoshiro256ss& rng, const Vec& axis) {
  Vec v = gaussian(rng, axis.size());
  double proj = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) proj += v[i] * axis[i];
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= proj * axis[i];
  normalize(v);
  return v;
}

// normalize(center + noise * g / sqrt(d)), noise = 0 returns center as is.
Vec noisy(Xoshiro256ss& rng, const Vec& center, double noise) {
  if (noise == 0.0) return center;
  const double scale = noise / std::sqrt(static_cast<double>(center.size()));
  Vec v = center;
  for (auto& x : v) x += scale * rng.normal();
  normalize(v);
  return v;
}

void store(EmbeddingMatrix& m, std::size_t r, const Vec& v) {
  auto row = m.row(r);
  for (std::size_t i = 0; i < v.size(); ++i) row[i] = static_cast<float>(v[i]);
}

std::string fmt(double v) { return detail::format_double(v); }

}  // namespace

Bundle generate(const SynthConfig& c) {
  c.validate();
  const std::size_t d = c.dim;
  const std::size_t k = c.id_classes;
  const double noise = std::isinf(c.id_concentration) ? 0.0 : 1.0 / c.id_concentration;
  Xoshiro256ss rng(c.seed);

  std::vector<Vec> prototypes;
  for (std::size_t i = 0; i < k; ++i) prototypes.push_back(unit(rng, d));

  // centers[s][c]: prototype c rotated by ood_offset towards a direction
  // orthogonal to it, independently per split.
  std::vector<std::vector<Vec>> centers(c.ood_splits);
  const double cs = std::cos(c.ood_offset);
  const double sn = std::sin(c.ood_offset);
  for (std::size_t s = 0; s < c.ood_splits; ++s) {
    for (std::size_t i = 0; i < k; ++i) {
      const Vec u = orthogonal_unit(rng, prototypes[i]);
      Vec q(d);
      for (std::size_t j = 0; j < d; ++j) q[j] = cs * prototypes[i][j] + sn * u[j];
      normalize(q);
      centers[s].push_back(std::move(q));
    }
  }

  Bundle b;
  b.id_prompts = EmbeddingMatrix(k, d);
  for (std::size_t i = 0; i < k; ++i) store(b.id_prompts, i, prototypes[i]);

  b.id_images = EmbeddingMatrix(c.n_id, d);
  std::vector<std::int64_t> labels(c.n_id);
  for (std::size_t r = 0; r < c.n_id; ++r) {
    const std::size_t label = r % k;
    labels[r] = static_cast<std::int64_t>(label);
    store(b.id_images, r, noisy(rng, prototypes[label], noise));
  }
  b.id_labels = std::move(labels);

  // Cluster sums (float-rounded images) for at-ood-mean placement.
  std::vector<std::vector<Vec>> cluster_sums(c.ood_splits, std::vector<Vec>(k, Vec(d, 0.0)));
  for (std::size_t s = 0; s < c.ood_splits; ++s) {
    EmbeddingMatrix images(c.n_ood, d);
    for (std::size_t r = 0; r < c.n_ood; ++r) {
      const std::size_t cluster = r % k;
      store(images, r, noisy(rng, centers[s][cluster], noise));
      const auto row = images.row(r);
      for (std::size_t j = 0; j < d; ++j) cluster_sums[s][cluster][j] += row[j];
    }
    b.ood_images.emplace(synthetic_split_name(c, s), std::move(images));
  }

  auto at_cluster_mean = [&](std::size_t m) {
    const std::size_t s = m % c.ood_splits;
    const std::size_t cluster = (m / c.ood_splits) % k;
    Vec v = cluster_sums[s][cluster];
    // A cluster with no images (n_ood < K) falls back to its center.
    if (norm(v) == 0.0) v = centers[s][cluster];
    normalize(v);
    return v;
  };

  b.ood_prompts = EmbeddingMatrix(c.ood_prompts, d);
  for (std::size_t m = 0; m < c.ood_prompts; ++m) {
    Vec v;
    switch (c.placement) {
      case OodPromptPlacement::at_ood_mean: v = at_cluster_mean(m); break;
      case OodPromptPlacement::random: v = unit(rng, d); break;
      case OodPromptPlacement::at_id_superclass:
        if (m == 0) {
          v.assign(d, 0.0);
          for (const auto& p : prototypes) {
            for (std::size_t j = 0; j < d; ++j) v[j] += p[j];
          }
          normalize(v);
        } else {
          v = at_cluster_mean(m - 1);
        }
        break;
    }
    store(b.ood_prompts, m, v);
  }

  b.metadata["generator"] = "synthetic";
  b.metadata["synth_config"] = to_json(c).dump();
  b.metadata["seed"] = std::to_string(c.seed);
  b.metadata["placement"] = std::string(to_string(c.placement));
  b.metadata["id_concentration"] = fmt(c.id_concentration);
  b.metadata["ood_offset"] = fmt(c.ood_offset);
  b.metadata["severity"] = "0";
  return b;
}

// ---------------------------------------------------------------------------
// Perturbation

std::string_view to_string(PerturbTarget t) noexcept {
  switch (t) {
    case PerturbTarget::images: return "images";
    case PerturbTarget::prompts: return "prompts";
    case PerturbTarget::id_prompts: return "id_prompts";
  }
  return "unknown";
}

PerturbTarget parse_perturb_target(std::string_view name) {
  if (name == "images") return PerturbTarget::images;
  if (name == "prompts") return PerturbTarget::prompts;
  if (name == "id_prompts") return PerturbTarget::id_prompts;
  throw InvalidArgument("unknown perturbation target \"" + std::string(name) + "\"");
}

namespace {

void add_noise(EmbeddingMatrix& m, double noise_scale, Xoshiro256ss& rng) {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(m.dim()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    double sq = 0.0;
    for (float x : row) sq += static_cast<double>(x) * static_cast<double>(x);
    const double sigma = noise_scale * std::sqrt(sq) * inv_sqrt_d;
    for (auto& x : row) x = static_cast<float>(static_cast<double>(x) + sigma * rng.normal());
  }
}

}  // namespace

Bundle perturb_embeddings(const Bundle& bundle, PerturbTarget target, double noise_scale, std::uint64_t seed) {
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    throw InvalidArgument("perturb_embeddings: noise_scale must be finite and >= 0");
  }
  Bundle out = bundle;
  if (noise_scale > 0.0) {
    Xoshiro256ss rng(seed);
    switch (target) {
      case PerturbTarget::images:
        add_noise(out.id_images, noise_scale, rng);
        for (auto& [name, m] : out.ood_images) add_noise(m, noise_scale, rng);
        break;
      case PerturbTarget::prompts:
        add_noise(out.id_prompts, noise_scale, rng);
        add_noise(out.ood_prompts, noise_scale, rng);
        break;
      case PerturbTarget::id_prompts:
        add_noise(out.id_prompts, noise_scale, rng);
        break;
    }
  }
  out.metadata["perturbation"] = std::string(to_string(target));
  out.metadata["noise_scale"] = fmt(noise_scale);
  out.metadata["noise_seed"] = std::to_string(seed);
  out.metadata["severity"] = fmt(noise_scale);
  out.metadata["corruption"] = "embedding_noise_" + std::string(to_string(target));
  return out;
}

}  // namespace vlmood
