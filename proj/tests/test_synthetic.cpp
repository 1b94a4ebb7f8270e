#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <limits>

#include "support.hpp"
#include "vlmood/synthetic.hpp"

using namespace vlmood;

namespace {

// Straight transcription of the published splitmix64 / xoshiro256**
// reference code, kept separate from the library's generator.
struct RefRng {
  std::uint64_t s[4];
  static std::uint64_t splitmix(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  explicit RefRng(std::uint64_t seed) {
    for (auto& w : s) w = splitmix(seed);
  }
  std::uint64_t next() {
    const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }
};

double row_norm(std::span<const float> r) {
  double acc = 0.0;
  for (float x : r) acc += static_cast<double>(x) * x;
  return std::sqrt(acc);
}

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

SynthConfig tiny() {
  SynthConfig c;
  c.dim = 12;
  c.id_classes = 3;
  c.ood_prompts = 5;
  c.n_id = 30;
  c.n_ood = 24;
  return c;
}

}  // namespace

TEST_SUITE("synthetic") {
  TEST_CASE("generator matches the reference xoshiro256**") {
    std::uint64_t x = 0;
    CHECK(RefRng::splitmix(x) == 0xe220a8397b1dcdafULL);
    for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0xdeadbeefULL}) {
      Xoshiro256ss a(seed);
      RefRng b(seed);
      for (int i = 0; i < 1000; ++i) REQUIRE(a.next() == b.next());
    }
  }

  TEST_CASE("uniform and normal variates") {
    Xoshiro256ss rng(9);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      const double w = rng.uniform_open_low();
      REQUIRE(w > 0.0);
      REQUIRE(w <= 1.0);
    }
    for (int i = 0; i < n; ++i) {
      const double z = rng.normal();
      sum += z;
      sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
  }

  TEST_CASE("same seed, same bytes; different seed, different bytes") {
    const auto a = generate(tiny());
    const auto b = generate(tiny());
    CHECK(manifest_json(a) == manifest_json(b));
    auto c = tiny();
    c.seed = 43;
    CHECK(bundle_digest(generate(c)) != bundle_digest(a));
  }

  TEST_CASE("shapes, labels, split names and metadata") {
    auto c = tiny();
    c.ood_splits = 3;
    const auto b = generate(c);
    CHECK(validate_bundle(b).empty());
    CHECK(b.id_images.rows() == 30);
    CHECK(b.id_prompts.rows() == 3);
    CHECK(b.ood_prompts.rows() == 5);
    CHECK(b.dim() == 12);
    REQUIRE(b.ood_images.size() == 3);
    CHECK(b.ood_images.count("synthetic_ood_0") == 1);
    CHECK(b.ood_images.count("synthetic_ood_2") == 1);
    for (std::size_t i = 0; i < 30; ++i) CHECK((*b.id_labels)[i] == static_cast<std::int64_t>(i % 3));
    CHECK(b.metadata.at("severity") == "0");
    CHECK(b.metadata.at("placement") == "at-ood-mean");
    CHECK(synthetic_split_name(tiny(), 0) == "synthetic_ood");
  }

  TEST_CASE("every row is a unit vector") {
    const auto b = generate(tiny());
    auto check_rows = [](const EmbeddingMatrix& m) {
      for (std::size_t r = 0; r < m.rows(); ++r) CHECK(row_norm(m.row(r)) == doctest::Approx(1.0).epsilon(1e-6));
    };
    check_rows(b.id_images);
    check_rows(b.id_prompts);
    check_rows(b.ood_prompts);
    for (const auto& [_, m] : b.ood_images) check_rows(m);
  }

  TEST_CASE("infinite concentration puts images on the cluster centers") {
    auto c = tiny();
    c.id_concentration = std::numeric_limits<double>::infinity();
    c.ood_offset = 0.7;
    const auto b = generate(c);
    for (std::size_t r = 0; r < b.id_images.rows(); ++r) {
      const auto proto = b.id_prompts.row(r % 3);
      const auto img = b.id_images.row(r);
      CHECK(std::equal(img.begin(), img.end(), proto.begin()));
    }
    const auto& ood = b.ood_images.at("synthetic_ood");
    for (std::size_t r = 0; r < ood.rows(); ++r) {
      CHECK(dot(ood.row(r), b.id_prompts.row(r % 3)) == doctest::Approx(std::cos(0.7)).epsilon(1e-6));
    }
  }

  TEST_CASE("at-ood-mean prompts sit at the normalized cluster means") {
    auto c = tiny();
    c.ood_splits = 2;
    const auto b = generate(c);
    for (std::size_t m = 0; m < c.ood_prompts; ++m) {
      const auto& images = b.ood_images.at(synthetic_split_name(c, m % 2));
      const std::size_t cluster = (m / 2) % c.id_classes;
      std::vector<double> mean(c.dim, 0.0);
      for (std::size_t r = cluster; r < images.rows(); r += c.id_classes) {
        for (std::size_t j = 0; j < c.dim; ++j) mean[j] += images.at(r, j);
      }
      double n = 0.0;
      for (double x : mean) n += x * x;
      n = std::sqrt(n);
      for (std::size_t j = 0; j < c.dim; ++j) CHECK(b.ood_prompts.at(m, j) == doctest::Approx(mean[j] / n).epsilon(1e-6));
    }
  }

  TEST_CASE("at-id-superclass puts prompt 0 at the mean ID prototype") {
    auto c = tiny();
    c.placement = OodPromptPlacement::at_id_superclass;
    const auto b = generate(c);
    std::vector<double> mean(c.dim, 0.0);
    for (std::size_t k = 0; k < c.id_classes; ++k) {
      for (std::size_t j = 0; j < c.dim; ++j) mean[j] += b.id_prompts.at(k, j);
    }
    double n = 0.0;
    for (double x : mean) n += x * x;
    for (std::size_t j = 0; j < c.dim; ++j) {
      CHECK(b.ood_prompts.at(0, j) == doctest::Approx(mean[j] / std::sqrt(n)).epsilon(1e-5));
    }
    auto plain = tiny();
    CHECK(bit_equal(generate(plain).ood_images.at("synthetic_ood"), b.ood_images.at("synthetic_ood")));
  }

  TEST_CASE("placement changes only the OOD prompts") {
    auto c = tiny();
    const auto base = generate(c);
    c.placement = OodPromptPlacement::random;
    const auto rnd = generate(c);
    CHECK(bit_equal(base.id_images, rnd.id_images));
    CHECK(bit_equal(base.id_prompts, rnd.id_prompts));
    CHECK_FALSE(bit_equal(base.ood_prompts, rnd.ood_prompts));
  }

  TEST_CASE("config parsing") {
    const auto j = nlohmann::json::parse(R"({"dim": 8, "id_concentration": "inf", "placement": "random", "seed": 5})");
    const auto c = synth_config_from_json(j);
    CHECK(c.dim == 8);
    CHECK(std::isinf(c.id_concentration));
    CHECK(c.placement == OodPromptPlacement::random);
    CHECK(c.seed == 5);
    CHECK(c.id_classes == SynthConfig{}.id_classes);
    CHECK(to_json(synth_config_from_json(to_json(c))) == to_json(c));
    CHECK_THROWS_AS(synth_config_from_json(nlohmann::json::parse(R"({"dims": 8})")), ConfigError);
    CHECK_THROWS_AS(synth_config_from_json(nlohmann::json::parse(R"({"dim": "eight"})")), ConfigError);
    CHECK_THROWS_AS(synth_config_from_json(nlohmann::json::parse(R"({"placement": "nowhere"})")), ConfigError);
    CHECK_THROWS_AS(synth_config_from_json(nlohmann::json::parse("[1]")), ConfigError);
  }

  TEST_CASE("config validation") {
    SynthConfig c;
    c.dim = 1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.n_ood = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.id_concentration = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.ood_offset = -0.1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.ood_prompts = 0;
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("perturbation at scale 0 is the identity on embeddings") {
    const auto b = generate(tiny());
    const auto p = perturb_embeddings(b, PerturbTarget::images, 0.0, 3);
    CHECK(bit_equal(p.id_images, b.id_images));
    CHECK(bit_equal(p.ood_images.at("synthetic_ood"), b.ood_images.at("synthetic_ood")));
    CHECK(p.metadata.at("noise_scale") == "0");
  }

  TEST_CASE("perturbation touches only its target") {
    const auto b = generate(tiny());
    const auto img = perturb_embeddings(b, PerturbTarget::images, 0.5, 1);
    CHECK_FALSE(bit_equal(img.id_images, b.id_images));
    CHECK_FALSE(bit_equal(img.ood_images.at("synthetic_ood"), b.ood_images.at("synthetic_ood")));
    CHECK(bit_equal(img.id_prompts, b.id_prompts));
    CHECK(bit_equal(img.ood_prompts, b.ood_prompts));
    CHECK(img.metadata.at("corruption") == "embedding_noise_images");
    CHECK(img.metadata.at("severity") == "0.5");

    const auto txt = perturb_embeddings(b, PerturbTarget::prompts, 0.5, 1);
    CHECK(bit_equal(txt.id_images, b.id_images));
    CHECK_FALSE(bit_equal(txt.id_prompts, b.id_prompts));
    CHECK_FALSE(bit_equal(txt.ood_prompts, b.ood_prompts));

    const auto idp = perturb_embeddings(b, PerturbTarget::id_prompts, 0.5, 1);
    CHECK_FALSE(bit_equal(idp.id_prompts, b.id_prompts));
    CHECK(bit_equal(idp.ood_prompts, b.ood_prompts));
    CHECK(bit_equal(idp.id_images, b.id_images));
  }

  TEST_CASE("a fixed seed gives nested noise across scales") {
    const auto b = generate(tiny());
    const auto p1 = perturb_embeddings(b, PerturbTarget::images, 0.25, 4);
    const auto p2 = perturb_embeddings(b, PerturbTarget::images, 0.5, 4);
    for (std::size_t i = 0; i < b.id_images.values().size(); ++i) {
      const double base = b.id_images.values()[i];
      const double d1 = p1.id_images.values()[i] - base;
      const double d2 = p2.id_images.values()[i] - base;
      CHECK(d2 == doctest::Approx(2.0 * d1).epsilon(1e-4).scale(1e-6));
    }
  }

  TEST_CASE("noise magnitude follows the scale") {
    auto c = tiny();
    c.dim = 256;
    c.n_id = 400;
    const auto b = generate(c);
    const auto p = perturb_embeddings(b, PerturbTarget::images, 0.3, 8);
    double total = 0.0;
    for (std::size_t r = 0; r < b.id_images.rows(); ++r) {
      double sq = 0.0;
      for (std::size_t j = 0; j < c.dim; ++j) {
        const double d = p.id_images.at(r, j) - b.id_images.at(r, j);
        sq += d * d;
      }
      total += std::sqrt(sq);
    }
    CHECK(total / static_cast<double>(b.id_images.rows()) == doctest::Approx(0.3).epsilon(0.02));
  }

  TEST_CASE("perturbation rejects bad scales") {
    const auto b = generate(tiny());
    CHECK_THROWS_AS(perturb_embeddings(b, PerturbTarget::images, -0.1, 1), InvalidArgument);
    CHECK_THROWS_AS(perturb_embeddings(b, PerturbTarget::images, std::nan(""), 1), InvalidArgument);
    CHECK_THROWS_AS(parse_perturb_target("pixels"), InvalidArgument);
  }
}
