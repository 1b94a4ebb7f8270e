#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "vlmood/metrics.hpp"

using namespace vlmood;

namespace {

// Scores drawn from a small lattice so ties are common.
std::vector<double> lattice(std::mt19937_64& rng, std::size_t n, int levels, double shift) {
  std::uniform_int_distribution<int> pick(0, levels - 1);
  std::vector<double> v(n);
  for (auto& x : v) x = pick(rng) * 0.25 + shift;
  return v;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("auroc on hand-computed cases") {
    CHECK(auroc(std::vector{3.0, 4.0}, std::vector{1.0, 2.0}) == 1.0);
    CHECK(auroc(std::vector{1.0, 2.0}, std::vector{3.0, 4.0}) == 0.0);
    CHECK(auroc(std::vector{1.0}, std::vector{1.0}) == 0.5);
    // pairs: (2>1) win, (2<3) loss, (0<1), (0<3) -> 1/4
    CHECK(auroc(std::vector{2.0, 0.0}, std::vector{1.0, 3.0}) == 0.25);
    // one tie, one win -> 0.75
    CHECK(auroc(std::vector{2.0}, std::vector{2.0, 1.0}) == 0.75);
  }

  TEST_CASE("fpr at tpr on hand-computed cases") {
    const std::vector id{1.0, 2.0, 3.0, 4.0};
    auto r = fpr_at_tpr(id, std::vector{2.5, 0.0}, 0.5);
    CHECK(r.threshold == 3.0);
    CHECK(r.fpr == 0.0);
    r = fpr_at_tpr(id, std::vector{2.5, 0.0}, 0.95);
    CHECK(r.threshold == 1.0);
    CHECK(r.fpr == 0.5);
    r = fpr_at_tpr(id, std::vector{1.0, 0.5}, 1.0);
    CHECK(r.threshold == 1.0);
    CHECK(r.fpr == 0.5);  // an OOD score equal to the threshold counts as positive
  }

  TEST_CASE("fpr at tpr: ties at the threshold are all accepted") {
    const std::vector id{5.0, 5.0, 5.0, 1.0};
    const auto r = fpr_at_tpr(id, std::vector{5.0, 4.0}, 0.5);
    CHECK(r.threshold == 5.0);
    CHECK(r.fpr == 0.5);
  }

  TEST_CASE("degenerate input is rejected") {
    const std::vector<double> empty;
    const std::vector one{1.0};
    CHECK_THROWS_AS(auroc(empty, one), InvalidArgument);
    CHECK_THROWS_AS(auroc(one, empty), InvalidArgument);
    CHECK_THROWS_AS(fpr_at_tpr(one, empty), InvalidArgument);
    CHECK_THROWS_AS(auroc(std::vector{std::nan("")}, one), InvalidArgument);
    CHECK_THROWS_AS(auroc(one, std::vector{std::numeric_limits<double>::infinity()}), InvalidArgument);
    CHECK_THROWS_AS(fpr_at_tpr(one, one, 0.0), InvalidArgument);
    CHECK_THROWS_AS(fpr_at_tpr(one, one, 1.5), InvalidArgument);
  }

  TEST_CASE("auroc and fpr agree with brute-force oracles") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> size(1, 60);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<double> id, ood;
      if (trial % 2 == 0) {
        id = lattice(rng, size(rng), 7, 0.5);
        ood = lattice(rng, size(rng), 7, 0.0);
      } else {
        id.resize(size(rng));
        ood.resize(size(rng));
        for (auto& x : id) x = g(rng) + 1.0;
        for (auto& x : ood) x = g(rng);
      }
      CHECK(auroc(id, ood) == doctest::Approx(oracle::auroc_pairwise(id, ood)).epsilon(1e-12));
      for (double target : {0.95, 0.5, 1.0, 0.01}) {
        const auto got = fpr_at_tpr(id, ood, target);
        const auto want = oracle::fpr_scan(id, ood, target);
        CHECK(got.fpr == want.fpr);
        CHECK(got.threshold == want.threshold);
      }
    }
  }

  TEST_CASE("auroc is invariant under strictly increasing transforms") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      auto id = lattice(rng, 25, 9, 0.3);
      auto ood = lattice(rng, 31, 9, 0.0);
      const double base = auroc(id, ood);
      auto f = [](double x) { return std::exp(3.0 * x) - 7.0; };
      for (auto& x : id) x = f(x);
      for (auto& x : ood) x = f(x);
      CHECK(auroc(id, ood) == base);
    }
  }

  TEST_CASE("auroc complement identity") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
      const auto id = lattice(rng, 17, 5, 0.1);
      const auto ood = lattice(rng, 23, 5, 0.0);
      CHECK(auroc(id, ood) + auroc(ood, id) == doctest::Approx(1.0).epsilon(1e-15));
    }
  }

  TEST_CASE("evaluate bundles both metrics") {
    const std::vector id{1.0, 2.0, 3.0, 4.0};
    const std::vector ood{0.0, 2.5};
    const auto m = evaluate(id, ood);
    CHECK(m.auroc == oracle::auroc_pairwise(id, ood));
    CHECK(m.fpr95 == 0.5);
    CHECK(m.threshold_at_tpr95 == 1.0);
    CHECK(m.n_id == 4);
    CHECK(m.n_ood == 2);
    CHECK(m.tpr_target == 0.95);
  }

  TEST_CASE("pearson r") {
    CHECK(pearson_r(std::vector{1.0, 2.0, 3.0}, std::vector{2.0, 4.0, 6.0}) == doctest::Approx(1.0));
    CHECK(pearson_r(std::vector{1.0, 2.0, 3.0}, std::vector{3.0, 2.0, 1.0}) == doctest::Approx(-1.0));
    // x = 1..4, y = 1, 3, 2, 4: r = 0.8
    CHECK(pearson_r(std::vector{1.0, 2.0, 3.0, 4.0}, std::vector{1.0, 3.0, 2.0, 4.0}) == doctest::Approx(0.8));
    CHECK_THROWS_AS(pearson_r(std::vector{1.0, 1.0}, std::vector{1.0, 2.0}), UndefinedStatistic);
    CHECK_THROWS_AS(pearson_r(std::vector{1.0}, std::vector{1.0}), UndefinedStatistic);
    CHECK_THROWS_AS(pearson_r(std::vector{1.0, 2.0}, std::vector{1.0}), InvalidArgument);
  }
}
