#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "support.hpp"
#include "vlmood/cli.hpp"

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = vlmood::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string s(const std::filesystem::path& p) { return p.string(); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help for every subcommand documents its flags") {
    auto top = run({"--help"});
    CHECK(top.code == 0);
    for (const char* sub : {"validate", "score", "metrics", "insights", "synth", "sweep"}) {
      CHECK(top.out.find(sub) != std::string::npos);
      const auto r = run({sub, "--help"});
      CAPTURE(sub);
      CHECK(r.code == 0);
      CHECK(r.out.find("--jobs") != std::string::npos);
      CHECK(r.out.find("--verbose") != std::string::npos);
    }
    CHECK(run({"synth", "--help"}).out.find("--placement") != std::string::npos);
    CHECK(run({"metrics", "--help"}).out.find("--scores") != std::string::npos);
  }

  TEST_CASE("usage errors exit 2 with usage text on stderr") {
    auto r = run({"score", "--bogus-flag"});
    CHECK(r.code == vlmood::cli::kExitUsage);
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(r.out.empty());
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"validate", "/definitely/not/here"}).code == 2);
    CHECK(run({"insights", "--bundle", "/definitely/not/here"}).code == 2);
    CHECK(run({"synth", "--id-classes", "0", "--out", "/tmp/x"}).code == 2);
    CHECK(run({"synth", "--placement", "sideways", "--out", "/tmp/x"}).code == 2);
  }

  TEST_CASE("synth, validate, score, metrics, insights end to end") {
    testing::TempDir tmp;
    const auto b = tmp / "b";
    auto r = run({"synth", "--n-id", "60", "--n-ood", "40", "--out", s(b)});
    REQUIRE(r.code == 0);
    CHECK(r.out.empty());

    r = run({"validate", s(b)});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("ok ", 0) == 0);

    r = run({"score", "--bundle", s(b), "-r", "score_id", "-r", "score_id_ood", "-o", s(tmp / "scores.csv")});
    CHECK(r.code == 0);
    const auto scores = testing::slurp(tmp / "scores.csv");
    CHECK(scores.rfind("rule,population,index,score\n", 0) == 0);

    const auto from_scores = run({"metrics", "--scores", s(tmp / "scores.csv")});
    const auto from_bundle = run({"metrics", "--bundle", s(b), "-r", "score_id", "-r", "score_id_ood"});
    CHECK(from_scores.code == 0);
    CHECK(from_scores.out == from_bundle.out);
    CHECK(run({"metrics", "--bundle", s(b), "--scores", s(tmp / "scores.csv")}).code == 2);

    r = run({"insights", "--bundle", s(b), "--out", s(tmp / "ins")});
    CHECK(r.code == 0);
    for (const char* f : {"alignment.csv", "contrast.csv", "separation.csv", "insights.json"}) {
      CHECK(std::filesystem::exists(tmp / "ins" / f));
    }
  }

  TEST_CASE("validate lists violations and exits 1") {
    testing::TempDir tmp;
    REQUIRE(run({"synth", "--n-id", "20", "--n-ood", "20", "--out", s(tmp / "b")}).code == 0);
    const auto p = tmp / "b" / "id_images.f32";
    auto bytes = testing::slurp(p);
    bytes[8] = static_cast<char>(bytes[8] ^ 0x01);
    testing::spit(p, bytes);
    auto r = run({"validate", s(tmp / "b")});
    CHECK(r.code == 1);
    CHECK(r.err.find("checksum mismatch: id_images") != std::string::npos);

    testing::spit(tmp / "b" / "manifest.json", "{}");
    r = run({"validate", s(tmp / "b")});
    CHECK(r.code == 1);
    CHECK(r.err.find("format error") != std::string::npos);
  }

  TEST_CASE("logit rules on a bundle without logits fail with exit 1") {
    testing::TempDir tmp;
    REQUIRE(run({"synth", "--n-id", "20", "--n-ood", "20", "--out", s(tmp / "b")}).code == 0);
    const auto r = run({"score", "--bundle", s(tmp / "b"), "-r", "energy"});
    CHECK(r.code == 1);
    CHECK(r.err.find("needs logits") != std::string::npos);
  }

  TEST_CASE("flags override the config file") {
    testing::TempDir tmp;
    testing::spit(tmp / "c.json", R"({"n_id": 30, "n_ood": 20, "seed": 1})");
    REQUIRE(run({"synth", "-c", s(tmp / "c.json"), "--seed", "2", "--out", s(tmp / "a")}).code == 0);
    REQUIRE(run({"synth", "--n-id", "30", "--n-ood", "20", "--seed", "2", "--out", s(tmp / "b")}).code == 0);
    CHECK(testing::slurp(tmp / "a" / "manifest.json") == testing::slurp(tmp / "b" / "manifest.json"));
    testing::spit(tmp / "bad.json", R"({"n_idd": 30})");
    CHECK(run({"synth", "-c", s(tmp / "bad.json"), "--out", s(tmp / "c")}).code == 2);
  }

  TEST_CASE("default output directory comes from the environment") {
    testing::TempDir tmp;
    ::setenv(vlmood::cli::kOutputDirEnv, s(tmp / "env-out").c_str(), 1);
    const auto r = run({"synth", "--n-id", "20", "--n-ood", "20"});
    ::unsetenv(vlmood::cli::kOutputDirEnv);
    CHECK(r.code == 0);
    CHECK(std::filesystem::exists(tmp / "env-out" / "manifest.json"));
  }

  TEST_CASE("sweep writes report files") {
    testing::TempDir tmp;
    testing::spit(tmp / "spec.json", R"({
      "kind": "temperature", "taus": [0.5, 1.0],
      "points": [{"label": "s", "synthetic": {"n_id": 30, "n_ood": 30}}]
    })");
    const auto r = run({"sweep", "--spec", s(tmp / "spec.json"), "--out", s(tmp / "rep")});
    CHECK(r.code == 0);
    CHECK(std::filesystem::exists(tmp / "rep" / "report.json"));
    CHECK(std::filesystem::exists(tmp / "rep" / "report.csv"));
    testing::spit(tmp / "bad.json", R"({"kind": "temperature"})");
    CHECK(run({"sweep", "--spec", s(tmp / "bad.json"), "--out", s(tmp / "rep2")}).code == 2);
  }
}
