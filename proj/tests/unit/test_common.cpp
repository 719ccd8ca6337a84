#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

using namespace krig;

TEST_SUITE("common") {

TEST_CASE("rng streams are reproducible and seed dependent") {
  Rng a(7), b(7), c(8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    differs |= x != c.uniform();
  }
  CHECK(differs);
}

TEST_CASE("uniform stays in [0,1) and has mean one half") {
  Rng rng(1);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("normal draws have unit variance") {
  Rng rng(2);
  double s = 0.0, ss = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    ss += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(ss / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("below covers the full range without bias") {
  Rng rng(3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("shuffle is a permutation and sampling has no repeats") {
  Rng rng(4);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.shuffle(w);
  CHECK(w != v);
  std::sort(w.begin(), w.end());
  CHECK(w == v);
  const auto s = rng.sample_without_replacement(v, 20);
  CHECK(s.size() == 20);
  CHECK(std::set<int>(s.begin(), s.end()).size() == 20);
}

TEST_CASE("mix_seed separates streams") {
  CHECK(mix_seed(42, 1) != mix_seed(42, 2));
  CHECK(mix_seed(42, 1) == mix_seed(42, 1));
}

TEST_CASE("fnv1a matches published test vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("error kinds have stable names") {
  CHECK(std::string(error_kind_name(ErrorKind::checkpoint_not_found)) == "checkpoint-not-found");
  CHECK(std::string(error_kind_name(ErrorKind::degenerate_scale)) == "degenerate-scale");
  CHECK(std::string(error_kind_name(ErrorKind::unsupported_phase)) == "unsupported-phase");
}

TEST_CASE("phase names round trip") {
  for (Phase p : {Phase::train, Phase::validate, Phase::test}) CHECK(parse_phase(phase_name(p)) == p);
  CHECK_THROWS_AS(parse_phase("later"), Error);
}

TEST_CASE("factor_spd factors SPD matrices without jitter") {
  Rng rng(5);
  const Matrix B = testutil::random_matrix(6, 6, rng);
  const Matrix K = B * B.transpose() + Matrix::Identity(6, 6);
  double used = -1.0;
  const auto llt = factor_spd(K, 0.0, 1e-6, &used);
  CHECK(used == 0.0);
  const Matrix L = llt.matrixL();
  CHECK((L * L.transpose() - K).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("factor_spd escalates jitter on a singular matrix") {
  Matrix K = Matrix::Ones(3, 3);  // rank one
  double used = 0.0;
  factor_spd(K, 1e-10, 1e-3, &used);
  CHECK(used > 0.0);
}

TEST_CASE("factor_spd reports indefinite matrices as numerical errors") {
  Matrix K = Matrix::Identity(2, 2);
  K(1, 1) = -1.0;
  try {
    factor_spd(K, 1e-10, 1e-6);
    FAIL("expected a numerical error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numerical);
    CHECK(std::string(e.what()).find("condition") != std::string::npos);
  }
}

}  // TEST_SUITE
