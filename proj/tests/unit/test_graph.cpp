#include "helpers.hpp"

#include "krig/graph.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace krig;

namespace {

// Independent reference: drop edge (v,u) when v is masked at layer 0, and
// whenever both ends are masked.
Matrix reference_drop(const Matrix& A, const std::vector<int>& masked, int layer) {
  std::vector<bool> in(static_cast<std::size_t>(A.rows()), false);
  for (int v : masked) in[static_cast<std::size_t>(v)] = true;
  Matrix out = A;
  for (Eigen::Index v = 0; v < A.rows(); ++v)
    for (Eigen::Index u = 0; u < A.cols(); ++u) {
      const bool mv = in[static_cast<std::size_t>(v)], mu = in[static_cast<std::size_t>(u)];
      const double keep = (layer == 0 ? !mv : 1.0) * !(mv && mu);
      out(v, u) = A(v, u) * keep;
    }
  return out;
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("knn graph rows are normalized over k neighbors") {
  Rng rng(1);
  const Coords c = testutil::random_coords(15, rng);
  GraphBuilderParams p;
  p.k = 4;
  const auto g = build_graph(c, p);
  CHECK(g.params.sigma_rule == SigmaRule::explicit_value);
  CHECK(g.params.sigma == doctest::Approx(pairwise_distance_std(c)));
  for (int v = 0; v < 15; ++v) {
    CHECK(g.adjacency.row(v).sum() == doctest::Approx(1.0));
    CHECK((g.adjacency.row(v).array() > 0.0).count() == 4);
    CHECK(g.adjacency(v, v) == 0.0);
  }
}

TEST_CASE("knn weight matches the closed form") {
  Coords c = {{0, 0}, {1, 0}, {0, 2}};
  GraphBuilderParams p;
  p.k = 2;
  p.sigma_rule = SigmaRule::explicit_value;
  p.sigma = 1.0;
  const auto g = build_graph(c, p);
  const double w1 = std::exp(-1.0), w2 = std::exp(-4.0);
  CHECK(g.adjacency(0, 1) == doctest::Approx(w1 / (w1 + w2)));
  CHECK(g.adjacency(0, 2) == doctest::Approx(w2 / (w1 + w2)));
}

TEST_CASE("thresholded gaussian is symmetric and cut at delta") {
  Coords c = {{0, 0}, {1, 0}, {3, 0}};
  GraphBuilderParams p;
  p.kind = GraphKind::thresholded_gaussian;
  p.sigma_rule = SigmaRule::explicit_value;
  p.sigma = 2.0;
  p.delta_rule = DeltaRule::explicit_value;
  p.delta = 2.0;
  const auto g = build_graph(c, p);
  CHECK(g.adjacency(0, 1) == doctest::Approx(std::exp(-0.25)));
  CHECK(g.adjacency(1, 2) == doctest::Approx(std::exp(-1.0)));
  CHECK(g.adjacency(0, 2) == 0.0);
  CHECK((g.adjacency - g.adjacency.transpose()).isZero());
  // median of {1, 2, 3}
  CHECK(pairwise_distance_median(c) == 2.0);
}

TEST_CASE("drop_edges matches the two-indicator reference") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4 + static_cast<int>(rng.below(8));
    Matrix A = testutil::random_matrix(n, n, rng).cwiseAbs();
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    const auto masked = rng.sample_without_replacement(all, rng.below(n));
    for (int layer : {0, 1, 2}) {
      const Matrix got = drop_edges(A, masked, layer);
      CHECK((got - reference_drop(A, masked, layer)).isZero(0.0));
      CHECK((drop_edges(got, masked, layer) - got).isZero(0.0));
    }
  }
}

TEST_CASE("drop_edges with no mask is the identity") {
  Rng rng(3);
  const Matrix A = testutil::random_matrix(5, 5, rng);
  CHECK(drop_edges(A, {}, 0) == A);
  CHECK(drop_edges(A, {}, 1) == A);
}

TEST_CASE("drop_edges on a hand example") {
  Matrix A = Matrix::Ones(3, 3);
  const Matrix l0 = drop_edges(A, {1, 2}, 0);
  Matrix want0(3, 3);
  want0 << 1, 1, 1, 0, 0, 0, 0, 0, 0;
  CHECK(l0 == want0);
  const Matrix l1 = drop_edges(A, {1, 2}, 1);
  Matrix want1(3, 3);
  want1 << 1, 1, 1, 1, 0, 0, 1, 0, 0;
  CHECK(l1 == want1);
}

TEST_CASE("sym_normalize uses symmetric degrees") {
  Matrix A(2, 2);
  A << 0, 2, 0, 0;  // degrees (1, 1)
  const Matrix S = sym_normalize(A);
  CHECK(S(0, 1) == doctest::Approx(2.0));
  Matrix Z = Matrix::Zero(3, 3);
  Z(0, 1) = Z(1, 0) = 1.0;
  const Matrix SZ = sym_normalize(Z);
  CHECK(SZ.row(2).isZero());
  CHECK(SZ(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("block partition reassembles and rebuilds the observed block") {
  Rng rng(4);
  const Coords c = testutil::random_coords(12, rng);
  GraphBuilderParams p;
  p.k = 3;
  const auto g = build_graph(c, p, {10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21});
  const auto bp = block_partition(g, {13, 10, 20, 15});
  CHECK(bp.observed == std::vector<int>{3, 0, 10, 5});
  CHECK(bp.unseen.size() == 8);
  CHECK(bp.reassemble() == g.adjacency);
  Coords obs = {c[3], c[0], c[10], c[5]};
  CHECK(bp.rebuilt_oo == build_graph(obs, g.params).adjacency);
  CHECK_THROWS_AS(block_partition(g, {99}), Error);
}

TEST_CASE("resolved params rebuild identically on a subset") {
  Rng rng(5);
  const Coords c = testutil::random_coords(10, rng);
  GraphBuilderParams p;
  p.kind = GraphKind::thresholded_gaussian;
  const auto r = resolve_params(c, p);
  const Coords sub(c.begin(), c.begin() + 6);
  CHECK(build_graph(sub, r).params.sigma == r.sigma);
  CHECK(build_graph(sub, p).params.sigma != r.sigma);
}

TEST_CASE("edge list lists nonzero entries with dataset ids") {
  Coords c = {{0, 0}, {1, 0}, {5, 5}};
  GraphBuilderParams p;
  p.kind = GraphKind::thresholded_gaussian;
  p.delta_rule = DeltaRule::explicit_value;
  p.delta = 1.5;
  const auto g = build_graph(c, p, {7, 8, 9});
  const auto dir = testutil::temp_dir("graph_edges");
  write_edge_list(g, (dir / "e.csv").string());
  std::ifstream in(dir / "e.csv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "src,dst,weight");
  CHECK(lines[1].rfind("7,8,", 0) == 0);
  CHECK(lines[2].rfind("8,7,", 0) == 0);
}

}  // TEST_SUITE
