#include "helpers.hpp"

#include "krig/geometry.hpp"

#include <doctest.h>

#include <cmath>

using namespace krig;

TEST_SUITE("geometry") {

TEST_CASE("pairwise distances are symmetric with zero diagonal") {
  Coords c = {{0, 0}, {3, 4}, {1, 1}};
  const Matrix D = pairwise_distances(c);
  CHECK(D(0, 1) == 5.0);
  CHECK(D(1, 0) == 5.0);
  CHECK(D.diagonal().isZero());
  const auto list = pairwise_distance_list(c);
  REQUIRE(list.size() == 3);
  CHECK(list[0] == 5.0);
  CHECK(list[1] == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("knn excludes self and breaks ties by id") {
  Coords c = {{0, 0}, {1, 0}, {-1, 0}, {0, 2}};
  const auto nn = knn(c, 2, euclidean);
  CHECK(nn[0] == std::vector<int>{1, 2});
  CHECK(nn[1] == std::vector<int>{0, 2});
  CHECK_THROWS_AS(knn(c, 4), Error);
  CHECK(nearest_of({0.9, 0}, c, 1) == std::vector<int>{1});
  CHECK(nearest_of(c[0], c, 1) == std::vector<int>{0});
}

TEST_CASE("convex hull drops interior and collinear points") {
  std::vector<Point> pts = {{0, 0}, {1, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 1}, {0, 1}};
  const auto hull = convex_hull(pts);
  CHECK(hull.size() == 4);
  CHECK(polygon_area(hull) == doctest::Approx(4.0));
  CHECK(convex_hull({{1, 1}, {1, 1}}).size() == 1);
  CHECK(convex_hull({{0, 0}, {1, 1}, {2, 2}}).size() == 2);
}

TEST_CASE("node domain is the hull of neighbor midpoints") {
  Coords c = {{0, 0}, {2, 0}, {0, 2}, {-2, 0}, {0, -2}};
  const auto dom = node_domain(0, c, {1, 2, 3, 4});
  CHECK(dom.hull_dim == 2);
  CHECK(dom.measure() == doctest::Approx(2.0));  // diamond with half-diagonals 1
  CHECK(dom.centroid().x == doctest::Approx(0.0));
  CHECK(dom.contains({0.4, 0.4}));
  CHECK_FALSE(dom.contains({0.6, 0.6}));

  const auto seg = node_domain(0, c, {1, 3});
  CHECK(seg.hull_dim == 1);
  CHECK(seg.measure() == doctest::Approx(2.0));
  const auto pt = node_domain(0, c, {1});
  CHECK(pt.hull_dim == 0);
  CHECK(pt.vertices[0] == Point{1, 0});
  CHECK_THROWS_AS(node_domain(0, c, {}), Error);
}

TEST_CASE("domain samples stay inside and average to the centroid") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Coords c = testutil::random_coords(8, rng);
    const auto dom = node_domain(0, c, {1, 2, 3, 4, 5, 6, 7});
    REQUIRE(dom.hull_dim == 2);
    Point acc{0, 0};
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
      const Point p = sample_in_domain(dom, rng);
      REQUIRE(dom.contains(p, 1e-9));
      acc = acc + p;
    }
    acc = (1.0 / n) * acc;
    const Point cen = dom.centroid();
    const double span = std::sqrt(dom.measure());
    CHECK(std::hypot(acc.x - cen.x, acc.y - cen.y) < 0.02 * span);
  }
}

TEST_CASE("segment samples are uniform along the segment") {
  Rng rng(12);
  Coords c = {{0, 0}, {2, 0}, {-2, 0}};
  const auto seg = node_domain(0, c, {1, 2});
  int left = 0;
  for (int i = 0; i < 20000; ++i) left += sample_in_domain(seg, rng).x < 0.0;
  CHECK(std::abs(left - 10000) < 400);
}

}  // TEST_SUITE
