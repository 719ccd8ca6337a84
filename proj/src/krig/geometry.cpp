#include "krig/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace krig {

namespace {

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double norm(const Point& p) { return std::hypot(p.x, p.y); }

}  // namespace

double euclidean(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

Matrix pairwise_distances(const Coords& coords, const DistanceFn& dist) {
  const auto n = static_cast<Eigen::Index>(coords.size());
  Matrix D = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double d = dist(coords[static_cast<std::size_t>(i)], coords[static_cast<std::size_t>(j)]);
      D(i, j) = d;
      D(j, i) = d;
    }
  return D;
}

std::vector<double> pairwise_distance_list(const Coords& coords, const DistanceFn& dist) {
  std::vector<double> out;
  out.reserve(coords.size() * (coords.size() - (coords.empty() ? 0 : 1)) / 2);
  for (std::size_t i = 0; i < coords.size(); ++i)
    for (std::size_t j = i + 1; j < coords.size(); ++j) out.push_back(dist(coords[i], coords[j]));
  return out;
}

std::vector<std::vector<int>> knn(const Coords& coords, int k, const DistanceFn& dist) {
  const int n = static_cast<int>(coords.size());
  require(k >= 0 && k < n, ErrorKind::config,
          "k=" + std::to_string(k) + " must be below the node count " + std::to_string(n));
  const Matrix D = pairwise_distances(coords, dist);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  std::vector<int> order;
  for (int v = 0; v < n; ++v) {
    order.clear();
    for (int u = 0; u < n; ++u)
      if (u != v) order.push_back(u);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
      if (D(v, a) != D(v, b)) return D(v, a) < D(v, b);
      return a < b;
    });
    out[static_cast<std::size_t>(v)].assign(order.begin(), order.begin() + k);
  }
  return out;
}

std::vector<int> nearest_of(const Point& query, const Coords& refs, int k, const DistanceFn& dist) {
  const int n = static_cast<int>(refs.size());
  require(k >= 1 && k <= n, ErrorKind::config,
          "k=" + std::to_string(k) + " exceeds the " + std::to_string(n) + " available inputs");
  std::vector<double> d(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) d[i] = dist(query, refs[i]);
  std::vector<int> order(refs.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
    auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
    if (d[ua] != d[ub]) return d[ua] < d[ub];
    return a < b;
  });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(),
            [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() <= 2) return pts;
  // Andrew's monotone chain; popping on cross <= 0 drops collinear points.
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double polygon_area(const std::vector<Point>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& p = poly[i];
    const Point& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

double NodeDomain::measure() const {
  switch (hull_dim) {
    case 0: return 0.0;
    case 1: return norm(vertices[1] - vertices[0]);
    default: return polygon_area(vertices);
  }
}

Point NodeDomain::centroid() const {
  if (hull_dim == 0) return vertices[0];
  if (hull_dim == 1) return 0.5 * (vertices[0] + vertices[1]);
  // Area-weighted triangle centroids of the fan around vertex 0.
  Point acc{0.0, 0.0};
  double total = 0.0;
  for (std::size_t i = 1; i + 1 < vertices.size(); ++i) {
    double a = 0.5 * cross(vertices[0], vertices[i], vertices[i + 1]);
    Point c = (1.0 / 3.0) * (vertices[0] + vertices[i] + vertices[i + 1]);
    acc = acc + a * c;
    total += a;
  }
  return (1.0 / total) * acc;
}

bool NodeDomain::contains(const Point& p, double slack) const {
  if (hull_dim == 0) return norm(p - vertices[0]) <= slack;
  if (hull_dim == 1) {
    const Point d = vertices[1] - vertices[0];
    const double len = norm(d);
    const double along = ((p.x - vertices[0].x) * d.x + (p.y - vertices[0].y) * d.y) / len;
    const double off = std::abs(cross(vertices[0], vertices[1], p)) / len;
    return off <= slack * std::max(1.0, len) && along >= -slack && along <= len + slack;
  }
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Point& a = vertices[i];
    const Point& b = vertices[(i + 1) % vertices.size()];
    const double len = norm(b - a);
    if (cross(a, b, p) < -slack * std::max(1.0, len)) return false;
  }
  return true;
}

NodeDomain node_domain(int v, const Coords& coords, const std::vector<int>& neighbors) {
  require(!neighbors.empty(), ErrorKind::config,
          "node " + std::to_string(v) + " has no neighbors to build a domain from");
  const Point& s = coords[static_cast<std::size_t>(v)];
  std::vector<Point> mids;
  mids.reserve(neighbors.size());
  for (int u : neighbors) mids.push_back(s + 0.5 * (coords[static_cast<std::size_t>(u)] - s));
  NodeDomain dom;
  dom.owner = v;
  dom.vertices = convex_hull(std::move(mids));
  dom.hull_dim = dom.vertices.size() >= 3 ? 2 : static_cast<int>(dom.vertices.size()) - 1;
  return dom;
}

Point sample_in_domain(const NodeDomain& dom, Rng& rng) {
  if (dom.hull_dim == 0) return dom.vertices[0];
  if (dom.hull_dim == 1) {
    const double t = rng.uniform();
    return dom.vertices[0] + t * (dom.vertices[1] - dom.vertices[0]);
  }
  const std::size_t m = dom.vertices.size();
  Point c{0.0, 0.0};
  for (const Point& p : dom.vertices) c = c + p;
  c = (1.0 / static_cast<double>(m)) * c;
  std::vector<double> cumulative(m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    total += 0.5 * cross(c, dom.vertices[i], dom.vertices[(i + 1) % m]);
    cumulative[i] = total;
  }
  const double pick = rng.uniform() * total;
  std::size_t tri = static_cast<std::size_t>(
      std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
  tri = std::min(tri, m - 1);
  const Point& a = dom.vertices[tri];
  const Point& b = dom.vertices[(tri + 1) % m];
  const double r1 = std::sqrt(rng.uniform());
  const double r2 = rng.uniform();
  return (1.0 - r1) * c + (r1 * (1.0 - r2)) * a + (r1 * r2) * b;
}

}  // namespace krig
