#pragma once

#include "krig/common.hpp"

#include <functional>
#include <vector>

namespace krig {

using DistanceFn = std::function<double(const Point&, const Point&)>;

double euclidean(const Point& a, const Point& b);

/// Symmetric N x N distance matrix with zero diagonal.
Matrix pairwise_distances(const Coords& coords, const DistanceFn& dist = euclidean);

/// All upper-triangle pairwise distances, row-major order.
std::vector<double> pairwise_distance_list(const Coords& coords, const DistanceFn& dist = euclidean);

/// For every node, the k nearest *other* nodes, closest first; equal
/// distances are ordered by node id. Throws ErrorKind::config if k >= N.
std::vector<std::vector<int>> knn(const Coords& coords, int k, const DistanceFn& dist = euclidean);

/// The k entries of `refs` closest to `query` (indices into `refs`), ties by
/// index. Unlike knn() the query is not excluded from `refs`.
std::vector<int> nearest_of(const Point& query, const Coords& refs, int k,
                            const DistanceFn& dist = euclidean);

/// Convex hull in counter-clockwise order with collinear points removed.
/// Returns one point when all inputs coincide, two for a segment.
std::vector<Point> convex_hull(std::vector<Point> points);

/// Shoelace area of a simple polygon, positive for CCW order.
double polygon_area(const std::vector<Point>& polygon);

/// Support of a node's coordinate perturbation: the convex hull of the
/// midpoints between the node and each of its neighbors.
struct NodeDomain {
  int owner = -1;
  std::vector<Point> vertices;
  int hull_dim = 0;  // 0 point, 1 segment, 2 polygon

  double measure() const;  // 0, segment length, or polygon area
  Point centroid() const;  // centroid of the uniform law on the hull
  bool contains(const Point& p, double slack = 1e-12) const;
};

NodeDomain node_domain(int v, const Coords& coords, const std::vector<int>& neighbors);

/// Uniform draw over the hull's intrinsic measure. Polygons are fanned into
/// triangles around the vertex mean, a triangle is picked by area and then
/// sampled barycentrically.
Point sample_in_domain(const NodeDomain& domain, Rng& rng);

}  // namespace krig
