#pragma once

#include <vector>

#include "hapmap/types.hpp"

namespace hapmap {

inline constexpr int kNoise = -1;

/// Per-point cluster labels: -1 noise, otherwise 0..k-1.
struct Segmentation {
  std::vector<int> labels;
  int k = 0;
};

struct Segment {
  int id = 0;
  PointCloud points;
};

/// One centroid per occupied voxel of a grid anchored at the origin.
/// Output is ordered by voxel index (x, then y, then z).
PointCloud voxel_downsample(const PointCloud& cloud, double leaf);

/// DBSCAN with Euclidean distance. A point is core when at least `min_pts`
/// points (itself included) lie within `eps`. Cluster ids follow the scan
/// order of each cluster's first core point. A border point joins the
/// cluster of its nearest core neighbor (ties: lexicographically smallest
/// core coordinates), which keeps the partition independent of input order.
Segmentation dbscan(const PointCloud& cloud, double eps, int min_pts, Exec exec = Exec::parallel);

/// One segment per cluster id, ordered by id; noise is dropped.
std::vector<Segment> extract_segments(const PointCloud& cloud, const Segmentation& seg);

}  // namespace hapmap
