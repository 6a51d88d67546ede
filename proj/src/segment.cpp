#include "hapmap/segment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <tuple>

namespace hapmap {

namespace {

using CellKey = std::array<std::int64_t, 3>;

CellKey cell_of(const Vec3& p, double size) {
  return {static_cast<std::int64_t>(std::floor(p.x / size)), static_cast<std::int64_t>(std::floor(p.y / size)),
          static_cast<std::int64_t>(std::floor(p.z / size))};
}

// Points bucketed by cubic cell, cells sorted by key.
class CellIndex {
 public:
  CellIndex(const PointCloud& cloud, double size) : size_(size) {
    const std::size_t n = cloud.size();
    keys_.resize(n);
    for (std::size_t i = 0; i < n; ++i) keys_[i] = cell_of(cloud.points[i], size);
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) { return keys_[a] < keys_[b]; });
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j < n && keys_[order_[j]] == keys_[order_[i]]) ++j;
      cells_.push_back({keys_[order_[i]], i, j});
      i = j;
    }
  }

  template <typename F>
  void for_each_candidate(const Vec3& p, F&& f) const {
    const CellKey c = cell_of(p, size_);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const CellKey key{c[0] + dx, c[1] + dy, c[2] + dz};
          auto it = std::lower_bound(cells_.begin(), cells_.end(), key,
                                     [](const Cell& cell, const CellKey& k) { return cell.key < k; });
          if (it == cells_.end() || it->key != key) continue;
          for (std::size_t s = it->begin; s < it->end; ++s) f(order_[s]);
        }
  }

 private:
  struct Cell {
    CellKey key;
    std::size_t begin, end;
  };
  double size_;
  std::vector<CellKey> keys_;
  std::vector<int> order_;
  std::vector<Cell> cells_;
};

double dist2(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double leaf) {
  if (!(leaf > 0.0)) throw Error("voxel_downsample: leaf must be > 0");
  const std::size_t n = cloud.size();
  std::vector<CellKey> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = cell_of(cloud.points[i], leaf);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  PointCloud out;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    Vec3 sum;
    while (j < n && keys[order[j]] == keys[order[i]]) {
      const Vec3& p = cloud.points[order[j]];
      sum.x += p.x;
      sum.y += p.y;
      sum.z += p.z;
      ++j;
    }
    const double m = static_cast<double>(j - i);
    out.points.push_back({sum.x / m, sum.y / m, sum.z / m});
    i = j;
  }
  return out;
}

Segmentation dbscan(const PointCloud& cloud, double eps, int min_pts, Exec exec) {
  if (!(eps > 0.0)) throw Error("dbscan: eps must be > 0");
  if (min_pts < 1) throw Error("dbscan: min_pts must be >= 1");
  const int n = static_cast<int>(cloud.size());
  Segmentation seg;
  seg.labels.assign(static_cast<std::size_t>(n), kNoise);
  if (n == 0) return seg;

  const CellIndex index(cloud, eps);
  const double eps2 = eps * eps;
  std::vector<std::vector<int>> neighbors(static_cast<std::size_t>(n));
  auto query = [&](int i) {
    auto& out = neighbors[static_cast<std::size_t>(i)];
    const Vec3& p = cloud.points[static_cast<std::size_t>(i)];
    index.for_each_candidate(p, [&](int j) {
      if (dist2(p, cloud.points[static_cast<std::size_t>(j)]) <= eps2) out.push_back(j);
    });
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 64)
    for (int i = 0; i < n; ++i) query(i);
  } else {
    for (int i = 0; i < n; ++i) query(i);
  }

  std::vector<std::uint8_t> core(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) core[i] = static_cast<int>(neighbors[i].size()) >= min_pts;

  // Connected components of core points, in scan order of their first member.
  std::vector<int> stack;
  for (int i = 0; i < n; ++i) {
    if (!core[i] || seg.labels[i] != kNoise) continue;
    const int id = seg.k++;
    seg.labels[i] = id;
    stack.assign(1, i);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      for (int q : neighbors[p]) {
        if (core[q] && seg.labels[q] == kNoise) {
          seg.labels[q] = id;
          stack.push_back(q);
        }
      }
    }
  }

  // Border points: nearest core neighbor wins.
  for (int i = 0; i < n; ++i) {
    if (core[i]) continue;
    const Vec3& p = cloud.points[i];
    int best = -1;
    double best_d = 0.0;
    for (int q : neighbors[i]) {
      if (!core[q]) continue;
      const double d = dist2(p, cloud.points[q]);
      if (best < 0 || d < best_d ||
          (d == best_d && std::tie(cloud.points[q].x, cloud.points[q].y, cloud.points[q].z) <
                              std::tie(cloud.points[best].x, cloud.points[best].y, cloud.points[best].z))) {
        best = q;
        best_d = d;
      }
    }
    if (best >= 0) seg.labels[i] = seg.labels[best];
  }
  return seg;
}

std::vector<Segment> extract_segments(const PointCloud& cloud, const Segmentation& seg) {
  if (seg.labels.size() != cloud.size()) throw Error("extract_segments: labels do not align with cloud");
  std::vector<Segment> out(static_cast<std::size_t>(seg.k));
  for (int id = 0; id < seg.k; ++id) out[id].id = id;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const int l = seg.labels[i];
    if (l == kNoise) continue;
    if (l < 0 || l >= seg.k) throw Error("extract_segments: label out of range");
    out[static_cast<std::size_t>(l)].points.points.push_back(cloud.points[i]);
  }
  return out;
}

}  // namespace hapmap
