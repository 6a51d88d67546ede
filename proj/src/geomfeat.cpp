#include "hapmap/geomfeat.hpp"

#include <algorithm>
#include <cmath>

namespace hapmap {

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.z - o.z) - (a.z - o.z) * (b.x - o.x);
}

double signed_area2(std::span<const Point2> poly) {
  double s = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % n];
    s += a.x * b.z - b.x * a.z;
  }
  return s;
}

}  // namespace

Hull convex_hull_2d(std::span<const Point2> input) {
  std::vector<Point2> pts(input.begin(), input.end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  Hull hull;
  if (pts.size() < 3) {
    hull.vertices = pts;
    hull.degenerate = true;
    return hull;
  }
  std::vector<Point2> h(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  if (h.size() < 3) {
    // All input collinear: keep the two extremes.
    hull.vertices = {pts.front(), pts.back()};
    hull.degenerate = true;
    return hull;
  }
  hull.vertices = std::move(h);
  return hull;
}

double polygon_area(std::span<const Point2> polygon) {
  if (polygon.size() < 3) return 0.0;
  return std::abs(signed_area2(polygon)) / 2.0 / 1e6;
}

Point2 polygon_centroid(std::span<const Point2> polygon) {
  if (polygon.empty()) return {};
  const double a2 = polygon.size() >= 3 ? signed_area2(polygon) : 0.0;
  if (std::abs(a2) < 1e-9) {
    Point2 m;
    for (const auto& p : polygon) {
      m.x += p.x;
      m.z += p.z;
    }
    return {m.x / polygon.size(), m.z / polygon.size()};
  }
  double cx = 0.0, cz = 0.0;
  for (std::size_t i = 0, n = polygon.size(); i < n; ++i) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[(i + 1) % n];
    const double c = a.x * b.z - b.x * a.z;
    cx += (a.x + b.x) * c;
    cz += (a.z + b.z) * c;
  }
  return {cx / (3.0 * a2), cz / (3.0 * a2)};
}

double height_p90(const PointCloud& segment, double ground_y) {
  if (segment.empty()) throw Error("height_p90: empty segment");
  std::vector<double> h;
  h.reserve(segment.size());
  for (const auto& p : segment.points) h.push_back(p.y - ground_y);
  const std::size_t n = h.size();
  const auto rank = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n) - 1e-9));
  const auto idx = std::clamp<std::size_t>(rank, 1, n) - 1;
  std::nth_element(h.begin(), h.begin() + static_cast<std::ptrdiff_t>(idx), h.end());
  return h[idx];
}

Footprint compute_footprint(const PointCloud& segment) {
  Footprint fp;
  if (segment.empty()) return fp;
  std::vector<Point2> xz;
  xz.reserve(segment.size());
  double ysum = 0.0;
  for (const auto& p : segment.points) {
    xz.push_back({p.x, p.z});
    ysum += p.y;
  }
  fp.hull = convex_hull_2d(xz);
  fp.area_m2 = fp.hull.degenerate ? 0.0 : polygon_area(fp.hull.vertices);
  Point2 c;
  if (fp.hull.degenerate) {
    for (const auto& p : xz) {
      c.x += p.x;
      c.z += p.z;
    }
    c = {c.x / xz.size(), c.z / xz.size()};
  } else {
    c = polygon_centroid(fp.hull.vertices);
  }
  fp.barycenter = {c.x, ysum / segment.size(), c.z};
  return fp;
}

void GeometryThresholds::validate() const {
  if (!(height_low < height_high) || !(area_low < area_high))
    throw Error("geometry thresholds must be strictly increasing");
}

GeometricClass classify_geometry(double height_mm, double area_m2, const GeometryThresholds& t) {
  t.validate();
  GeometricClass g;
  g.height_mm = height_mm;
  g.area_m2 = area_m2;
  g.height_class = height_mm < t.height_low ? 1 : height_mm < t.height_high ? 2 : 3;
  g.area_class = area_m2 < t.area_low ? 1 : area_m2 < t.area_high ? 2 : 3;
  return g;
}

}  // namespace hapmap
