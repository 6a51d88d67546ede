#pragma once

#include <span>
#include <vector>

#include "hapmap/types.hpp"

namespace hapmap {

/// Point on the ground plane (x right, z forward), millimeters.
struct Point2 {
  double x = 0.0;
  double z = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
  friend auto operator<=>(const Point2&, const Point2&) = default;
};

using Polygon = std::vector<Point2>;

struct Hull {
  Polygon vertices;  // counter-clockwise in the (x, z) plane
  bool degenerate = false;
};

/// Monotone-chain hull; no duplicate or collinear vertices. Fewer than three
/// distinct points, or all collinear, yields a degenerate hull whose
/// vertices are the extreme points of the input.
Hull convex_hull_2d(std::span<const Point2> points);

/// Shoelace area of a simple polygon, converted from mm^2 to m^2.
double polygon_area(std::span<const Point2> polygon);

/// Area centroid of a simple polygon; vertex mean when the area vanishes.
Point2 polygon_centroid(std::span<const Point2> polygon);

/// Nearest-rank 90th percentile of point heights above ground_y
/// (1-based index ceil(0.9 n) of the sorted heights).
double height_p90(const PointCloud& segment, double ground_y);

struct Footprint {
  Hull hull;
  double area_m2 = 0.0;
  Vec3 barycenter;  // x, z: hull area centroid; y: mean point height
};

Footprint compute_footprint(const PointCloud& segment);

struct GeometryThresholds {
  double height_low = 400.0;   // mm; class 2 from here
  double height_high = 1000.0; // mm; class 3 from here
  double area_low = 0.25;      // m^2
  double area_high = 1.0;      // m^2

  void validate() const;
};

struct GeometricClass {
  int height_class = 1;
  int area_class = 1;
  double height_mm = 0.0;
  double area_m2 = 0.0;
};

/// Lower threshold bounds are inclusive: h == height_low is class 2.
GeometricClass classify_geometry(double height_mm, double area_m2, const GeometryThresholds& t = {});

}  // namespace hapmap
