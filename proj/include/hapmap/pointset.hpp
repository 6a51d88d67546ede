#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "hapmap/types.hpp"

namespace hapmap {

/// Area-weighted surface sampling of an ASCII OFF mesh. Polygonal faces are
/// fan-triangulated; points are uniform within each chosen triangle.
PointCloud sample_mesh_off(std::string_view off_text, std::size_t n_points, Rng& rng);

/// Centers on the centroid and scales so the farthest point has norm 1.
/// A cloud with zero extent maps to the origin.
PointCloud normalize_unit_sphere(const PointCloud& cloud);

/// Random rotation about the up (y) axis followed by clipped Gaussian
/// jitter on every coordinate.
PointCloud augment(const PointCloud& cloud, Rng& rng, double sigma = 0.01, double clip = 0.05);

/// Same as augment with the yaw angle fixed.
PointCloud augment_with_angle(const PointCloud& cloud, double angle, Rng& rng, double sigma = 0.01,
                              double clip = 0.05);

PointCloud rotate_yaw(const PointCloud& cloud, double angle);

/// Fixed-size draw: without replacement when the cloud has at least n
/// points; otherwise every point once plus random duplicates.
PointCloud resample(const PointCloud& cloud, std::size_t n, Rng& rng);

}  // namespace hapmap
