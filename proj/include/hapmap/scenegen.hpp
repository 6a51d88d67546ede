#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hapmap/depthio.hpp"
#include "hapmap/types.hpp"

namespace hapmap {

/// Axis-aligned box resting on the floor. Coordinates in millimeters on the
/// ground plane (x right, z forward from the camera).
struct BoxSpec {
  double center_x = 0.0;
  double center_z = 2000.0;
  double width = 500.0;   // extent along x
  double depth = 500.0;   // extent along z
  double height = 450.0;  // extent along y
  std::string fine_class = "box";
};

/// Floor rectangle that returns no depth (a hole in the ground).
struct HoleRegion {
  double x0 = 0.0;
  double z0 = 0.0;
  double x1 = 0.0;
  double z1 = 0.0;
};

/// Floor-plus-boxes scene seen by a camera whose optical axis is parallel
/// to the floor. The floor spans |x| <= floor_extent/2, 0 <= z <= floor_extent.
struct SceneSpec {
  double camera_height = 1200.0;
  double floor_extent = 20000.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
  std::vector<BoxSpec> boxes;
  std::vector<HoleRegion> holes;

  void validate() const;
};

enum class PixelTruth : std::uint8_t { background = 0, ground = 1, object = 2 };

struct GroundTruth {
  PixelMask ground_mask;
  std::vector<PixelMask> object_masks;  // one per box, in spec order
  std::vector<double> object_heights;   // mm
  // Ground-plane rectangles (x, z), counter-clockwise.
  std::vector<std::vector<std::pair<double, double>>> object_footprints;
};

struct RenderedScene {
  DepthFrame frame;
  GroundTruth truth;
};

/// Ray casts every pixel against the floor and the boxes. Noise is drawn
/// from a per-row generator seeded by (spec.seed, row), so the parallel and
/// serial kernels produce identical frames.
RenderedScene render_depth(const SceneSpec& spec, const Intrinsics& k, Exec exec = Exec::parallel);

/// SceneSpec text format (one item per line):
///   camera_height = 1200
///   floor_extent = 20000
///   noise_sigma = 10
///   seed = 7
///   box = center_x center_z width depth height [fine_class]
///   hole = x0 z0 x1 z1
SceneSpec parse_scene_spec(std::string_view text);
std::string format_scene_spec(const SceneSpec& spec);

// Parametric object clouds for the desk-scale classifier dataset.

/// Fine classes the sampler knows, in the training taxonomy order.
const std::vector<std::string>& synthetic_fine_classes();

/// Point cloud (mm, y up, resting on y = 0) of a class-characteristic shape
/// with randomized proportions. Throws Error on an unknown class tag.
PointCloud sample_box_cloud(std::string_view fine_class, Rng& rng);

/// Staircase cloud. Descending stairs drop below y = 0.
PointCloud sample_stairs_cloud(bool ascending, Rng& rng);

/// Toy shapes for trainer sanity checks.
PointCloud sample_sphere_cloud(Rng& rng);
PointCloud sample_elongated_box_cloud(Rng& rng);

}  // namespace hapmap
