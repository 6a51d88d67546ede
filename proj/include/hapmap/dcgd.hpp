#pragma once

#include <optional>
#include <vector>

#include "hapmap/depthio.hpp"
#include "hapmap/types.hpp"

namespace hapmap {

/// Lowest back-projected pixel of one image column inside a depth slice.
struct CutEntry {
  int row = 0;
  double y = 0.0;  // mm, camera frame (y up)
};

/// Slice of the scene by the plane z = z_i: per column, the pixel with
/// |z - z_i| <= dz/2 whose 3D point has minimal y.
struct DepthCut {
  int index = 0;
  double z = 0.0;
  std::vector<std::optional<CutEntry>> entries;  // one slot per image column

  std::size_t occupied() const;
};

enum class SubCutKind { concave, convex };

/// Maximal run of occupied columns with the same kind.
struct SubCut {
  int c_start = 0;
  int c_end = 0;  // inclusive
  SubCutKind kind = SubCutKind::concave;
  std::vector<double> y;  // y of the occupied columns in the span, in order
};

struct DcgdParams {
  double z0 = 800.0;
  double zf = 4000.0;
  double dz = 50.0;
  double baseline_tol = 50.0;  // convex threshold above the cut baseline
  double pixel_tol = 15.0;     // admission of non-entry pixels above the ground baseline
  double level_tol = 25.0;     // entries this far above the global floor level are objects
};

/// n + 1 cuts with n = floor((zf - z0) / dz); cut i sits at z0 + i * dz.
std::vector<DepthCut> compute_depth_cuts(const DepthFrame& frame, const Intrinsics& k, double z0, double zf,
                                         double dz, Exec exec = Exec::parallel);

/// Splits a cut into alternating concave/convex runs. The baseline is the
/// lower median of the y values of entries not flagged in `claimed` (indexed
/// by column); entries with y > baseline + tol are convex.
std::vector<SubCut> split_subcuts(const DepthCut& cut, double baseline_tol,
                                  const std::vector<std::uint8_t>* claimed = nullptr);

struct GroundDetection {
  PixelMask mask;
  double ground_level = 0.0;  // estimated floor y in mm (0 when no ground)
  bool found = false;
};

/// Depth-cut ground detection. Returns the per-pixel ground mask.
GroundDetection detect_ground(const DepthFrame& frame, const Intrinsics& k, const DcgdParams& params = {},
                              Exec exec = Exec::parallel);

/// Median y of the back-projected ground pixels.
std::optional<double> ground_elevation(const DepthFrame& frame, const Intrinsics& k, const PixelMask& ground);

}  // namespace hapmap
