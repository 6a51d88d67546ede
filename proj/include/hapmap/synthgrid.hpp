#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hapmap/depthio.hpp"
#include "hapmap/geomfeat.hpp"
#include "hapmap/labeling.hpp"
#include "hapmap/types.hpp"

namespace hapmap {

/// The pin area is a uniformly scaled top view of the camera's ground-plane
/// view field: a trapezoid whose near edge (z = l) is d_prime pins wide and
/// sits on row 0, centered on column cols/2.
struct AreaGeometry {
  double l = 800.0;     // mm
  double L = 4000.0;    // mm
  double hfov = 0.0;    // radians
  double d_prime = 24.0;
  int rows = 96;
  int cols = 120;

  static AreaGeometry from_intrinsics(const Intrinsics& k, double l = 800.0, double L = 4000.0,
                                      double d_prime = 24.0, int rows = 96, int cols = 120);

  /// Width of the view field at z = l, in mm.
  double d() const;
  /// Pins per millimeter.
  double scale() const;
  /// Last trapezoid row.
  int last_row() const;
  /// Half width (pins) of the trapezoid at a continuous row coordinate.
  double half_width(double row) const;
  /// Pin inside the trapezoid.
  bool active(int row, int col) const;
  /// First and last active column of a row (empty when first > last).
  std::pair<int, int> row_span(int row) const;

  void validate() const;
};

/// Continuous pin coordinates (u along columns, v along rows).
struct PinPoint {
  double u = 0.0;
  double v = 0.0;
};

struct PinCoord {
  int u = 0;
  int v = 0;
  friend bool operator==(const PinCoord&, const PinCoord&) = default;
};

/// Unrounded, unchecked mapping of a ground-plane point.
PinPoint map_continuous(double x, double z, const AreaGeometry& g);

bool in_view_field(double x, double z, const AreaGeometry& g);

/// Rounded pin of a ground-plane point inside the view field; always an
/// active pin. Throws Error("outside view field") otherwise.
PinCoord map_to_area(double x, double z, const AreaGeometry& g);

inline constexpr std::int8_t kInactive = -1;

struct PinGrid {
  int rows = 0;
  int cols = 0;
  std::vector<std::int8_t> cells;  // row-major; kInactive or a level 0..4

  PinGrid() = default;
  PinGrid(int r, int c, std::int8_t fill) : rows(r), cols(c), cells(static_cast<std::size_t>(r) * c, fill) {}
  std::int8_t at(int row, int col) const { return cells[static_cast<std::size_t>(row) * cols + col]; }
  std::int8_t& at(int row, int col) { return cells[static_cast<std::size_t>(row) * cols + col]; }
  friend bool operator==(const PinGrid&, const PinGrid&) = default;
};

inline constexpr int kMaxLevel = 4;
inline constexpr std::int8_t kHoleLevel = 0;
inline constexpr std::int8_t kGroundLevel = 1;
inline constexpr std::int8_t kFootprintLevel = 2;

/// Every trapezoid pin at ground level, the rest inactive.
PinGrid make_base_grid(const AreaGeometry& g);

/// Active pins touched by a ground-plane polygon (convex, or a degenerate
/// point/segment). A pin is touched when its unit cell overlaps the mapped
/// shape; parts outside the trapezoid are clipped.
std::vector<PinCoord> polygon_pins(std::span<const Point2> polygon, const AreaGeometry& g);

/// Pin anchoring an object's glyph: the mapped barycenter.
PinCoord glyph_anchor(const Footprint& f, const AreaGeometry& g);

/// Holes at level 0, footprints at level 2, accepted classes stamped with
/// their glyph centered on the barycenter pin: the 5x5 window drops to
/// ground level and the dots rise to label_level(height_class). Footprints
/// and dots take the maximum level, so object order does not matter.
PinGrid rasterize_scene(const std::vector<Polygon>& holes, const std::vector<ObjectDescriptor>& objects,
                        const GlyphSheet& sheet, const AreaGeometry& g);

struct RawRasterParams {
  int n_levels = 5;
  double floor_band = 50.0;    // mm above ground still counted as ground
  double band_height = 500.0;  // mm per band above that
};

/// Direct top-view rendering of a cloud: each point in the view field raises
/// its pin to 1 + band(height above ground_y). Points outside are skipped.
PinGrid rasterize_raw(const PointCloud& cloud, double ground_y, const AreaGeometry& g,
                      const RawRasterParams& params = {});

enum class GridFormat { json, ascii, pgm };
GridFormat parse_grid_format(std::string_view s);
std::string_view name(GridFormat f);

/// json: {"rows","cols","cells"} row-major with -1 inactive; ascii: one line
/// per row, U+00B7 for inactive pins and the level digit otherwise; pgm: P5
/// 8-bit, inactive 0, level k as 40 + 50k.
std::vector<std::uint8_t> emit(const PinGrid& grid, GridFormat format);

PinGrid parse_grid_json(std::string_view text);

}  // namespace hapmap
