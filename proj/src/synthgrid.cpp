#include "hapmap/synthgrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace hapmap {

AreaGeometry AreaGeometry::from_intrinsics(const Intrinsics& k, double l, double L, double d_prime, int rows,
                                           int cols) {
  k.validate();
  AreaGeometry g{l, L, k.hfov(), d_prime, rows, cols};
  g.validate();
  return g;
}

double AreaGeometry::d() const { return 2.0 * l * std::tan(hfov / 2.0); }

double AreaGeometry::scale() const { return d_prime / d(); }

int AreaGeometry::last_row() const { return static_cast<int>(std::lround(scale() * (L - l))); }

double AreaGeometry::half_width(double row) const { return (scale() * l + row) * std::tan(hfov / 2.0); }

bool AreaGeometry::active(int row, int col) const {
  if (row < 0 || row > last_row() || row >= rows || col < 0 || col >= cols) return false;
  return std::abs(col - cols / 2.0) <= half_width(row) + 0.5;
}

std::pair<int, int> AreaGeometry::row_span(int row) const {
  if (row < 0 || row > last_row() || row >= rows) return {0, -1};
  const double hw = half_width(row) + 0.5;
  const int first = std::max(0, static_cast<int>(std::ceil(cols / 2.0 - hw)));
  const int last = std::min(cols - 1, static_cast<int>(std::floor(cols / 2.0 + hw)));
  return {first, last};
}

void AreaGeometry::validate() const {
  if (!(l > 0.0) || !(L > l)) throw Error("area: need 0 < l < L");
  if (!(hfov > 0.0) || !(hfov < 3.14159265358979323846)) throw Error("area: field of view out of range");
  if (!(d_prime > 0.0)) throw Error("area: d_prime must be positive");
  if (rows <= 0 || cols <= 0) throw Error("area: grid dimensions must be positive");
  if (d_prime * L / l > cols + 1e-9) throw Error("area: far edge wider than the grid");
  if (last_row() >= rows) throw Error("area: depth extent exceeds the grid rows");
}

PinPoint map_continuous(double x, double z, const AreaGeometry& g) {
  const double s = g.scale();
  return {s * x + g.cols / 2.0, s * (z - g.l)};
}

bool in_view_field(double x, double z, const AreaGeometry& g) {
  const double eps = 1e-9 * g.L;
  return z >= g.l - eps && z <= g.L + eps && std::abs(x) <= z * std::tan(g.hfov / 2.0) + eps;
}

PinCoord map_to_area(double x, double z, const AreaGeometry& g) {
  if (!in_view_field(x, z, g)) throw Error("outside view field");
  const PinPoint p = map_continuous(x, z, g);
  PinCoord c{static_cast<int>(std::lround(p.u)), static_cast<int>(std::lround(p.v))};
  c.v = std::clamp(c.v, 0, g.last_row());
  const auto [first, last] = g.row_span(c.v);
  c.u = std::clamp(c.u, first, last);
  return c;
}

PinGrid make_base_grid(const AreaGeometry& g) {
  g.validate();
  PinGrid grid(g.rows, g.cols, kInactive);
  for (int r = 0; r <= g.last_row(); ++r) {
    const auto [first, last] = g.row_span(r);
    for (int c = first; c <= last; ++c) grid.at(r, c) = kGroundLevel;
  }
  return grid;
}

namespace {

// Sutherland-Hodgman against v >= lo (keep_above) or v <= hi.
std::vector<PinPoint> clip_v(const std::vector<PinPoint>& poly, double bound, bool keep_above) {
  std::vector<PinPoint> out;
  const std::size_t n = poly.size();
  auto inside = [&](const PinPoint& p) { return keep_above ? p.v >= bound : p.v <= bound; };
  for (std::size_t i = 0; i < n; ++i) {
    const PinPoint& a = poly[i];
    const PinPoint& b = poly[(i + 1) % n];
    const bool ia = inside(a), ib = inside(b);
    if (ia) out.push_back(a);
    if (ia != ib) {
      const double t = (bound - a.v) / (b.v - a.v);
      out.push_back({a.u + t * (b.u - a.u), bound});
    }
  }
  return out;
}

void raise(PinGrid& grid, int r, int c, int level) {
  auto& cell = grid.at(r, c);
  if (cell != kInactive) cell = static_cast<std::int8_t>(std::max<int>(cell, level));
}

}  // namespace

std::vector<PinCoord> polygon_pins(std::span<const Point2> polygon, const AreaGeometry& g) {
  std::vector<PinCoord> pins;
  if (polygon.empty()) return pins;
  std::vector<PinPoint> mapped;
  double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
  for (const auto& p : polygon) {
    mapped.push_back(map_continuous(p.x, p.z, g));
    vmin = std::min(vmin, mapped.back().v);
    vmax = std::max(vmax, mapped.back().v);
  }
  const int r0 = std::max(0, static_cast<int>(std::ceil(vmin - 0.5)));
  const int r1 = std::min(g.last_row(), static_cast<int>(std::floor(vmax + 0.5)));
  for (int r = r0; r <= r1; ++r) {
    auto slab = clip_v(clip_v(mapped, r - 0.5, true), r + 0.5, false);
    if (slab.empty()) continue;
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    for (const auto& p : slab) {
      umin = std::min(umin, p.u);
      umax = std::max(umax, p.u);
    }
    const auto [first, last] = g.row_span(r);
    const int c0 = std::max(first, static_cast<int>(std::ceil(umin - 0.5)));
    const int c1 = std::min(last, static_cast<int>(std::floor(umax + 0.5)));
    for (int c = c0; c <= c1; ++c) pins.push_back({c, r});
  }
  return pins;
}

PinCoord glyph_anchor(const Footprint& f, const AreaGeometry& g) {
  const double x = f.barycenter.x, z = f.barycenter.z;
  if (in_view_field(x, z, g)) return map_to_area(x, z, g);
  const PinPoint p = map_continuous(x, z, g);
  return {static_cast<int>(std::lround(p.u)), static_cast<int>(std::lround(p.v))};
}

PinGrid rasterize_scene(const std::vector<Polygon>& holes, const std::vector<ObjectDescriptor>& objects,
                        const GlyphSheet& sheet, const AreaGeometry& g) {
  PinGrid grid = make_base_grid(g);
  for (const auto& hole : holes) {
    for (const auto& p : polygon_pins(hole, g)) grid.at(p.v, p.u) = kHoleLevel;
  }
  struct Stamp {
    const Glyph* glyph;
    int level;
    PinCoord anchor;
  };
  std::vector<Stamp> stamps;
  for (const auto& obj : objects) {
    obj.validate();
    for (const auto& p : polygon_pins(obj.footprint.hull.vertices, g)) raise(grid, p.v, p.u, kFootprintLevel);
    if (obj.label)
      stamps.push_back({&glyph_for(*obj.label, obj.stairs, sheet), label_level(obj.geometry.height_class),
                        glyph_anchor(obj.footprint, g)});
  }
  // Glyph windows are cleared to ground level before any dot is raised, so
  // a level-2 glyph still stands out from a level-2 footprint and the result
  // does not depend on object order.
  const int half = kGlyphSize / 2;
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& st : stamps) {
      for (int gr = 0; gr < kGlyphSize; ++gr) {
        for (int gc = 0; gc < kGlyphSize; ++gc) {
          const int r = st.anchor.v - half + gr, c = st.anchor.u - half + gc;
          if (!g.active(r, c)) continue;
          if (pass == 0)
            grid.at(r, c) = kGroundLevel;
          else if (st.glyph->at(gr, gc))
            raise(grid, r, c, st.level);
        }
      }
    }
  }
  return grid;
}

PinGrid rasterize_raw(const PointCloud& cloud, double ground_y, const AreaGeometry& g, const RawRasterParams& params) {
  if (params.n_levels < 2 || params.n_levels > kMaxLevel + 1) throw Error("raw raster: n_levels must be 2..5");
  if (!(params.band_height > 0.0) || params.floor_band < 0.0) throw Error("raw raster: bad band sizes");
  PinGrid grid = make_base_grid(g);
  for (const auto& p : cloud.points) {
    if (!in_view_field(p.x, p.z, g)) continue;
    const double h = p.y - ground_y;
    int band = 0;
    if (h >= params.floor_band) {
      band = 1 + static_cast<int>(std::floor((h - params.floor_band) / params.band_height));
      band = std::min(band, params.n_levels - 2);
    }
    const PinCoord c = map_to_area(p.x, p.z, g);
    raise(grid, c.v, c.u, 1 + band);
  }
  return grid;
}

GridFormat parse_grid_format(std::string_view s) {
  if (s == "json") return GridFormat::json;
  if (s == "ascii") return GridFormat::ascii;
  if (s == "pgm") return GridFormat::pgm;
  throw Error("unknown format '" + std::string(s) + "'");
}

std::string_view name(GridFormat f) {
  switch (f) {
    case GridFormat::json: return "json";
    case GridFormat::ascii: return "ascii";
    case GridFormat::pgm: return "pgm";
  }
  return "?";
}

std::vector<std::uint8_t> emit(const PinGrid& grid, GridFormat format) {
  if (grid.rows <= 0 || grid.cols <= 0 || grid.cells.size() != static_cast<std::size_t>(grid.rows) * grid.cols)
    throw Error("emit: malformed grid");
  for (auto c : grid.cells)
    if (c < kInactive || c > kMaxLevel) throw Error("emit: level out of range");
  std::string out;
  switch (format) {
    case GridFormat::json: {
      nlohmann::json j;
      j["rows"] = grid.rows;
      j["cols"] = grid.cols;
      std::vector<int> cells(grid.cells.begin(), grid.cells.end());
      j["cells"] = cells;
      out = j.dump() + "\n";
      break;
    }
    case GridFormat::ascii:
      for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
          const auto v = grid.at(r, c);
          if (v == kInactive)
            out += "·";
          else
            out += static_cast<char>('0' + v);
        }
        out += '\n';
      }
      break;
    case GridFormat::pgm:
      out = "P5\n" + std::to_string(grid.cols) + " " + std::to_string(grid.rows) + "\n255\n";
      for (auto v : grid.cells) out += static_cast<char>(v == kInactive ? 0 : 40 + 50 * v);
      break;
  }
  return {out.begin(), out.end()};
}

PinGrid parse_grid_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("grid json: ") + e.what());
  }
  try {
    PinGrid g;
    g.rows = j.at("rows").get<int>();
    g.cols = j.at("cols").get<int>();
    const auto cells = j.at("cells").get<std::vector<int>>();
    if (g.rows <= 0 || g.cols <= 0 || cells.size() != static_cast<std::size_t>(g.rows) * g.cols)
      throw Error("grid json: cell count does not match rows x cols");
    for (int c : cells) {
      if (c < kInactive || c > kMaxLevel) throw Error("grid json: level out of range");
      g.cells.push_back(static_cast<std::int8_t>(c));
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("grid json: ") + e.what());
  }
}

}  // namespace hapmap
