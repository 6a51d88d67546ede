#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "hapmap/synthgrid.hpp"

using namespace hapmap;

namespace {

// Pins per millimeter from first principles: the view field at z = l is
// l * width / fx wide and maps onto d_prime pins.
double oracle_scale(const Intrinsics& k, double l, double d_prime) { return d_prime / (l * k.width / k.fx); }

Polygon rect(double x0, double z0, double x1, double z1) { return {{x0, z0}, {x1, z0}, {x1, z1}, {x0, z1}}; }

ObjectDescriptor object(int id, const Polygon& hull, int height_class, std::optional<LabelClass> label = {},
                        std::optional<StairsDir> dir = {}) {
  ObjectDescriptor d;
  d.segment_id = id;
  d.label = label;
  d.stairs = dir;
  d.geometry.height_class = height_class;
  d.footprint.hull.vertices = hull;
  double cx = 0, cz = 0;
  for (const auto& p : hull) {
    cx += p.x;
    cz += p.z;
  }
  d.footprint.barycenter = {cx / hull.size(), 0, cz / hull.size()};
  return d;
}

}  // namespace

TEST_CASE("area geometry from default intrinsics") {
  const Intrinsics k;
  const auto g = AreaGeometry::from_intrinsics(k);
  CHECK(g.hfov == doctest::Approx(2 * std::atan(640 / (2 * 575.8))));
  CHECK(g.d() == doctest::Approx(800 * 640 / 575.8));
  CHECK(g.scale() == doctest::Approx(oracle_scale(k, 800, 24)));
  // Far edge is L / l times the near edge.
  CHECK(g.half_width(g.scale() * (g.L - g.l)) / g.half_width(0) == doctest::Approx(5.0));
  CHECK(g.half_width(0) == doctest::Approx(12.0));
  CHECK(g.last_row() == std::lround(oracle_scale(k, 800, 24) * 3200));
  CHECK(g.last_row() < g.rows);
}

TEST_CASE("point mapping") {
  const Intrinsics k;
  const auto g = AreaGeometry::from_intrinsics(k);
  CHECK(map_to_area(0, 800, g) == PinCoord{60, 0});
  const double s = oracle_scale(k, 800, 24);
  CHECK(map_to_area(0, 4000, g) == PinCoord{60, static_cast<int>(std::lround(s * 3200))});
  CHECK(map_to_area(0, 4000, g).v == 86);
  CHECK(map_to_area(300, 2000, g) == PinCoord{static_cast<int>(std::lround(60 + 300 * s)),
                                             static_cast<int>(std::lround(1200 * s))});
  CHECK_THROWS_AS(map_to_area(0, 700, g), Error);
  CHECK_THROWS_AS(map_to_area(0, 4100, g), Error);
  CHECK_THROWS_AS(map_to_area(2000, 1000, g), Error);
  // Every in-field point lands on an active pin, including the corners.
  Rng rng(3);
  std::uniform_real_distribution<double> uz(800, 4000), ut(-1, 1);
  for (int i = 0; i < 2000; ++i) {
    const double z = uz(rng);
    const double x = ut(rng) * z * std::tan(g.hfov / 2);
    const auto c = map_to_area(x, z, g);
    CHECK(g.active(c.v, c.u));
  }
  const double t = std::tan(g.hfov / 2);
  for (double z : {800.0, 4000.0})
    for (double sgn : {-1.0, 1.0}) {
      const auto c = map_to_area(sgn * z * t, z, g);
      CHECK(g.active(c.v, c.u));
    }
}

TEST_CASE("invalid areas") {
  const Intrinsics k;
  CHECK_THROWS_AS(AreaGeometry::from_intrinsics(k, 800, 700).validate(), Error);
  CHECK_THROWS_AS(AreaGeometry::from_intrinsics(k, 800, 4000, 0).validate(), Error);
  // 86 rows do not fit in a 60-row grid.
  CHECK_THROWS_AS(AreaGeometry::from_intrinsics(k, 800, 4000, 24, 60).validate(), Error);
}

TEST_CASE("base grid is the trapezoid") {
  const auto g = AreaGeometry::from_intrinsics(Intrinsics{});
  const auto grid = make_base_grid(g);
  CHECK(grid.rows == 96);
  CHECK(grid.cols == 120);
  for (int r = 0; r < grid.rows; ++r) {
    const auto [a, b] = g.row_span(r);
    for (int c = 0; c < grid.cols; ++c) CHECK((grid.at(r, c) == kGroundLevel) == (r <= g.last_row() && c >= a && c <= b));
  }
  CHECK(grid.at(0, 60) == kGroundLevel);
  CHECK(grid.at(0, 30) == kInactive);
  CHECK(grid.at(95, 60) == kInactive);
  // Rows widen monotonically.
  for (int r = 1; r <= g.last_row(); ++r) CHECK(g.row_span(r).first <= g.row_span(r - 1).first);
}

TEST_CASE("rectangle fill matches pin-cell overlap") {
  const auto g = AreaGeometry::from_intrinsics(Intrinsics{});
  const double s = g.scale();
  Rng rng(21);
  std::uniform_real_distribution<double> ux(-500, 500), uz(1200, 3500), ue(37, 900);
  for (int t = 0; t < 40; ++t) {
    const double x0 = ux(rng), z0 = uz(rng);
    const double x1 = x0 + ue(rng), z1 = z0 + ue(rng);
    const auto pins = polygon_pins(rect(x0, z0, x1, z1), g);
    std::set<std::pair<int, int>> got;
    for (const auto& p : pins) got.insert({p.v, p.u});
    const double umin = 60 + s * x0, umax = 60 + s * x1, vmin = s * (z0 - 800), vmax = s * (z1 - 800);
    std::set<std::pair<int, int>> want;
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c)
        if (g.active(r, c) && c + 0.5 >= umin && c - 0.5 <= umax && r + 0.5 >= vmin && r - 0.5 <= vmax)
          want.insert({r, c});
    CHECK(got == want);
  }
}

TEST_CASE("scene rasterization") {
  const auto g = AreaGeometry::from_intrinsics(Intrinsics{});
  const auto& sheet = GlyphSheet::builtin();
  const Polygon box = rect(-300, 2200, 300, 2800);
  const Polygon hole = rect(400, 1200, 700, 1500);

  SUBCASE("geometry only") {
    const auto grid = rasterize_scene({hole}, {object(0, box, 2)}, sheet, g);
    std::set<std::pair<int, int>> fp, hp;
    for (const auto& p : polygon_pins(box, g)) fp.insert({p.v, p.u});
    for (const auto& p : polygon_pins(hole, g)) hp.insert({p.v, p.u});
    for (int r = 0; r < grid.rows; ++r)
      for (int c = 0; c < grid.cols; ++c) {
        if (!g.active(r, c)) {
          CHECK(grid.at(r, c) == kInactive);
          continue;
        }
        const int want = fp.count({r, c}) ? 2 : hp.count({r, c}) ? 0 : 1;
        CHECK(grid.at(r, c) == want);
      }
  }
  SUBCASE("accepted class stamps its glyph") {
    const auto obj = object(0, box, 2, LabelClass::store_in);
    const auto grid = rasterize_scene({}, {obj}, sheet, g);
    const auto a = glyph_anchor(obj.footprint, g);
    CHECK(a == map_to_area(0, 2500, g));
    const auto& glyph = sheet.get("store_in");
    for (int gr = 0; gr < 5; ++gr)
      for (int gc = 0; gc < 5; ++gc)
        CHECK(grid.at(a.v - 2 + gr, a.u - 2 + gc) == (glyph.at(gr, gc) ? 3 : 1));
  }
  SUBCASE("object order does not matter") {
    std::vector<ObjectDescriptor> objs{object(0, box, 3, LabelClass::sit_on),
                                       object(1, rect(-100, 2600, 500, 3300), 1, LabelClass::stairs, StairsDir::up),
                                       object(2, rect(-900, 1500, -400, 1900), 2)};
    const auto a = rasterize_scene({hole}, objs, sheet, g);
    std::reverse(objs.begin(), objs.end());
    CHECK(rasterize_scene({hole}, objs, sheet, g) == a);
  }
}

TEST_CASE("emit formats") {
  const auto g = AreaGeometry::from_intrinsics(Intrinsics{});
  auto grid = make_base_grid(g);
  grid.at(10, 60) = 4;
  grid.at(11, 60) = 0;

  const auto pgm = emit(grid, GridFormat::pgm);
  const std::string header = "P5\n120 96\n255\n";
  REQUIRE(pgm.size() == header.size() + 96 * 120);
  CHECK(std::string(pgm.begin(), pgm.begin() + header.size()) == header);
  CHECK(pgm[header.size() + 0 * 120 + 60] == 90);
  CHECK(pgm[header.size() + 10 * 120 + 60] == 240);
  CHECK(pgm[header.size() + 11 * 120 + 60] == 40);
  CHECK(pgm[header.size() + 0] == 0);

  const auto ascii = emit(grid, GridFormat::ascii);
  const std::string text(ascii.begin(), ascii.end());
  CHECK(std::count(text.begin(), text.end(), '\n') == 96);
  const auto first = text.substr(0, text.find('\n'));
  CHECK(first.find("·") == 0);
  CHECK(first.find('1') != std::string::npos);

  const auto js = emit(grid, GridFormat::json);
  CHECK(parse_grid_json(std::string(js.begin(), js.end())) == grid);
  CHECK_THROWS_AS(parse_grid_json("{\"rows\":2,\"cols\":2,\"cells\":[1,1,1]}"), Error);
  CHECK_THROWS_AS(parse_grid_format("png"), Error);
  CHECK(parse_grid_format(name(GridFormat::ascii)) == GridFormat::ascii);
}

TEST_CASE("raw top-view rendering") {
  const auto g = AreaGeometry::from_intrinsics(Intrinsics{});
  PointCloud c;
  c.points = {{0, -1200, 1000}, {0, -600, 2000}, {0, 900, 3000}, {0, -1200, 5000}, {0, -1100, 2500}};
  const auto grid = rasterize_raw(c, -1200, g);
  CHECK(grid.at(map_to_area(0, 1000, g).v, 60) == 1);
  CHECK(grid.at(map_to_area(0, 2000, g).v, 60) == 3);   // 600mm: band 2
  CHECK(grid.at(map_to_area(0, 3000, g).v, 60) == 4);   // capped
  CHECK(grid.at(map_to_area(0, 2500, g).v, 60) == 2);   // 100mm: band 1
  RawRasterParams bad;
  bad.n_levels = 6;
  CHECK_THROWS_AS(rasterize_raw(c, -1200, g, bad), Error);
  PointCloud shuffled = c;
  std::reverse(shuffled.points.begin(), shuffled.points.end());
  CHECK(rasterize_raw(shuffled, -1200, g) == grid);
}
