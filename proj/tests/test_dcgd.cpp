#include <doctest.h>

#include "hapmap/dcgd.hpp"
#include "hapmap/scenegen.hpp"

using namespace hapmap;

namespace {

DepthCut make_cut(const std::vector<std::optional<double>>& ys) {
  DepthCut c;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (ys[i])
      c.entries.push_back(CutEntry{0, *ys[i]});
    else
      c.entries.push_back(std::nullopt);
  }
  return c;
}

struct Score {
  double recall, precision, excluded;
};

Score score(const RenderedScene& s, const PixelMask& mask, const DcgdParams& p) {
  long tp = 0, fn = 0, fp = 0, obj = 0, ex = 0;
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    const bool truth = s.truth.ground_mask.bits[i], pred = mask.bits[i];
    const double z = s.frame.data[i];
    if (truth && z >= p.z0 && z <= p.zf) (pred ? tp : fn)++;
    if (pred && !truth) ++fp;
    for (const auto& m : s.truth.object_masks)
      if (m.bits[i]) {
        ++obj;
        ex += !pred;
      }
  }
  return {tp / double(tp + fn), tp + fp ? tp / double(tp + fp) : 1.0, obj ? ex / double(obj) : 1.0};
}

}  // namespace

TEST_CASE("default range gives 65 cuts") {
  const DepthFrame f(640, 480);
  const auto cuts = compute_depth_cuts(f, Intrinsics{}, 800, 4000, 50);
  REQUIRE(cuts.size() == 65);
  CHECK(cuts[0].z == 800);
  CHECK(cuts[64].z == 4000);
  CHECK_THROWS_AS(compute_depth_cuts(f, Intrinsics{}, 800, 800, 50), Error);
}

TEST_CASE("constant depth fills exactly cut 4") {
  DepthFrame f(640, 480);
  std::fill(f.data.begin(), f.data.end(), 1000);
  const auto cuts = compute_depth_cuts(f, Intrinsics{}, 800, 4000, 50);
  for (const auto& c : cuts) CHECK((c.occupied() > 0) == (c.index == 4));
  CHECK(cuts[4].occupied() == 640);
}

TEST_CASE("cut entry keeps the lowest y of its column") {
  Intrinsics k;
  k.fy = 500;
  k.cy = 240;
  DepthFrame f(640, 480);
  f.at(10, 190) = 1000;  // y = 100
  f.at(10, 90) = 1000;   // y = 300
  const auto cuts = compute_depth_cuts(f, k, 800, 4000, 50);
  REQUIRE(cuts[4].entries[10].has_value());
  CHECK(cuts[4].entries[10]->y == doctest::Approx(100));
  CHECK(cuts[4].entries[10]->row == 190);
}

TEST_CASE("serial and parallel cuts agree") {
  SceneSpec spec;
  spec.noise_sigma = 10;
  spec.boxes.push_back({0, 3000, 600, 600, 500, "box"});
  const auto s = render_depth(spec, Intrinsics{});
  const auto a = compute_depth_cuts(s.frame, Intrinsics{}, 800, 4000, 50, Exec::serial);
  const auto b = compute_depth_cuts(s.frame, Intrinsics{}, 800, 4000, 50, Exec::parallel);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t c = 0; c < a[i].entries.size(); ++c) {
      REQUIRE(a[i].entries[c].has_value() == b[i].entries[c].has_value());
      if (a[i].entries[c]) CHECK(a[i].entries[c]->y == b[i].entries[c]->y);
    }
  const auto ga = detect_ground(s.frame, Intrinsics{}, {}, Exec::serial);
  const auto gb = detect_ground(s.frame, Intrinsics{}, {}, Exec::parallel);
  CHECK(ga.mask.bits == gb.mask.bits);
}

TEST_CASE("sub-cuts") {
  SUBCASE("flat floor is one concave run") {
    std::vector<std::optional<double>> ys(100, -1200.0);
    const auto subs = split_subcuts(make_cut(ys), 50);
    REQUIRE(subs.size() == 1);
    CHECK(subs[0].kind == SubCutKind::concave);
    CHECK(subs[0].c_start == 0);
    CHECK(subs[0].c_end == 99);
  }
  SUBCASE("a centered bump gives concave, convex, concave") {
    std::vector<std::optional<double>> ys(100, -1200.0);
    for (int c = 40; c < 60; ++c) ys[c] = -800.0;
    const auto subs = split_subcuts(make_cut(ys), 50);
    REQUIRE(subs.size() == 3);
    CHECK(subs[0].kind == SubCutKind::concave);
    CHECK(subs[1].kind == SubCutKind::convex);
    CHECK(subs[1].c_start == 40);
    CHECK(subs[1].c_end == 59);
    CHECK(subs[1].y.size() == 20);
    CHECK(subs[2].kind == SubCutKind::concave);
  }
  SUBCASE("single column is concave") {
    const auto subs = split_subcuts(make_cut({-500.0}), 50);
    REQUIRE(subs.size() == 1);
    CHECK(subs[0].kind == SubCutKind::concave);
  }
  SUBCASE("runs partition the occupied columns") {
    std::vector<std::optional<double>> ys;
    Rng rng(2);
    for (int c = 0; c < 200; ++c) {
      if (rng() % 5 == 0)
        ys.push_back(std::nullopt);
      else
        ys.push_back(-1000.0 + (rng() % 3 == 0 ? 300.0 : 0.0));
    }
    const auto cut = make_cut(ys);
    std::size_t covered = 0;
    int prev_end = -1;
    for (const auto& s : split_subcuts(cut, 50)) {
      CHECK(s.c_start > prev_end);
      prev_end = s.c_end;
      covered += s.y.size();
    }
    CHECK(covered == cut.occupied());
  }
}

TEST_CASE("all-invalid frame yields an empty mask") {
  const auto g = detect_ground(DepthFrame(640, 480), Intrinsics{});
  CHECK_FALSE(g.found);
  CHECK(g.mask.count() == 0);
}

TEST_CASE("floor-only scene: recall and precision against the renderer") {
  SceneSpec spec;
  const auto s = render_depth(spec, Intrinsics{});
  const DcgdParams p;
  const auto g = detect_ground(s.frame, Intrinsics{}, p);
  const auto sc = score(s, g.mask, p);
  CHECK(sc.recall >= 0.99);
  CHECK(sc.precision >= 0.98);
  CHECK(g.ground_level == doctest::Approx(-1200).epsilon(0.01));
  CHECK(*ground_elevation(s.frame, Intrinsics{}, g.mask) == doctest::Approx(-1200).epsilon(0.001));
}

TEST_CASE("floor plus one box: object pixels stay out of the mask") {
  SceneSpec spec;
  spec.noise_sigma = 10;
  spec.boxes.push_back({-200, 3100, 700, 500, 600, "box"});
  const auto s = render_depth(spec, Intrinsics{});
  const DcgdParams p;
  const auto g = detect_ground(s.frame, Intrinsics{}, p);
  const auto sc = score(s, g.mask, p);
  CHECK(sc.excluded >= 0.95);
  CHECK(sc.recall >= 0.99);
  CHECK(sc.precision >= 0.98);
}

TEST_CASE("mask only holds valid pixels inside the cut range") {
  SceneSpec spec;
  spec.boxes.push_back({0, 2600, 500, 500, 300, "box"});
  const Intrinsics k;
  const auto s = render_depth(spec, k);
  DcgdParams p;
  p.zf = 3500;
  const auto g = detect_ground(s.frame, k, p);
  for (std::size_t i = 0; i < g.mask.bits.size(); ++i)
    if (g.mask.bits[i]) CHECK((s.frame.data[i] >= p.z0 && s.frame.data[i] <= p.zf));
}

TEST_CASE("adding a box never adds ground pixels (noise free)") {
  SceneSpec spec;
  spec.camera_height = 1100;
  const Intrinsics k;
  const auto base = detect_ground(render_depth(spec, k).frame, k);
  spec.boxes.push_back({300, 2900, 600, 600, 700, "box"});
  spec.boxes.push_back({-600, 3400, 400, 400, 400, "box"});
  const auto with = detect_ground(render_depth(spec, k).frame, k);
  for (std::size_t i = 0; i < base.mask.bits.size(); ++i)
    if (with.mask.bits[i]) CHECK(base.mask.bits[i]);
}

TEST_CASE("a box face cut off by the image border is not taken for floor") {
  // Camera high enough that the floor only enters the image behind the box:
  // the lowest visible row of the face sits about 40mm above the floor.
  SceneSpec spec;
  spec.camera_height = 1347;
  spec.boxes.push_back({740, 3488, 438, 682, 936, "box"});
  const Intrinsics k;
  const auto s = render_depth(spec, k);
  const auto g = detect_ground(s.frame, k);
  // Only the strip where the side face meets the visible floor may pass.
  double highest = -1e9;
  for (std::size_t i = 0; i < g.mask.bits.size(); ++i)
    if (g.mask.bits[i] && s.truth.object_masks[0].bits[i]) {
      const int v = static_cast<int>(i) / k.width;
      highest = std::max(highest, (k.cy - v) * s.frame.data[i] * k.depth_scale / k.fy + 1347);
    }
  CHECK(highest <= DcgdParams{}.pixel_tol + 1);
  CHECK(g.mask.count() > 10000);
}
