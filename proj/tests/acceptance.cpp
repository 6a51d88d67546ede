// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>

#include "fixed_classifier.hpp"
#include "hapmap/classifier.hpp"
#include "hapmap/dcgd.hpp"
#include "hapmap/pipeline.hpp"
#include "hapmap/scenegen.hpp"
#include "oracles.hpp"

using namespace hapmap;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const std::vector<std::string> kSix{"sit_on", "put_on", "store_in", "bathtub", "toilet", "stairs"};

std::vector<double> peaked(int index, double p) {
  std::vector<double> v(kSix.size(), (1.0 - p) / (kSix.size() - 1));
  v[static_cast<std::size_t>(index)] = p;
  return v;
}

double uniform(Rng& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

// Nearest floor depth visible in the bottom image row.
double nearest_visible_floor(double camera_height, const Intrinsics& k) {
  return camera_height * k.fy / (k.height - 1 - k.cy);
}

// --- 1 ---------------------------------------------------------------------
Outcome geometry_fidelity() {
  const auto t0 = Clock::now();
  const PipelineConfig cfg;
  Rng rng(101);
  const int n = 24;
  double total = 0.0, worst = 0.0;
  for (int i = 0; i < n; ++i) {
    SceneSpec s;
    s.noise_sigma = 10;
    s.seed = 1000 + i;
    s.camera_height = uniform(rng, 1200, 1400);
    BoxSpec b{uniform(rng, -400, 400), uniform(rng, 2700, 3300), uniform(rng, 400, 700), uniform(rng, 400, 700),
              uniform(rng, 300, 900), "box"};
    s.boxes.push_back(b);
    const auto r = run_pipeline(cfg, render_depth(s, cfg.intrinsics).frame, nullptr);
    double err = b.height;
    double best = 1e18;
    for (const auto& o : r.objects) {
      const double d = std::hypot(o.footprint.barycenter.x - b.center_x, o.footprint.barycenter.z - b.center_z);
      if (d < best) {
        best = d;
        err = std::abs(o.geometry.height_mm - b.height);
      }
    }
    total += err;
    worst = std::max(worst, err);
  }
  const double mae = total / n, secs = seconds_since(t0);
  return {mae <= 30.0 && secs < 30.0,
          fmt("mean |p90 - true height| = %.2f mm over %d boxes (max %.1f, limit 30); %.1f s (limit 30)", mae, n,
              worst, secs)};
}

// --- 2 ---------------------------------------------------------------------
Outcome mapping_constants() {
  const auto g = AreaGeometry::from_intrinsics(Intrinsics{}, 800, 4000);
  const double near = 2 * g.half_width(map_continuous(0, 800, g).v);
  const double far = 2 * g.half_width(map_continuous(0, 4000, g).v);
  // Width of the view field at a depth, mapped to pins, straight from the camera model.
  const double t = Intrinsics{}.width / (2 * Intrinsics{}.fx);
  const double direct = (map_continuous(4000 * t, 4000, g).u - map_continuous(-4000 * t, 4000, g).u) /
                        (map_continuous(800 * t, 800, g).u - map_continuous(-800 * t, 800, g).u);
  const auto c = map_continuous(0, 800, g);
  const auto pin = map_to_area(0, 800, g);
  const bool ok = std::abs(far / near - 5.0) <= 1e-9 && std::abs(direct - 5.0) <= 1e-9 && c.u == g.cols / 2.0 &&
                  c.v == 0.0 && pin == PinCoord{g.cols / 2, 0};
  return {ok, fmt("width ratio %.12f (trapezoid) / %.12f (field edges); near center -> (%g, %g), pin (%d, %d)",
                  far / near, direct, c.u, c.v, pin.u, pin.v)};
}

// --- 3 ---------------------------------------------------------------------
Outcome pin_levels() {
  const PipelineConfig cfg;
  const auto g = cfg.area(cfg.intrinsics);
  Rng rng(303);
  int bad_level = 0, bad_ground = 0, bad_hole = 0, ground_only = 0, with_hole = 0;
  for (int i = 0; i < 100; ++i) {
    SceneSpec s;
    s.seed = 5000 + i;
    s.noise_sigma = uniform(rng, 0, 10);
    s.camera_height = uniform(rng, 1100, 1500);
    const double zvis = nearest_visible_floor(s.camera_height, cfg.intrinsics);
    const bool hole = rng() % 2 == 0;
    double behind = 2000;
    std::optional<HoleRegion> h;
    if (hole && zvis + 150 < 3500) {
      const double z0 = uniform(rng, zvis + 100, 3500);
      const double x0 = uniform(rng, -500, 200);
      h = HoleRegion{x0, z0, x0 + uniform(rng, 300, 500), z0 + uniform(rng, 250, 450)};
      s.holes.push_back(*h);
      behind = h->z1 + 400;
    }
    const int boxes = static_cast<int>(rng() % 4);
    for (int b = 0; b < boxes; ++b) {
      const double z = uniform(rng, std::max(behind, 2000.0), std::max(behind, 2000.0) + 1500);
      s.boxes.push_back({uniform(rng, -900, 900), z, uniform(rng, 300, 800), uniform(rng, 300, 800),
                         uniform(rng, 200, 1100), "box"});
    }
    std::optional<FixedClassifier> clf;
    if (rng() % 2 == 0) clf.emplace(kSix, peaked(static_cast<int>(rng() % 6), uniform(rng, 0.3, 0.99)));
    const auto r = run_pipeline(cfg, render_depth(s, cfg.intrinsics).frame, clf ? &*clf : nullptr);
    for (int row = 0; row < r.grid.rows; ++row)
      for (int col = 0; col < r.grid.cols; ++col) {
        const int v = r.grid.at(row, col);
        if (g.active(row, col) ? (v < 0 || v > 4) : v != kInactive) ++bad_level;
        if (s.boxes.empty() && s.holes.empty() && g.active(row, col) && v != kGroundLevel) ++bad_ground;
      }
    if (s.boxes.empty() && s.holes.empty()) ++ground_only;
    if (h) {
      ++with_hole;
      const auto c = map_to_area((h->x0 + h->x1) / 2, (h->z0 + h->z1) / 2, g);
      if (r.grid.at(c.v, c.u) != kHoleLevel) ++bad_hole;
    }
  }
  return {bad_level == 0 && bad_ground == 0 && bad_hole == 0 && ground_only > 0 && with_hole > 0,
          fmt("100 scenes: %d out-of-contract cells; %d ground-only scenes with %d non-1 pins; %d holes, %d not at "
              "level 0",
              bad_level, ground_only, bad_ground, with_hole, bad_hole)};
}

// --- 4 ---------------------------------------------------------------------
bool glyph_stamped(const PinGrid& grid, const Glyph& glyph, PinCoord a, int level) {
  for (int r = 0; r < kGlyphSize; ++r)
    for (int c = 0; c < kGlyphSize; ++c)
      if (grid.at(a.v - 2 + r, a.u - 2 + c) != (glyph.at(r, c) ? level : kGroundLevel)) return false;
  return true;
}

Outcome confidence_gating() {
  const PipelineConfig cfg;
  SceneSpec s;
  s.noise_sigma = 10;
  s.boxes.push_back({100, 3000, 600, 600, 500, "box"});
  const auto frame = render_depth(s, cfg.intrinsics).frame;
  const auto geometry_only = run_pipeline(cfg, frame, nullptr);
  auto with = [&](double p) {
    const FixedClassifier c(kSix, peaked(2, p));
    return run_pipeline(cfg, frame, &c);
  };
  const auto low = with(0.53), edge = with(0.85), high = with(0.90);
  const bool low_ok = low.grid == geometry_only.grid && !low.objects.at(0).label;
  const bool edge_ok = edge.grid == geometry_only.grid && !edge.objects.at(0).label;
  const auto& o = high.objects.at(0);
  const auto anchor = glyph_anchor(o.footprint, cfg.area(cfg.intrinsics));
  const bool high_ok = o.label == LabelClass::store_in &&
                       glyph_stamped(high.grid, GlyphSheet::builtin().get("store_in"), anchor,
                                     label_level(o.geometry.height_class)) &&
                       high.grid != geometry_only.grid;
  return {low_ok && edge_ok && high_ok,
          fmt("p=0.53 footprint only: %s; p=0.85 rejected: %s; p=0.90 footprint + glyph: %s", low_ok ? "yes" : "no",
              edge_ok ? "yes" : "no", high_ok ? "yes" : "no")};
}

// --- 5 ---------------------------------------------------------------------
PointCloud random_cloud(int n, Rng& rng) {
  PointCloud c;
  for (int i = 0; i < n; ++i) c.points.push_back({uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)});
  return c;
}

std::string permutation_invariance(bool& ok) {
  Rng rng(51);
  const auto m = make_model(ModelShape{}, kSix, 7);
  auto c = random_cloud(256, rng);
  const auto ref = forward(m, c);
  int mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    std::shuffle(c.points.begin(), c.points.end(), rng);
    if (forward(m, c) != ref) ++mismatches;
  }
  ok = mismatches == 0;
  return fmt("(a) %d/100 permutations differ", mismatches);
}

std::string gradient_check(bool& ok) {
  Rng rng(52);
  ModelShape shape;
  shape.n_points = 32;
  shape.point_widths = {3, 16, 24};
  shape.head_widths = {24, 16};
  const auto m = to_double(make_model(shape, kSix, 9));
  std::vector<Sample> batch;
  for (int i = 0; i < 6; ++i) batch.push_back({random_cloud(32, rng), i});
  const double err = grad_check(m, batch);
  ok = err <= 1e-4;
  return fmt("(b) grad check max rel err %.2e over %zu params", err, m.parameter_count());
}

// Fraction correct after mapping predicted and true class names through `merge`.
double accuracy(const Evaluation& e, const std::vector<LabeledCloud>& set, const std::vector<std::string>& classes,
                const std::function<std::string(const std::string&)>& merge) {
  int hit = 0;
  for (std::size_t i = 0; i < set.size(); ++i)
    hit += merge(classes[e.predicted[i]]) == merge(classes[set[i].label]);
  return static_cast<double>(hit) / set.size();
}

std::string to_label_name(const std::string& s) { return std::string(name(*label_class_from_name(s))); }

std::string coarse_dominance(bool& ok, const PointSetModel& six, const DatasetSplit& six_data) {
  const auto fine = make_synthetic_dataset(40, 20, 53, Taxonomy::fine);
  ModelShape shape;
  shape.n_points = 128;
  shape.point_widths = {3, 32, 64, 128};
  shape.head_widths = {128, 64};
  TrainConfig tc;
  tc.epochs = 6;
  tc.lr_step = 4;
  tc.seed = 53;
  const auto model = train(make_model(shape, fine.classes, 53), fine.train, {}, tc).model;
  const auto fresh = make_synthetic_dataset(1, 20, 54, Taxonomy::fine);
  const auto identity = [](const std::string& s) { return s; };
  std::string out = "(c)";
  ok = true;
  auto check = [&](const char* label, const PointSetModel& m, const std::vector<LabeledCloud>& set) {
    const auto e = evaluate(m, set, 99);
    const double f = accuracy(e, set, m.classes, identity), g = accuracy(e, set, m.classes, to_label_name);
    ok = ok && g >= f;
    out += fmt(" %s fine %.3f <= merged %.3f;", label, f, g);
  };
  check("14-class train", model, fine.train);
  check("14-class test", model, fine.test);
  check("14-class fresh", model, fresh.test);
  check("6-class test", six, six_data.test);
  return out;
}

std::string synthetic_accuracy(bool& ok, PointSetModel& model_out, DatasetSplit& data_out) {
  const auto t0 = Clock::now();
  data_out = make_synthetic_dataset(200, 50, 1);
  TrainConfig tc;
  tc.epochs = 15;
  tc.lr_step = 6;
  tc.seed = 1;
  const auto r = train(make_model(ModelShape{}, data_out.classes, 1), data_out.train, data_out.test, tc);
  const double secs = seconds_since(t0);
  model_out = r.model;
  const double acc = r.history.back().test_accuracy;

  // Same seeds, serial kernels, first two epochs: the history must repeat bit for bit.
  const auto again = make_synthetic_dataset(200, 50, 1);
  bool same_data = again.train.size() == data_out.train.size();
  for (std::size_t i = 0; same_data && i < again.train.size(); ++i)
    same_data = again.train[i].cloud.points == data_out.train[i].cloud.points;
  tc.epochs = 2;
  tc.exec = Exec::serial;
  const auto prefix = train(make_model(ModelShape{}, again.classes, 1), again.train, again.test, tc);
  bool same_run = true;
  for (int e = 0; e < 2; ++e)
    same_run = same_run && prefix.history[e].train_loss == r.history[e].train_loss &&
               prefix.history[e].test_loss == r.history[e].test_loss;
  ok = acc >= 0.90 && secs < 300.0 && same_data && same_run;
  return fmt("(d) 6-class synthetic 200/50 per class: test accuracy %.3f (limit 0.90) in %.0f s (limit 300); "
             "rerun identical: %s",
             acc, secs, same_data && same_run ? "yes" : "no");
}

Outcome classifier_properties() {
  bool a = false, b = false, c = false, d = false;
  std::string out = permutation_invariance(a) + "; " + gradient_check(b) + "; ";
  PointSetModel six;
  DatasetSplit six_data;
  const std::string dd = synthetic_accuracy(d, six, six_data);
  out += coarse_dominance(c, six, six_data) + " " + dd;
  return {a && b && c && d, out};
}

// --- 6 ---------------------------------------------------------------------
Outcome segmentation_oracle() {
  Rng rng(606);
  int mismatch = 0, perm_mismatch = 0;
  for (int t = 0; t < 50; ++t) {
    PointCloud c;
    const int n = 100 + static_cast<int>(rng() % 401);
    const int blobs = 1 + static_cast<int>(rng() % 4);
    std::vector<Vec3> centers;
    for (int b = 0; b < blobs; ++b) centers.push_back({uniform(rng, 0, 2000), uniform(rng, 0, 2000), uniform(rng, 0, 2000)});
    std::normal_distribution<double> spread(0, uniform(rng, 20, 80));
    for (int i = 0; i < n; ++i) {
      if (rng() % 5 == 0) {
        c.points.push_back({uniform(rng, 0, 2000), uniform(rng, 0, 2000), uniform(rng, 0, 2000)});
      } else {
        const auto& m = centers[rng() % centers.size()];
        c.points.push_back({m.x + spread(rng), m.y + spread(rng), m.z + spread(rng)});
      }
    }
    const double eps = uniform(rng, 30, 90);
    const int min_pts = 3 + static_cast<int>(rng() % 6);
    const auto got = dbscan(c, eps, min_pts);
    if (got.labels != oracle::dbscan(c, eps, min_pts).labels) ++mismatch;
    PointCloud p = c;
    std::shuffle(p.points.begin(), p.points.end(), rng);
    if (oracle::partition_of(p, dbscan(p, eps, min_pts).labels) != oracle::partition_of(c, got.labels))
      ++perm_mismatch;
  }
  return {mismatch == 0 && perm_mismatch == 0,
          fmt("50 clouds (n 100..500): %d differ from the all-pairs reference, %d change under permutation", mismatch,
              perm_mismatch)};
}

// --- 7 ---------------------------------------------------------------------
Outcome ground_detection() {
  const Intrinsics k;
  const DcgdParams p;
  Rng rng(707);
  double min_recall = 1, min_precision = 1, min_excluded = 1;
  for (int i = 0; i < 10; ++i) {
    SceneSpec s;
    s.noise_sigma = 10;
    s.seed = 700 + i;
    s.camera_height = uniform(rng, 1150, 1450);
    for (int b = 0; b < i % 3; ++b)
      s.boxes.push_back({uniform(rng, -900, 900), uniform(rng, 2400, 3600), uniform(rng, 400, 800),
                         uniform(rng, 400, 800), uniform(rng, 300, 1000), "box"});
    const auto scene = render_depth(s, k);
    const auto mask = detect_ground(scene.frame, k, p).mask;
    long tp = 0, fn = 0, fp = 0, obj = 0, ex = 0;
    for (std::size_t j = 0; j < mask.bits.size(); ++j) {
      const bool truth = scene.truth.ground_mask.bits[j], pred = mask.bits[j];
      const double z = scene.frame.data[j];
      if (truth && z >= p.z0 && z <= p.zf) (pred ? tp : fn)++;
      if (pred && !truth) ++fp;
      for (const auto& m : scene.truth.object_masks)
        if (m.bits[j]) {
          ++obj;
          ex += !pred;
        }
    }
    min_recall = std::min(min_recall, tp / double(tp + fn));
    min_precision = std::min(min_precision, tp + fp ? tp / double(tp + fp) : 1.0);
    if (obj) min_excluded = std::min(min_excluded, ex / double(obj));
  }
  return {min_recall >= 0.99 && min_precision >= 0.98 && min_excluded >= 0.95,
          fmt("10 scenes, worst case: recall %.4f (0.99), precision %.4f (0.98), object pixels excluded %.4f (0.95)",
              min_recall, min_precision, min_excluded)};
}

// --- 8 ---------------------------------------------------------------------
std::optional<PinCoord> find_glyph(const PinGrid& grid, const Glyph& glyph, int level) {
  for (int v = 2; v + 2 < grid.rows; ++v)
    for (int u = 2; u + 2 < grid.cols; ++u)
      if (glyph_stamped(grid, glyph, {u, v}, level)) return PinCoord{u, v};
  return std::nullopt;
}

Outcome localization() {
  const PipelineConfig cfg;
  const auto g = cfg.area(cfg.intrinsics);
  const FixedClassifier clf(kSix, peaked(0, 0.95));
  const auto& glyph = GlyphSheet::builtin().get("sit_on");
  Rng rng(808);
  int off = 0, missing = 0, worst = 0;
  double slowest = 0;
  for (int i = 0; i < 12; ++i) {
    SceneSpec s;
    s.noise_sigma = 10;
    s.seed = 800 + i;
    s.camera_height = uniform(rng, 1200, 1400);
    const BoxSpec b{uniform(rng, -700, 700), uniform(rng, 2600, 3500), uniform(rng, 400, 800), uniform(rng, 400, 800),
                    uniform(rng, 300, 900), "chair"};
    s.boxes.push_back(b);
    const auto frame = render_depth(s, cfg.intrinsics).frame;
    const auto t0 = Clock::now();
    const auto r = run_pipeline(cfg, frame, &clf);
    slowest = std::max(slowest, seconds_since(t0));
    const int level = label_level(classify_geometry(b.height, 0).height_class);
    const auto found = find_glyph(r.grid, glyph, level);
    if (!found) {
      ++missing;
      continue;
    }
    const auto want = map_to_area(b.center_x, b.center_z, g);
    const int d = std::max(std::abs(found->u - want.u), std::abs(found->v - want.v));
    worst = std::max(worst, d);
    off += d > 1;
  }
  return {off == 0 && missing == 0 && slowest < 5.0,
          fmt("12 boxes: glyph center within %d pin(s) of the true barycenter pin (limit 1), %d missing; slowest "
              "frame %.3f s (limit 5)",
              worst, missing, slowest)};
}

// --- 9 ---------------------------------------------------------------------
Outcome determinism() {
  const auto dir = fs::temp_directory_path() / "hapmap_acceptance";
  fs::create_directories(dir);
  SceneSpec s;
  s.noise_sigma = 10;
  s.boxes.push_back({-500, 3300, 600, 500, 800, "box"});
  s.boxes.push_back({600, 3600, 500, 700, 1200, "box"});
  s.holes.push_back({-200, 2950, 200, 3150});
  PipelineConfig cfg;
  const auto frame = render_depth(s, cfg.intrinsics).frame;
  const FixedClassifier clf(kSix, peaked(5, 0.97));
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
  };
  bool same = true;
  for (auto f : {GridFormat::json, GridFormat::ascii, GridFormat::pgm}) {
    cfg.format = f;
    for (int run = 0; run < 2; ++run) {
      const auto r = run_pipeline(cfg, frame, &clf);
      std::ofstream(dir / fmt("grid%d", run), std::ios::binary)
          .write(reinterpret_cast<const char*>(r.grid_bytes.data()), static_cast<std::streamsize>(r.grid_bytes.size()));
      std::ofstream(dir / fmt("report%d", run)) << r.report;
    }
    same = same && slurp(dir / "grid0") == slurp(dir / "grid1") && slurp(dir / "report0") == slurp(dir / "report1") &&
           !slurp(dir / "grid0").empty();
  }
  fs::remove_all(dir);
  return {same, fmt("json, ascii and pgm grids plus reports byte-identical across two runs: %s", same ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"geometry fidelity", geometry_fidelity},   {"mapping constants", mapping_constants},
      {"pin-level contract", pin_levels},         {"confidence gating", confidence_gating},
      {"classifier properties", classifier_properties}, {"segmentation oracle", segmentation_oracle},
      {"ground detection", ground_detection},     {"end-to-end localization", localization},
      {"determinism", determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %zu. %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed ? 1 : 0;
}
