#include "hapmap/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "hapmap/textkv.hpp"

namespace hapmap {

void SceneSpec::validate() const {
  if (!(camera_height > 0.0)) throw Error("scenegen: camera below floor (camera_height must be > 0)");
  if (!(floor_extent > 0.0)) throw Error("scenegen: degenerate spec (no floor)");
  if (noise_sigma < 0.0) throw Error("scenegen: noise_sigma must be >= 0");
  const double half = floor_extent / 2.0;
  for (const auto& b : boxes) {
    if (!(b.width > 0.0 && b.depth > 0.0 && b.height > 0.0)) throw Error("scenegen: box dimensions must be > 0");
    if (b.center_x - b.width / 2 < -half || b.center_x + b.width / 2 > half || b.center_z - b.depth / 2 < 0.0 ||
        b.center_z + b.depth / 2 > floor_extent)
      throw Error("scenegen: box outside the floor extent");
  }
  for (const auto& h : holes) {
    if (!(h.x1 > h.x0 && h.z1 > h.z0)) throw Error("scenegen: hole rectangle must have x0<x1 and z0<z1");
  }
}

namespace {

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int object = -1;  // -1 floor, >= 0 box index
};

// Slab test; returns the entry distance along a ray from the origin.
std::optional<double> intersect_box(const Vec3& dir, const BoxSpec& b, double floor_y) {
  const double lo[3] = {b.center_x - b.width / 2, floor_y, b.center_z - b.depth / 2};
  const double hi[3] = {b.center_x + b.width / 2, floor_y + b.height, b.center_z + b.depth / 2};
  const double d[3] = {dir.x, dir.y, dir.z};
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (0.0 < lo[a] || 0.0 > hi[a]) return std::nullopt;
      continue;
    }
    double ta = lo[a] / d[a];
    double tb = hi[a] / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  if (t0 <= 0.0) return std::nullopt;  // camera inside the box
  return t0;
}

bool in_hole(const SceneSpec& spec, double x, double z) {
  return std::any_of(spec.holes.begin(), spec.holes.end(),
                     [&](const HoleRegion& h) { return x >= h.x0 && x <= h.x1 && z >= h.z0 && z <= h.z1; });
}

Hit cast_ray(const SceneSpec& spec, const Vec3& dir) {
  Hit best;
  const double floor_y = -spec.camera_height;
  if (dir.y < 0.0) {
    const double t = floor_y / dir.y;
    const double x = t * dir.x;
    const double z = t * dir.z;
    if (std::abs(x) <= spec.floor_extent / 2 && z >= 0.0 && z <= spec.floor_extent && !in_hole(spec, x, z)) {
      best.t = t;
      best.object = -1;
    }
  }
  for (std::size_t i = 0; i < spec.boxes.size(); ++i) {
    if (auto t = intersect_box(dir, spec.boxes[i], floor_y); t && *t < best.t) {
      best.t = *t;
      best.object = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace

RenderedScene render_depth(const SceneSpec& spec, const Intrinsics& k, Exec exec) {
  spec.validate();
  k.validate();
  const int w = k.width;
  const int h = k.height;
  RenderedScene out;
  out.frame = DepthFrame(w, h);
  auto& truth = out.truth;
  truth.ground_mask = PixelMask(w, h);
  truth.object_masks.assign(spec.boxes.size(), PixelMask(w, h));
  for (const auto& b : spec.boxes) {
    truth.object_heights.push_back(b.height);
    const double x0 = b.center_x - b.width / 2, x1 = b.center_x + b.width / 2;
    const double z0 = b.center_z - b.depth / 2, z1 = b.center_z + b.depth / 2;
    truth.object_footprints.push_back({{x0, z0}, {x1, z0}, {x1, z1}, {x0, z1}});
  }

  auto do_row = [&](int v) {
    Rng rng(spec.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(v) + 1);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0 ? spec.noise_sigma : 1.0);
    for (int u = 0; u < w; ++u) {
      const Vec3 dir{(u - k.cx) / k.fx, (k.cy - v) / k.fy, 1.0};
      const Hit hit = cast_ray(spec, dir);
      // Direction has unit z, so the ray parameter is the depth.
      if (!std::isfinite(hit.t) || hit.t < 1.0 || hit.t >= 65536.0) continue;
      if (hit.object < 0) {
        truth.ground_mask.set(u, v);
      } else {
        truth.object_masks[static_cast<std::size_t>(hit.object)].set(u, v);
      }
      double z = hit.t;
      if (spec.noise_sigma > 0) z += noise(rng);
      z = std::max(z, 0.0);
      const double raw = std::round(z / k.depth_scale);
      out.frame.at(u, v) = static_cast<std::uint16_t>(std::min(raw, 65535.0));
    }
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 8)
    for (int v = 0; v < h; ++v) do_row(v);
  } else {
    for (int v = 0; v < h; ++v) do_row(v);
  }
  return out;
}

SceneSpec parse_scene_spec(std::string_view text) {
  SceneSpec spec;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "camera_height") {
      spec.camera_height = parse_double(key, value);
    } else if (key == "floor_extent") {
      spec.floor_extent = parse_double(key, value);
    } else if (key == "noise_sigma") {
      spec.noise_sigma = parse_double(key, value);
    } else if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "box") {
      const auto f = split_fields(value);
      if (f.size() != 5 && f.size() != 6) throw Error("scene: box needs center_x center_z width depth height [class]");
      BoxSpec b;
      b.center_x = parse_double(key, f[0]);
      b.center_z = parse_double(key, f[1]);
      b.width = parse_double(key, f[2]);
      b.depth = parse_double(key, f[3]);
      b.height = parse_double(key, f[4]);
      if (f.size() == 6) b.fine_class = f[5];
      spec.boxes.push_back(b);
    } else if (key == "hole") {
      const auto f = split_fields(value);
      if (f.size() != 4) throw Error("scene: hole needs x0 z0 x1 z1");
      spec.holes.push_back({parse_double(key, f[0]), parse_double(key, f[1]), parse_double(key, f[2]),
                            parse_double(key, f[3])});
    } else {
      throw Error("scene: unknown key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

std::string format_scene_spec(const SceneSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  os << "camera_height = " << spec.camera_height << "\nfloor_extent = " << spec.floor_extent
     << "\nnoise_sigma = " << spec.noise_sigma << "\nseed = " << spec.seed << "\n";
  for (const auto& b : spec.boxes) {
    os << "box = " << b.center_x << " " << b.center_z << " " << b.width << " " << b.depth << " " << b.height << " "
       << b.fine_class << "\n";
  }
  for (const auto& h : spec.holes) os << "hole = " << h.x0 << " " << h.z0 << " " << h.x1 << " " << h.z1 << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Parametric class shapes

namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Surface patch sampled uniformly by area.
struct Patch {
  enum Kind { rect, half_ellipsoid } kind = rect;
  Vec3 origin, e1, e2;      // rect: origin + s*e1 + t*e2
  Vec3 center, radii;       // half_ellipsoid: lower half (y <= center.y)
  double area = 0.0;
};

Vec3 cross(const Vec3& a, const Vec3& b) { return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x}; }
double norm(const Vec3& a) { return std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z); }

class ShapeBuilder {
 public:
  void rect(Vec3 origin, Vec3 e1, Vec3 e2) {
    Patch p;
    p.origin = origin;
    p.e1 = e1;
    p.e2 = e2;
    p.area = norm(cross(e1, e2));
    patches_.push_back(p);
  }

  // Cuboid [x0,x1]x[y0,y1]x[z0,z1]; `skip_top` omits the y1 face, `skip_front`
  // omits the z0 face.
  void cuboid(double x0, double x1, double y0, double y1, double z0, double z1, bool skip_top = false,
              bool skip_front = false, bool skip_bottom = false) {
    const double dx = x1 - x0, dy = y1 - y0, dz = z1 - z0;
    if (!skip_bottom) rect({x0, y0, z0}, {dx, 0, 0}, {0, 0, dz});
    if (!skip_top) rect({x0, y1, z0}, {dx, 0, 0}, {0, 0, dz});
    if (!skip_front) rect({x0, y0, z0}, {dx, 0, 0}, {0, dy, 0});
    rect({x0, y0, z1}, {dx, 0, 0}, {0, dy, 0});
    rect({x0, y0, z0}, {0, 0, dz}, {0, dy, 0});
    rect({x1, y0, z0}, {0, 0, dz}, {0, dy, 0});
  }

  void half_ellipsoid(Vec3 center, Vec3 radii) {
    Patch p;
    p.kind = Patch::half_ellipsoid;
    p.center = center;
    p.radii = radii;
    // Thomsen's approximation of the ellipsoid surface, halved.
    const double k = 1.6075;
    const double a = std::pow(radii.x, k), b = std::pow(radii.y, k), c = std::pow(radii.z, k);
    p.area = 2.0 * std::numbers::pi * std::pow((a * b + a * c + b * c) / 3.0, 1.0 / k);
    patches_.push_back(p);
  }

  PointCloud sample(Rng& rng, std::size_t n) const {
    std::vector<double> cumulative;
    double total = 0.0;
    for (const auto& p : patches_) cumulative.push_back(total += p.area);
    PointCloud cloud;
    cloud.points.reserve(n);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = unit(rng) * total;
      auto idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
      idx = std::min(idx, patches_.size() - 1);
      const Patch& p = patches_[idx];
      if (p.kind == Patch::rect) {
        const double s = unit(rng), t = unit(rng);
        cloud.points.push_back({p.origin.x + s * p.e1.x + t * p.e2.x, p.origin.y + s * p.e1.y + t * p.e2.y,
                                p.origin.z + s * p.e1.z + t * p.e2.z});
      } else {
        // Uniform direction on the lower hemisphere, stretched.
        const double cos_t = -unit(rng);
        const double phi = 2.0 * std::numbers::pi * unit(rng);
        const double sin_t = std::sqrt(1.0 - cos_t * cos_t);
        cloud.points.push_back({p.center.x + p.radii.x * sin_t * std::cos(phi), p.center.y + p.radii.y * cos_t,
                                p.center.z + p.radii.z * sin_t * std::sin(phi)});
      }
    }
    return cloud;
  }

 private:
  std::vector<Patch> patches_;
};

void legs(ShapeBuilder& s, double w, double d, double top, double size) {
  const double hx = w / 2, hz = d / 2;
  for (double sx : {-1.0, 1.0}) {
    for (double sz : {-1.0, 1.0}) {
      const double cx = sx * (hx - size / 2), cz = sz * (hz - size / 2);
      s.cuboid(cx - size / 2, cx + size / 2, 0, top, cz - size / 2, cz + size / 2, true, false, true);
    }
  }
}

void build_stairs(ShapeBuilder& s, Rng& rng, bool ascending) {
  const int steps = std::uniform_int_distribution<int>(3, 6)(rng);
  const double rise = uniform(rng, 150, 190);
  const double tread = uniform(rng, 250, 320);
  const double width = uniform(rng, 800, 1200);
  const double sign = ascending ? 1.0 : -1.0;
  for (int k = 1; k <= steps; ++k) {
    const double y_top = sign * k * rise;
    const double y_prev = sign * (k - 1) * rise;
    const double z0 = (k - 1) * tread;
    // Riser then tread.
    s.rect({-width / 2, std::min(y_prev, y_top), z0}, {width, 0, 0}, {0, rise, 0});
    s.rect({-width / 2, y_top, z0}, {width, 0, 0}, {0, 0, tread});
  }
}

}  // namespace

const std::vector<std::string>& synthetic_fine_classes() {
  static const std::vector<std::string> classes = {"chair",     "stool",  "bed",     "sofa",     "bench",
                                                   "table",     "desk",   "night_stand", "dresser", "wardrobe",
                                                   "bookshelf", "bathtub", "toilet", "stairs"};
  return classes;
}

PointCloud sample_box_cloud(std::string_view fine_class, Rng& rng) {
  ShapeBuilder s;
  if (fine_class == "chair") {
    const double w = uniform(rng, 400, 550), d = uniform(rng, 400, 550), seat = uniform(rng, 400, 480);
    s.cuboid(-w / 2, w / 2, seat - 40, seat, -d / 2, d / 2);
    s.cuboid(-w / 2, w / 2, seat, seat + uniform(rng, 350, 500), d / 2 - 40, d / 2);
    legs(s, w, d, seat - 40, 40);
  } else if (fine_class == "stool") {
    const double w = uniform(rng, 300, 420), seat = uniform(rng, 450, 750);
    s.cuboid(-w / 2, w / 2, seat - 40, seat, -w / 2, w / 2);
    legs(s, w, w, seat - 40, 35);
  } else if (fine_class == "bed") {
    const double w = uniform(rng, 900, 1600), d = uniform(rng, 1900, 2200), h = uniform(rng, 400, 600);
    s.cuboid(-w / 2, w / 2, 0, h, -d / 2, d / 2, false, false, true);
    s.cuboid(-w / 2, w / 2, 0, uniform(rng, 800, 1100), d / 2, d / 2 + 60, false, false, true);
  } else if (fine_class == "sofa") {
    const double w = uniform(rng, 1600, 2200), d = uniform(rng, 800, 950), seat = uniform(rng, 380, 450);
    const double back = uniform(rng, 150, 250), arm = uniform(rng, 550, 650);
    s.cuboid(-w / 2 + 150, w / 2 - 150, 0, seat, -d / 2, d / 2 - back, false, false, true);
    s.cuboid(-w / 2, w / 2, 0, uniform(rng, 750, 900), d / 2 - back, d / 2, false, false, true);
    s.cuboid(-w / 2, -w / 2 + 150, 0, arm, -d / 2, d / 2 - back, false, false, true);
    s.cuboid(w / 2 - 150, w / 2, 0, arm, -d / 2, d / 2 - back, false, false, true);
  } else if (fine_class == "bench") {
    const double w = uniform(rng, 1200, 1800), d = uniform(rng, 300, 400), seat = uniform(rng, 420, 480);
    s.cuboid(-w / 2, w / 2, seat - 50, seat, -d / 2, d / 2);
    s.cuboid(-w / 2 + 50, -w / 2 + 100, 0, seat - 50, -d / 2, d / 2, true, false, true);
    s.cuboid(w / 2 - 100, w / 2 - 50, 0, seat - 50, -d / 2, d / 2, true, false, true);
  } else if (fine_class == "table") {
    const double w = uniform(rng, 900, 1600), d = uniform(rng, 700, 1000), top = uniform(rng, 700, 780);
    s.cuboid(-w / 2, w / 2, top - 40, top, -d / 2, d / 2);
    legs(s, w, d, top - 40, 50);
  } else if (fine_class == "desk") {
    const double w = uniform(rng, 1100, 1600), d = uniform(rng, 550, 750), top = uniform(rng, 720, 770);
    const double ped = uniform(rng, 350, 450);
    s.cuboid(-w / 2, w / 2, top - 30, top, -d / 2, d / 2);
    s.cuboid(w / 2 - ped, w / 2, 0, top - 30, -d / 2, d / 2, true, false, true);
    s.cuboid(-w / 2, -w / 2 + 30, 0, top - 30, -d / 2, d / 2, true, false, true);
  } else if (fine_class == "night_stand") {
    const double w = uniform(rng, 400, 550), d = uniform(rng, 350, 450), h = uniform(rng, 500, 650);
    s.cuboid(-w / 2, w / 2, 120, h, -d / 2, d / 2);
    legs(s, w, d, 120, 30);
  } else if (fine_class == "dresser") {
    const double w = uniform(rng, 1000, 1600), d = uniform(rng, 400, 550), h = uniform(rng, 750, 1100);
    s.cuboid(-w / 2, w / 2, 0, h, -d / 2, d / 2, false, false, true);
  } else if (fine_class == "wardrobe") {
    const double w = uniform(rng, 900, 1400), d = uniform(rng, 500, 650), h = uniform(rng, 1800, 2200);
    s.cuboid(-w / 2, w / 2, 0, h, -d / 2, d / 2, false, false, true);
  } else if (fine_class == "bookshelf") {
    const double w = uniform(rng, 700, 1200), d = uniform(rng, 250, 350), h = uniform(rng, 1500, 2000);
    s.cuboid(-w / 2, w / 2, 0, h, -d / 2, d / 2, false, true, true);
    const int shelves = std::uniform_int_distribution<int>(3, 5)(rng);
    for (int i = 1; i <= shelves; ++i) {
      s.rect({-w / 2, h * i / (shelves + 1), -d / 2}, {w, 0, 0}, {0, 0, d});
    }
  } else if (fine_class == "bathtub") {
    const double w = uniform(rng, 1500, 1800), d = uniform(rng, 700, 850), h = uniform(rng, 500, 600);
    const double wall = 80;
    s.cuboid(-w / 2, w / 2, 0, h, -d / 2, d / 2, true, false, true);
    s.cuboid(-w / 2 + wall, w / 2 - wall, 100, h, -d / 2 + wall, d / 2 - wall, true, false, false);
    s.rect({-w / 2, h, -d / 2}, {w, 0, 0}, {0, 0, wall});
    s.rect({-w / 2, h, d / 2 - wall}, {w, 0, 0}, {0, 0, wall});
  } else if (fine_class == "toilet") {
    const double bowl_h = uniform(rng, 380, 430);
    const double rx = uniform(rng, 170, 200), rz = uniform(rng, 230, 270);
    s.half_ellipsoid({0, bowl_h, -rz / 3}, {rx, bowl_h * 0.55, rz});
    s.cuboid(-110, 110, 0, bowl_h * 0.5, -rz / 2, rz / 2, true, false, true);
    const double tw = uniform(rng, 400, 500), td = uniform(rng, 180, 220);
    s.cuboid(-tw / 2, tw / 2, bowl_h, uniform(rng, 750, 850), rz * 0.6, rz * 0.6 + td);
  } else if (fine_class == "stairs") {
    build_stairs(s, rng, true);
  } else {
    throw Error("scenegen: unknown class tag '" + std::string(fine_class) + "'");
  }
  const auto n = static_cast<std::size_t>(std::uniform_int_distribution<int>(768, 1536)(rng));
  return s.sample(rng, n);
}

PointCloud sample_stairs_cloud(bool ascending, Rng& rng) {
  ShapeBuilder s;
  build_stairs(s, rng, ascending);
  return s.sample(rng, static_cast<std::size_t>(std::uniform_int_distribution<int>(768, 1536)(rng)));
}

PointCloud sample_sphere_cloud(Rng& rng) {
  const double r = uniform(rng, 250, 350);
  std::normal_distribution<double> g(0.0, 1.0);
  PointCloud c;
  for (int i = 0; i < 512; ++i) {
    Vec3 d{g(rng), g(rng), g(rng)};
    const double n = std::max(norm(d), 1e-12);
    c.points.push_back({r * d.x / n, r + r * d.y / n, r * d.z / n});
  }
  return c;
}

PointCloud sample_elongated_box_cloud(Rng& rng) {
  ShapeBuilder s;
  const double len = uniform(rng, 1000, 1400), side = uniform(rng, 150, 250);
  s.cuboid(-len / 2, len / 2, 0, side, -side / 2, side / 2);
  return s.sample(rng, 512);
}

}  // namespace hapmap
