#include "hapmap/pipeline.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <algorithm>
#include <map>

#include "hapmap/segment.hpp"
#include "hapmap/textkv.hpp"

namespace hapmap {

namespace {

std::string number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct ConfigKey {
  std::string_view key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, std::string_view key, std::string_view value, const std::filesystem::path&)>
      set;
};

ConfigKey dbl(std::string_view key, double PipelineConfig::*field) {
  return {key, [field](const PipelineConfig& c) { return number(c.*field); },
          [field](PipelineConfig& c, std::string_view k, std::string_view v, const std::filesystem::path&) {
            c.*field = parse_double(k, v);
          }};
}

template <typename Sub>
ConfigKey dbl(std::string_view key, Sub PipelineConfig::*sub, double Sub::*field) {
  return {key, [sub, field](const PipelineConfig& c) { return number(c.*sub.*field); },
          [sub, field](PipelineConfig& c, std::string_view k, std::string_view v, const std::filesystem::path&) {
            c.*sub.*field = parse_double(k, v);
          }};
}

ConfigKey integer(std::string_view key, int PipelineConfig::*field) {
  return {key, [field](const PipelineConfig& c) { return std::to_string(c.*field); },
          [field](PipelineConfig& c, std::string_view k, std::string_view v, const std::filesystem::path&) {
            c.*field = parse_int(k, v);
          }};
}

ConfigKey path(std::string_view key, std::filesystem::path PipelineConfig::*field) {
  return {key, [field](const PipelineConfig& c) { return (c.*field).string(); },
          [field](PipelineConfig& c, std::string_view, std::string_view v, const std::filesystem::path& base) {
            std::filesystem::path p{std::string(v)};
            if (!p.empty() && p.is_relative() && !base.empty()) p = base / p;
            c.*field = p;
          }};
}

ConfigKey flag(std::string_view key, bool PipelineConfig::*field) {
  return {key, [field](const PipelineConfig& c) { return std::string(c.*field ? "1" : "0"); },
          [field](PipelineConfig& c, std::string_view k, std::string_view v, const std::filesystem::path&) {
            if (v == "1" || v == "true") c.*field = true;
            else if (v == "0" || v == "false") c.*field = false;
            else throw Error("config: '" + std::string(k) + "' expects 0 or 1");
          }};
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back(path("camera.intrinsics", &PipelineConfig::intrinsics_path));
    k.push_back({"camera.width", [](const PipelineConfig& c) { return std::to_string(c.intrinsics.width); },
                 [](PipelineConfig& c, std::string_view key, std::string_view v, const std::filesystem::path&) {
                   c.intrinsics.width = parse_int(key, v);
                 }});
    k.push_back({"camera.height", [](const PipelineConfig& c) { return std::to_string(c.intrinsics.height); },
                 [](PipelineConfig& c, std::string_view key, std::string_view v, const std::filesystem::path&) {
                   c.intrinsics.height = parse_int(key, v);
                 }});
    k.push_back(dbl("camera.fx", &PipelineConfig::intrinsics, &Intrinsics::fx));
    k.push_back(dbl("camera.fy", &PipelineConfig::intrinsics, &Intrinsics::fy));
    k.push_back(dbl("camera.cx", &PipelineConfig::intrinsics, &Intrinsics::cx));
    k.push_back(dbl("camera.cy", &PipelineConfig::intrinsics, &Intrinsics::cy));
    k.push_back(dbl("camera.depth_scale", &PipelineConfig::intrinsics, &Intrinsics::depth_scale));
    k.push_back(dbl("passthrough.zmin", &PipelineConfig::zmin));
    k.push_back(dbl("passthrough.zmax", &PipelineConfig::zmax));
    k.push_back(dbl("dcgd.z0", &PipelineConfig::dcgd, &DcgdParams::z0));
    k.push_back(dbl("dcgd.zf", &PipelineConfig::dcgd, &DcgdParams::zf));
    k.push_back(dbl("dcgd.dz", &PipelineConfig::dcgd, &DcgdParams::dz));
    k.push_back(dbl("dcgd.baseline_tol", &PipelineConfig::dcgd, &DcgdParams::baseline_tol));
    k.push_back(dbl("dcgd.pixel_tol", &PipelineConfig::dcgd, &DcgdParams::pixel_tol));
    k.push_back(dbl("dcgd.level_tol", &PipelineConfig::dcgd, &DcgdParams::level_tol));
    k.push_back(dbl("voxel.leaf", &PipelineConfig::voxel_leaf));
    k.push_back(dbl("dbscan.eps", &PipelineConfig::dbscan_eps));
    k.push_back(integer("dbscan.min_pts", &PipelineConfig::dbscan_min_pts));
    k.push_back(flag("holes.enabled", &PipelineConfig::holes_enabled));
    k.push_back(path("classifier.model", &PipelineConfig::model_path));
    k.push_back(dbl("classifier.threshold", &PipelineConfig::confidence_threshold));
    k.push_back(dbl("geometry.height_low", &PipelineConfig::geometry, &GeometryThresholds::height_low));
    k.push_back(dbl("geometry.height_high", &PipelineConfig::geometry, &GeometryThresholds::height_high));
    k.push_back(dbl("geometry.area_low", &PipelineConfig::geometry, &GeometryThresholds::area_low));
    k.push_back(dbl("geometry.area_high", &PipelineConfig::geometry, &GeometryThresholds::area_high));
    k.push_back(dbl("area.l", &PipelineConfig::area_l));
    k.push_back(dbl("area.L", &PipelineConfig::area_L));
    k.push_back(dbl("area.d_prime", &PipelineConfig::area_d_prime));
    k.push_back(integer("area.rows", &PipelineConfig::area_rows));
    k.push_back(integer("area.cols", &PipelineConfig::area_cols));
    k.push_back({"raw.n_levels", [](const PipelineConfig& c) { return std::to_string(c.raw.n_levels); },
                 [](PipelineConfig& c, std::string_view key, std::string_view v, const std::filesystem::path&) {
                   c.raw.n_levels = parse_int(key, v);
                 }});
    k.push_back(dbl("raw.floor_band", &PipelineConfig::raw, &RawRasterParams::floor_band));
    k.push_back(dbl("raw.band_height", &PipelineConfig::raw, &RawRasterParams::band_height));
    k.push_back(flag("output.raw", &PipelineConfig::raw_mode));
    k.push_back(path("labeling.glyph_sheet", &PipelineConfig::glyph_sheet_path));
    k.push_back({"output.format", [](const PipelineConfig& c) { return std::string(name(c.format)); },
                 [](PipelineConfig& c, std::string_view, std::string_view v, const std::filesystem::path&) {
                   c.format = parse_grid_format(v);
                 }});
    k.push_back({"seed", [](const PipelineConfig& c) { return std::to_string(c.seed); },
                 [](PipelineConfig& c, std::string_view key, std::string_view v, const std::filesystem::path&) {
                   std::uint64_t s = 0;
                   const auto res = std::from_chars(v.data(), v.data() + v.size(), s);
                   if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
                     throw Error("config: '" + std::string(key) + "' expects an unsigned integer");
                   c.seed = s;
                 }});
    return k;
  }();
  return keys;
}

// Runs one stage, tagging any failure with its name.
template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

using VoxelKey = std::array<long long, 3>;

VoxelKey voxel_key(const Vec3& p, double leaf) {
  return {static_cast<long long>(std::floor(p.x / leaf)), static_cast<long long>(std::floor(p.y / leaf)),
          static_cast<long long>(std::floor(p.z / leaf))};
}

}  // namespace

void PipelineConfig::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) throw Error(std::string("config: ") + what + " must be positive");
  };
  intrinsics.validate();
  positive(zmin, "passthrough.zmin");
  if (!(zmax > zmin)) throw Error("config: passthrough.zmax must exceed zmin");
  positive(dcgd.z0, "dcgd.z0");
  if (!(dcgd.zf > dcgd.z0)) throw Error("config: dcgd.zf must exceed z0");
  positive(dcgd.dz, "dcgd.dz");
  positive(dcgd.baseline_tol, "dcgd.baseline_tol");
  positive(dcgd.pixel_tol, "dcgd.pixel_tol");
  positive(dcgd.level_tol, "dcgd.level_tol");
  positive(voxel_leaf, "voxel.leaf");
  positive(dbscan_eps, "dbscan.eps");
  if (dbscan_min_pts < 1) throw Error("config: dbscan.min_pts must be at least 1");
  if (!(confidence_threshold > 0.0 && confidence_threshold < 1.0))
    throw Error("config: classifier.threshold must lie in (0, 1)");
  geometry.validate();
  positive(raw.band_height, "raw.band_height");
  if (raw.n_levels < 2 || raw.n_levels > kMaxLevel + 1) throw Error("config: raw.n_levels must be 2..5");
}

Intrinsics PipelineConfig::resolved_intrinsics() const {
  Intrinsics k = intrinsics_path.empty() ? intrinsics : load_intrinsics_file(intrinsics_path);
  k.validate();
  return k;
}

AreaGeometry PipelineConfig::area(const Intrinsics& k) const {
  return AreaGeometry::from_intrinsics(k, area_l, area_L, area_d_prime, area_rows, area_cols);
}

PipelineConfig parse_pipeline_config(std::string_view text, const std::filesystem::path& base_dir) {
  PipelineConfig cfg;
  for (const auto& [key, value] : parse_key_values(text)) {
    const auto& keys = config_keys();
    const auto it = std::find_if(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.key == key; });
    if (it == keys.end()) throw Error("config: unknown key '" + key + "'");
    it->set(cfg, key, value, base_dir);
  }
  cfg.validate();
  return cfg;
}

std::string format_pipeline_config(const PipelineConfig& cfg) {
  std::string out;
  for (const auto& k : config_keys()) out += std::string(k.key) + " = " + k.get(cfg) + "\n";
  return out;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_pipeline_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                               path.parent_path());
}

PipelineConfig resolve_pipeline_config(const std::optional<std::filesystem::path>& explicit_path) {
  if (explicit_path) return load_pipeline_config(*explicit_path);
  if (const char* env = std::getenv(kConfigEnvVar); env && *env) return load_pipeline_config(env);
  return PipelineConfig{};
}

SceneAnalysis analyze_scene(const PipelineConfig& cfg, const DepthFrame& frame) {
  SceneAnalysis a;
  a.intrinsics = stage("config", [&] {
    cfg.validate();
    return cfg.resolved_intrinsics();
  });
  const Intrinsics& k = a.intrinsics;
  stage("depthio", [&] {
    if (frame.width != k.width || frame.height != k.height)
      throw Error("frame is " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                  " but the intrinsics describe " + std::to_string(k.width) + "x" + std::to_string(k.height));
  });
  stage("dcgd", [&] {
    a.ground = detect_ground(frame, k, cfg.dcgd);
    const auto y = ground_elevation(frame, k, a.ground.mask);
    if (!a.ground.found || !y) throw Error("no ground detected");
    a.ground_y = *y;
  });
  stage("segment", [&] {
    a.occupied = passthrough_filter(backproject(frame, k, &a.ground.mask), cfg.zmin, cfg.zmax);
    if (a.occupied.empty()) return;
    // Cluster voxel centroids, then hand every full-resolution point the
    // label of the voxel it falls in.
    const PointCloud voxels = voxel_downsample(a.occupied, cfg.voxel_leaf);
    const Segmentation seg = dbscan(voxels, cfg.dbscan_eps, cfg.dbscan_min_pts);
    std::map<VoxelKey, int> label_of;
    for (std::size_t i = 0; i < voxels.size(); ++i) label_of[voxel_key(voxels.points[i], cfg.voxel_leaf)] = seg.labels[i];
    a.segments.resize(static_cast<std::size_t>(seg.k));
    for (int i = 0; i < seg.k; ++i) a.segments[i].id = i;
    for (const auto& p : a.occupied.points) {
      const auto it = label_of.find(voxel_key(p, cfg.voxel_leaf));
      if (it != label_of.end() && it->second != kNoise) a.segments[it->second].points.points.push_back(p);
    }
  });
  return a;
}

std::vector<Polygon> detect_holes(const PipelineConfig& cfg, const DepthFrame& frame, const Intrinsics& k,
                                  double ground_y) {
  std::vector<Polygon> holes;
  if (!(ground_y < 0.0)) return holes;
  PointCloud floor_points;
  for (int v = 0; v < frame.height; ++v) {
    const double dy = (k.cy - v) / k.fy;
    if (dy >= 0.0) continue;  // at or above the horizon
    const double z = ground_y / dy;
    if (z < cfg.zmin || z > cfg.zmax) continue;
    for (int u = 0; u < frame.width; ++u) {
      if (frame.at(u, v) != 0) continue;
      floor_points.points.push_back({(u - k.cx) * z / k.fx, ground_y, z});
    }
  }
  if (floor_points.empty()) return holes;
  const PointCloud voxels = voxel_downsample(floor_points, cfg.voxel_leaf);
  const Segmentation seg = dbscan(voxels, cfg.dbscan_eps, cfg.dbscan_min_pts);
  std::vector<std::vector<Point2>> members(static_cast<std::size_t>(seg.k));
  for (std::size_t i = 0; i < voxels.size(); ++i)
    if (seg.labels[i] != kNoise) members[seg.labels[i]].push_back({voxels.points[i].x, voxels.points[i].z});
  for (const auto& m : members) holes.push_back(convex_hull_2d(m).vertices);
  return holes;
}

std::string format_report(const std::vector<ObjectDescriptor>& objects, const AreaGeometry& g, bool has_model) {
  std::string out = "segment\tclass\theight_mm\tarea_m2\theight_class\tarea_class\tpin_u\tpin_v\n";
  char buf[160];
  for (const auto& o : objects) {
    std::string cls;
    if (o.label)
      cls = std::string(o.stairs ? glyph_tag(*o.label, o.stairs) : name(*o.label));
    else if (has_model) {
      std::snprintf(buf, sizeof buf, "rejected(p=%.2f)", o.confidence);
      cls = buf;
    } else {
      cls = "-";
    }
    std::string pin = "-\t-";
    if (in_view_field(o.footprint.barycenter.x, o.footprint.barycenter.z, g)) {
      const PinCoord p = map_to_area(o.footprint.barycenter.x, o.footprint.barycenter.z, g);
      pin = std::to_string(p.u) + "\t" + std::to_string(p.v);
    }
    std::snprintf(buf, sizeof buf, "%d\t%s\t%.1f\t%.3f\t%d\t%d\t%s\n", o.segment_id, cls.c_str(),
                  o.geometry.height_mm, o.geometry.area_m2, o.geometry.height_class, o.geometry.area_class,
                  pin.c_str());
    out += buf;
  }
  return out;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const DepthFrame& frame, const SegmentClassifier* classifier) {
  SceneAnalysis a = analyze_scene(cfg, frame);
  const Intrinsics& k = a.intrinsics;
  PipelineResult result;
  result.ground_y = a.ground_y;

  auto& objects = result.objects;
  stage("geomfeat", [&] {
    for (const auto& s : a.segments) {
      ObjectDescriptor o;
      o.segment_id = s.id;
      o.footprint = compute_footprint(s.points);
      const double h = height_p90(s.points, a.ground_y);
      o.geometry = classify_geometry(h, o.footprint.area_m2, cfg.geometry);
      objects.push_back(std::move(o));
    }
  });

  if (classifier) {
    stage("classifier", [&] {
      const int n = static_cast<int>(objects.size());
      std::vector<GatedClass> gated(objects.size());
      std::vector<std::string> errors(objects.size());
#pragma omp parallel for schedule(dynamic, 1)
      for (int i = 0; i < n; ++i) {
        try {
          gated[i] = gate(make_prediction(classifier->probabilities(a.segments[i].points), cfg.confidence_threshold),
                          classifier->classes());
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
      for (int i = 0; i < n; ++i) {
        if (!errors[i].empty()) throw Error("segment " + std::to_string(i) + ": " + errors[i]);
        objects[i].label = gated[i].label;
        objects[i].class_name = gated[i].class_name;
        objects[i].confidence = gated[i].confidence;
      }
    });
  }

  const GlyphSheet sheet = stage("labeling", [&] {
    for (auto& o : objects) {
      if (o.label == LabelClass::stairs) o.stairs = stairs_direction(a.segments[o.segment_id].points, a.ground_y);
      o.validate();
    }
    return cfg.glyph_sheet_path.empty() ? GlyphSheet::builtin() : load_glyph_sheet_file(cfg.glyph_sheet_path);
  });

  stage("synthgrid", [&] {
    const AreaGeometry g = cfg.area(k);
    if (cfg.raw_mode) {
      const PointCloud all = passthrough_filter(backproject(frame, k), cfg.zmin, cfg.zmax);
      result.grid = rasterize_raw(all, a.ground_y, g, cfg.raw);
    } else {
      if (cfg.holes_enabled) result.holes = detect_holes(cfg, frame, k, a.ground_y);
      result.grid = rasterize_scene(result.holes, objects, sheet, g);
    }
    result.grid_bytes = emit(result.grid, cfg.format);
    result.report = format_report(objects, g, classifier != nullptr);
  });
  return result;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& depth_path) {
  const DepthFrame frame = stage("depthio", [&] { return load_depth_file(depth_path); });
  std::optional<NetworkClassifier> net;
  if (!cfg.model_path.empty()) {
    net.emplace(stage("classifier", [&] { return load_model_file(cfg.model_path); }), cfg.seed);
  }
  return run_pipeline(cfg, frame, net ? &*net : nullptr);
}

}  // namespace hapmap
