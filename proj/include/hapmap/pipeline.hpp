#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hapmap/classifier.hpp"
#include "hapmap/dcgd.hpp"
#include "hapmap/depthio.hpp"
#include "hapmap/geomfeat.hpp"
#include "hapmap/labeling.hpp"
#include "hapmap/segment.hpp"
#include "hapmap/synthgrid.hpp"

namespace hapmap {

/// Every tunable of the frame-to-grid pipeline. Text form is flat
/// "section.key = value" lines; format_pipeline_config lists them all.
struct PipelineConfig {
  std::filesystem::path intrinsics_path;  // empty: use `intrinsics`
  Intrinsics intrinsics;
  double zmin = 800.0;
  double zmax = 4000.0;
  DcgdParams dcgd;
  double voxel_leaf = 20.0;
  double dbscan_eps = 80.0;
  int dbscan_min_pts = 10;
  bool holes_enabled = true;
  std::filesystem::path model_path;  // empty: geometry-only mode
  double confidence_threshold = kDefaultConfidenceThreshold;
  GeometryThresholds geometry;
  double area_l = 800.0;
  double area_L = 4000.0;
  double area_d_prime = 24.0;
  int area_rows = 96;
  int area_cols = 120;
  RawRasterParams raw;
  bool raw_mode = false;
  std::filesystem::path glyph_sheet_path;  // empty: built-in sheet
  GridFormat format = GridFormat::json;
  std::uint64_t seed = 1;

  /// Throws Error when a parameter is out of range.
  void validate() const;
  /// Intrinsics from the file when a path is set.
  Intrinsics resolved_intrinsics() const;
  AreaGeometry area(const Intrinsics& k) const;
};

/// Relative paths are resolved against `base_dir`.
PipelineConfig parse_pipeline_config(std::string_view text, const std::filesystem::path& base_dir = {});
std::string format_pipeline_config(const PipelineConfig& cfg);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

inline constexpr const char* kConfigEnvVar = "HAPMAP_CONFIG";

/// The explicit path if given, else $HAPMAP_CONFIG, else defaults.
PipelineConfig resolve_pipeline_config(const std::optional<std::filesystem::path>& explicit_path);

/// Failure inside one pipeline stage; what() is "<stage>: <message>".
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& message)
      : Error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PipelineResult {
  PinGrid grid;
  std::vector<ObjectDescriptor> objects;  // ordered by segment id
  std::vector<Polygon> holes;
  double ground_y = 0.0;
  std::string report;  // tab-separated, header plus one line per object
  std::vector<std::uint8_t> grid_bytes;
};

/// Ground detection, segmentation, geometry, optional classification,
/// labeling and synthesis of one frame. `classifier` may be null.
PipelineResult run_pipeline(const PipelineConfig& cfg, const DepthFrame& frame, const SegmentClassifier* classifier);

/// Loads the depth file and the model named in the config (if any).
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& depth_path);

/// Stages before classification, shared with the per-stage subcommands.
struct SceneAnalysis {
  Intrinsics intrinsics;
  GroundDetection ground;
  double ground_y = 0.0;
  PointCloud occupied;  // non-ground points inside the pass-through band
  std::vector<Segment> segments;
};

SceneAnalysis analyze_scene(const PipelineConfig& cfg, const DepthFrame& frame);

/// Floor holes: invalid pixels below the horizon cast onto the ground plane,
/// clustered and hulled.
std::vector<Polygon> detect_holes(const PipelineConfig& cfg, const DepthFrame& frame, const Intrinsics& k,
                                  double ground_y);

std::string format_report(const std::vector<ObjectDescriptor>& objects, const AreaGeometry& g, bool has_model);

}  // namespace hapmap
