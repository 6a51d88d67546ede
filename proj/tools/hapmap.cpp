#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "hapmap/classifier.hpp"
#include "hapmap/pipeline.hpp"
#include "hapmap/scenegen.hpp"
#include "hapmap/textkv.hpp"

using namespace hapmap;

namespace {

struct Options {
  std::string config;
  std::string depth;
  std::string out = "-";
  std::string format;
  std::string model;
  std::optional<std::uint64_t> seed;
  bool raw = false;
  // scenegen
  std::string spec;
  std::string truth;
  // classify
  std::string cloud;
  // train
  std::string manifest;
  int synthetic = 0;
  int test_per_class = 50;
  int epochs = 15;
  int lr_step = 6;
  int points = 256;
  int mesh_points = 2048;
  std::string report;
};

void write_output(const std::string& path, std::span<const std::uint8_t> bytes) {
  if (path.empty() || path == "-") {
    std::cout.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    std::cout.flush();
  } else {
    write_file_bytes(path, bytes);
  }
}

void write_text(const std::string& path, const std::string& text) {
  write_output(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

PipelineConfig load_config(const Options& o) {
  std::optional<std::filesystem::path> p;
  if (!o.config.empty()) p = o.config;
  PipelineConfig cfg;
  try {
    cfg = resolve_pipeline_config(p);
  } catch (const std::exception& e) {
    throw PipelineError("config", e.what());
  }
  if (!o.model.empty()) cfg.model_path = o.model;
  if (!o.format.empty()) cfg.format = parse_grid_format(o.format);
  if (o.seed) cfg.seed = *o.seed;
  if (o.raw) cfg.raw_mode = true;
  return cfg;
}

DepthFrame load_frame(const Options& o) {
  try {
    if (o.depth.empty()) throw Error("--depth is required");
    return load_depth_file(o.depth);
  } catch (const std::exception& e) {
    throw PipelineError("depthio", e.what());
  }
}

PointCloud read_cloud_text(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  PointCloud cloud;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto f = split_fields(t);
    if (f.size() < 3) throw Error("cloud: expected 'x y z' per line");
    cloud.points.push_back({parse_double("x", f[0]), parse_double("y", f[1]), parse_double("z", f[2])});
  }
  return cloud;
}

int cmd_scenegen(const Options& o) {
  const PipelineConfig cfg = load_config(o);
  const auto bytes = read_file_bytes(o.spec);
  const SceneSpec spec = parse_scene_spec(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  const Intrinsics k = cfg.resolved_intrinsics();
  const RenderedScene scene = render_depth(spec, k);
  const bool raw = o.format == "raw";
  if (!o.format.empty() && !raw && o.format != "pgm") throw Error("scenegen: --format must be pgm or raw");
  write_output(o.out, raw ? encode_depth_raw(scene.frame) : encode_depth_pgm(scene.frame));
  if (!o.truth.empty()) write_file_bytes(o.truth, encode_mask_pgm(scene.truth.ground_mask));
  return 0;
}

int cmd_ground(const Options& o) {
  const PipelineConfig cfg = load_config(o);
  const DepthFrame frame = load_frame(o);
  const SceneAnalysis a = analyze_scene(cfg, frame);
  write_output(o.out, encode_mask_pgm(a.ground.mask));
  std::fprintf(stderr, "ground_y\t%.1f\npixels\t%zu\n", a.ground_y, a.ground.mask.count());
  return 0;
}

int cmd_segment(const Options& o) {
  const PipelineConfig cfg = load_config(o);
  const SceneAnalysis a = analyze_scene(cfg, load_frame(o));
  std::string text = "# x y z segment\n";
  char buf[128];
  for (const auto& s : a.segments)
    for (const auto& p : s.points.points) {
      std::snprintf(buf, sizeof buf, "%.1f %.1f %.1f %d\n", p.x, p.y, p.z, s.id);
      text += buf;
    }
  write_text(o.out, text);
  return 0;
}

int cmd_features(Options o) {
  o.model.clear();
  PipelineConfig cfg = load_config(o);
  cfg.model_path.clear();
  const PipelineResult r = run_pipeline(cfg, load_frame(o), nullptr);
  write_text(o.out, r.report);
  return 0;
}

int cmd_classify(const Options& o) {
  const PipelineConfig cfg = load_config(o);
  if (cfg.model_path.empty()) throw Error("classify: --model is required");
  const PointSetModel model = load_model_file(cfg.model_path);
  const PointCloud cloud = read_cloud_text(o.cloud);
  const NetworkClassifier net(model, cfg.seed);
  const Prediction p = make_prediction(net.probabilities(cloud), cfg.confidence_threshold);
  std::string text;
  char buf[128];
  for (std::size_t i = 0; i < model.classes.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s\t%.4f\n", model.classes[i].c_str(), p.probabilities[i]);
    text += buf;
  }
  std::snprintf(buf, sizeof buf, "prediction\t%s\t%.4f\t%s\n", model.classes[p.argmax].c_str(), p.confidence,
                p.accepted ? "accepted" : "rejected");
  text += buf;
  write_text(o.out, text);
  return 0;
}

int cmd_train(const Options& o) {
  const std::uint64_t seed = o.seed.value_or(1);
  DatasetSplit data;
  if (!o.manifest.empty())
    data = load_manifest_dataset(o.manifest, static_cast<std::size_t>(o.mesh_points), seed);
  else if (o.synthetic > 0)
    data = make_synthetic_dataset(o.synthetic, o.test_per_class, seed);
  else
    throw Error("train: give --manifest or --synthetic");
  ModelShape shape;
  shape.n_points = o.points;
  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.lr_step = o.lr_step;
  tc.seed = seed;
  const PointSetModel init = make_model(shape, data.classes, seed);
  const TrainResult r = train(init, data.train, data.test, tc, [](const EpochStats& s) {
    std::fprintf(stderr, "epoch %d\tlr %.5f\ttrain_loss %.4f\ttrain_acc %.4f\ttest_loss %.4f\ttest_acc %.4f\n",
                 s.epoch, s.lr, s.train_loss, s.train_accuracy, s.test_loss, s.test_accuracy);
  });
  write_output(o.out, serialize_model(r.model));
  return 0;
}

int cmd_synth(const Options& o) {
  const PipelineConfig cfg = load_config(o);
  const DepthFrame frame = load_frame(o);
  std::optional<NetworkClassifier> net;
  if (!cfg.model_path.empty()) {
    try {
      net.emplace(load_model_file(cfg.model_path), cfg.seed);
    } catch (const std::exception& e) {
      throw PipelineError("classifier", e.what());
    }
  }
  const PipelineResult r = run_pipeline(cfg, frame, net ? &*net : nullptr);
  write_output(o.out, r.grid_bytes);
  if (o.report.empty())
    std::cerr << r.report;
  else
    write_text(o.report, r.report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth frame to tactile pin grid"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Pipeline config file (falls back to $HAPMAP_CONFIG)");
    sub->add_option("--out", o.out, "Output path, '-' for stdout");
    sub->add_option("--seed", o.seed, "Seed override");
  };

  auto* scenegen = app.add_subcommand("scenegen", "Render a synthetic scene to a depth frame");
  common(scenegen);
  scenegen->add_option("--spec", o.spec, "Scene description")->required();
  scenegen->add_option("--format", o.format, "pgm (default) or raw");
  scenegen->add_option("--truth", o.truth, "Also write the ground-truth floor mask");

  auto* ground = app.add_subcommand("ground", "Ground mask of a depth frame");
  common(ground);
  ground->add_option("--depth", o.depth, "Depth frame")->required();

  auto* segment = app.add_subcommand("segment", "Cluster the non-ground points");
  common(segment);
  segment->add_option("--depth", o.depth, "Depth frame")->required();

  auto* features = app.add_subcommand("features", "Per-segment geometry report");
  common(features);
  features->add_option("--depth", o.depth, "Depth frame")->required();

  auto* classify = app.add_subcommand("classify", "Classify one point cloud (x y z per line, mm)");
  common(classify);
  classify->add_option("--model", o.model, "Model file")->required();
  classify->add_option("--cloud", o.cloud, "Point cloud text file")->required();

  auto* trainc = app.add_subcommand("train", "Train the point-set classifier");
  common(trainc);
  trainc->add_option("--manifest", o.manifest, "Dataset manifest (path fine_label per line)");
  trainc->add_option("--synthetic", o.synthetic, "Synthetic training clouds per class");
  trainc->add_option("--test-per-class", o.test_per_class, "Synthetic test clouds per class");
  trainc->add_option("--epochs", o.epochs, "Epochs");
  trainc->add_option("--lr-step", o.lr_step, "Epochs between learning-rate halvings");
  trainc->add_option("--points", o.points, "Points per cloud fed to the network");
  trainc->add_option("--mesh-points", o.mesh_points, "Points sampled per mesh");

  auto* synth = app.add_subcommand("synth", "Full pipeline: depth frame to pin grid");
  common(synth);
  synth->add_option("--depth", o.depth, "Depth frame")->required();
  synth->add_option("--format", o.format, "json, ascii or pgm");
  synth->add_option("--model", o.model, "Model file (geometry only when absent)");
  synth->add_flag("--raw", o.raw, "Render the raw cloud instead of objects");
  synth->add_option("--report", o.report, "Report path (default stderr)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (scenegen->parsed()) return cmd_scenegen(o);
    if (ground->parsed()) return cmd_ground(o);
    if (segment->parsed()) return cmd_segment(o);
    if (features->parsed()) return cmd_features(o);
    if (classify->parsed()) return cmd_classify(o);
    if (trainc->parsed()) return cmd_train(o);
    if (synth->parsed()) return cmd_synth(o);
  } catch (const PipelineError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
