#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hapmap/taxonomy.hpp"
#include "hapmap/types.hpp"

namespace hapmap {

/// Fully connected layer; weights stored input-major (w[i * out + o]).
template <typename T>
struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<T> w;
  std::vector<T> b;
};

/// Shared per-point MLP, channel-wise max over points, dense head.
/// `point_widths` starts with the input width 3; `head_widths` starts with
/// the pooled width and ends with the class count.
template <typename T>
struct BasicPointSetModel {
  int n_points = 256;
  std::vector<DenseLayer<T>> point_layers;
  std::vector<DenseLayer<T>> head_layers;
  std::vector<std::string> classes;
  std::uint64_t seed = 0;
  std::uint32_t epochs = 0;

  std::size_t parameter_count() const;
  /// Throws Error("width mismatch") when consecutive layers disagree.
  void validate() const;
};

using PointSetModel = BasicPointSetModel<float>;

struct ModelShape {
  int n_points = 256;
  std::vector<int> point_widths{3, 64, 128, 256};
  std::vector<int> head_widths{256, 128};  // class count is appended
};

/// He-initialized model; deterministic in `seed`.
PointSetModel make_model(const ModelShape& shape, std::vector<std::string> classes, std::uint64_t seed);

BasicPointSetModel<double> to_double(const PointSetModel& m);

/// Class probabilities (softmax of the logits, evaluated in double).
/// Accepts any number of points; the max pool is order independent.
template <typename T>
std::vector<double> forward(const BasicPointSetModel<T>& model, const PointCloud& cloud);

struct Prediction {
  std::vector<double> probabilities;
  int argmax = 0;
  double confidence = 0.0;
  bool accepted = false;
};

/// Builds a prediction from probabilities; accepted iff confidence > threshold.
Prediction make_prediction(std::vector<double> probabilities, double threshold);

struct LabeledCloud {
  PointCloud cloud;  // already normalized to the unit sphere
  int label = 0;
};

struct TrainConfig {
  int epochs = 40;
  int batch = 16;
  double lr = 0.01;
  double momentum = 0.9;
  int lr_step = 20;       // epochs between decays
  double lr_decay = 0.5;
  double jitter_sigma = 0.01;
  double jitter_clip = 0.05;
  std::uint64_t seed = 1;
  Exec exec = Exec::parallel;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
};

struct TrainResult {
  PointSetModel model;
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch SGD with momentum on mean cross-entropy. Every sample is
/// resampled to model.n_points and augmented (yaw + jitter) each epoch.
/// Per-sample gradients are reduced in sample order, so results do not
/// depend on the thread count.
TrainResult train(PointSetModel model, const std::vector<LabeledCloud>& train_set,
                  const std::vector<LabeledCloud>& test_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predicted;
};

/// Deterministic evaluation: resampled with `seed`, no augmentation.
Evaluation evaluate(const PointSetModel& model, const std::vector<LabeledCloud>& set, std::uint64_t seed,
                    Exec exec = Exec::parallel);

/// A cloud fixed to n points and its label; the batch unit of grad_check.
struct Sample {
  PointCloud cloud;
  int label = 0;
};

/// Mean cross-entropy of a batch and its gradient with respect to every
/// parameter, in layer order (weights then biases).
template <typename T>
double loss_and_gradient(const BasicPointSetModel<T>& model, std::span<const Sample> batch,
                         std::vector<T>* gradient);

template <typename T>
std::vector<T> flatten_parameters(const BasicPointSetModel<T>& model);
template <typename T>
void unflatten_parameters(BasicPointSetModel<T>& model, std::span<const T> params);

/// Max relative error between the analytic gradient and central finite
/// differences (step 1e-4) over every parameter. |a - n| / max(|a| + |n|, 1e-6).
double grad_check(const BasicPointSetModel<double>& model, std::span<const Sample> batch, double step = 1e-4);

// Model file: "HPSN", u32 version, u32 n_points, u32 layer counts and widths,
// float32 weights and biases, class names, u64 seed, u32 epochs; all
// little-endian.
std::vector<std::uint8_t> serialize_model(const PointSetModel& model);
PointSetModel deserialize_model(std::span<const std::uint8_t> bytes);
PointSetModel load_model_file(const std::filesystem::path& path);

/// Gated classification result in the labeling taxonomy.
struct GatedClass {
  std::optional<LabelClass> label;  // set only when accepted
  std::string class_name;           // model class at argmax
  double confidence = 0.0;
};

inline constexpr double kDefaultConfidenceThreshold = 0.85;

GatedClass gate(const Prediction& p, const std::vector<std::string>& classes);

/// Anything that turns a segment into class probabilities.
class SegmentClassifier {
 public:
  virtual ~SegmentClassifier() = default;
  virtual const std::vector<std::string>& classes() const = 0;
  /// `cloud` is in millimeters; implementations normalize as they need.
  virtual std::vector<double> probabilities(const PointCloud& cloud) const = 0;
};

/// Normalizes, resamples to model.n_points with a fixed seed, runs forward.
class NetworkClassifier final : public SegmentClassifier {
 public:
  NetworkClassifier(PointSetModel model, std::uint64_t seed) : model_(std::move(model)), seed_(seed) {}
  const std::vector<std::string>& classes() const override { return model_.classes; }
  std::vector<double> probabilities(const PointCloud& cloud) const override;
  const PointSetModel& model() const { return model_; }

 private:
  PointSetModel model_;
  std::uint64_t seed_;
};

/// One-shot gated prediction of a raw (millimeter) cloud.
GatedClass predict_gated(const PointSetModel& model, const PointCloud& cloud,
                         double threshold = kDefaultConfidenceThreshold, std::uint64_t seed = 0);

// Datasets.

struct DatasetSplit {
  std::vector<LabeledCloud> train;
  std::vector<LabeledCloud> test;
  std::vector<std::string> classes;
};

enum class Taxonomy { train, fine };

/// Balanced synthetic dataset. With Taxonomy::train the classes are the six
/// training classes and their fine members are drawn uniformly; with
/// Taxonomy::fine every synthetic fine class is its own class. Every cloud
/// is normalized and given a random yaw.
DatasetSplit make_synthetic_dataset(int train_per_class, int test_per_class, std::uint64_t seed,
                                    Taxonomy taxonomy = Taxonomy::train);

/// Manifest: one "path fine_label" per line; paths are OFF meshes relative
/// to the manifest directory. Labels are merged to the training taxonomy;
/// door/window entries are skipped. Every fifth entry goes to the test set.
DatasetSplit load_manifest_dataset(const std::filesystem::path& manifest, std::size_t points_per_mesh,
                                   std::uint64_t seed);

}  // namespace hapmap
