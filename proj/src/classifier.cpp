#include "hapmap/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "hapmap/depthio.hpp"
#include "hapmap/pointset.hpp"
#include "hapmap/scenegen.hpp"
#include "hapmap/textkv.hpp"

namespace hapmap {

// ---------------------------------------------------------------------------
// Model structure

template <typename T>
std::size_t BasicPointSetModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : point_layers) n += l.w.size() + l.b.size();
  for (const auto& l : head_layers) n += l.w.size() + l.b.size();
  return n;
}

template <typename T>
void BasicPointSetModel<T>::validate() const {
  if (point_layers.empty() || head_layers.empty()) throw Error("model: width mismatch (missing layers)");
  if (point_layers.front().in != 3) throw Error("model: width mismatch (input width must be 3)");
  int prev = 3;
  for (const auto* layers : {&point_layers, &head_layers}) {
    for (const auto& l : *layers) {
      if (l.in != prev || l.out <= 0 || l.w.size() != static_cast<std::size_t>(l.in) * l.out ||
          l.b.size() != static_cast<std::size_t>(l.out))
        throw Error("model: width mismatch");
      prev = l.out;
    }
  }
  if (static_cast<std::size_t>(prev) != classes.size()) throw Error("model: width mismatch (class count)");
  if (n_points <= 0) throw Error("model: n_points must be positive");
}

template struct BasicPointSetModel<float>;
template struct BasicPointSetModel<double>;

PointSetModel make_model(const ModelShape& shape, std::vector<std::string> classes, std::uint64_t seed) {
  if (classes.size() < 2) throw Error("model: need at least 2 classes");
  if (shape.point_widths.size() < 2 || shape.point_widths.front() != 3) throw Error("model: width mismatch");
  if (shape.head_widths.empty() || shape.head_widths.front() != shape.point_widths.back())
    throw Error("model: width mismatch (head must start at the pooled width)");
  PointSetModel m;
  m.n_points = shape.n_points;
  m.classes = std::move(classes);
  m.seed = seed;
  Rng rng(seed);
  auto make_layer = [&](int in, int out) {
    DenseLayer<float> l{in, out, std::vector<float>(static_cast<std::size_t>(in) * out), std::vector<float>(out, 0.0f)};
    std::normal_distribution<double> g(0.0, std::sqrt(2.0 / in));
    for (auto& w : l.w) w = static_cast<float>(g(rng));
    return l;
  };
  for (std::size_t i = 1; i < shape.point_widths.size(); ++i)
    m.point_layers.push_back(make_layer(shape.point_widths[i - 1], shape.point_widths[i]));
  std::vector<int> head = shape.head_widths;
  head.push_back(static_cast<int>(m.classes.size()));
  for (std::size_t i = 1; i < head.size(); ++i) m.head_layers.push_back(make_layer(head[i - 1], head[i]));
  m.validate();
  return m;
}

namespace {

template <typename To, typename From>
std::vector<DenseLayer<To>> convert_layers(const std::vector<DenseLayer<From>>& layers) {
  std::vector<DenseLayer<To>> out;
  for (const auto& l : layers) {
    out.push_back({l.in, l.out, std::vector<To>(l.w.begin(), l.w.end()), std::vector<To>(l.b.begin(), l.b.end())});
  }
  return out;
}

}  // namespace

BasicPointSetModel<double> to_double(const PointSetModel& m) {
  BasicPointSetModel<double> d;
  d.n_points = m.n_points;
  d.point_layers = convert_layers<double>(m.point_layers);
  d.head_layers = convert_layers<double>(m.head_layers);
  d.classes = m.classes;
  d.seed = m.seed;
  d.epochs = m.epochs;
  return d;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

// y[n x out] = relu?(x[n x in] * W + b)
template <typename T>
void dense_forward(const T* x, int n, const DenseLayer<T>& layer, T* y, bool relu) {
  const int in = layer.in, out = layer.out;
  for (int i = 0; i < n; ++i) {
    T* yi = y + static_cast<std::size_t>(i) * out;
    std::copy(layer.b.begin(), layer.b.end(), yi);
    const T* xi = x + static_cast<std::size_t>(i) * in;
    for (int k = 0; k < in; ++k) {
      const T a = xi[k];
      if (a == T(0)) continue;
      const T* wk = layer.w.data() + static_cast<std::size_t>(k) * out;
      for (int o = 0; o < out; ++o) yi[o] += a * wk[o];
    }
    if (relu) {
      for (int o = 0; o < out; ++o) yi[o] = yi[o] > T(0) ? yi[o] : T(0);
    }
  }
}

template <typename T>
struct Activations {
  int n = 0;
  std::vector<std::vector<T>> point;  // [0] input n x 3, then each layer output
  std::vector<int> argmax;            // per pooled channel
  std::vector<std::vector<T>> head;   // [0] pooled, then each layer output (last = logits)
  std::vector<double> probs;
};

template <typename T>
void run_forward(const BasicPointSetModel<T>& model, const PointCloud& cloud, Activations<T>& a) {
  if (cloud.empty()) throw Error("forward: empty cloud");
  const int n = static_cast<int>(cloud.size());
  a.n = n;
  a.point.resize(model.point_layers.size() + 1);
  auto& x0 = a.point[0];
  x0.resize(static_cast<std::size_t>(n) * 3);
  for (int i = 0; i < n; ++i) {
    x0[3 * i] = static_cast<T>(cloud.points[i].x);
    x0[3 * i + 1] = static_cast<T>(cloud.points[i].y);
    x0[3 * i + 2] = static_cast<T>(cloud.points[i].z);
  }
  for (std::size_t l = 0; l < model.point_layers.size(); ++l) {
    const auto& layer = model.point_layers[l];
    a.point[l + 1].resize(static_cast<std::size_t>(n) * layer.out);
    dense_forward(a.point[l].data(), n, layer, a.point[l + 1].data(), true);
  }
  const int width = model.point_layers.back().out;
  const auto& feat = a.point.back();
  a.head.resize(model.head_layers.size() + 1);
  auto& pooled = a.head[0];
  pooled.assign(static_cast<std::size_t>(width), T(0));
  a.argmax.assign(static_cast<std::size_t>(width), 0);
  for (int c = 0; c < width; ++c) {
    T best = feat[c];
    int arg = 0;
    for (int i = 1; i < n; ++i) {
      const T v = feat[static_cast<std::size_t>(i) * width + c];
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    pooled[c] = best;
    a.argmax[c] = arg;
  }
  for (std::size_t l = 0; l < model.head_layers.size(); ++l) {
    const auto& layer = model.head_layers[l];
    a.head[l + 1].resize(static_cast<std::size_t>(layer.out));
    dense_forward(a.head[l].data(), 1, layer, a.head[l + 1].data(), l + 1 < model.head_layers.size());
  }
  const auto& logits = a.head.back();
  double mx = -std::numeric_limits<double>::infinity();
  for (T v : logits) mx = std::max(mx, static_cast<double>(v));
  a.probs.resize(logits.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) sum += a.probs[c] = std::exp(static_cast<double>(logits[c]) - mx);
  for (auto& p : a.probs) p /= sum;
}

template <typename T>
double sample_loss(const Activations<T>& a, int label) {
  const auto& logits = a.head.back();
  double mx = -std::numeric_limits<double>::infinity();
  for (T v : logits) mx = std::max(mx, static_cast<double>(v));
  double sum = 0.0;
  for (T v : logits) sum += std::exp(static_cast<double>(v) - mx);
  return mx + std::log(sum) - static_cast<double>(logits[static_cast<std::size_t>(label)]);
}

// Offsets of every layer's weights and biases in the flat parameter vector.
template <typename T>
struct ParamLayout {
  std::vector<std::size_t> point_w, point_b, head_w, head_b;
  std::size_t total = 0;

  explicit ParamLayout(const BasicPointSetModel<T>& m) {
    for (const auto& l : m.point_layers) {
      point_w.push_back(total);
      total += l.w.size();
      point_b.push_back(total);
      total += l.b.size();
    }
    for (const auto& l : m.head_layers) {
      head_w.push_back(total);
      total += l.w.size();
      head_b.push_back(total);
      total += l.b.size();
    }
  }
};

// Adds scale * d(loss)/d(params) of one sample into grad.
template <typename T>
void run_backward(const BasicPointSetModel<T>& model, const Activations<T>& a, int label, T scale,
                  const ParamLayout<T>& layout, T* grad) {
  const std::size_t nh = model.head_layers.size();
  std::vector<T> dy(a.head.back().size());
  for (std::size_t c = 0; c < dy.size(); ++c)
    dy[c] = static_cast<T>((a.probs[c] - (static_cast<int>(c) == label ? 1.0 : 0.0))) * scale;

  for (std::size_t l = nh; l-- > 0;) {
    const auto& layer = model.head_layers[l];
    const auto& x = a.head[l];
    T* gw = grad + layout.head_w[l];
    T* gb = grad + layout.head_b[l];
    std::vector<T> dx(static_cast<std::size_t>(layer.in), T(0));
    for (int k = 0; k < layer.in; ++k) {
      const T xk = x[k];
      const T* wk = layer.w.data() + static_cast<std::size_t>(k) * layer.out;
      T* gwk = gw + static_cast<std::size_t>(k) * layer.out;
      T acc = 0;
      for (int o = 0; o < layer.out; ++o) {
        gwk[o] += xk * dy[o];
        acc += wk[o] * dy[o];
      }
      // Every head input is a rectified output (pooled features included).
      dx[k] = xk > T(0) ? acc : T(0);
    }
    for (int o = 0; o < layer.out; ++o) gb[o] += dy[o];
    dy = std::move(dx);
  }

  // Route pooled gradients to the winning points. Rows are kept sorted so the
  // accumulation order is fixed.
  const int width = model.point_layers.back().out;
  std::vector<int> rows(a.argmax.begin(), a.argmax.end());
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  std::vector<T> dz(rows.size() * static_cast<std::size_t>(width), T(0));
  for (int c = 0; c < width; ++c) {
    const auto r = static_cast<std::size_t>(std::lower_bound(rows.begin(), rows.end(), a.argmax[c]) - rows.begin());
    dz[r * width + c] = dy[c];  // already masked by the pooled relu
  }

  for (std::size_t l = model.point_layers.size(); l-- > 0;) {
    const auto& layer = model.point_layers[l];
    const auto& x = a.point[l];
    T* gw = grad + layout.point_w[l];
    T* gb = grad + layout.point_b[l];
    const bool need_dx = l > 0;
    std::vector<T> dx(need_dx ? rows.size() * static_cast<std::size_t>(layer.in) : 0, T(0));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const T* dzr = dz.data() + r * layer.out;
      const T* xr = x.data() + static_cast<std::size_t>(rows[r]) * layer.in;
      for (int o = 0; o < layer.out; ++o) gb[o] += dzr[o];
      for (int k = 0; k < layer.in; ++k) {
        const T xk = xr[k];
        const T* wk = layer.w.data() + static_cast<std::size_t>(k) * layer.out;
        T* gwk = gw + static_cast<std::size_t>(k) * layer.out;
        T acc = 0;
        for (int o = 0; o < layer.out; ++o) {
          gwk[o] += xk * dzr[o];
          acc += wk[o] * dzr[o];
        }
        if (need_dx) dx[r * layer.in + k] = xk > T(0) ? acc : T(0);
      }
    }
    dz = std::move(dx);
  }
}

template <typename T>
std::vector<T*> parameter_blocks(BasicPointSetModel<T>& m, std::vector<std::size_t>* sizes) {
  std::vector<T*> blocks;
  for (auto* layers : {&m.point_layers, &m.head_layers}) {
    for (auto& l : *layers) {
      blocks.push_back(l.w.data());
      sizes->push_back(l.w.size());
      blocks.push_back(l.b.data());
      sizes->push_back(l.b.size());
    }
  }
  return blocks;
}

}  // namespace

template <typename T>
std::vector<double> forward(const BasicPointSetModel<T>& model, const PointCloud& cloud) {
  Activations<T> a;
  run_forward(model, cloud, a);
  return a.probs;
}

template std::vector<double> forward(const BasicPointSetModel<float>&, const PointCloud&);
template std::vector<double> forward(const BasicPointSetModel<double>&, const PointCloud&);

template <typename T>
double loss_and_gradient(const BasicPointSetModel<T>& model, std::span<const Sample> batch, std::vector<T>* gradient) {
  if (batch.empty()) throw Error("loss_and_gradient: empty batch");
  const ParamLayout<T> layout(model);
  if (gradient) gradient->assign(layout.total, T(0));
  const T scale = T(1) / static_cast<T>(batch.size());
  double loss = 0.0;
  Activations<T> a;
  for (const auto& s : batch) {
    run_forward(model, s.cloud, a);
    loss += sample_loss(a, s.label);
    if (gradient) run_backward(model, a, s.label, scale, layout, gradient->data());
  }
  return loss / static_cast<double>(batch.size());
}

template double loss_and_gradient(const BasicPointSetModel<float>&, std::span<const Sample>, std::vector<float>*);
template double loss_and_gradient(const BasicPointSetModel<double>&, std::span<const Sample>, std::vector<double>*);

template <typename T>
std::vector<T> flatten_parameters(const BasicPointSetModel<T>& model) {
  std::vector<T> out;
  for (const auto* layers : {&model.point_layers, &model.head_layers}) {
    for (const auto& l : *layers) {
      out.insert(out.end(), l.w.begin(), l.w.end());
      out.insert(out.end(), l.b.begin(), l.b.end());
    }
  }
  return out;
}

template <typename T>
void unflatten_parameters(BasicPointSetModel<T>& model, std::span<const T> params) {
  if (params.size() != model.parameter_count()) throw Error("unflatten_parameters: size mismatch");
  std::size_t pos = 0;
  for (auto* layers : {&model.point_layers, &model.head_layers}) {
    for (auto& l : *layers) {
      std::copy_n(params.begin() + pos, l.w.size(), l.w.begin());
      pos += l.w.size();
      std::copy_n(params.begin() + pos, l.b.size(), l.b.begin());
      pos += l.b.size();
    }
  }
}

template std::vector<float> flatten_parameters(const BasicPointSetModel<float>&);
template std::vector<double> flatten_parameters(const BasicPointSetModel<double>&);
template void unflatten_parameters(BasicPointSetModel<float>&, std::span<const float>);
template void unflatten_parameters(BasicPointSetModel<double>&, std::span<const double>);

double grad_check(const BasicPointSetModel<double>& model, std::span<const Sample> batch, double step) {
  model.validate();
  std::vector<double> analytic;
  loss_and_gradient(model, batch, &analytic);
  BasicPointSetModel<double> probe = model;
  std::vector<std::size_t> sizes;
  const auto blocks = parameter_blocks(probe, &sizes);
  double worst = 0.0;
  std::size_t flat = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t i = 0; i < sizes[b]; ++i, ++flat) {
      double& p = blocks[b][i];
      const double saved = p;
      p = saved + step;
      const double plus = loss_and_gradient<double>(probe, batch, nullptr);
      p = saved - step;
      const double minus = loss_and_gradient<double>(probe, batch, nullptr);
      p = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[flat];
      const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-6);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

Prediction make_prediction(std::vector<double> probabilities, double threshold) {
  if (probabilities.empty()) throw Error("prediction: no classes");
  Prediction p;
  p.argmax = static_cast<int>(std::max_element(probabilities.begin(), probabilities.end()) - probabilities.begin());
  p.confidence = probabilities[static_cast<std::size_t>(p.argmax)];
  p.accepted = p.confidence > threshold;
  p.probabilities = std::move(probabilities);
  return p;
}

// ---------------------------------------------------------------------------
// Training

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t i) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (i + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

Evaluation evaluate(const PointSetModel& model, const std::vector<LabeledCloud>& set, std::uint64_t seed, Exec exec) {
  Evaluation ev;
  ev.predicted.assign(set.size(), 0);
  std::vector<double> losses(set.size(), 0.0);
  const int n = static_cast<int>(set.size());
  auto one = [&](int i) {
    Rng rng(mix(seed, static_cast<std::uint64_t>(i)));
    const PointCloud pts = resample(set[i].cloud, static_cast<std::size_t>(model.n_points), rng);
    Activations<float> a;
    run_forward(model, pts, a);
    losses[i] = sample_loss(a, set[i].label);
    ev.predicted[i] = static_cast<int>(std::max_element(a.probs.begin(), a.probs.end()) - a.probs.begin());
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (int i = 0; i < n; ++i) one(i);
  } else {
    for (int i = 0; i < n; ++i) one(i);
  }
  int correct = 0;
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    loss += losses[i];
    correct += ev.predicted[i] == set[i].label;
  }
  if (n > 0) {
    ev.loss = loss / n;
    ev.accuracy = static_cast<double>(correct) / n;
  }
  return ev;
}

TrainResult train(PointSetModel model, const std::vector<LabeledCloud>& train_set,
                  const std::vector<LabeledCloud>& test_set, const TrainConfig& config, const EpochCallback& on_epoch) {
  model.validate();
  const int k = static_cast<int>(model.classes.size());
  if (k < 2) throw Error("train: need at least 2 classes");
  std::vector<int> per_class(static_cast<std::size_t>(k), 0);
  for (const auto& s : train_set) {
    if (s.label < 0 || s.label >= k) throw Error("train: label out of range");
    if (s.cloud.empty()) throw Error("train: empty cloud in dataset");
    ++per_class[s.label];
  }
  for (int c = 0; c < k; ++c)
    if (per_class[c] == 0) throw Error("train: empty class '" + model.classes[c] + "'");
  if (config.batch < 1 || config.epochs < 0) throw Error("train: invalid batch or epoch count");

  Rng rng(config.seed);
  const ParamLayout<float> layout(model);
  std::vector<float> velocity(layout.total, 0.0f);
  std::vector<std::size_t> block_sizes;
  const auto blocks = parameter_blocks(model, &block_sizes);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  const auto npts = static_cast<std::size_t>(model.n_points);
  std::vector<Sample> batch;
  std::vector<std::vector<float>> grads;
  std::vector<double> losses;
  std::vector<int> hits;
  std::vector<float> total(layout.total);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.lr * std::pow(config.lr_decay, epoch / std::max(config.lr_step, 1));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
    }
    double epoch_loss = 0.0;
    int epoch_hits = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      const int bs = static_cast<int>(end - start);
      batch.clear();
      for (std::size_t j = start; j < end; ++j) {
        const auto& src = train_set[order[j]];
        PointCloud pts = resample(src.cloud, npts, rng);
        batch.push_back({augment(pts, rng, config.jitter_sigma, config.jitter_clip), src.label});
      }
      grads.resize(static_cast<std::size_t>(bs));
      losses.assign(static_cast<std::size_t>(bs), 0.0);
      hits.assign(static_cast<std::size_t>(bs), 0);
      const float scale = 1.0f / static_cast<float>(bs);
      auto one = [&](int j) {
        auto& g = grads[j];
        g.assign(layout.total, 0.0f);
        Activations<float> a;
        run_forward(model, batch[j].cloud, a);
        losses[j] = sample_loss(a, batch[j].label);
        hits[j] = (std::max_element(a.probs.begin(), a.probs.end()) - a.probs.begin()) == batch[j].label;
        run_backward(model, a, batch[j].label, scale, layout, g.data());
      };
      if (config.exec == Exec::parallel) {
#pragma omp parallel for schedule(static, 1)
        for (int j = 0; j < bs; ++j) one(j);
      } else {
        for (int j = 0; j < bs; ++j) one(j);
      }
      std::fill(total.begin(), total.end(), 0.0f);
      double batch_loss = 0.0;
      for (int j = 0; j < bs; ++j) {
        for (std::size_t p = 0; p < layout.total; ++p) total[p] += grads[j][p];
        batch_loss += losses[j];
        epoch_hits += hits[j];
      }
      if (!std::isfinite(batch_loss)) {
        std::ostringstream os;
        os << "train: non-finite loss at epoch " << epoch << ", batch starting at " << start << " (lr " << lr << ")";
        throw Error(os.str());
      }
      epoch_loss += batch_loss;
      std::size_t flat = 0;
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        float* w = blocks[b];
        for (std::size_t i = 0; i < block_sizes[b]; ++i, ++flat) {
          velocity[flat] = static_cast<float>(config.momentum) * velocity[flat] + total[flat];
          w[i] -= static_cast<float>(lr) * velocity[flat];
        }
      }
    }
    EpochStats st;
    st.epoch = epoch;
    st.lr = lr;
    st.train_loss = train_set.empty() ? 0.0 : epoch_loss / static_cast<double>(train_set.size());
    st.train_accuracy = train_set.empty() ? 0.0 : static_cast<double>(epoch_hits) / static_cast<double>(train_set.size());
    if (!test_set.empty()) {
      const Evaluation ev = evaluate(model, test_set, config.seed ^ 0x7e57ull, config.exec);
      st.test_loss = ev.loss;
      st.test_accuracy = ev.accuracy;
    }
    result.history.push_back(st);
    if (on_epoch) on_epoch(st);
  }
  model.seed = config.seed;
  model.epochs = static_cast<std::uint32_t>(config.epochs);
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kModelMagic[4] = {'H', 'P', 'S', 'N'};
constexpr std::uint32_t kModelVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    u32(bits);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  float f32() {
    const std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error("model: truncated file");
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const PointSetModel& model) {
  model.validate();
  Writer w;
  w.out.insert(w.out.end(), std::begin(kModelMagic), std::end(kModelMagic));
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(model.n_points));
  for (const auto* layers : {&model.point_layers, &model.head_layers}) {
    w.u32(static_cast<std::uint32_t>(layers->size() + 1));
    w.u32(static_cast<std::uint32_t>(layers->front().in));
    for (const auto& l : *layers) w.u32(static_cast<std::uint32_t>(l.out));
  }
  for (const auto* layers : {&model.point_layers, &model.head_layers}) {
    for (const auto& l : *layers) {
      for (float v : l.w) w.f32(v);
      for (float v : l.b) w.f32(v);
    }
  }
  w.u32(static_cast<std::uint32_t>(model.classes.size()));
  for (const auto& c : model.classes) w.str(c);
  w.u64(model.seed);
  w.u32(model.epochs);
  return std::move(w.out);
}

PointSetModel deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || !std::equal(std::begin(kModelMagic), std::end(kModelMagic), bytes.begin()))
    throw Error("model: bad magic");
  Reader r(bytes.subspan(4));
  if (r.u32() != kModelVersion) throw Error("model: unsupported version");
  PointSetModel m;
  m.n_points = static_cast<int>(r.u32());
  for (auto* layers : {&m.point_layers, &m.head_layers}) {
    const std::uint32_t count = r.u32();
    if (count < 2 || count > 64) throw Error("model: width mismatch (layer count)");
    std::vector<int> widths(count);
    for (auto& wd : widths) {
      wd = static_cast<int>(r.u32());
      if (wd <= 0 || wd > 1 << 16) throw Error("model: width mismatch (bad width)");
    }
    for (std::size_t i = 1; i < widths.size(); ++i) {
      layers->push_back({widths[i - 1], widths[i], {}, {}});
    }
  }
  for (auto* layers : {&m.point_layers, &m.head_layers}) {
    for (auto& l : *layers) {
      r.need(static_cast<std::size_t>(l.in) * l.out * 4);
      l.w.resize(static_cast<std::size_t>(l.in) * l.out);
      for (auto& v : l.w) v = r.f32();
      l.b.resize(static_cast<std::size_t>(l.out));
      for (auto& v : l.b) v = r.f32();
    }
  }
  const std::uint32_t nc = r.u32();
  if (nc > 1024) throw Error("model: bad class count");
  for (std::uint32_t i = 0; i < nc; ++i) m.classes.push_back(r.str());
  m.seed = r.u64();
  m.epochs = r.u32();
  if (!r.done()) throw Error("model: trailing bytes");
  m.validate();
  return m;
}

PointSetModel load_model_file(const std::filesystem::path& path) { return deserialize_model(read_file_bytes(path)); }

// ---------------------------------------------------------------------------
// Gating

GatedClass gate(const Prediction& p, const std::vector<std::string>& classes) {
  GatedClass g;
  g.confidence = p.confidence;
  if (p.argmax >= 0 && static_cast<std::size_t>(p.argmax) < classes.size()) g.class_name = classes[p.argmax];
  if (p.accepted) g.label = label_class_from_name(g.class_name);
  return g;
}

std::vector<double> NetworkClassifier::probabilities(const PointCloud& cloud) const {
  Rng rng(seed_);
  const PointCloud pts = resample(normalize_unit_sphere(cloud), static_cast<std::size_t>(model_.n_points), rng);
  return forward(model_, pts);
}

GatedClass predict_gated(const PointSetModel& model, const PointCloud& cloud, double threshold, std::uint64_t seed) {
  const NetworkClassifier net(model, seed);
  return gate(make_prediction(net.probabilities(cloud), threshold), model.classes);
}

// ---------------------------------------------------------------------------
// Datasets

DatasetSplit make_synthetic_dataset(int train_per_class, int test_per_class, std::uint64_t seed, Taxonomy taxonomy) {
  if (train_per_class < 1 || test_per_class < 0) throw Error("dataset: need at least one training cloud per class");
  DatasetSplit split;
  std::vector<std::vector<std::string>> members;
  if (taxonomy == Taxonomy::train) {
    for (auto c : kTrainClasses) split.classes.emplace_back(name(c));
    members.resize(kTrainClassCount);
    for (const auto& f : synthetic_fine_classes()) {
      const auto t = merge_train(*parse_fine_class(f));
      members[static_cast<std::size_t>(*t)].push_back(f);
    }
  } else {
    for (const auto& f : synthetic_fine_classes()) {
      split.classes.push_back(f);
      members.push_back({f});
    }
  }
  const int n_classes = static_cast<int>(members.size());
  const int per_class = train_per_class + test_per_class;
  const int total = per_class * n_classes;
  std::vector<LabeledCloud> all(static_cast<std::size_t>(total));
#pragma omp parallel for schedule(dynamic, 8)
  for (int i = 0; i < total; ++i) {
    const int c = i / per_class;
    Rng rng(mix(seed, static_cast<std::uint64_t>(i)));
    const auto& fines = members[static_cast<std::size_t>(c)];
    const auto& fine = fines[std::uniform_int_distribution<std::size_t>(0, fines.size() - 1)(rng)];
    const double yaw = std::uniform_real_distribution<double>(0.0, 2.0 * 3.14159265358979323846)(rng);
    all[i] = {rotate_yaw(normalize_unit_sphere(sample_box_cloud(fine, rng)), yaw), c};
  }
  for (int i = 0; i < total; ++i) {
    auto& dst = (i % per_class) < train_per_class ? split.train : split.test;
    dst.push_back(std::move(all[i]));
  }
  return split;
}

DatasetSplit load_manifest_dataset(const std::filesystem::path& manifest, std::size_t points_per_mesh,
                                   std::uint64_t seed) {
  const auto bytes = read_file_bytes(manifest);
  const std::string text(bytes.begin(), bytes.end());
  DatasetSplit split;
  for (auto c : kTrainClasses) split.classes.emplace_back(name(c));
  std::istringstream lines(text);
  std::string line;
  std::size_t index = 0;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = split_fields(t);
    if (fields.size() != 2) throw Error("manifest line " + std::to_string(line_no) + ": expected 'path label'");
    const auto fine = parse_fine_class(fields[1]);
    if (!fine) throw Error("manifest line " + std::to_string(line_no) + ": unknown class '" + fields[1] + "'");
    const auto cls = merge_train(*fine);
    if (!cls) continue;
    std::filesystem::path p = fields[0];
    if (p.is_relative()) p = manifest.parent_path() / p;
    const auto mesh = read_file_bytes(p);
    Rng rng(mix(seed, index));
    PointCloud cloud = sample_mesh_off(std::string_view(reinterpret_cast<const char*>(mesh.data()), mesh.size()),
                                       points_per_mesh, rng);
    auto& dst = index % 5 == 4 ? split.test : split.train;
    dst.push_back({normalize_unit_sphere(cloud), static_cast<int>(*cls)});
    ++index;
  }
  return split;
}

}  // namespace hapmap
