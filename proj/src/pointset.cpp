#include "hapmap/pointset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <random>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace hapmap {

namespace {

// Whitespace tokenizer over OFF text that skips '#' comments.
class OffReader {
 public:
  explicit OffReader(std::string_view text) : text_(text) {}

  bool next(std::string_view& tok) {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ >= text_.size()) return false;
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    tok = text_.substr(start, pos_ - start);
    return true;
  }

  double number(const char* what) {
    std::string_view tok;
    if (!next(tok)) throw Error(std::string("off: unexpected end of file reading ") + what);
    try {
      std::size_t used = 0;
      const double v = std::stod(std::string(tok), &used);
      if (used != tok.size() || !std::isfinite(v)) throw Error("");
      return v;
    } catch (...) {
      throw Error(std::string("off: malformed ") + what + " '" + std::string(tok) + "'");
    }
  }

  long integer(const char* what) {
    const double v = number(what);
    if (v != std::floor(v) || v < 0) throw Error(std::string("off: malformed ") + what);
    return static_cast<long>(v);
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

Vec3 sub(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }

double tri_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 u = sub(b, a), v = sub(c, a);
  const Vec3 n{u.y * v.z - u.z * v.y, u.z * v.x - u.x * v.z, u.x * v.y - u.y * v.x};
  return 0.5 * std::sqrt(n.x * n.x + n.y * n.y + n.z * n.z);
}

}  // namespace

PointCloud sample_mesh_off(std::string_view text, std::size_t n_points, Rng& rng) {
  OffReader in(text);
  std::string_view tok;
  if (!in.next(tok) || tok.substr(0, 3) != "OFF") throw Error("off: missing OFF header");
  long nv = 0, nf = 0;
  if (tok.size() > 3) {
    // Some exporters glue the vertex count onto the header ("OFF490").
    try {
      nv = std::stol(std::string(tok.substr(3)));
    } catch (...) {
      throw Error("off: malformed header");
    }
  } else {
    nv = in.integer("vertex count");
  }
  nf = in.integer("face count");
  in.integer("edge count");
  if (nv <= 0 || nf <= 0) throw Error("off: empty mesh");

  std::vector<Vec3> verts(static_cast<std::size_t>(nv));
  for (auto& v : verts) {
    v.x = in.number("vertex");
    v.y = in.number("vertex");
    v.z = in.number("vertex");
  }
  std::vector<std::array<std::size_t, 3>> tris;
  for (long f = 0; f < nf; ++f) {
    if (!in.next(tok)) throw Error("off: face count mismatch (header says " + std::to_string(nf) + ", found " +
                                   std::to_string(f) + ")");
    long k = 0;
    try {
      k = std::stol(std::string(tok));
    } catch (...) {
      throw Error("off: malformed face");
    }
    if (k < 3) throw Error("off: face with fewer than 3 vertices");
    std::vector<std::size_t> idx(static_cast<std::size_t>(k));
    for (auto& i : idx) {
      const long v = in.integer("face index");
      if (v >= nv) throw Error("off: face index out of range");
      i = static_cast<std::size_t>(v);
    }
    for (std::size_t t = 1; t + 1 < idx.size(); ++t) tris.push_back({idx[0], idx[t], idx[t + 1]});
  }
  std::vector<double> cumulative;
  cumulative.reserve(tris.size());
  double total = 0.0;
  for (const auto& t : tris) cumulative.push_back(total += tri_area(verts[t[0]], verts[t[1]], verts[t[2]]));
  if (!(total > 0.0)) throw Error("off: zero total surface area");

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointCloud cloud;
  cloud.points.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double r = unit(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    const auto ti = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), tris.size() - 1);
    const Vec3& a = verts[tris[ti][0]];
    const Vec3& b = verts[tris[ti][1]];
    const Vec3& c = verts[tris[ti][2]];
    const double s = std::sqrt(unit(rng));
    const double t = unit(rng);
    const double wa = 1.0 - s, wb = s * (1.0 - t), wc = s * t;
    cloud.points.push_back(
        {wa * a.x + wb * b.x + wc * c.x, wa * a.y + wb * b.y + wc * c.y, wa * a.z + wb * b.z + wc * c.z});
  }
  return cloud;
}

PointCloud normalize_unit_sphere(const PointCloud& cloud) {
  if (cloud.empty()) throw Error("normalize_unit_sphere: empty cloud");
  Vec3 c;
  for (const auto& p : cloud.points) {
    c.x += p.x;
    c.y += p.y;
    c.z += p.z;
  }
  const double n = static_cast<double>(cloud.size());
  c = {c.x / n, c.y / n, c.z / n};
  PointCloud out;
  out.points.reserve(cloud.size());
  double max_norm = 0.0;
  for (const auto& p : cloud.points) {
    const Vec3 q = sub(p, c);
    max_norm = std::max(max_norm, std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z));
    out.points.push_back(q);
  }
  if (!(max_norm > 1e-12)) {
    for (auto& p : out.points) p = {};
    return out;
  }
  for (auto& p : out.points) p = {p.x / max_norm, p.y / max_norm, p.z / max_norm};
  return out;
}

PointCloud rotate_yaw(const PointCloud& cloud, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back({c * p.x + s * p.z, p.y, -s * p.x + c * p.z});
  return out;
}

PointCloud augment_with_angle(const PointCloud& cloud, double angle, Rng& rng, double sigma, double clip) {
  PointCloud out = rotate_yaw(cloud, angle);
  if (sigma > 0.0) {
    std::normal_distribution<double> g(0.0, sigma);
    for (auto& p : out.points) {
      p.x += std::clamp(g(rng), -clip, clip);
      p.y += std::clamp(g(rng), -clip, clip);
      p.z += std::clamp(g(rng), -clip, clip);
    }
  }
  return out;
}

PointCloud augment(const PointCloud& cloud, Rng& rng, double sigma, double clip) {
  const double angle = std::uniform_real_distribution<double>(0.0, 2.0 * 3.14159265358979323846)(rng);
  return augment_with_angle(cloud, angle, rng, sigma, clip);
}

PointCloud resample(const PointCloud& cloud, std::size_t n, Rng& rng) {
  if (cloud.empty()) throw Error("resample: empty cloud");
  PointCloud out;
  out.points.reserve(n);
  const std::size_t m = cloud.size();
  if (m >= n) {
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>(i, m - 1)(rng);
      std::swap(idx[i], idx[j]);
      out.points.push_back(cloud.points[idx[i]]);
    }
  } else {
    out.points = cloud.points;
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    while (out.points.size() < n) out.points.push_back(cloud.points[pick(rng)]);
  }
  return out;
}

}  // namespace hapmap
