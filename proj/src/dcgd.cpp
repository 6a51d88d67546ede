#include "hapmap/dcgd.hpp"

#include <algorithm>
#include <cmath>

namespace hapmap {

std::size_t DepthCut::occupied() const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.has_value(); }));
}

namespace {

struct CutGrid {
  double z0, dz;
  int n;  // index of the last cut

  // Cut index of a depth, or -1 when it falls in no slice.
  int bin(double z) const {
    const double r = std::round((z - z0) / dz);
    if (r < 0.0 || r > n) return -1;
    const int i = static_cast<int>(r);
    if (std::abs(z - (z0 + i * dz)) > dz / 2) return -1;
    return i;
  }
};

CutGrid make_grid(double z0, double zf, double dz) {
  if (!(z0 < zf) || !(dz > 0.0)) throw Error("dcgd: require z0 < zf and dz > 0");
  return {z0, dz, static_cast<int>(std::floor((zf - z0) / dz + 1e-9))};
}

double lower_median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// Floor level: the densest window of width `tol` over all cut entries,
// lowest window on ties, reported as the median inside the window.
std::optional<double> dominant_level(const std::vector<DepthCut>& cuts, double tol) {
  std::vector<double> ys;
  for (const auto& c : cuts)
    for (const auto& e : c.entries)
      if (e) ys.push_back(e->y);
  if (ys.empty()) return std::nullopt;
  std::sort(ys.begin(), ys.end());
  std::size_t best_lo = 0, best_count = 0, hi = 0;
  for (std::size_t lo = 0; lo < ys.size(); ++lo) {
    while (hi < ys.size() && ys[hi] <= ys[lo] + tol) ++hi;
    if (hi - lo > best_count) {
      best_count = hi - lo;
      best_lo = lo;
    }
  }
  return ys[best_lo + (best_count - 1) / 2];
}

}  // namespace

std::vector<DepthCut> compute_depth_cuts(const DepthFrame& frame, const Intrinsics& k, double z0, double zf,
                                         double dz, Exec exec) {
  const CutGrid grid = make_grid(z0, zf, dz);
  std::vector<DepthCut> cuts(static_cast<std::size_t>(grid.n + 1));
  for (int i = 0; i <= grid.n; ++i) {
    cuts[i].index = i;
    cuts[i].z = z0 + i * dz;
    cuts[i].entries.assign(static_cast<std::size_t>(frame.width), std::nullopt);
  }
  // Columns are independent: each writes only its own slot in every cut.
  auto do_column = [&](int u) {
    for (int v = 0; v < frame.height; ++v) {
      const std::uint16_t raw = frame.at(u, v);
      if (raw == 0) continue;
      const double z = raw * k.depth_scale;
      const int i = grid.bin(z);
      if (i < 0) continue;
      const double y = (k.cy - v) * z / k.fy;
      auto& slot = cuts[static_cast<std::size_t>(i)].entries[static_cast<std::size_t>(u)];
      if (!slot || y < slot->y) slot = CutEntry{v, y};
    }
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int u = 0; u < frame.width; ++u) do_column(u);
  } else {
    for (int u = 0; u < frame.width; ++u) do_column(u);
  }
  return cuts;
}

std::vector<SubCut> split_subcuts(const DepthCut& cut, double baseline_tol, const std::vector<std::uint8_t>* claimed) {
  std::vector<double> free_y;
  for (std::size_t c = 0; c < cut.entries.size(); ++c) {
    if (cut.entries[c] && !(claimed && (*claimed)[c])) free_y.push_back(cut.entries[c]->y);
  }
  std::vector<SubCut> subs;
  if (cut.occupied() == 0) return subs;
  // With every entry claimed there is no ground reference left; all convex.
  const bool have_baseline = !free_y.empty();
  const double baseline = have_baseline ? lower_median(std::move(free_y)) : 0.0;

  for (std::size_t c = 0; c < cut.entries.size(); ++c) {
    if (!cut.entries[c]) continue;
    const double y = cut.entries[c]->y;
    const SubCutKind kind =
        (!have_baseline || y > baseline + baseline_tol) ? SubCutKind::convex : SubCutKind::concave;
    if (subs.empty() || subs.back().kind != kind) {
      subs.push_back(SubCut{static_cast<int>(c), static_cast<int>(c), kind, {}});
    }
    subs.back().c_end = static_cast<int>(c);
    subs.back().y.push_back(y);
  }
  return subs;
}

GroundDetection detect_ground(const DepthFrame& frame, const Intrinsics& k, const DcgdParams& params, Exec exec) {
  const CutGrid grid = make_grid(params.z0, params.zf, params.dz);
  GroundDetection out;
  out.mask = PixelMask(frame.width, frame.height);
  const auto cuts = compute_depth_cuts(frame, k, params.z0, params.zf, params.dz, exec);
  const auto level = dominant_level(cuts, params.baseline_tol);
  if (!level) return out;
  out.ground_level = *level;
  out.found = true;

  // Per cut: which columns keep a ground entry, and the ground baseline.
  const std::size_t ncols = static_cast<std::size_t>(frame.width);
  std::vector<std::vector<std::uint8_t>> ground_col(cuts.size());
  std::vector<double> ground_base(cuts.size(), 0.0);

  // Sequential near-to-far fold: each cut is stripped of its convex parts
  // until its concave remainder is stable.
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    const DepthCut& cut = cuts[i];
    std::vector<std::uint8_t> claimed(ncols, 0);
    for (int iter = 0; iter < 16; ++iter) {
      bool changed = false;
      for (const auto& sub : split_subcuts(cut, params.baseline_tol, &claimed)) {
        for (int c = sub.c_start; c <= sub.c_end; ++c) {
          const auto& e = cut.entries[static_cast<std::size_t>(c)];
          if (!e || claimed[static_cast<std::size_t>(c)]) continue;
          if (sub.kind == SubCutKind::convex || e->y > *level + params.level_tol) {
            claimed[static_cast<std::size_t>(c)] = 1;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    ground_col[i].assign(ncols, 0);
    std::vector<double> ys;
    for (std::size_t c = 0; c < ncols; ++c) {
      if (cut.entries[c] && !claimed[c]) {
        ground_col[i][c] = 1;
        ys.push_back(cut.entries[c]->y);
      }
    }
    if (!ys.empty()) ground_base[i] = lower_median(std::move(ys));
  }

  // Pixel admission: inside [z0, zf], column entry of its slice is ground,
  // and not above the slice's ground baseline nor the global floor level.
  auto do_row = [&](int v) {
    for (int u = 0; u < frame.width; ++u) {
      const std::uint16_t raw = frame.at(u, v);
      if (raw == 0) continue;
      const double z = raw * k.depth_scale;
      if (z < params.z0 || z > params.zf) continue;
      const int i = grid.bin(z);
      if (i < 0 || !ground_col[static_cast<std::size_t>(i)][static_cast<std::size_t>(u)]) continue;
      const double y = (k.cy - v) * z / k.fy;
      if (y <= std::min(ground_base[static_cast<std::size_t>(i)], *level) + params.pixel_tol) out.mask.set(u, v);
    }
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int v = 0; v < frame.height; ++v) do_row(v);
  } else {
    for (int v = 0; v < frame.height; ++v) do_row(v);
  }
  return out;
}

std::optional<double> ground_elevation(const DepthFrame& frame, const Intrinsics& k, const PixelMask& ground) {
  std::vector<double> ys;
  for (int v = 0; v < frame.height; ++v) {
    for (int u = 0; u < frame.width; ++u) {
      if (!ground.at(u, v) || frame.at(u, v) == 0) continue;
      ys.push_back((k.cy - v) * frame.at(u, v) * k.depth_scale / k.fy);
    }
  }
  if (ys.empty()) return std::nullopt;
  return lower_median(std::move(ys));
}

}  // namespace hapmap
