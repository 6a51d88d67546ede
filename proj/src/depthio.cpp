#include "hapmap/depthio.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "hapmap/textkv.hpp"

namespace hapmap {

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error("intrinsics: image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw Error("intrinsics: principal point outside the image");
  if (!(depth_scale > 0.0)) throw Error("intrinsics: depth_scale must be positive");
}

double Intrinsics::hfov() const { return 2.0 * std::atan(width / (2.0 * fx)); }

Intrinsics parse_intrinsics(std::string_view text) {
  Intrinsics k;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "fx") k.fx = parse_double(key, value);
    else if (key == "fy") k.fy = parse_double(key, value);
    else if (key == "cx") k.cx = parse_double(key, value);
    else if (key == "cy") k.cy = parse_double(key, value);
    else if (key == "depth_scale") k.depth_scale = parse_double(key, value);
    else if (key == "width") k.width = parse_int(key, value);
    else if (key == "height") k.height = parse_int(key, value);
    else throw Error("intrinsics: unknown key '" + key + "'");
  }
  k.validate();
  return k;
}

Intrinsics load_intrinsics_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_intrinsics(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string format_intrinsics(const Intrinsics& k) {
  std::ostringstream os;
  os.precision(17);
  os << "width=" << k.width << "\nheight=" << k.height << "\nfx=" << k.fx << "\nfy=" << k.fy
     << "\ncx=" << k.cx << "\ncy=" << k.cy << "\ndepth_scale=" << k.depth_scale << "\n";
  return os.str();
}

namespace {

// Cursor over a PGM header: whitespace and '#' comments between tokens.
class PgmHeader {
 public:
  explicit PgmHeader(std::span<const std::uint8_t> b) : bytes_(b) {}

  long next_number() {
    skip_space_and_comments();
    long value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1L << 40)) throw Error("pgm: malformed header (number too large)");
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw Error("pgm: malformed header");
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t payload_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw Error("pgm: malformed header");
    return pos_ + 1;
  }

  void set_pos(std::size_t p) { pos_ = p; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct PgmImage {
  int width = 0;
  int height = 0;
  long maxval = 0;
  std::vector<std::uint16_t> samples;
};

PgmImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw Error("pgm: malformed header (expected P5)");
  PgmHeader header(bytes);
  header.set_pos(2);
  PgmImage img;
  const long w = header.next_number();
  const long h = header.next_number();
  img.maxval = header.next_number();
  if (w <= 0 || h <= 0 || w > 1 << 16 || h > 1 << 16) throw Error("pgm: malformed header (bad size)");
  if (img.maxval <= 0) throw Error("pgm: malformed header (bad maxval)");
  if (img.maxval > 65535) throw Error("pgm: maxval > 65535");
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  const std::size_t offset = header.payload_offset();
  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const std::size_t sample_bytes = img.maxval > 255 ? 2 : 1;
  if (bytes.size() < offset + count * sample_bytes) throw Error("pgm: truncated payload");
  img.samples.resize(count);
  const auto* p = bytes.data() + offset;
  for (std::size_t i = 0; i < count; ++i) {
    img.samples[i] = sample_bytes == 2 ? static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]) : p[i];
  }
  return img;
}

std::uint32_t read_u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void append_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::vector<std::uint8_t> pgm_header(int width, int height, int maxval) {
  const std::string h = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n" +
                        std::to_string(maxval) + "\n";
  return {h.begin(), h.end()};
}

}  // namespace

DepthFrame load_depth(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
    PgmImage img = decode_pgm(bytes);
    DepthFrame f;
    f.width = img.width;
    f.height = img.height;
    f.data = std::move(img.samples);
    return f;
  }
  if (bytes.size() >= 4 && std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) == kRawDepthMagic) {
    if (bytes.size() < 12) throw Error("depth: truncated header");
    const std::uint32_t w = read_u32_le(bytes.data() + 4);
    const std::uint32_t h = read_u32_le(bytes.data() + 8);
    if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16)) throw Error("depth: malformed header (bad size)");
    DepthFrame f(static_cast<int>(w), static_cast<int>(h));
    if (bytes.size() < 12 + f.data.size() * 2) throw Error("depth: truncated payload");
    const auto* p = bytes.data() + 12;
    for (std::size_t i = 0; i < f.data.size(); ++i) {
      f.data[i] = static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8));
    }
    return f;
  }
  throw Error("depth: malformed header (neither P5 nor HDPT)");
}

DepthFrame load_depth_file(const std::filesystem::path& path) { return load_depth(read_file_bytes(path)); }

std::vector<std::uint8_t> encode_depth_pgm(const DepthFrame& frame) {
  auto out = pgm_header(frame.width, frame.height, 65535);
  out.reserve(out.size() + frame.data.size() * 2);
  for (auto d : frame.data) {
    out.push_back(static_cast<std::uint8_t>(d >> 8));
    out.push_back(static_cast<std::uint8_t>(d & 0xff));
  }
  return out;
}

std::vector<std::uint8_t> encode_depth_raw(const DepthFrame& frame) {
  std::vector<std::uint8_t> out(kRawDepthMagic.begin(), kRawDepthMagic.end());
  append_u32_le(out, static_cast<std::uint32_t>(frame.width));
  append_u32_le(out, static_cast<std::uint32_t>(frame.height));
  for (auto d : frame.data) {
    out.push_back(static_cast<std::uint8_t>(d & 0xff));
    out.push_back(static_cast<std::uint8_t>(d >> 8));
  }
  return out;
}

std::vector<std::uint8_t> encode_mask_pgm(const PixelMask& mask) {
  auto out = pgm_header(mask.width, mask.height, 255);
  for (auto b : mask.bits) out.push_back(b ? 255 : 0);
  return out;
}

PixelMask decode_mask_pgm(std::span<const std::uint8_t> bytes) {
  PgmImage img = decode_pgm(bytes);
  PixelMask m(img.width, img.height);
  for (std::size_t i = 0; i < img.samples.size(); ++i) m.bits[i] = img.samples[i] != 0;
  return m;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

PointCloud backproject(const DepthFrame& frame, const Intrinsics& k, const PixelMask* skip, Exec exec) {
  const int w = frame.width;
  const int h = frame.height;
  if (skip && (skip->width != w || skip->height != h)) throw Error("backproject: mask size mismatch");

  // Per-row buffers are concatenated afterwards, so output order is row-major
  // whichever kernel runs.
  std::vector<std::vector<Vec3>> rows(static_cast<std::size_t>(h));
  auto do_row = [&](int v) {
    auto& out = rows[static_cast<std::size_t>(v)];
    for (int u = 0; u < w; ++u) {
      const std::uint16_t raw = frame.at(u, v);
      if (raw == 0 || (skip && skip->at(u, v))) continue;
      out.push_back(pixel_to_point(u, v, raw * k.depth_scale, k));
    }
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int v = 0; v < h; ++v) do_row(v);
  } else {
    for (int v = 0; v < h; ++v) do_row(v);
  }

  PointCloud cloud;
  std::size_t total = 0;
  for (const auto& r : rows) total += r.size();
  cloud.points.reserve(total);
  for (const auto& r : rows) cloud.points.insert(cloud.points.end(), r.begin(), r.end());
  return cloud;
}

PointCloud passthrough_filter(const PointCloud& cloud, double zmin, double zmax) {
  PointCloud out;
  for (const auto& p : cloud.points) {
    if (p.z >= zmin && p.z <= zmax) out.points.push_back(p);
  }
  return out;
}

}  // namespace hapmap
