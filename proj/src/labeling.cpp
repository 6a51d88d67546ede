#include "hapmap/labeling.hpp"

#include <algorithm>
#include <sstream>

#include "hapmap/depthio.hpp"
#include "hapmap/textkv.hpp"

namespace hapmap {

namespace {

constexpr std::string_view kBuiltinSheet = R"(sit_on
#....
#....
#####
#...#
#...#

put_on
.....
#####
.#.#.
.#.#.
.#.#.

store_in
.###.
.#.#.
.###.
.#.#.
.###.

sanitary
.....
#...#
#...#
#####
.#.#.

window
#####
#.#.#
#####
#.#.#
#####

door
####.
#..#.
#..##
#..#.
#..#.

stairs_up
....#
...##
..###
.####
#####

stairs_down
#....
##...
###..
####.
#####
)";

}  // namespace

int Glyph::dot_count() const {
  int n = 0;
  for (const auto& row : dots)
    for (bool d : row) n += d;
  return n;
}

int glyph_distance(const Glyph& a, const Glyph& b) {
  int n = 0;
  for (int r = 0; r < kGlyphSize; ++r)
    for (int c = 0; c < kGlyphSize; ++c) n += a.dots[r][c] != b.dots[r][c];
  return n;
}

std::string_view name(StairsDir d) { return d == StairsDir::up ? "up" : "down"; }

GlyphSheet::GlyphSheet(std::vector<Glyph> glyphs) : glyphs_(std::move(glyphs)) {
  for (auto tag : kGlyphTags) {
    const auto n = std::count_if(glyphs_.begin(), glyphs_.end(), [&](const Glyph& g) { return g.tag == tag; });
    if (n != 1) throw Error("glyph sheet: tag '" + std::string(tag) + "' must appear exactly once");
  }
  if (glyphs_.size() != kGlyphTags.size()) throw Error("glyph sheet: unknown tag present");
  for (const auto& g : glyphs_) {
    if (g.dot_count() < 4) throw Error("glyph sheet: '" + g.tag + "' has fewer than 4 dots");
  }
  for (std::size_t i = 0; i < glyphs_.size(); ++i)
    for (std::size_t j = i + 1; j < glyphs_.size(); ++j)
      if (glyph_distance(glyphs_[i], glyphs_[j]) < 4)
        throw Error("glyph sheet: '" + glyphs_[i].tag + "' and '" + glyphs_[j].tag + "' differ in fewer than 4 cells");
  // Canonical order regardless of the file order.
  std::sort(glyphs_.begin(), glyphs_.end(), [](const Glyph& a, const Glyph& b) {
    return std::find(kGlyphTags.begin(), kGlyphTags.end(), a.tag) <
           std::find(kGlyphTags.begin(), kGlyphTags.end(), b.tag);
  });
}

const GlyphSheet& GlyphSheet::builtin() {
  static const GlyphSheet sheet = parse_glyph_sheet(kBuiltinSheet);
  return sheet;
}

const Glyph& GlyphSheet::get(std::string_view tag) const {
  for (const auto& g : glyphs_)
    if (g.tag == tag) return g;
  throw Error("glyph sheet: no glyph '" + std::string(tag) + "'");
}

std::uint64_t GlyphSheet::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : format_glyph_sheet(*this)) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

GlyphSheet parse_glyph_sheet(std::string_view text) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (!t.empty()) lines.emplace_back(t);
  }
  if (lines.size() % (kGlyphSize + 1) != 0) throw Error("glyph sheet: each glyph needs a tag line and 5 rows");
  std::vector<Glyph> glyphs;
  for (std::size_t i = 0; i < lines.size(); i += kGlyphSize + 1) {
    Glyph g;
    g.tag = lines[i];
    for (int r = 0; r < kGlyphSize; ++r) {
      const auto& row = lines[i + 1 + r];
      if (row.size() != kGlyphSize || row.find_first_not_of(".#") != std::string::npos)
        throw Error("glyph sheet: bad row '" + row + "' in glyph '" + g.tag + "'");
      for (int c = 0; c < kGlyphSize; ++c) g.dots[r][c] = row[c] == '#';
    }
    glyphs.push_back(std::move(g));
  }
  return GlyphSheet(std::move(glyphs));
}

std::string format_glyph_sheet(const GlyphSheet& sheet) {
  std::string out;
  for (const auto& g : sheet.glyphs()) {
    if (!out.empty()) out += '\n';
    out += g.tag + '\n';
    for (const auto& row : g.dots) {
      for (bool d : row) out += d ? '#' : '.';
      out += '\n';
    }
  }
  return out;
}

GlyphSheet load_glyph_sheet_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_glyph_sheet(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string_view glyph_tag(LabelClass c, std::optional<StairsDir> dir) {
  if (c == LabelClass::stairs) {
    if (!dir) throw Error("glyph_for: stairs without direction");
    return *dir == StairsDir::up ? "stairs_up" : "stairs_down";
  }
  if (dir) throw Error("glyph_for: direction given for a non-stairs class");
  return name(c);
}

const Glyph& glyph_for(LabelClass c, std::optional<StairsDir> dir, const GlyphSheet& sheet) {
  return sheet.get(glyph_tag(c, dir));
}

int label_level(int height_class) {
  if (height_class < 1 || height_class > 3) throw Error("label_level: height class must be 1, 2 or 3");
  return 1 + height_class;
}

StairsDir stairs_direction(const PointCloud& segment, double ground_y, double min_depth) {
  std::vector<double> depths;
  for (const auto& p : segment.points)
    if (p.y < ground_y) depths.push_back(ground_y - p.y);
  if (depths.empty()) return StairsDir::up;
  const auto mid = depths.begin() + static_cast<std::ptrdiff_t>((depths.size() - 1) / 2);
  std::nth_element(depths.begin(), mid, depths.end());
  return *mid > min_depth ? StairsDir::down : StairsDir::up;
}

void ObjectDescriptor::validate() const {
  if (stairs.has_value() != (label == LabelClass::stairs))
    throw Error("object descriptor: stairs direction must be present exactly for stairs");
}

}  // namespace hapmap
