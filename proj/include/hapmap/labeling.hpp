#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hapmap/geomfeat.hpp"
#include "hapmap/taxonomy.hpp"
#include "hapmap/types.hpp"

namespace hapmap {

inline constexpr int kGlyphSize = 5;

/// 5x5 raised-dot bitmap; row 0 is the first row of the text form.
struct Glyph {
  std::string tag;
  std::array<std::array<bool, kGlyphSize>, kGlyphSize> dots{};

  bool at(int row, int col) const { return dots[row][col]; }
  int dot_count() const;
};

/// Number of cells in which two glyphs differ.
int glyph_distance(const Glyph& a, const Glyph& b);

enum class StairsDir { up, down };
std::string_view name(StairsDir d);

/// Glyph sheet tags, one per labeling class plus the two stairs variants.
inline constexpr std::array<std::string_view, 8> kGlyphTags = {
    "sit_on", "put_on", "store_in", "sanitary", "window", "door", "stairs_up", "stairs_down"};

/// A complete set of glyphs. Text form: per glyph a tag line followed by
/// five lines of '.' (flat) and '#' (raised); blank lines separate blocks.
class GlyphSheet {
 public:
  /// Throws Error unless every tag in kGlyphTags is present exactly once,
  /// every glyph has 4..25 dots and every pair differs in >= 4 cells.
  explicit GlyphSheet(std::vector<Glyph> glyphs);

  static const GlyphSheet& builtin();

  const Glyph& get(std::string_view tag) const;
  const std::vector<Glyph>& glyphs() const { return glyphs_; }

  /// FNV-1a 64 of the canonical text form.
  std::uint64_t hash() const;

 private:
  std::vector<Glyph> glyphs_;
};

GlyphSheet parse_glyph_sheet(std::string_view text);
std::string format_glyph_sheet(const GlyphSheet& sheet);
GlyphSheet load_glyph_sheet_file(const std::filesystem::path& path);

/// Sheet tag of a class; stairs needs a direction and the others must not
/// have one.
std::string_view glyph_tag(LabelClass c, std::optional<StairsDir> dir);

const Glyph& glyph_for(LabelClass c, std::optional<StairsDir> dir, const GlyphSheet& sheet = GlyphSheet::builtin());

/// Pin level of a glyph: 1 + height_class, so 2, 3 or 4.
int label_level(int height_class);

/// down when the points below ground_y sit more than 100mm deep at the
/// median; up otherwise (including flat or ambiguous segments).
StairsDir stairs_direction(const PointCloud& segment, double ground_y, double min_depth = 100.0);

/// Everything the synthesis area needs about one segment.
struct ObjectDescriptor {
  int segment_id = 0;
  std::optional<LabelClass> label;  // accepted semantic class, if any
  std::optional<StairsDir> stairs;  // set iff label == stairs
  std::string class_name;           // model argmax, empty without a model
  double confidence = 0.0;
  GeometricClass geometry;
  Footprint footprint;

  void validate() const;
};

}  // namespace hapmap
