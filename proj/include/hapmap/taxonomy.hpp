#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace hapmap {

/// Object categories taken from the CAD subset. door and window are defined
/// but never trained.
enum class FineClass {
  chair, stool, bed, sofa, bench,
  table, desk, night_stand,
  dresser, wardrobe, bookshelf,
  bathtub, toilet, stairs,
  door, window
};
inline constexpr int kFineClassCount = 16;

/// Six classes the network is trained on.
enum class TrainClass { sit_on, put_on, store_in, bathtub, toilet, stairs };
inline constexpr int kTrainClassCount = 6;

/// Seven classes that receive a tactile glyph.
enum class LabelClass { sit_on, put_on, store_in, sanitary, window, door, stairs };
inline constexpr int kLabelClassCount = 7;

std::string_view name(FineClass c);
std::string_view name(TrainClass c);
std::string_view name(LabelClass c);

std::optional<FineClass> parse_fine_class(std::string_view s);
std::optional<TrainClass> parse_train_class(std::string_view s);
std::optional<LabelClass> parse_label_class(std::string_view s);

/// Fine to labeling taxonomy; total on all 16 fine classes.
LabelClass merge_labels(FineClass c);

/// Fine to training taxonomy; door and window have no training class.
std::optional<TrainClass> merge_train(FineClass c);

/// bathtub and toilet collapse to sanitary.
LabelClass to_label(TrainClass c);

/// Resolves any fine, training or labeling class name to its labeling class.
std::optional<LabelClass> label_class_from_name(std::string_view s);

inline constexpr std::array<TrainClass, kTrainClassCount> kTrainClasses = {
    TrainClass::sit_on, TrainClass::put_on, TrainClass::store_in,
    TrainClass::bathtub, TrainClass::toilet, TrainClass::stairs};

inline constexpr std::array<LabelClass, kLabelClassCount> kLabelClasses = {
    LabelClass::sit_on, LabelClass::put_on, LabelClass::store_in, LabelClass::sanitary,
    LabelClass::window, LabelClass::door, LabelClass::stairs};

}  // namespace hapmap
