#include "hapmap/taxonomy.hpp"

namespace hapmap {

namespace {

constexpr std::array<std::string_view, kFineClassCount> kFineNames = {
    "chair",   "stool",    "bed",       "sofa",    "bench",  "table",  "desk", "night_stand",
    "dresser", "wardrobe", "bookshelf", "bathtub", "toilet", "stairs", "door", "window"};
constexpr std::array<std::string_view, kTrainClassCount> kTrainNames = {"sit_on",  "put_on", "store_in",
                                                                        "bathtub", "toilet", "stairs"};
constexpr std::array<std::string_view, kLabelClassCount> kLabelNames = {"sit_on", "put_on", "store_in", "sanitary",
                                                                        "window", "door",   "stairs"};

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<E>(i);
  return std::nullopt;
}

}  // namespace

std::string_view name(FineClass c) { return kFineNames[static_cast<std::size_t>(c)]; }
std::string_view name(TrainClass c) { return kTrainNames[static_cast<std::size_t>(c)]; }
std::string_view name(LabelClass c) { return kLabelNames[static_cast<std::size_t>(c)]; }

std::optional<FineClass> parse_fine_class(std::string_view s) { return lookup<FineClass>(kFineNames, s); }
std::optional<TrainClass> parse_train_class(std::string_view s) { return lookup<TrainClass>(kTrainNames, s); }
std::optional<LabelClass> parse_label_class(std::string_view s) { return lookup<LabelClass>(kLabelNames, s); }

LabelClass merge_labels(FineClass c) {
  switch (c) {
    case FineClass::chair:
    case FineClass::stool:
    case FineClass::bed:
    case FineClass::sofa:
    case FineClass::bench:
      return LabelClass::sit_on;
    case FineClass::table:
    case FineClass::desk:
    case FineClass::night_stand:
      return LabelClass::put_on;
    case FineClass::dresser:
    case FineClass::wardrobe:
    case FineClass::bookshelf:
      return LabelClass::store_in;
    case FineClass::bathtub:
    case FineClass::toilet:
      return LabelClass::sanitary;
    case FineClass::stairs:
      return LabelClass::stairs;
    case FineClass::door:
      return LabelClass::door;
    case FineClass::window:
      return LabelClass::window;
  }
  return LabelClass::sit_on;
}

std::optional<TrainClass> merge_train(FineClass c) {
  switch (merge_labels(c)) {
    case LabelClass::sit_on: return TrainClass::sit_on;
    case LabelClass::put_on: return TrainClass::put_on;
    case LabelClass::store_in: return TrainClass::store_in;
    case LabelClass::stairs: return TrainClass::stairs;
    case LabelClass::sanitary: return c == FineClass::bathtub ? TrainClass::bathtub : TrainClass::toilet;
    case LabelClass::door:
    case LabelClass::window: return std::nullopt;
  }
  return std::nullopt;
}

LabelClass to_label(TrainClass c) {
  switch (c) {
    case TrainClass::sit_on: return LabelClass::sit_on;
    case TrainClass::put_on: return LabelClass::put_on;
    case TrainClass::store_in: return LabelClass::store_in;
    case TrainClass::bathtub:
    case TrainClass::toilet: return LabelClass::sanitary;
    case TrainClass::stairs: return LabelClass::stairs;
  }
  return LabelClass::sit_on;
}

std::optional<LabelClass> label_class_from_name(std::string_view s) {
  if (auto l = parse_label_class(s)) return l;
  if (auto t = parse_train_class(s)) return to_label(*t);
  if (auto f = parse_fine_class(s)) return merge_labels(*f);
  return std::nullopt;
}

}  // namespace hapmap
