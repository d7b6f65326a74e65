#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace isrm {

// Ordered set of region label names. The index of a label in this set is the
// class index used everywhere else (grids, classifier outputs, palettes).
class RegionLabelSet {
 public:
  RegionLabelSet() = default;

  explicit RegionLabelSet(std::vector<std::string> labels)
      : labels_(std::move(labels)) {
    if (labels_.empty()) throw std::invalid_argument("label set is empty");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i].empty()) throw std::invalid_argument("empty label name");
      for (std::size_t j = i + 1; j < labels_.size(); ++j) {
        if (labels_[i] == labels_[j]) {
          throw std::invalid_argument("duplicate label: " + labels_[i]);
        }
      }
    }
  }

  static RegionLabelSet default_indoor() {
    return RegionLabelSet({"bathroom", "bedroom", "closet", "dining room",
                           "garage", "gym", "hallway", "kitchen", "library",
                           "living room", "office", "other room", "outdoor",
                           "stairs"});
  }

  int size() const { return static_cast<int>(labels_.size()); }
  const std::string& name(int i) const { return labels_.at(i); }
  const std::vector<std::string>& names() const { return labels_; }

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] == name) return static_cast<int>(i);
    }
    return -1;
  }

 private:
  std::vector<std::string> labels_;
};

}  // namespace isrm
