#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "limetree/image.hpp"
#include "limetree/types.hpp"

namespace limetree {

/// Per-pixel segment labels with ids compacted to 0..d-1.
class Segmentation {
 public:
  /// Validates that every id in 0..d-1 occurs and no label is negative.
  Segmentation(std::size_t width, std::size_t height, std::vector<std::int32_t> labels);
  explicit Segmentation(const LabelImage& mask) : Segmentation(mask.width, mask.height, mask.labels) {}

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t segment_count() const noexcept { return members_.size(); }
  std::int32_t label(std::size_t x, std::size_t y) const { return labels_[y * width_ + x]; }
  const std::vector<std::int32_t>& labels() const noexcept { return labels_; }
  /// Pixel indices (row-major) belonging to a segment, ascending.
  const std::vector<std::size_t>& pixels_of(std::size_t segment) const { return members_.at(segment); }

  LabelImage to_label_image() const { return {width_, height_, labels_}; }

  bool operator==(const Segmentation& other) const {
    return width_ == other.width_ && height_ == other.height_ && labels_ == other.labels_;
  }

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<std::int32_t> labels_;
  std::vector<std::vector<std::size_t>> members_;
};

/// Grid cells numbered row-major; remainder pixels join the last row/column.
Segmentation build_grid_segmentation(std::size_t width, std::size_t height, std::size_t rows, std::size_t cols);

using SegmentGroups = std::vector<std::set<std::size_t>>;

/// old id -> new id after collapsing each group. New ids follow the ascending
/// order of the smallest original member of each merged class.
std::vector<std::size_t> merge_mapping(std::size_t d, const SegmentGroups& groups);
Segmentation merge_segments(const Segmentation& segmentation, const SegmentGroups& groups);

struct OcclusionStrategy {
  enum class Kind { solid_color, segment_mean };
  Kind kind = Kind::solid_color;
  Rgb color{0, 0, 0};  // used by solid_color only

  static OcclusionStrategy solid(Rgb color = {0, 0, 0}) { return {Kind::solid_color, color}; }
  static OcclusionStrategy mean() { return {Kind::segment_mean, {}}; }
  bool operator==(const OcclusionStrategy&) const = default;
};

struct TokenSequence {
  std::vector<std::string> tokens;
  std::string joined() const;
  bool operator==(const TokenSequence&) const = default;
};

/// An instance of the original domain: an image or a token sequence.
using Instance = std::variant<RgbImage, TokenSequence>;

enum class DomainKind { image_occlusion, text_deletion };

/// The interpretable representation of one explained instance (the anchor).
///
/// IR is only defined at the anchor, which maps to the all-ones point. The
/// inverse is total on {0,1}^d and deterministic. Domains are immutable; the
/// merge operation returns a new domain.
class InterpretableDomain {
 public:
  static InterpretableDomain image(RgbImage anchor, Segmentation segmentation,
                                   OcclusionStrategy occlusion = OcclusionStrategy::solid());
  /// Whitespace tokenisation.
  static InterpretableDomain text(const std::string& text);
  /// Each [begin, end) character span becomes one token, so a span may hold a
  /// multi-word tuple. Spans must be non-empty, ordered and non-overlapping.
  static InterpretableDomain text(const std::string& text, const std::vector<std::pair<std::size_t, std::size_t>>& spans);
  static InterpretableDomain tokens(std::vector<std::string> tokens);

  DomainKind kind() const noexcept { return kind_; }
  std::size_t dimension() const noexcept { return dimension_; }
  const Instance& anchor() const noexcept { return anchor_; }
  const Segmentation& segmentation() const;
  const OcclusionStrategy& occlusion() const noexcept { return occlusion_; }
  /// Fill colour applied to a segment when its bit is 0 (image domains).
  Rgb fill_color(std::size_t segment) const;

  InterpretablePoint to_interpretable(const Instance& instance) const;
  Instance from_interpretable(const InterpretablePoint& point) const;

  /// Components whose removal leaves the anchor unchanged (segments already at
  /// their occlusion colour, or repeated tokens). Non-empty means IR^-1 is not
  /// injective and the exact-fidelity guarantees are qualified.
  const std::vector<std::size_t>& injectivity_violations() const noexcept { return violations_; }
  bool bijective() const noexcept { return violations_.empty(); }

  /// Returns a new domain over the merged segmentation. Merge groups are
  /// expressed in this domain's ids and appended to the history.
  InterpretableDomain merged(const SegmentGroups& groups) const;
  const std::vector<SegmentGroups>& merge_history() const noexcept { return merge_history_; }

  /// {kind, d, occlusion:{kind,rgb}, merge_history}
  nlohmann::json to_json() const;

 private:
  InterpretableDomain() = default;
  void detect_violations();

  DomainKind kind_ = DomainKind::image_occlusion;
  std::size_t dimension_ = 0;
  Instance anchor_;
  std::optional<Segmentation> segmentation_;
  OcclusionStrategy occlusion_;
  std::vector<Rgb> fills_;
  std::vector<std::size_t> violations_;
  std::vector<SegmentGroups> merge_history_;
};

std::string to_string(DomainKind kind);

}  // namespace limetree
