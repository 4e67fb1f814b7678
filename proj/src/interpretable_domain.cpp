#include "limetree/interpretable_domain.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "limetree/error.hpp"

namespace limetree {

Segmentation::Segmentation(std::size_t width, std::size_t height, std::vector<std::int32_t> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  require(width > 0 && height > 0, "segmentation must have non-zero dimensions");
  require(labels_.size() == width * height, "label count does not match segmentation dimensions");
  const auto max_label = *std::max_element(labels_.begin(), labels_.end());
  const auto min_label = *std::min_element(labels_.begin(), labels_.end());
  require(min_label >= 0, "segment labels must be non-negative");
  members_.resize(static_cast<std::size_t>(max_label) + 1);
  for (std::size_t i = 0; i < labels_.size(); ++i) members_[static_cast<std::size_t>(labels_[i])].push_back(i);
  for (std::size_t id = 0; id < members_.size(); ++id)
    require(!members_[id].empty(), "segment id " + std::to_string(id) + " has no pixels; labels must cover 0.." +
                                       std::to_string(max_label) + " without gaps");
}

Segmentation build_grid_segmentation(std::size_t width, std::size_t height, std::size_t rows, std::size_t cols) {
  require(width > 0 && height > 0, "grid segmentation needs non-zero image dimensions");
  require(rows >= 1 && cols >= 1, "grid needs at least one row and one column");
  require(rows <= height && cols <= width, "grid cannot have more cells than pixels along an axis");
  const std::size_t cell_h = height / rows;
  const std::size_t cell_w = width / cols;
  std::vector<std::int32_t> labels(width * height);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t r = std::min(y / cell_h, rows - 1);
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t c = std::min(x / cell_w, cols - 1);
      labels[y * width + x] = static_cast<std::int32_t>(r * cols + c);
    }
  }
  return Segmentation(width, height, std::move(labels));
}

std::vector<std::size_t> merge_mapping(std::size_t d, const SegmentGroups& groups) {
  // representative[id] = smallest member of the id's class
  std::vector<std::size_t> representative(d);
  std::iota(representative.begin(), representative.end(), std::size_t{0});
  std::vector<bool> grouped(d, false);
  for (const auto& group : groups) {
    if (group.empty()) continue;
    const std::size_t smallest = *group.begin();
    for (auto id : group) {
      require(id < d, "merge group references unknown segment " + std::to_string(id));
      require(!grouped[id], "merge groups overlap on segment " + std::to_string(id));
      grouped[id] = true;
      representative[id] = smallest;
    }
  }
  std::map<std::size_t, std::size_t> compact;
  for (auto rep : representative) compact.emplace(rep, 0);
  std::size_t next = 0;
  for (auto& [rep, id] : compact) id = next++;
  std::vector<std::size_t> mapping(d);
  for (std::size_t id = 0; id < d; ++id) mapping[id] = compact.at(representative[id]);
  return mapping;
}

Segmentation merge_segments(const Segmentation& segmentation, const SegmentGroups& groups) {
  const auto mapping = merge_mapping(segmentation.segment_count(), groups);
  std::vector<std::int32_t> labels(segmentation.labels().size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    labels[i] = static_cast<std::int32_t>(mapping[static_cast<std::size_t>(segmentation.labels()[i])]);
  return Segmentation(segmentation.width(), segmentation.height(), std::move(labels));
}

std::string TokenSequence::joined() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

InterpretableDomain InterpretableDomain::image(RgbImage anchor, Segmentation segmentation,
                                               OcclusionStrategy occlusion) {
  require(anchor.width() == segmentation.width() && anchor.height() == segmentation.height(),
          "segmentation dimensions do not match the anchor image");
  InterpretableDomain domain;
  domain.kind_ = DomainKind::image_occlusion;
  domain.dimension_ = segmentation.segment_count();
  domain.occlusion_ = occlusion;

  // Mean colours are computed once from the anchor and frozen, so IR^-1 stays
  // a fixed function of the bits.
  domain.fills_.resize(domain.dimension_, occlusion.color);
  if (occlusion.kind == OcclusionStrategy::Kind::segment_mean) {
    for (std::size_t s = 0; s < domain.dimension_; ++s) {
      const auto& pixels = segmentation.pixels_of(s);
      std::uint64_t sr = 0, sg = 0, sb = 0;
      for (auto p : pixels) {
        const Rgb c = anchor.pixel(p);
        sr += c.r;
        sg += c.g;
        sb += c.b;
      }
      const std::uint64_t n = pixels.size();
      domain.fills_[s] = Rgb{static_cast<std::uint8_t>((sr + n / 2) / n), static_cast<std::uint8_t>((sg + n / 2) / n),
                             static_cast<std::uint8_t>((sb + n / 2) / n)};
    }
  }
  domain.anchor_ = std::move(anchor);
  domain.segmentation_ = std::move(segmentation);
  domain.detect_violations();
  return domain;
}

InterpretableDomain InterpretableDomain::tokens(std::vector<std::string> tokens) {
  require(!tokens.empty(), "text domain needs at least one token");
  InterpretableDomain domain;
  domain.kind_ = DomainKind::text_deletion;
  domain.dimension_ = tokens.size();
  domain.anchor_ = TokenSequence{std::move(tokens)};
  domain.detect_violations();
  return domain;
}

InterpretableDomain InterpretableDomain::text(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return InterpretableDomain::tokens(std::move(tokens));
}

InterpretableDomain InterpretableDomain::text(const std::string& text,
                                              const std::vector<std::pair<std::size_t, std::size_t>>& spans) {
  std::vector<std::string> tokens;
  std::size_t previous_end = 0;
  for (const auto& [begin, end] : spans) {
    require(begin < end && end <= text.size(), "token span out of range or empty");
    require(begin >= previous_end, "token spans must be ordered and non-overlapping");
    tokens.push_back(text.substr(begin, end - begin));
    previous_end = end;
  }
  return InterpretableDomain::tokens(std::move(tokens));
}

const Segmentation& InterpretableDomain::segmentation() const {
  if (!segmentation_) fail(ErrorCode::invalid_argument, "text domains have no segmentation");
  return *segmentation_;
}

Rgb InterpretableDomain::fill_color(std::size_t segment) const {
  require(kind_ == DomainKind::image_occlusion, "fill colours exist only for image domains");
  return fills_.at(segment);
}

void InterpretableDomain::detect_violations() {
  violations_.clear();
  if (kind_ == DomainKind::image_occlusion) {
    const auto& image = std::get<RgbImage>(anchor_);
    for (std::size_t s = 0; s < dimension_; ++s) {
      const auto& pixels = segmentation_->pixels_of(s);
      const bool unchanged = std::all_of(pixels.begin(), pixels.end(),
                                         [&](std::size_t p) { return image.pixel(p) == fills_[s]; });
      if (unchanged) violations_.push_back(s);
    }
  } else {
    // Deleting either copy of a repeated token yields the same sequence.
    const auto& tokens = std::get<TokenSequence>(anchor_).tokens;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      for (std::size_t j = 0; j < tokens.size(); ++j) {
        if (i != j && tokens[i] == tokens[j]) {
          violations_.push_back(i);
          break;
        }
      }
    }
  }
}

InterpretablePoint InterpretableDomain::to_interpretable(const Instance& instance) const {
  if (instance != anchor_)
    fail(ErrorCode::unsupported_instance, "the interpretable representation is only defined at the anchor instance");
  return InterpretablePoint::ones(dimension_);
}

Instance InterpretableDomain::from_interpretable(const InterpretablePoint& point) const {
  require(point.size() == dimension_, "point length " + std::to_string(point.size()) +
                                          " does not match domain dimension " + std::to_string(dimension_));
  if (kind_ == DomainKind::image_occlusion) {
    RgbImage image = std::get<RgbImage>(anchor_);
    for (std::size_t s = 0; s < dimension_; ++s) {
      if (point[s]) continue;
      for (auto p : segmentation_->pixels_of(s)) image.set_pixel(p, fills_[s]);
    }
    return image;
  }
  const auto& tokens = std::get<TokenSequence>(anchor_).tokens;
  TokenSequence kept;
  for (std::size_t i = 0; i < dimension_; ++i)
    if (point[i]) kept.tokens.push_back(tokens[i]);
  return kept;
}

InterpretableDomain InterpretableDomain::merged(const SegmentGroups& groups) const {
  require(kind_ == DomainKind::image_occlusion, "segment merging applies to image domains");
  bool any = std::any_of(groups.begin(), groups.end(), [](const auto& g) { return g.size() > 1; });
  // validation happens even for trivial groups
  merge_mapping(dimension_, groups);
  if (!any) return *this;
  InterpretableDomain out = image(std::get<RgbImage>(anchor_), merge_segments(*segmentation_, groups), occlusion_);
  out.merge_history_ = merge_history_;
  out.merge_history_.push_back(groups);
  return out;
}

std::string to_string(DomainKind kind) {
  return kind == DomainKind::image_occlusion ? "image-occlusion" : "text-deletion";
}

nlohmann::json InterpretableDomain::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind_);
  j["d"] = dimension_;
  if (kind_ == DomainKind::image_occlusion) {
    j["occlusion"] = {
        {"kind", occlusion_.kind == OcclusionStrategy::Kind::solid_color ? "solid-color" : "per-segment-mean"},
        {"rgb", occlusion_.kind == OcclusionStrategy::Kind::solid_color
                    ? nlohmann::json::array({occlusion_.color.r, occlusion_.color.g, occlusion_.color.b})
                    : nlohmann::json(nullptr)}};
  } else {
    j["occlusion"] = nullptr;
  }
  auto history = nlohmann::json::array();
  for (const auto& step : merge_history_) {
    auto groups = nlohmann::json::array();
    for (const auto& g : step) groups.push_back(std::vector<std::size_t>(g.begin(), g.end()));
    history.push_back(groups);
  }
  j["merge_history"] = history;
  j["injectivity_violations"] = violations_;
  return j;
}

}  // namespace limetree
