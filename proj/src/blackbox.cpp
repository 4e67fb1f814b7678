#include "limetree/blackbox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "limetree/error.hpp"
#include "limetree/random.hpp"

namespace limetree {

namespace {

constexpr std::size_t kMaxTableDimension = 16;

std::vector<double> softmax(std::vector<double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (auto& v : logits) {
    v = std::exp(v - peak);
    total += v;
  }
  for (auto& v : logits) v /= total;
  return logits;
}

}  // namespace

std::vector<std::string> BlackBox::class_names() const {
  std::vector<std::string> names(class_count());
  for (std::size_t i = 0; i < names.size(); ++i) names[i] = "class_" + std::to_string(i);
  return names;
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::segment_logit: return "segment-logit";
    case SyntheticKind::boolean_table: return "boolean-table";
    case SyntheticKind::xor_pair: return "xor-pair";
  }
  return "unknown";
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "segment-logit") return SyntheticKind::segment_logit;
  if (name == "boolean-table") return SyntheticKind::boolean_table;
  if (name == "xor-pair") return SyntheticKind::xor_pair;
  fail(ErrorCode::invalid_argument, "unknown synthetic family '" + name + "'");
}

SyntheticModel::SyntheticModel(SyntheticSpec spec) : spec_(std::move(spec)) {
  require(spec_.d >= 1, "synthetic black box needs d >= 1");
  require(spec_.class_count >= 2, "synthetic black box needs at least two classes");
  SeededRandom rng(mix_seed(spec_.seed, static_cast<std::uint64_t>(spec_.kind)));
  const std::size_t d = spec_.d;
  const std::size_t k = spec_.class_count;

  switch (spec_.kind) {
    case SyntheticKind::segment_logit: {
      if (spec_.linear_logits) {
        require(spec_.linear_logits->rows() == k && spec_.linear_logits->cols() == d + 1,
                "linear logits must be class_count x (d + 1)");
        linear_ = *spec_.linear_logits;
        break;
      }
      linear_ = Matrix(k, d + 1);
      interactions_.assign(k, Matrix(d, d));
      for (std::size_t c = 0; c < k; ++c) {
        linear_(c, 0) = rng.normal(0.0, 1.0);
        for (std::size_t i = 0; i < d; ++i) linear_(c, i + 1) = rng.normal(0.0, 1.5);
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = i + 1; j < d; ++j) interactions_[c](i, j) = rng.normal(0.0, 0.5);
      }
      break;
    }
    case SyntheticKind::boolean_table: {
      const std::size_t rows = std::size_t{1} << std::min(d, kMaxTableDimension);
      if (spec_.table) {
        require(spec_.table->rows() == (std::size_t{1} << d) && spec_.table->cols() == k,
                "explicit table must be 2^d x class_count");
        table_ = *spec_.table;
        for (std::size_t r = 0; r < table_.rows(); ++r) {
          double total = 0.0;
          for (double v : table_.row(r)) {
            require(v >= 0.0 && v <= 1.0, "table probabilities must lie in [0, 1]");
            total += v;
          }
          require(std::abs(total - 1.0) <= 1e-9, "table rows must sum to 1");
        }
        break;
      }
      require(d <= kMaxTableDimension, "seeded boolean tables support d <= 16");
      table_ = Matrix(rows, k);
      for (std::size_t r = 0; r < rows; ++r) {
        // flat Dirichlet draw
        double total = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
          table_(r, c) = -std::log(rng.uniform_open_low());
          total += table_(r, c);
        }
        for (std::size_t c = 0; c < k; ++c) table_(r, c) /= total;
      }
      break;
    }
    case SyntheticKind::xor_pair: {
      require(d >= 2, "xor-pair black box needs d >= 2");
      xor_scale_ = 5.0 + 2.0 * rng.uniform();
      break;
    }
  }
}

std::vector<double> SyntheticModel::logits(const InterpretablePoint& pattern) const {
  const std::size_t d = spec_.d;
  const std::size_t k = spec_.class_count;
  std::vector<double> out(k, 0.0);
  if (spec_.kind == SyntheticKind::segment_logit) {
    for (std::size_t c = 0; c < k; ++c) {
      double z = linear_(c, 0);
      for (std::size_t i = 0; i < d; ++i)
        if (pattern[i]) z += linear_(c, i + 1);
      if (!interactions_.empty()) {
        for (std::size_t i = 0; i < d; ++i) {
          if (!pattern[i]) continue;
          for (std::size_t j = i + 1; j < d; ++j)
            if (pattern[j]) z += interactions_[c](i, j);
        }
      }
      out[c] = z;
    }
  } else {
    // class 0 rises with the parity of bits 0 and 1, class 1 with its complement
    const double parity = (pattern[0] ^ pattern[1]) ? 1.0 : 0.0;
    out[0] = xor_scale_ * parity;
    out[1] = xor_scale_ * (1.0 - parity);
  }
  return out;
}

std::vector<double> SyntheticModel::probabilities(const InterpretablePoint& pattern) const {
  require(pattern.size() == spec_.d, "pattern length does not match the synthetic model dimension");
  if (spec_.kind == SyntheticKind::boolean_table) {
    const auto row = table_.row(pattern.to_index());
    return {row.begin(), row.end()};
  }
  return softmax(logits(pattern));
}

InterpretablePoint PatternDecoder::decode(const Instance& instance) const {
  const std::size_t d = reference_.dimension();
  InterpretablePoint bits = InterpretablePoint::zeros(d);
  if (reference_.kind() == DomainKind::image_occlusion) {
    const auto* image = std::get_if<RgbImage>(&instance);
    const auto& anchor = std::get<RgbImage>(reference_.anchor());
    require(image != nullptr, "image black box received a non-image instance");
    require(image->width() == anchor.width() && image->height() == anchor.height(),
            "instance dimensions differ from the anchor image");
    const auto& seg = reference_.segmentation();
    for (std::size_t s = 0; s < d; ++s) {
      const auto& pixels = seg.pixels_of(s);
      bits.set(s, std::all_of(pixels.begin(), pixels.end(),
                              [&](std::size_t p) { return image->pixel(p) == anchor.pixel(p); }));
    }
    return bits;
  }
  const auto* text = std::get_if<TokenSequence>(&instance);
  require(text != nullptr, "text black box received a non-text instance");
  const auto& anchor = std::get<TokenSequence>(reference_.anchor()).tokens;
  std::size_t next = 0;
  for (std::size_t i = 0; i < d; ++i) {
    if (next < text->tokens.size() && text->tokens[next] == anchor[i]) {
      bits.set(i, true);
      ++next;
    }
  }
  require(next == text->tokens.size(), "text instance is not a subsequence of the anchor");
  return bits;
}

namespace {

class SyntheticBlackBox final : public BlackBox {
 public:
  SyntheticBlackBox(SyntheticModel model, PatternDecoder decoder)
      : model_(std::move(model)), decoder_(std::move(decoder)) {}

  std::size_t class_count() const override { return model_.class_count(); }

  Matrix predict_batch(std::span<const Instance> instances) const override {
    require(!instances.empty(), "predict_batch needs at least one instance");
    Matrix out(instances.size(), model_.class_count());
    for (std::size_t i = 0; i < instances.size(); ++i) {
      const auto row = model_.probabilities(decoder_.decode(instances[i]));
      std::copy(row.begin(), row.end(), out.row(i).begin());
    }
    return out;
  }

 private:
  SyntheticModel model_;
  PatternDecoder decoder_;
};

}  // namespace

BlackBoxPtr make_synthetic(const SyntheticSpec& spec, const InterpretableDomain& reference) {
  require(spec.d == reference.dimension(), "synthetic spec dimension does not match the reference domain");
  return std::make_shared<SyntheticBlackBox>(SyntheticModel(spec), PatternDecoder(reference));
}

BlackBoxPtr make_black_box(const nlohmann::json& descriptor, const InterpretableDomain& reference) {
  require(descriptor.is_object(), "black-box descriptor must be a JSON object");
  const std::string kind = descriptor.value("kind", std::string("synthetic"));
  if (kind == "synthetic") {
    SyntheticSpec spec;
    spec.kind = parse_synthetic_kind(descriptor.value("family", std::string("segment-logit")));
    spec.d = reference.dimension();
    spec.class_count = descriptor.value("class_count", std::size_t{3});
    spec.seed = descriptor.value("seed", std::uint64_t{0});
    if (descriptor.contains("table"))
      spec.table = Matrix::from_rows(descriptor.at("table").get<std::vector<std::vector<double>>>());
    return make_synthetic(spec, reference);
  }
  if (kind == "remote") {
    RemoteOptions options;
    options.url = descriptor.at("url").get<std::string>();
    options.class_count = descriptor.at("class_count").get<std::size_t>();
    options.batch_size = descriptor.value("batch_size", options.batch_size);
    options.max_in_flight = descriptor.value("max_in_flight", options.max_in_flight);
    options.retries = descriptor.value("retries", options.retries);
    options.timeout_seconds = descriptor.value("timeout_seconds", options.timeout_seconds);
    options.class_names = descriptor.value("class_names", std::vector<std::string>{});
    return make_remote(options);
  }
  fail(ErrorCode::invalid_argument, "unknown black-box kind '" + kind + "'");
}

Matrix predict_points(const BlackBox& black_box, const InterpretableDomain& domain,
                      std::span<const InterpretablePoint> points, std::span<const std::size_t> classes,
                      std::size_t chunk) {
  require(!points.empty(), "no points to predict");
  require(chunk > 0, "chunk size must be positive");
  std::vector<std::size_t> columns(classes.begin(), classes.end());
  if (columns.empty()) {
    columns.resize(black_box.class_count());
    std::iota(columns.begin(), columns.end(), std::size_t{0});
  }
  for (auto c : columns) require(c < black_box.class_count(), "class index out of range");

  Matrix out(points.size(), columns.size());
  std::vector<Instance> batch;
  for (std::size_t start = 0; start < points.size(); start += chunk) {
    const std::size_t end = std::min(points.size(), start + chunk);
    batch.clear();
    for (std::size_t i = start; i < end; ++i) batch.push_back(domain.from_interpretable(points[i]));
    const Matrix probs = black_box.predict_batch(batch);
    require(probs.rows() == batch.size(), "black box returned the wrong number of rows");
    for (std::size_t i = start; i < end; ++i)
      for (std::size_t j = 0; j < columns.size(); ++j) out(i, j) = probs(i - start, columns[j]);
  }
  return out;
}

std::vector<std::size_t> top_classes(const BlackBox& black_box, const InterpretableDomain& domain, std::size_t count) {
  require(count >= 1 && count <= black_box.class_count(), "top class count out of range");
  const InterpretablePoint anchor = InterpretablePoint::ones(domain.dimension());
  const Matrix probs = predict_points(black_box, domain, std::span(&anchor, 1));
  std::vector<std::size_t> order(probs.cols());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs(0, a) > probs(0, b); });
  order.resize(count);
  return order;
}

}  // namespace limetree
