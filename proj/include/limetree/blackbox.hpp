#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "limetree/interpretable_domain.hpp"
#include "limetree/types.hpp"

namespace httplib {
class Server;
}

namespace limetree {

/// A probabilistic classifier f: X -> [0,1]^|classes| queried in batches.
/// Implementations are immutable and safe to share between threads.
class BlackBox {
 public:
  virtual ~BlackBox() = default;

  virtual std::size_t class_count() const = 0;
  virtual std::vector<std::string> class_names() const;

  /// Row i holds f(instances[i]); rows lie on the probability simplex.
  virtual Matrix predict_batch(std::span<const Instance> instances) const = 0;
};

using BlackBoxPtr = std::shared_ptr<const BlackBox>;

enum class SyntheticKind { segment_logit, boolean_table, xor_pair };

std::string to_string(SyntheticKind kind);
SyntheticKind parse_synthetic_kind(const std::string& name);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::segment_logit;
  std::size_t d = 1;
  std::size_t class_count = 2;
  std::uint64_t seed = 0;
  /// boolean-table only: explicit 2^d x class_count table indexed by
  /// InterpretablePoint::to_index(). Replaces the seeded table.
  std::optional<Matrix> table;
  /// segment-logit only: class_count x (d + 1) matrix of [bias, w_0..w_{d-1}].
  /// Replaces the seeded weights and disables pairwise interactions.
  std::optional<Matrix> linear_logits;
};

/// Deterministic function from an occlusion pattern {0,1}^d to class
/// probabilities. This is the mathematical core of the synthetic black boxes.
class SyntheticModel {
 public:
  explicit SyntheticModel(SyntheticSpec spec);

  const SyntheticSpec& spec() const noexcept { return spec_; }
  std::size_t dimension() const noexcept { return spec_.d; }
  std::size_t class_count() const noexcept { return spec_.class_count; }
  std::vector<double> probabilities(const InterpretablePoint& pattern) const;

 private:
  std::vector<double> logits(const InterpretablePoint& pattern) const;

  SyntheticSpec spec_;
  Matrix table_;                     // boolean-table
  Matrix linear_;                    // segment-logit: class x (d + 1)
  std::vector<Matrix> interactions_; // segment-logit: per class, d x d upper triangle
  double xor_scale_ = 0.0;
};

/// Reads an instance back into the occlusion pattern of a fixed reference
/// domain: segment bits are 1 when the segment still shows the anchor's pixels,
/// token bits are 1 when the token survives (greedy in-order matching).
class PatternDecoder {
 public:
  explicit PatternDecoder(InterpretableDomain reference) : reference_(std::move(reference)) {}
  InterpretablePoint decode(const Instance& instance) const;
  const InterpretableDomain& reference() const noexcept { return reference_; }

 private:
  InterpretableDomain reference_;
};

/// Synthetic black box over real instances: decodes the occlusion pattern with
/// respect to `reference` and evaluates the model on it, so it composes with
/// from_interpretable exactly as an image or text classifier would.
BlackBoxPtr make_synthetic(const SyntheticSpec& spec, const InterpretableDomain& reference);

struct RemoteOptions {
  std::string url;  // e.g. http://127.0.0.1:8090/predict
  std::size_t class_count = 2;
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 2;
  int retries = 2;
  int timeout_seconds = 30;
  std::vector<std::string> class_names;
};

BlackBoxPtr make_remote(const RemoteOptions& options);

/// Builds a black box from a JSON descriptor:
///   {"kind":"synthetic","family":"segment-logit","class_count":3,"seed":7[, "table":[[..]..]]}
///   {"kind":"remote","url":"http://host:port/path","class_count":5[, "batch_size":64, "max_in_flight":2]}
/// Synthetic models take their dimension from `reference`.
BlackBoxPtr make_black_box(const nlohmann::json& descriptor, const InterpretableDomain& reference);

/// Wire encoding of one instance: base64 PPM string for images, token array
/// for text.
nlohmann::json encode_instance(const Instance& instance);
Instance decode_instance(const nlohmann::json& value);

/// Serves `model` on POST `path` using the batch wire protocol.
void serve_black_box(httplib::Server& server, BlackBoxPtr model, const std::string& path = "/predict");

/// Predicts the given interpretable points through IR^-1 in chunks of
/// `chunk` instances and returns the columns listed in `classes` (all classes
/// when empty).
Matrix predict_points(const BlackBox& black_box, const InterpretableDomain& domain,
                      std::span<const InterpretablePoint> points, std::span<const std::size_t> classes = {},
                      std::size_t chunk = 256);

/// Classes of f(anchor) sorted by descending probability, ties by index.
std::vector<std::size_t> top_classes(const BlackBox& black_box, const InterpretableDomain& domain, std::size_t count);

}  // namespace limetree
