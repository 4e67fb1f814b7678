#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "limetree/blackbox.hpp"
#include "limetree/interpretable_domain.hpp"
#include "limetree/sampling.hpp"

namespace limetree {

inline constexpr double kDefaultRidgeAlpha = 1.0;

struct LinearSurrogate {
  std::size_t class_index = 0;
  double alpha = kDefaultRidgeAlpha;
  double intercept = 0.0;
  std::vector<double> coefficients;

  double predict(const InterpretablePoint& point) const;
  /// Feature indices by descending |coefficient|, ties by index.
  std::vector<std::size_t> ranking() const;
  nlohmann::json to_json() const;
};

/// Minimises sum w_i (y_i - b - beta.x_i)^2 + alpha |beta|^2 with the
/// intercept left unpenalised. Throws degenerate-fit when alpha = 0 and the
/// weighted design is rank deficient.
LinearSurrogate fit_ridge(std::span<const InterpretablePoint> points, std::span<const double> targets,
                          std::span<const double> weights, double alpha = kDefaultRidgeAlpha,
                          std::size_t class_index = 0);

struct LimeExplanation {
  std::vector<LinearSurrogate> surrogates;  // one per explained class, in order

  /// n x classes matrix of linear predictions.
  Matrix predict_all(std::span<const InterpretablePoint> points) const;
  nlohmann::json to_json() const;
};

LimeExplanation lime_explain(const WeightedSample& sample, const Matrix& targets, std::span<const std::size_t> classes,
                             double alpha = kDefaultRidgeAlpha);
LimeExplanation lime_explain(const BlackBox& black_box, const InterpretableDomain& domain,
                             const WeightedSample& sample, std::span<const std::size_t> classes,
                             double alpha = kDefaultRidgeAlpha);

}  // namespace limetree
