#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "limetree/types.hpp"

namespace limetree {

inline constexpr std::size_t kDefaultEnumerationCap = 20;
inline constexpr std::size_t kDefaultEnumerationBudget = 4096;
inline constexpr double kDefaultKernelWidth = 0.25;

/// All 2^d points in ascending binary order.
std::vector<InterpretablePoint> enumerate_domain(std::size_t d, std::size_t cap = kDefaultEnumerationCap);

/// n i.i.d. uniform points (with replacement); the all-ones reference is
/// appended when no draw hit it.
std::vector<InterpretablePoint> sample_domain(std::size_t d, std::size_t n, std::uint64_t seed);

/// 1 - a.b / (|a||b|); defined as 1 when either point is all zeros.
double cosine_distance(const InterpretablePoint& a, const InterpretablePoint& b);

/// sqrt(exp(-(s / width)^2)).
double exponential_kernel(double distance, double width);

struct WeightedSample {
  std::vector<InterpretablePoint> points;
  std::vector<double> weights;
  InterpretablePoint reference;
  double kernel_width = kDefaultKernelWidth;
  bool enumerated = false;

  std::size_t size() const noexcept { return points.size(); }
  std::size_t dimension() const noexcept { return reference.size(); }
};

/// Weights every point by its kernelised cosine distance to the all-ones
/// reference.
WeightedSample weigh_points(std::vector<InterpretablePoint> points, double kernel_width = kDefaultKernelWidth);

struct SamplingOptions {
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  double kernel_width = kDefaultKernelWidth;
  /// Enumerate instead of sampling when 2^d does not exceed this.
  std::size_t enumeration_budget = kDefaultEnumerationBudget;
};

WeightedSample build_sample(std::size_t d, const SamplingOptions& options = {});

}  // namespace limetree
