#include "limetree/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "limetree/error.hpp"
#include "limetree/random.hpp"

namespace limetree {

std::vector<InterpretablePoint> enumerate_domain(std::size_t d, std::size_t cap) {
  if (d > cap || d >= 63)
    fail(ErrorCode::capacity, "cannot enumerate 2^" + std::to_string(d) + " points (cap is d <= " +
                                  std::to_string(cap) + ")");
  const std::uint64_t count = std::uint64_t{1} << d;
  std::vector<InterpretablePoint> points;
  points.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) points.push_back(InterpretablePoint::from_index(i, d));
  return points;
}

std::vector<InterpretablePoint> sample_domain(std::size_t d, std::size_t n, std::uint64_t seed) {
  require(n >= 1, "sample size must be at least 1");
  SeededRandom rng(seed);
  std::vector<InterpretablePoint> points;
  points.reserve(n + 1);
  bool has_reference = false;
  for (std::size_t i = 0; i < n; ++i) {
    InterpretablePoint p = InterpretablePoint::zeros(d);
    for (std::size_t j = 0; j < d; ++j) p.set(j, rng.bit());
    has_reference = has_reference || p.all_ones();
    points.push_back(std::move(p));
  }
  if (!has_reference) points.push_back(InterpretablePoint::ones(d));
  return points;
}

double cosine_distance(const InterpretablePoint& a, const InterpretablePoint& b) {
  require(a.size() == b.size(), "cosine distance needs points of equal length");
  std::size_t dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] & b[i];
  const std::size_t na = a.count_ones();
  const std::size_t nb = b.count_ones();
  if (na == 0 || nb == 0) return 1.0;
  // sqrt of the product keeps identical vectors at exactly zero distance
  const double similarity = static_cast<double>(dot) / std::sqrt(static_cast<double>(na) * static_cast<double>(nb));
  return std::clamp(1.0 - similarity, 0.0, 1.0);
}

double exponential_kernel(double distance, double width) {
  require(width > 0.0, "kernel width must be positive");
  require(distance >= 0.0, "distance must be non-negative");
  const double scaled = distance / width;
  return std::sqrt(std::exp(-scaled * scaled));
}

WeightedSample weigh_points(std::vector<InterpretablePoint> points, double kernel_width) {
  require(!points.empty(), "weighted sample needs at least one point");
  WeightedSample sample;
  sample.reference = InterpretablePoint::ones(points.front().size());
  sample.kernel_width = kernel_width;
  sample.weights.reserve(points.size());
  for (const auto& p : points) {
    require(p.size() == sample.reference.size(), "sample points have inconsistent lengths");
    sample.weights.push_back(exponential_kernel(cosine_distance(sample.reference, p), kernel_width));
  }
  sample.points = std::move(points);
  return sample;
}

WeightedSample build_sample(std::size_t d, const SamplingOptions& options) {
  require(d >= 1, "domain dimension must be at least 1");
  if (d < 63 && (std::uint64_t{1} << d) <= options.enumeration_budget) {
    WeightedSample sample = weigh_points(enumerate_domain(d, 62), options.kernel_width);
    sample.enumerated = true;
    return sample;
  }
  return weigh_points(sample_domain(d, options.samples, options.seed), options.kernel_width);
}

}  // namespace limetree
