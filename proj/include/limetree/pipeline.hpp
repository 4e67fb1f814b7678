#pragma once

#include <cstddef>
#include <cstdint>

#include <nlohmann/json.hpp>

#include "limetree/blackbox.hpp"
#include "limetree/interpretable_domain.hpp"
#include "limetree/lime_baseline.hpp"
#include "limetree/sampling.hpp"

namespace limetree {

struct ExplainOptions {
  std::size_t top = 3;
  double epsilon = 0.95;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  double kernel_width = kDefaultKernelWidth;
  double alpha = kDefaultRidgeAlpha;
  bool relabel = true;
  bool complete = true;  // skipped when 2^d exceeds the enumeration budget
  bool lime = true;
};

/// One-shot explanation of the anchor: LIMEt tree with its fit report, the
/// optional relabelled and complete variants, feature importance, every leaf
/// rule, shortest explanations for each explained class and the nearest
/// counterfactuals away from the top class.
nlohmann::json explain(const InterpretableDomain& domain, const BlackBox& black_box, const ExplainOptions& options);

}  // namespace limetree
