#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "limetree/blackbox.hpp"
#include "limetree/interpretable_domain.hpp"
#include "limetree/sampling.hpp"
#include "limetree/surrogate_tree.hpp"

namespace limetree {

/// The point of a leaf with the most 1-bits: every feature tested "< 0.5" on
/// the path is 0, everything else is 1.
InterpretablePoint minimal_point(const SurrogateTree& tree, std::size_t leaf);

/// Leaf index -> minimal point, one entry per leaf.
using MinimalSet = std::map<std::size_t, InterpretablePoint>;
MinimalSet minimal_set(const SurrogateTree& tree);

/// Replaces every leaf prediction with the black-box probabilities at the
/// leaf's minimal point. The original means are kept in fitted_prediction.
SurrogateTree relabel_leaves(const SurrogateTree& tree, const BlackBox& black_box, const InterpretableDomain& domain);
/// Same, with the minimal-point targets already computed (rows follow the
/// order of minimal_set).
SurrogateTree relabel_leaves(const SurrogateTree& tree, const Matrix& minimal_targets, bool bijective = true);

/// Full tree splitting feature i at depth i, one leaf per point of {0,1}^d.
SurrogateTree fit_complete(const BlackBox& black_box, const InterpretableDomain& domain,
                           std::span<const std::size_t> classes, std::size_t cap = kDefaultEnumerationCap);
/// Same, from targets over enumerate_domain(d) (row = point index).
SurrogateTree fit_complete(std::size_t d, const Matrix& enumeration_targets, std::span<const std::size_t> classes,
                           bool bijective = true, std::size_t cap = kDefaultEnumerationCap);

enum class FidelityScope { minimal_set, full_enumeration };
std::string to_string(FidelityScope scope);
FidelityScope parse_fidelity_scope(const std::string& name);

struct LeafDeviation {
  std::size_t leaf;
  InterpretablePoint point;
  double deviation;
};

struct FidelityReport {
  FidelityScope scope = FidelityScope::minimal_set;
  double max_abs_deviation = 0.0;
  bool certified = false;  // deviation exactly zero
  std::vector<LeafDeviation> per_leaf;  // minimal-set scope only

  nlohmann::json to_json() const;
};

FidelityReport verify_fidelity(const SurrogateTree& tree, const BlackBox& black_box, const InterpretableDomain& domain,
                               FidelityScope scope, std::size_t cap = kDefaultEnumerationCap);

}  // namespace limetree
