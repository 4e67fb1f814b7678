#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "limetree/blackbox.hpp"
#include "limetree/interpretable_domain.hpp"
#include "limetree/sampling.hpp"
#include "limetree/surrogate_tree.hpp"

namespace limetree {

enum class Oracle { tree, black_box };
std::string to_string(Oracle oracle);
Oracle parse_oracle(const std::string& name);
/// Complete trees answer for themselves; everything else defers to the model.
Oracle default_oracle(const SurrogateTree& tree);

/// Gini-style importance: per split, node weight fraction times impurity
/// decrease, summed per feature and normalised. All zeros for a stump.
std::vector<double> feature_importance(const SurrogateTree& tree);

struct Literal {
  std::size_t feature;
  bool value;
};

struct Rule {
  std::size_t leaf;
  std::vector<Literal> literals;  // root-to-leaf order; empty means "always"
  std::vector<double> prediction;
  InterpretablePoint minimal_point;

  std::string to_string() const;
  nlohmann::json to_json() const;
};

Rule extract_rule(const SurrogateTree& tree, std::size_t leaf);

enum class ClassFilter { same, different, any };
std::string to_string(ClassFilter filter);
ClassFilter parse_class_filter(const std::string& name);

struct ExemplarLeaf {
  std::size_t leaf;
  InterpretablePoint minimal_point;
  std::size_t distance;
  std::size_t predicted_class;  // black-box class index of the leaf's argmax
  std::vector<InterpretablePoint> points;  // enumerated points routed here (if enumerated)
};

struct ExemplarResult {
  ExemplarLeaf anchor;
  std::vector<ExemplarLeaf> neighbours;  // ascending distance, then binary value
  bool enumerated = false;

  nlohmann::json to_json() const;
};

/// Points in the anchor leaf plus leaves whose minimal points lie within
/// `radius` of the anchor leaf's minimal point. With `enumerate` set, member
/// points are listed, which needs 2^d within `cap`.
ExemplarResult exemplars(const SurrogateTree& tree, std::size_t anchor_leaf, std::size_t radius, ClassFilter filter,
                         bool enumerate = true, std::size_t cap = kDefaultEnumerationCap);

struct WhatIfResult {
  InterpretablePoint point;
  Oracle oracle;
  std::vector<std::size_t> classes;
  std::vector<double> probabilities;
  std::optional<std::size_t> leaf;  // tree oracle only

  nlohmann::json to_json() const;
};

WhatIfResult what_if(const InterpretablePoint& point, Oracle oracle, const SurrogateTree& tree,
                     const InterpretableDomain& domain, const BlackBox* black_box);

struct CounterfactualTarget {
  enum class Kind { argmax_is, argmax_is_not, probability_at_least };
  Kind kind = Kind::argmax_is;
  std::size_t class_index = 0;  // black-box class index; must be modelled by the tree
  double threshold = 0.5;

  static CounterfactualTarget argmax(std::size_t c) { return {Kind::argmax_is, c, 0.0}; }
  static CounterfactualTarget not_argmax(std::size_t a) { return {Kind::argmax_is_not, a, 0.0}; }
  static CounterfactualTarget at_least(std::size_t c, double theta) { return {Kind::probability_at_least, c, theta}; }
};

struct CounterfactualQuery {
  std::optional<InterpretablePoint> reference;  // all-ones when unset
  CounterfactualTarget target;
  std::map<std::size_t, bool> given;  // feature -> required bit
  std::set<std::size_t> despite;      // features held at the reference value
  Oracle oracle = Oracle::black_box;

  nlohmann::json to_json() const;
  static CounterfactualQuery from_json(const nlohmann::json& j);
};

enum class CandidateMode { enumeration, minimal_set };
std::string to_string(CandidateMode mode);

struct CounterfactualResult {
  std::optional<std::size_t> distance;  // empty when impossible
  std::vector<InterpretablePoint> points;  // ascending binary value
  Oracle oracle;
  CandidateMode mode;
  CounterfactualQuery query;

  nlohmann::json to_json() const;
};

/// Candidates are all of {0,1}^d when 2^d <= budget, the minimal set
/// otherwise. Returns every satisfying candidate at the smallest Hamming
/// distance from the reference.
CounterfactualResult counterfactual(const CounterfactualQuery& query, const SurrogateTree& tree,
                                    const InterpretableDomain& domain, const BlackBox* black_box,
                                    std::size_t budget = kDefaultEnumerationBudget);

struct ShortestResult {
  std::size_t class_index;
  std::optional<std::size_t> length;  // number of 1-bits; empty when none
  std::vector<InterpretablePoint> points;
  Oracle oracle;
  CandidateMode mode;

  nlohmann::json to_json() const;
};

ShortestResult shortest_explanation(std::size_t class_index, const SurrogateTree& tree,
                                    const InterpretableDomain& domain, const BlackBox* black_box, Oracle oracle,
                                    std::size_t budget = kDefaultEnumerationBudget);

/// Tree document for display. `thumbnail` maps a point to a reference for its
/// rendered instance; the default gives "render/<bits>.png" for images and the
/// surviving text for token domains.
nlohmann::json render_tree(const SurrogateTree& tree, const InterpretableDomain& domain,
                           const std::function<std::string(const InterpretablePoint&)>& thumbnail = {});

}  // namespace limetree
