#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "limetree/blackbox.hpp"
#include "limetree/interpretable_domain.hpp"
#include "limetree/sampling.hpp"
#include "limetree/types.hpp"

namespace limetree {

/// Splits test one binary feature: bit 0 (< 0.5) goes left, bit 1 goes right.
struct TreeNode {
  std::optional<std::size_t> feature;  // set for split nodes
  std::size_t left = 0;
  std::size_t right = 0;
  std::size_t depth = 0;
  double weight = 0.0;    // training weight reaching the node (leaf support)
  double impurity = 0.0;  // mean over outputs of the weighted target variance
  std::vector<double> prediction;          // leaves only
  std::vector<double> fitted_prediction;   // relabelled leaves: the original fitted mean
  std::vector<std::size_t> samples;        // leaves: training rows routed here (not serialised)

  bool is_leaf() const noexcept { return !feature.has_value(); }
};

enum class TreeVariant { greedy, relabeled, complete };

std::string to_string(TreeVariant variant);
TreeVariant parse_tree_variant(const std::string& name);

struct FitMetadata {
  std::size_t depth_bound = 0;
  double epsilon = 0.0;
  double achieved_fidelity = 0.0;
  TreeVariant variant = TreeVariant::greedy;
  /// Set when the domain's inverse mapping is not injective, so the exact
  /// fidelity guarantees of relabelled or complete trees do not apply.
  bool guarantee_degraded = false;
};

struct PathStep {
  std::size_t node;
  std::size_t feature;
  bool bit;  // branch taken: false = left (feature is 0), true = right
};

/// Multi-output regression tree over {0,1}^d. Node 0 is the root and children
/// are referenced by index. Immutable once built.
class SurrogateTree {
 public:
  SurrogateTree(std::size_t dimension, std::vector<std::size_t> classes, std::vector<TreeNode> nodes,
                FitMetadata meta);

  std::size_t dimension() const noexcept { return dimension_; }
  /// Black-box class indices modelled by the outputs, in output order.
  const std::vector<std::size_t>& classes() const noexcept { return classes_; }
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const TreeNode& node(std::size_t index) const { return nodes_.at(index); }
  const FitMetadata& meta() const noexcept { return meta_; }
  SurrogateTree with_meta(FitMetadata meta) const;

  std::size_t leaf_of(const InterpretablePoint& point) const;
  const std::vector<double>& predict(const InterpretablePoint& point) const;
  Matrix predict_all(std::span<const InterpretablePoint> points) const;

  std::size_t depth() const noexcept { return depth_; }
  std::size_t width() const noexcept;
  std::vector<std::size_t> leaves() const;
  bool is_leaf(std::size_t index) const { return index < nodes_.size() && nodes_[index].is_leaf(); }
  /// Root-to-leaf tests; throws invalid-argument if `leaf` is not a leaf.
  std::vector<PathStep> path_to(std::size_t leaf) const;

  nlohmann::json to_json() const;
  static SurrogateTree from_json(const nlohmann::json& j);
  /// Topology only (features and child layout), independent of predictions.
  std::string structure_signature() const;

 private:
  void validate() const;

  std::size_t dimension_;
  std::vector<std::size_t> classes_;
  std::vector<TreeNode> nodes_;
  FitMetadata meta_;
  std::size_t depth_ = 0;
  std::vector<std::size_t> parent_;
};

inline constexpr double kSplitGainTolerance = 1e-12;

/// Greedy top-down multi-output regression tree. Node impurity is the mean
/// over outputs of the weighted target variance; the split with the largest
/// weighted impurity decrease wins, ties going to the lowest feature index.
/// Splits need a decrease above kSplitGainTolerance and weight on both sides.
/// Leaf predictions are weighted means, rescaled to sum 1 when they exceed it.
SurrogateTree fit_tree(std::span<const InterpretablePoint> points, const Matrix& targets,
                       std::span<const double> weights, std::size_t depth_bound,
                       std::vector<std::size_t> classes = {});

/// Weighted squared error, unnormalised.
double loss_lime(std::span<const double> f_targets, std::span<const double> g_predictions,
                 std::span<const double> weights);
/// Weighted disagreement count (smaller is better).
double loss_classification(std::span<const std::size_t> f_labels, std::span<const std::size_t> g_labels,
                           std::span<const double> weights);
/// Weight-normalised multi-output loss in [0, 1] for simplex rows. `halve`
/// applies the 1/2 factor on the inner class sum; single-class scopes drop it.
double loss_limetree(const Matrix& f_rows, const Matrix& g_rows, std::span<const double> weights,
                     bool halve = true);

enum class ComplexityForm { depth, width };
/// depth / d or width / 2^d.
double complexity(const SurrogateTree& tree, ComplexityForm form);

struct FitReport {
  std::vector<double> depth_losses;  // entry i is the loss at depth bound i + 1
  double final_loss = 0.0;
  double complexity_depth = 0.0;
  double complexity_width = 0.0;
  bool epsilon_met = false;
  std::size_t depth_bound = 0;
  std::string stop_rule = "1 - loss >= epsilon";

  nlohmann::json to_json() const;
};

struct LimetreeFit {
  SurrogateTree tree;
  FitReport report;
};

/// Iterative deepening: fits bounds 1..depth_cap and stops at the first tree
/// whose fidelity 1 - loss_limetree reaches epsilon (the 1/2 factor is dropped
/// for a single class). Targets are the black-box probabilities of `classes`.
LimetreeFit fit_limetree(const BlackBox& black_box, const InterpretableDomain& domain, const WeightedSample& sample,
                         std::span<const std::size_t> classes, double epsilon, std::size_t depth_cap);

/// Same loop with targets already materialised (rows aligned with the sample).
LimetreeFit fit_limetree(const WeightedSample& sample, const Matrix& targets, std::span<const std::size_t> classes,
                         double epsilon, std::size_t depth_cap);

}  // namespace limetree
