#include "limetree/fidelity.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "limetree/error.hpp"

namespace limetree {

InterpretablePoint minimal_point(const SurrogateTree& tree, std::size_t leaf) {
  InterpretablePoint point = InterpretablePoint::ones(tree.dimension());
  for (const auto& step : tree.path_to(leaf))
    if (!step.bit) point.set(step.feature, false);
  if (tree.leaf_of(point) != leaf)
    fail(ErrorCode::invalid_argument, "minimal point of leaf " + std::to_string(leaf) + " routes elsewhere");
  return point;
}

MinimalSet minimal_set(const SurrogateTree& tree) {
  MinimalSet out;
  for (std::size_t leaf : tree.leaves()) out.emplace(leaf, minimal_point(tree, leaf));
  return out;
}

SurrogateTree relabel_leaves(const SurrogateTree& tree, const Matrix& minimal_targets, bool bijective) {
  const MinimalSet minimal = minimal_set(tree);
  require(minimal_targets.rows() == minimal.size(), "one target row per leaf is required");
  require(minimal_targets.cols() == tree.classes().size(), "target width differs from the tree's class count");
  std::vector<TreeNode> nodes = tree.nodes();
  std::size_t row = 0;
  for (const auto& [leaf, point] : minimal) {
    TreeNode& n = nodes[leaf];
    if (n.fitted_prediction.empty()) n.fitted_prediction = n.prediction;
    const auto values = minimal_targets.row(row++);
    n.prediction.assign(values.begin(), values.end());
  }
  FitMetadata meta = tree.meta();
  meta.variant = TreeVariant::relabeled;
  meta.guarantee_degraded = meta.guarantee_degraded || !bijective;
  return SurrogateTree(tree.dimension(), tree.classes(), std::move(nodes), meta);
}

SurrogateTree relabel_leaves(const SurrogateTree& tree, const BlackBox& black_box, const InterpretableDomain& domain) {
  require(domain.dimension() == tree.dimension(), "tree and domain dimensions differ");
  const MinimalSet minimal = minimal_set(tree);
  std::vector<InterpretablePoint> points;
  points.reserve(minimal.size());
  for (const auto& entry : minimal) points.push_back(entry.second);
  const Matrix targets = predict_points(black_box, domain, points, tree.classes());
  return relabel_leaves(tree, targets, domain.bijective());
}

namespace {

struct CompleteBuilder {
  std::size_t d;
  const Matrix& targets;
  std::vector<TreeNode> nodes;

  // Uniform weights over the enumeration so node statistics describe the
  // domain rather than any particular sample.
  double impurity(std::uint64_t first, std::uint64_t count) const {
    double total = 0.0;
    for (std::size_t c = 0; c < targets.cols(); ++c) {
      double mean = 0.0;
      for (std::uint64_t i = first; i < first + count; ++i) mean += targets(i, c);
      mean /= static_cast<double>(count);
      double acc = 0.0;
      for (std::uint64_t i = first; i < first + count; ++i) acc += (targets(i, c) - mean) * (targets(i, c) - mean);
      total += acc / static_cast<double>(count);
    }
    return total / static_cast<double>(targets.cols());
  }

  std::size_t grow(std::size_t depth, std::uint64_t prefix) {
    const std::size_t index = nodes.size();
    nodes.emplace_back();
    const std::uint64_t count = std::uint64_t{1} << (d - depth);
    const std::uint64_t first = prefix << (d - depth);
    nodes[index].depth = depth;
    nodes[index].weight = static_cast<double>(count);
    nodes[index].impurity = impurity(first, count);
    if (depth == d) {
      const auto values = targets.row(first);
      nodes[index].prediction.assign(values.begin(), values.end());
      nodes[index].samples = {static_cast<std::size_t>(first)};
      return index;
    }
    const std::size_t left = grow(depth + 1, prefix << 1);
    const std::size_t right = grow(depth + 1, (prefix << 1) | 1);
    nodes[index].feature = depth;
    nodes[index].left = left;
    nodes[index].right = right;
    return index;
  }
};

}  // namespace

SurrogateTree fit_complete(std::size_t d, const Matrix& enumeration_targets, std::span<const std::size_t> classes,
                           bool bijective, std::size_t cap) {
  if (d > cap)
    fail(ErrorCode::capacity, "complete tree over d=" + std::to_string(d) + " exceeds the enumeration cap of " +
                                  std::to_string(cap));
  require(d >= 1, "dimension must be at least 1");
  require(enumeration_targets.rows() == (std::size_t{1} << d), "complete trees need one target row per point");
  require(enumeration_targets.cols() == classes.size(), "target width differs from the class count");
  CompleteBuilder builder{d, enumeration_targets, {}};
  builder.nodes.reserve((std::size_t{2} << d) - 1);
  builder.grow(0, 0);
  FitMetadata meta;
  meta.depth_bound = d;
  meta.epsilon = 1.0;
  meta.achieved_fidelity = 1.0;
  meta.variant = TreeVariant::complete;
  meta.guarantee_degraded = !bijective;
  return SurrogateTree(d, std::vector<std::size_t>(classes.begin(), classes.end()), std::move(builder.nodes), meta);
}

SurrogateTree fit_complete(const BlackBox& black_box, const InterpretableDomain& domain,
                           std::span<const std::size_t> classes, std::size_t cap) {
  const auto points = enumerate_domain(domain.dimension(), cap);
  const Matrix targets = predict_points(black_box, domain, points, classes);
  return fit_complete(domain.dimension(), targets, classes, domain.bijective(), cap);
}

std::string to_string(FidelityScope scope) {
  return scope == FidelityScope::minimal_set ? "minimal-set" : "full-enumeration";
}

FidelityScope parse_fidelity_scope(const std::string& name) {
  if (name == "minimal-set") return FidelityScope::minimal_set;
  if (name == "full-enumeration") return FidelityScope::full_enumeration;
  fail(ErrorCode::invalid_argument, "unknown fidelity scope '" + name + "'");
}

nlohmann::json FidelityReport::to_json() const {
  nlohmann::json j{{"scope", to_string(scope)}, {"max_abs_deviation", max_abs_deviation}, {"certified", certified}};
  if (!per_leaf.empty()) {
    auto& leaves = j["per_leaf"] = nlohmann::json::array();
    for (const auto& l : per_leaf)
      leaves.push_back({{"leaf", l.leaf}, {"point", l.point.to_string()}, {"deviation", l.deviation}});
  }
  return j;
}

FidelityReport verify_fidelity(const SurrogateTree& tree, const BlackBox& black_box, const InterpretableDomain& domain,
                               FidelityScope scope, std::size_t cap) {
  require(domain.dimension() == tree.dimension(), "tree and domain dimensions differ");
  FidelityReport report;
  report.scope = scope;
  std::vector<InterpretablePoint> points;
  std::vector<std::size_t> leaves;
  if (scope == FidelityScope::minimal_set) {
    for (auto& [leaf, point] : minimal_set(tree)) {
      leaves.push_back(leaf);
      points.push_back(point);
    }
  } else {
    points = enumerate_domain(tree.dimension(), cap);
  }
  const Matrix truth = predict_points(black_box, domain, points, tree.classes());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& g = tree.predict(points[i]);
    double deviation = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) deviation = std::max(deviation, std::abs(g[c] - truth(i, c)));
    report.max_abs_deviation = std::max(report.max_abs_deviation, deviation);
    if (scope == FidelityScope::minimal_set) report.per_leaf.push_back({leaves[i], points[i], deviation});
  }
  report.certified = report.max_abs_deviation == 0.0;
  return report;
}

}  // namespace limetree
