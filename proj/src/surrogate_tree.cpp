#include "limetree/surrogate_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "limetree/error.hpp"

namespace limetree {

std::string to_string(TreeVariant variant) {
  switch (variant) {
    case TreeVariant::greedy: return "limet";
    case TreeVariant::relabeled: return "limet-relabeled";
    case TreeVariant::complete: return "limet-complete";
  }
  return "unknown";
}

TreeVariant parse_tree_variant(const std::string& name) {
  if (name == "limet" || name == "greedy") return TreeVariant::greedy;
  if (name == "limet-relabeled" || name == "relabel" || name == "relabeled") return TreeVariant::relabeled;
  if (name == "limet-complete" || name == "complete") return TreeVariant::complete;
  fail(ErrorCode::invalid_argument, "unknown tree variant '" + name + "'");
}

SurrogateTree::SurrogateTree(std::size_t dimension, std::vector<std::size_t> classes, std::vector<TreeNode> nodes,
                             FitMetadata meta)
    : dimension_(dimension), classes_(std::move(classes)), nodes_(std::move(nodes)), meta_(meta) {
  validate();
}

void SurrogateTree::validate() const {
  require(!nodes_.empty(), "a tree needs at least a root node");
  auto& parent = const_cast<std::vector<std::size_t>&>(parent_);
  auto& depth = const_cast<std::size_t&>(depth_);
  parent.assign(nodes_.size(), nodes_.size());
  depth = 0;
  // Walk from the root so every node is reachable exactly once and every path
  // tests a feature at most once.
  std::vector<std::pair<std::size_t, std::vector<bool>>> stack{{0, std::vector<bool>(dimension_, false)}};
  std::vector<bool> seen(nodes_.size(), false);
  while (!stack.empty()) {
    auto [index, used] = std::move(stack.back());
    stack.pop_back();
    require(index < nodes_.size(), "child index out of range");
    require(!seen[index], "tree nodes must form a tree");
    seen[index] = true;
    const TreeNode& n = nodes_[index];
    depth = std::max(depth, n.depth);
    if (n.is_leaf()) {
      require(n.prediction.size() == classes_.size(), "leaf prediction length differs from the class count");
      continue;
    }
    require(*n.feature < dimension_, "split feature out of range");
    require(!used[*n.feature], "a feature may be tested at most once per path");
    used[*n.feature] = true;
    for (std::size_t child : {n.left, n.right}) {
      require(child < nodes_.size(), "child index out of range");
      require(nodes_[child].depth == n.depth + 1, "child depth must be parent depth + 1");
      parent[child] = index;
      stack.emplace_back(child, used);
    }
  }
  require(std::all_of(seen.begin(), seen.end(), [](bool s) { return s; }), "unreachable tree nodes");
}

SurrogateTree SurrogateTree::with_meta(FitMetadata meta) const {
  SurrogateTree copy = *this;
  copy.meta_ = meta;
  return copy;
}

std::size_t SurrogateTree::leaf_of(const InterpretablePoint& point) const {
  require(point.size() == dimension_, "point length " + std::to_string(point.size()) +
                                          " does not match tree dimension " + std::to_string(dimension_));
  std::size_t index = 0;
  while (!nodes_[index].is_leaf()) {
    const TreeNode& n = nodes_[index];
    index = point[*n.feature] ? n.right : n.left;
  }
  return index;
}

const std::vector<double>& SurrogateTree::predict(const InterpretablePoint& point) const {
  return nodes_[leaf_of(point)].prediction;
}

Matrix SurrogateTree::predict_all(std::span<const InterpretablePoint> points) const {
  Matrix out(points.size(), classes_.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = predict(points[i]);
    std::copy(p.begin(), p.end(), out.row(i).begin());
  }
  return out;
}

std::size_t SurrogateTree::width() const noexcept {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::vector<std::size_t> SurrogateTree::leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].is_leaf()) out.push_back(i);
  return out;
}

std::vector<PathStep> SurrogateTree::path_to(std::size_t leaf) const {
  require(is_leaf(leaf), "node " + std::to_string(leaf) + " is not a leaf of this tree");
  std::vector<PathStep> path;
  std::size_t child = leaf;
  while (child != 0) {
    const std::size_t p = parent_[child];
    path.push_back({p, *nodes_[p].feature, nodes_[p].right == child});
    child = p;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

nlohmann::json SurrogateTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : nodes_) {
    nlohmann::json j;
    if (n.is_leaf()) {
      nlohmann::json leaf{{"prediction", n.prediction}, {"support", n.weight}};
      if (!n.fitted_prediction.empty()) leaf["fitted_prediction"] = n.fitted_prediction;
      j["leaf"] = leaf;
    } else {
      j["feature"] = *n.feature;
      j["left"] = n.left;
      j["right"] = n.right;
      j["weight"] = n.weight;
    }
    j["impurity"] = n.impurity;
    nodes.push_back(std::move(j));
  }
  return {{"d", dimension_},
          {"classes", classes_},
          {"nodes", nodes},
          {"meta",
           {{"depth_bound", meta_.depth_bound},
            {"epsilon", meta_.epsilon},
            {"achieved_fidelity", meta_.achieved_fidelity},
            {"variant", to_string(meta_.variant)},
            {"guarantee_degraded", meta_.guarantee_degraded}}}};
}

SurrogateTree SurrogateTree::from_json(const nlohmann::json& j) {
  try {
    const std::size_t d = j.at("d").get<std::size_t>();
    auto classes = j.at("classes").get<std::vector<std::size_t>>();
    const auto& raw = j.at("nodes");
    std::vector<TreeNode> nodes(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const auto& r = raw[i];
      TreeNode& n = nodes[i];
      n.impurity = r.value("impurity", 0.0);
      if (r.contains("leaf")) {
        const auto& leaf = r.at("leaf");
        n.prediction = leaf.at("prediction").get<std::vector<double>>();
        n.weight = leaf.value("support", 0.0);
        if (leaf.contains("fitted_prediction"))
          n.fitted_prediction = leaf.at("fitted_prediction").get<std::vector<double>>();
      } else {
        n.feature = r.at("feature").get<std::size_t>();
        n.left = r.at("left").get<std::size_t>();
        n.right = r.at("right").get<std::size_t>();
        n.weight = r.value("weight", 0.0);
      }
    }
    // depths are implied by the layout
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      require(i < nodes.size(), "child index out of range");
      if (nodes[i].is_leaf()) continue;
      for (std::size_t c : {nodes[i].left, nodes[i].right}) {
        require(c < nodes.size() && c != 0, "child index out of range");
        nodes[c].depth = nodes[i].depth + 1;
        stack.push_back(c);
      }
    }
    const auto& m = j.at("meta");
    FitMetadata meta;
    meta.depth_bound = m.at("depth_bound").get<std::size_t>();
    meta.epsilon = m.at("epsilon").get<double>();
    meta.achieved_fidelity = m.at("achieved_fidelity").get<double>();
    meta.variant = parse_tree_variant(m.at("variant").get<std::string>());
    meta.guarantee_degraded = m.value("guarantee_degraded", false);
    return SurrogateTree(d, std::move(classes), std::move(nodes), meta);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::invalid_argument, std::string("malformed tree document: ") + e.what());
  }
}

std::string SurrogateTree::structure_signature() const {
  std::ostringstream out;
  out << dimension_ << ':';
  for (const auto& n : nodes_) {
    if (n.is_leaf())
      out << "L;";
    else
      out << *n.feature << '(' << n.left << ',' << n.right << ");";
  }
  return out.str();
}

namespace {

struct NodeStats {
  double weight = 0.0;
  double impurity = 0.0;
  std::vector<double> mean;
};

NodeStats node_stats(std::span<const std::size_t> rows, const Matrix& targets, std::span<const double> weights) {
  NodeStats s;
  const std::size_t outputs = targets.cols();
  s.mean.assign(outputs, 0.0);
  for (auto r : rows) {
    s.weight += weights[r];
    for (std::size_t c = 0; c < outputs; ++c) s.mean[c] += weights[r] * targets(r, c);
  }
  if (s.weight <= 0.0) return s;
  for (auto& m : s.mean) m /= s.weight;
  if (outputs == 0) return s;
  double total = 0.0;
  for (std::size_t c = 0; c < outputs; ++c) {
    double acc = 0.0;
    for (auto r : rows) {
      const double diff = targets(r, c) - s.mean[c];
      acc += weights[r] * diff * diff;
    }
    total += acc / s.weight;
  }
  s.impurity = total / static_cast<double>(outputs);
  return s;
}

std::vector<double> leaf_prediction(std::vector<double> mean) {
  double sum = 0.0;
  for (double v : mean) sum += v;
  if (sum > 1.0)
    for (auto& v : mean) v /= sum;
  for (auto& v : mean) v = std::clamp(v, 0.0, 1.0);
  return mean;
}

class TreeBuilder {
 public:
  TreeBuilder(std::span<const InterpretablePoint> points, const Matrix& targets, std::span<const double> weights,
              std::size_t depth_bound)
      : points_(points), targets_(targets), weights_(weights), depth_bound_(depth_bound) {}

  std::vector<TreeNode> build(std::vector<std::size_t> rows) {
    total_weight_ = node_stats(rows, targets_, weights_).weight;
    std::vector<bool> used(points_.front().size(), false);
    grow(std::move(rows), 0, used);
    return std::move(nodes_);
  }

 private:
  std::size_t grow(std::vector<std::size_t> rows, std::size_t depth, std::vector<bool>& used) {
    const std::size_t index = nodes_.size();
    nodes_.emplace_back();
    const NodeStats stats = node_stats(rows, targets_, weights_);
    nodes_[index].depth = depth;
    nodes_[index].weight = stats.weight;
    nodes_[index].impurity = stats.impurity;

    std::optional<std::size_t> best_feature;
    double best_gain = kSplitGainTolerance;
    std::vector<std::size_t> best_left, best_right;
    if (depth < depth_bound_ && stats.impurity > 0.0) {
      std::vector<std::size_t> left, right;
      for (std::size_t f = 0; f < used.size(); ++f) {
        if (used[f]) continue;
        left.clear();
        right.clear();
        for (auto r : rows) (points_[r][f] ? right : left).push_back(r);
        if (left.empty() || right.empty()) continue;
        const NodeStats ls = node_stats(left, targets_, weights_);
        const NodeStats rs = node_stats(right, targets_, weights_);
        if (ls.weight <= 0.0 || rs.weight <= 0.0) continue;
        const double decrease =
            stats.impurity - (ls.weight / stats.weight) * ls.impurity - (rs.weight / stats.weight) * rs.impurity;
        const double gain = (stats.weight / total_weight_) * decrease;
        if (gain > best_gain) {  // strict: equal gains keep the lower feature index
          best_gain = gain;
          best_feature = f;
          best_left = left;
          best_right = right;
        }
      }
    }

    if (!best_feature) {
      nodes_[index].prediction = leaf_prediction(stats.mean);
      nodes_[index].samples = std::move(rows);
      return index;
    }
    used[*best_feature] = true;
    const std::size_t left_index = grow(std::move(best_left), depth + 1, used);
    const std::size_t right_index = grow(std::move(best_right), depth + 1, used);
    used[*best_feature] = false;
    nodes_[index].feature = best_feature;
    nodes_[index].left = left_index;
    nodes_[index].right = right_index;
    return index;
  }

  std::span<const InterpretablePoint> points_;
  const Matrix& targets_;
  std::span<const double> weights_;
  std::size_t depth_bound_;
  double total_weight_ = 0.0;
  std::vector<TreeNode> nodes_;
};

}  // namespace

SurrogateTree fit_tree(std::span<const InterpretablePoint> points, const Matrix& targets,
                       std::span<const double> weights, std::size_t depth_bound, std::vector<std::size_t> classes) {
  require(!points.empty(), "cannot fit a tree to an empty sample");
  require(targets.rows() == points.size(), "targets and points disagree on the sample size");
  require(weights.size() == points.size(), "weights and points disagree on the sample size");
  require(targets.cols() >= 1, "targets need at least one output column");
  const std::size_t d = points.front().size();
  for (const auto& p : points) require(p.size() == d, "sample points have inconsistent lengths");
  double total = 0.0;
  for (double w : weights) {
    require(w >= 0.0 && std::isfinite(w), "weights must be finite and non-negative");
    total += w;
  }
  require(total > 0.0, "weights must not all be zero");
  if (classes.empty()) {
    classes.resize(targets.cols());
    std::iota(classes.begin(), classes.end(), std::size_t{0});
  }
  require(classes.size() == targets.cols(), "class list length differs from the target width");

  std::vector<std::size_t> rows(points.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  TreeBuilder builder(points, targets, weights, depth_bound);
  FitMetadata meta;
  meta.depth_bound = depth_bound;
  return SurrogateTree(d, std::move(classes), builder.build(std::move(rows)), meta);
}

double loss_lime(std::span<const double> f_targets, std::span<const double> g_predictions,
                 std::span<const double> weights) {
  require(f_targets.size() == g_predictions.size() && f_targets.size() == weights.size(),
          "loss inputs must have equal lengths");
  double loss = 0.0;
  for (std::size_t i = 0; i < f_targets.size(); ++i) {
    const double diff = f_targets[i] - g_predictions[i];
    loss += weights[i] * diff * diff;
  }
  return loss;
}

double loss_classification(std::span<const std::size_t> f_labels, std::span<const std::size_t> g_labels,
                           std::span<const double> weights) {
  require(f_labels.size() == g_labels.size() && f_labels.size() == weights.size(),
          "loss inputs must have equal lengths");
  double loss = 0.0;
  for (std::size_t i = 0; i < f_labels.size(); ++i)
    if (f_labels[i] != g_labels[i]) loss += weights[i];
  return loss;
}

double loss_limetree(const Matrix& f_rows, const Matrix& g_rows, std::span<const double> weights, bool halve) {
  require(f_rows.rows() == g_rows.rows() && f_rows.cols() == g_rows.cols(), "loss inputs must have equal shapes");
  require(weights.size() == f_rows.rows(), "one weight per row is required");
  double weight_total = 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < f_rows.rows(); ++i) {
    double inner = 0.0;
    for (std::size_t c = 0; c < f_rows.cols(); ++c) {
      const double diff = f_rows(i, c) - g_rows(i, c);
      inner += diff * diff;
    }
    if (halve) inner *= 0.5;
    loss += weights[i] * inner;
    weight_total += weights[i];
  }
  require(weight_total > 0.0, "loss weights must not all be zero");
  return loss / weight_total;
}

double complexity(const SurrogateTree& tree, ComplexityForm form) {
  const double d = static_cast<double>(tree.dimension());
  if (form == ComplexityForm::depth) return static_cast<double>(tree.depth()) / d;
  return static_cast<double>(tree.width()) / std::ldexp(1.0, static_cast<int>(tree.dimension()));
}

nlohmann::json FitReport::to_json() const {
  return {{"depth_losses", depth_losses},   {"final_loss", final_loss},
          {"complexity_depth", complexity_depth}, {"complexity_width", complexity_width},
          {"epsilon_met", epsilon_met},     {"depth_bound", depth_bound},
          {"stop_rule", stop_rule}};
}

LimetreeFit fit_limetree(const WeightedSample& sample, const Matrix& targets, std::span<const std::size_t> classes,
                         double epsilon, std::size_t depth_cap) {
  require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0, 1]");
  require(depth_cap >= 1, "depth cap must be at least 1");
  require(depth_cap <= sample.dimension(), "depth cap cannot exceed the domain dimension");
  require(targets.cols() == classes.size(), "targets must have one column per explained class");

  std::vector<std::size_t> class_list(classes.begin(), classes.end());
  std::optional<SurrogateTree> tree;
  FitReport report;
  for (std::size_t bound = 1; bound <= depth_cap; ++bound) {
    tree = fit_tree(sample.points, targets, sample.weights, bound, class_list);
    const double loss = loss_limetree(targets, tree->predict_all(sample.points), sample.weights, class_list.size() > 1);
    report.depth_losses.push_back(loss);
    report.final_loss = loss;
    report.depth_bound = bound;
    if (1.0 - loss >= epsilon) {
      report.epsilon_met = true;
      break;
    }
  }
  report.complexity_depth = complexity(*tree, ComplexityForm::depth);
  report.complexity_width = complexity(*tree, ComplexityForm::width);
  FitMetadata meta = tree->meta();
  meta.depth_bound = report.depth_bound;
  meta.epsilon = epsilon;
  meta.achieved_fidelity = 1.0 - report.final_loss;
  meta.variant = TreeVariant::greedy;
  return {tree->with_meta(meta), report};
}

LimetreeFit fit_limetree(const BlackBox& black_box, const InterpretableDomain& domain, const WeightedSample& sample,
                         std::span<const std::size_t> classes, double epsilon, std::size_t depth_cap) {
  require(!classes.empty(), "at least one class must be explained");
  require(sample.dimension() == domain.dimension(), "sample and domain dimensions differ");
  const Matrix targets = predict_points(black_box, domain, sample.points, classes);
  return fit_limetree(sample, targets, classes, epsilon, depth_cap);
}

}  // namespace limetree
