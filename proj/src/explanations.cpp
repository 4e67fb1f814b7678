#include "limetree/explanations.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "limetree/error.hpp"
#include "limetree/fidelity.hpp"

namespace limetree {

std::string to_string(Oracle oracle) { return oracle == Oracle::tree ? "tree" : "black-box"; }

Oracle parse_oracle(const std::string& name) {
  if (name == "tree") return Oracle::tree;
  if (name == "black-box" || name == "blackbox") return Oracle::black_box;
  fail(ErrorCode::invalid_argument, "unknown oracle '" + name + "'");
}

Oracle default_oracle(const SurrogateTree& tree) {
  return tree.meta().variant == TreeVariant::complete && !tree.meta().guarantee_degraded ? Oracle::tree
                                                                                         : Oracle::black_box;
}

std::vector<double> feature_importance(const SurrogateTree& tree) {
  std::vector<double> importance(tree.dimension(), 0.0);
  const auto& nodes = tree.nodes();
  const double root_weight = nodes.front().weight;
  if (root_weight <= 0.0) return importance;
  for (const auto& n : nodes) {
    if (n.is_leaf() || n.weight <= 0.0) continue;
    const auto& l = nodes[n.left];
    const auto& r = nodes[n.right];
    const double decrease = n.impurity - (l.weight / n.weight) * l.impurity - (r.weight / n.weight) * r.impurity;
    if (decrease > kSplitGainTolerance) importance[*n.feature] += (n.weight / root_weight) * decrease;
  }
  double total = 0.0;
  for (double v : importance) total += v;
  if (total > 0.0)
    for (auto& v : importance) v /= total;
  return importance;
}

std::string Rule::to_string() const {
  if (literals.empty()) return "always";
  std::ostringstream out;
  for (std::size_t i = 0; i < literals.size(); ++i) {
    if (i) out << " AND ";
    out << 'x' << literals[i].feature << " = " << (literals[i].value ? 1 : 0);
  }
  return out.str();
}

nlohmann::json Rule::to_json() const {
  nlohmann::json lits = nlohmann::json::array();
  for (const auto& l : literals) lits.push_back({{"feature", l.feature}, {"value", l.value ? 1 : 0}});
  return {{"kind", "rule"},
          {"leaf", leaf},
          {"literals", lits},
          {"text", to_string()},
          {"prediction", prediction},
          {"minimal_point", minimal_point.to_string()}};
}

Rule extract_rule(const SurrogateTree& tree, std::size_t leaf) {
  Rule rule;
  rule.leaf = leaf;
  for (const auto& step : tree.path_to(leaf)) rule.literals.push_back({step.feature, step.bit});
  rule.prediction = tree.node(leaf).prediction;
  rule.minimal_point = minimal_point(tree, leaf);
  return rule;
}

std::string to_string(ClassFilter filter) {
  switch (filter) {
    case ClassFilter::same: return "same";
    case ClassFilter::different: return "different";
    case ClassFilter::any: return "any";
  }
  return "any";
}

ClassFilter parse_class_filter(const std::string& name) {
  if (name == "same") return ClassFilter::same;
  if (name == "different") return ClassFilter::different;
  if (name == "any") return ClassFilter::any;
  fail(ErrorCode::invalid_argument, "unknown class filter '" + name + "'");
}

namespace {

std::size_t predicted_class(const SurrogateTree& tree, std::span<const double> row) {
  return tree.classes()[argmax(row)];
}

nlohmann::json points_json(const std::vector<InterpretablePoint>& points) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : points) out.push_back(p.to_string());
  return out;
}

nlohmann::json leaf_json(const ExemplarLeaf& leaf, bool enumerated) {
  nlohmann::json j{{"leaf", leaf.leaf},
                   {"minimal_point", leaf.minimal_point.to_string()},
                   {"distance", leaf.distance},
                   {"predicted_class", leaf.predicted_class}};
  if (enumerated) j["points"] = points_json(leaf.points);
  return j;
}

}  // namespace

nlohmann::json ExemplarResult::to_json() const {
  nlohmann::json n = nlohmann::json::array();
  for (const auto& leaf : neighbours) n.push_back(leaf_json(leaf, enumerated));
  return {{"kind", "exemplars"}, {"anchor", leaf_json(anchor, enumerated)}, {"neighbours", n}, {"enumerated", enumerated}};
}

ExemplarResult exemplars(const SurrogateTree& tree, std::size_t anchor_leaf, std::size_t radius, ClassFilter filter,
                         bool enumerate, std::size_t cap) {
  require(tree.is_leaf(anchor_leaf), "node " + std::to_string(anchor_leaf) + " is not a leaf of this tree");
  const MinimalSet minimal = minimal_set(tree);
  ExemplarResult result;
  result.enumerated = enumerate;
  std::map<std::size_t, std::vector<InterpretablePoint>> members;
  if (enumerate)
    for (auto& p : enumerate_domain(tree.dimension(), cap)) members[tree.leaf_of(p)].push_back(std::move(p));

  const InterpretablePoint& centre = minimal.at(anchor_leaf);
  const std::size_t anchor_class = predicted_class(tree, tree.node(anchor_leaf).prediction);
  result.anchor = {anchor_leaf, centre, 0, anchor_class, members[anchor_leaf]};
  for (const auto& [leaf, point] : minimal) {
    if (leaf == anchor_leaf) continue;
    const std::size_t distance = hamming_distance(point, centre);
    if (distance > radius) continue;
    const std::size_t cls = predicted_class(tree, tree.node(leaf).prediction);
    if (filter == ClassFilter::same && cls != anchor_class) continue;
    if (filter == ClassFilter::different && cls == anchor_class) continue;
    result.neighbours.push_back({leaf, point, distance, cls, members[leaf]});
  }
  std::sort(result.neighbours.begin(), result.neighbours.end(), [](const ExemplarLeaf& a, const ExemplarLeaf& b) {
    return std::tie(a.distance, a.minimal_point) < std::tie(b.distance, b.minimal_point);
  });
  return result;
}

nlohmann::json WhatIfResult::to_json() const {
  nlohmann::json j{{"kind", "what-if"},
                   {"point", point.to_string()},
                   {"oracle", limetree::to_string(oracle)},
                   {"classes", classes},
                   {"probabilities", probabilities}};
  if (leaf) j["leaf"] = *leaf;
  return j;
}

WhatIfResult what_if(const InterpretablePoint& point, Oracle oracle, const SurrogateTree& tree,
                     const InterpretableDomain& domain, const BlackBox* black_box) {
  require(point.size() == tree.dimension(), "query point length " + std::to_string(point.size()) +
                                                " does not match d=" + std::to_string(tree.dimension()));
  WhatIfResult result{point, oracle, tree.classes(), {}, std::nullopt};
  if (oracle == Oracle::tree) {
    result.leaf = tree.leaf_of(point);
    result.probabilities = tree.node(*result.leaf).prediction;
  } else {
    require(black_box != nullptr, "the black-box oracle needs a model");
    const Matrix row = predict_points(*black_box, domain, std::span(&point, 1), tree.classes());
    result.probabilities.assign(row.row(0).begin(), row.row(0).end());
  }
  return result;
}

std::string to_string(CandidateMode mode) { return mode == CandidateMode::enumeration ? "enumeration" : "minimal-set"; }

namespace {

std::string target_kind_name(CounterfactualTarget::Kind kind) {
  switch (kind) {
    case CounterfactualTarget::Kind::argmax_is: return "argmax-is";
    case CounterfactualTarget::Kind::argmax_is_not: return "argmax-is-not";
    case CounterfactualTarget::Kind::probability_at_least: return "probability-at-least";
  }
  return "";
}

std::size_t class_position(const SurrogateTree& tree, std::size_t class_index) {
  const auto& classes = tree.classes();
  const auto it = std::find(classes.begin(), classes.end(), class_index);
  if (it == classes.end())
    fail(ErrorCode::invalid_argument, "class " + std::to_string(class_index) + " is not explained by this surrogate");
  return static_cast<std::size_t>(it - classes.begin());
}

struct Candidates {
  std::vector<InterpretablePoint> points;
  CandidateMode mode;
};

Candidates candidate_points(const SurrogateTree& tree, std::size_t budget) {
  const std::size_t d = tree.dimension();
  if (d < 63 && (std::uint64_t{1} << d) <= budget) return {enumerate_domain(d, d), CandidateMode::enumeration};
  std::set<InterpretablePoint> unique;
  for (auto& [leaf, point] : minimal_set(tree)) unique.insert(point);
  return {{unique.begin(), unique.end()}, CandidateMode::minimal_set};
}

Matrix evaluate(const std::vector<InterpretablePoint>& points, Oracle oracle, const SurrogateTree& tree,
                const InterpretableDomain& domain, const BlackBox* black_box) {
  if (oracle == Oracle::tree || points.empty()) return tree.predict_all(points);
  require(black_box != nullptr, "the black-box oracle needs a model");
  return predict_points(*black_box, domain, points, tree.classes());
}

}  // namespace

nlohmann::json CounterfactualQuery::to_json() const {
  nlohmann::json given_json = nlohmann::json::object();
  for (const auto& [f, bit] : given) given_json[std::to_string(f)] = bit ? 1 : 0;
  nlohmann::json target_json{{"kind", target_kind_name(target.kind)}, {"class", target.class_index}};
  if (target.kind == CounterfactualTarget::Kind::probability_at_least) target_json["threshold"] = target.threshold;
  nlohmann::json j{{"target", target_json},
                   {"given", given_json},
                   {"despite", std::vector<std::size_t>(despite.begin(), despite.end())},
                   {"oracle", limetree::to_string(oracle)}};
  if (reference) j["reference"] = reference->to_string();
  return j;
}

CounterfactualQuery CounterfactualQuery::from_json(const nlohmann::json& j) {
  try {
    CounterfactualQuery q;
    if (j.contains("reference") && !j.at("reference").is_null())
      q.reference = InterpretablePoint::from_string(j.at("reference").get<std::string>());
    const auto& t = j.at("target");
    const std::string kind = t.at("kind").get<std::string>();
    if (kind == "argmax-is")
      q.target.kind = CounterfactualTarget::Kind::argmax_is;
    else if (kind == "argmax-is-not")
      q.target.kind = CounterfactualTarget::Kind::argmax_is_not;
    else if (kind == "probability-at-least")
      q.target.kind = CounterfactualTarget::Kind::probability_at_least;
    else
      fail(ErrorCode::invalid_argument, "unknown counterfactual target '" + kind + "'");
    q.target.class_index = t.at("class").get<std::size_t>();
    q.target.threshold = t.value("threshold", 0.5);
    if (j.contains("given"))
      for (const auto& [key, value] : j.at("given").items()) {
        std::size_t pos = 0;
        const unsigned long feature = std::stoul(key, &pos);
        require(pos == key.size(), "given keys must be feature indices");
        const int bit = value.get<int>();
        require(bit == 0 || bit == 1, "given values must be 0 or 1");
        q.given[feature] = bit == 1;
      }
    if (j.contains("despite")) {
      const auto despite = j.at("despite").get<std::vector<std::size_t>>();
      q.despite.insert(despite.begin(), despite.end());
    }
    if (j.contains("oracle")) q.oracle = parse_oracle(j.at("oracle").get<std::string>());
    return q;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::invalid_argument, std::string("malformed counterfactual query: ") + e.what());
  } catch (const std::logic_error&) {
    fail(ErrorCode::invalid_argument, "given keys must be feature indices");
  }
}

nlohmann::json CounterfactualResult::to_json() const {
  nlohmann::json j{{"kind", "counterfactual"},
                   {"distance", distance ? nlohmann::json(*distance) : nlohmann::json(nullptr)},
                   {"points", points_json(points)},
                   {"impossible", points.empty()},
                   {"oracle", limetree::to_string(oracle)},
                   {"candidates", to_string(mode)},
                   {"constraints_echo", query.to_json()}};
  return j;
}

CounterfactualResult counterfactual(const CounterfactualQuery& query, const SurrogateTree& tree,
                                    const InterpretableDomain& domain, const BlackBox* black_box, std::size_t budget) {
  const std::size_t d = tree.dimension();
  const InterpretablePoint reference = query.reference.value_or(InterpretablePoint::ones(d));
  require(reference.size() == d, "reference length does not match d=" + std::to_string(d));
  for (const auto& [f, bit] : query.given)
    require(f < d, "given feature " + std::to_string(f) + " is outside 0.." + std::to_string(d - 1));
  for (std::size_t f : query.despite) {
    require(f < d, "despite feature " + std::to_string(f) + " is outside 0.." + std::to_string(d - 1));
    if (query.given.contains(f))
      fail(ErrorCode::invalid_argument,
           "feature " + std::to_string(f) + " cannot be both given and despite (contradictory constraints)");
  }
  const std::size_t target_pos = class_position(tree, query.target.class_index);

  Candidates candidates = candidate_points(tree, budget);
  std::vector<InterpretablePoint> admissible;
  for (auto& p : candidates.points) {
    bool ok = true;
    for (const auto& [f, bit] : query.given) ok = ok && (p[f] == 1) == bit;
    for (std::size_t f : query.despite) ok = ok && p[f] == reference[f];
    if (ok) admissible.push_back(std::move(p));
  }
  const Matrix rows = evaluate(admissible, query.oracle, tree, domain, black_box);

  CounterfactualResult result{std::nullopt, {}, query.oracle, candidates.mode, query};
  for (std::size_t i = 0; i < admissible.size(); ++i) {
    const auto row = rows.row(i);
    bool hit = false;
    switch (query.target.kind) {
      case CounterfactualTarget::Kind::argmax_is: hit = argmax(row) == target_pos; break;
      case CounterfactualTarget::Kind::argmax_is_not: hit = argmax(row) != target_pos; break;
      case CounterfactualTarget::Kind::probability_at_least: hit = row[target_pos] >= query.target.threshold; break;
    }
    if (!hit) continue;
    const std::size_t distance = hamming_distance(admissible[i], reference);
    if (!result.distance || distance < *result.distance) {
      result.distance = distance;
      result.points.clear();
    }
    if (distance == *result.distance) result.points.push_back(admissible[i]);
  }
  std::sort(result.points.begin(), result.points.end());
  return result;
}

nlohmann::json ShortestResult::to_json() const {
  return {{"kind", "shortest"},
          {"class", class_index},
          {"length", length ? nlohmann::json(*length) : nlohmann::json(nullptr)},
          {"points", points_json(points)},
          {"oracle", limetree::to_string(oracle)},
          {"candidates", to_string(mode)}};
}

ShortestResult shortest_explanation(std::size_t class_index, const SurrogateTree& tree,
                                    const InterpretableDomain& domain, const BlackBox* black_box, Oracle oracle,
                                    std::size_t budget) {
  const std::size_t pos = class_position(tree, class_index);
  Candidates candidates = candidate_points(tree, budget);
  const Matrix rows = evaluate(candidates.points, oracle, tree, domain, black_box);
  ShortestResult result{class_index, std::nullopt, {}, oracle, candidates.mode};
  for (std::size_t i = 0; i < candidates.points.size(); ++i) {
    if (argmax(rows.row(i)) != pos) continue;
    const std::size_t length = candidates.points[i].count_ones();
    if (!result.length || length < *result.length) {
      result.length = length;
      result.points.clear();
    }
    if (length == *result.length) result.points.push_back(candidates.points[i]);
  }
  std::sort(result.points.begin(), result.points.end());
  return result;
}

nlohmann::json render_tree(const SurrogateTree& tree, const InterpretableDomain& domain,
                           const std::function<std::string(const InterpretablePoint&)>& thumbnail) {
  require(tree.dimension() == domain.dimension(), "tree and domain dimensions differ");
  auto reference = [&](const InterpretablePoint& p) -> std::string {
    if (thumbnail) return thumbnail(p);
    if (domain.kind() == DomainKind::text_deletion)
      return std::get<TokenSequence>(domain.from_interpretable(p)).joined();
    return "render/" + p.to_string() + ".png";
  };
  const MinimalSet minimal = minimal_set(tree);
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
    const TreeNode& n = tree.node(i);
    nlohmann::json j{{"id", i}, {"depth", n.depth}, {"weight", n.weight}};
    if (n.is_leaf()) {
      const auto& mp = minimal.at(i);
      j["leaf"] = true;
      j["prediction"] = n.prediction;
      j["support"] = n.weight;
      j["predicted_class"] = predicted_class(tree, n.prediction);
      j["minimal_point"] = mp.to_string();
      j["thumbnail"] = reference(mp);
      if (!n.fitted_prediction.empty()) j["fitted_prediction"] = n.fitted_prediction;
    } else {
      j["leaf"] = false;
      j["feature"] = *n.feature;
      j["left"] = n.left;
      j["right"] = n.right;
    }
    nodes.push_back(std::move(j));
  }
  return {{"kind", "tree"},
          {"d", tree.dimension()},
          {"domain", to_string(domain.kind())},
          {"classes", tree.classes()},
          {"depth", tree.depth()},
          {"width", tree.width()},
          {"variant", to_string(tree.meta().variant)},
          {"guarantee_degraded", tree.meta().guarantee_degraded},
          {"importance", feature_importance(tree)},
          {"nodes", nodes}};
}

}  // namespace limetree
