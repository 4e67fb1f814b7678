#include "limetree/pipeline.hpp"

#include <algorithm>

#include "limetree/error.hpp"
#include "limetree/explanations.hpp"
#include "limetree/fidelity.hpp"
#include "limetree/surrogate_tree.hpp"

namespace limetree {

nlohmann::json explain(const InterpretableDomain& domain, const BlackBox& black_box, const ExplainOptions& options) {
  require(options.top >= 1, "at least one class must be explained");
  const std::size_t d = domain.dimension();
  const auto classes = top_classes(black_box, domain, std::min(options.top, black_box.class_count()));

  SamplingOptions sampling;
  sampling.samples = options.samples;
  sampling.seed = options.seed;
  sampling.kernel_width = options.kernel_width;
  const WeightedSample sample = build_sample(d, sampling);
  const Matrix targets = predict_points(black_box, domain, sample.points, classes);
  const LimetreeFit fit = fit_limetree(sample, targets, classes, options.epsilon, d);
  const SurrogateTree& tree = fit.tree;

  const auto names = black_box.class_names();
  nlohmann::json class_json = nlohmann::json::array();
  for (auto c : classes) class_json.push_back({{"index", c}, {"name", c < names.size() ? names[c] : ""}});

  nlohmann::json rules = nlohmann::json::array();
  for (std::size_t leaf : tree.leaves()) rules.push_back(extract_rule(tree, leaf).to_json());

  nlohmann::json shortest = nlohmann::json::array();
  for (auto c : classes) shortest.push_back(shortest_explanation(c, tree, domain, &black_box, Oracle::black_box).to_json());

  CounterfactualQuery flip;
  flip.target = CounterfactualTarget::not_argmax(classes.front());
  flip.oracle = Oracle::black_box;

  nlohmann::json out{{"domain", domain.to_json()},
                     {"classes", class_json},
                     {"sample", {{"size", sample.size()}, {"enumerated", sample.enumerated},
                                 {"kernel_width", sample.kernel_width}}},
                     {"limet", {{"report", fit.report.to_json()}, {"tree", render_tree(tree, domain)}}},
                     {"importance", feature_importance(tree)},
                     {"rules", rules},
                     {"shortest", shortest},
                     {"counterfactual", counterfactual(flip, tree, domain, &black_box).to_json()},
                     {"what_if_anchor",
                      what_if(InterpretablePoint::ones(d), Oracle::black_box, tree, domain, &black_box).to_json()}};
  if (options.relabel) {
    const SurrogateTree relabeled = relabel_leaves(tree, black_box, domain);
    out["limet_relabeled"] = {
        {"tree", render_tree(relabeled, domain)},
        {"fidelity", verify_fidelity(relabeled, black_box, domain, FidelityScope::minimal_set).to_json()}};
  }
  if (options.complete && d < 63 && (std::uint64_t{1} << d) <= kDefaultEnumerationBudget) {
    const SurrogateTree complete = fit_complete(black_box, domain, classes);
    out["limet_complete"] = {
        {"depth", complete.depth()},
        {"width", complete.width()},
        {"importance", feature_importance(complete)},
        {"fidelity", verify_fidelity(complete, black_box, domain, FidelityScope::full_enumeration).to_json()}};
  }
  if (options.lime) out["lime"] = lime_explain(sample, targets, classes, options.alpha).to_json();
  return out;
}

}  // namespace limetree
