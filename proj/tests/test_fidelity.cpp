#include <doctest.h>

#include <nlohmann/json.hpp>

#include "limetree/error.hpp"
#include "limetree/fidelity.hpp"
#include "limetree/sampling.hpp"
#include "support.hpp"

using namespace limetree;

namespace {

TreeNode leaf_node(std::size_t depth, std::vector<double> prediction) {
  TreeNode n;
  n.depth = depth;
  n.weight = 1.0;
  n.prediction = std::move(prediction);
  return n;
}

TreeNode split_node(std::size_t depth, std::size_t feature, std::size_t left, std::size_t right) {
  TreeNode n;
  n.depth = depth;
  n.weight = 2.0;
  n.feature = feature;
  n.left = left;
  n.right = right;
  return n;
}

Matrix and_table() {
  return testing::table_from(2, 2, [](const auto& b) {
    const double y = (b[0] && b[1]) ? 1.0 : 0.0;
    return std::vector<double>{y, 1.0 - y};
  });
}

}  // namespace

TEST_CASE("minimal points follow the left turns of the path") {
  const SurrogateTree single(4, {0}, {leaf_node(0, {1.0})}, {});
  CHECK(minimal_point(single, 0).to_string() == "1111");

  const SurrogateTree one_split(4, {0}, {split_node(0, 2, 1, 2), leaf_node(1, {0.0}), leaf_node(1, {1.0})}, {});
  CHECK(minimal_point(one_split, 1).to_string() == "1101");
  CHECK(minimal_point(one_split, 2).to_string() == "1111");

  // x0 >= 0.5 then x3 < 0.5
  const SurrogateTree two(4, {0},
                          {split_node(0, 0, 1, 2), leaf_node(1, {0.0}), split_node(1, 3, 3, 4), leaf_node(2, {0.2}),
                           leaf_node(2, {0.4})},
                          {});
  CHECK(minimal_point(two, 3).to_string() == "1110");
  CHECK(minimal_set(two).size() == two.width());
  CHECK_THROWS_AS(minimal_point(two, 2), Error);
  CHECK_THROWS_AS(minimal_point(two, 17), Error);
}

TEST_CASE("AND tree minimal set") {
  const auto points = testing::all_points(2);
  Matrix y(4, 1);
  for (std::size_t i = 0; i < 4; ++i) y(i, 0) = (points[i][0] && points[i][1]) ? 1.0 : 0.0;
  const auto tree = fit_tree(points, y, std::vector<double>(4, 1.0), 2);
  std::vector<std::string> got;
  for (const auto& [leaf, p] : minimal_set(tree)) got.push_back(p.to_string());
  CHECK(got == std::vector<std::string>{"01", "10", "11"});
}

TEST_CASE("relabeling replaces leaf means by black-box values at minimal points") {
  const auto domain = testing::strip_domain(2);
  const auto bb = testing::table_box(domain, and_table());
  const auto points = testing::all_points(2);
  const std::vector<std::size_t> classes{0, 1};
  const Matrix targets = predict_points(*bb, domain, points, classes);
  const auto stump = fit_tree(points, targets, std::vector<double>(4, 1.0), 1, classes);
  const auto relabeled = relabel_leaves(stump, *bb, domain);
  CHECK(relabeled.meta().variant == TreeVariant::relabeled);
  CHECK(relabeled.structure_signature() == stump.structure_signature());
  const std::size_t right = stump.leaf_of(InterpretablePoint::from_string("11"));
  CHECK(stump.node(right).prediction[0] == doctest::Approx(0.5));
  CHECK(relabeled.node(right).prediction == std::vector<double>{1.0, 0.0});
  CHECK(relabeled.node(right).fitted_prediction == stump.node(right).prediction);
  const std::size_t left = stump.leaf_of(InterpretablePoint::from_string("01"));
  CHECK(relabeled.node(left).prediction == std::vector<double>{0.0, 1.0});

  const auto report = verify_fidelity(stump, *bb, domain, FidelityScope::full_enumeration);
  CHECK(report.max_abs_deviation == doctest::Approx(0.5));
  CHECK_FALSE(report.certified);
  const auto fixed = verify_fidelity(relabeled, *bb, domain, FidelityScope::minimal_set);
  CHECK(fixed.max_abs_deviation == 0.0);
  CHECK(fixed.certified);
  CHECK(fixed.per_leaf.size() == 2);
  CHECK(fixed.to_json().at("scope") == "minimal-set");
}

TEST_CASE("relabeling a depth-0 tree predicts f at the anchor") {
  const auto domain = testing::strip_domain(3);
  const auto bb = testing::seeded_box(domain, SyntheticKind::segment_logit, 4, 2);
  const std::vector<std::size_t> classes{3, 1};
  const auto sample = weigh_points(enumerate_domain(3));
  const SurrogateTree stump(3, classes, {leaf_node(0, {0.5, 0.5})}, {});
  const auto relabeled = relabel_leaves(stump, *bb, domain);
  const Matrix anchor = predict_points(*bb, domain, std::vector{InterpretablePoint::ones(3)}, classes);
  CHECK(relabeled.node(0).prediction == std::vector<double>{anchor(0, 0), anchor(0, 1)});
}

TEST_CASE("relabeling is exact at every minimal point for seeded black boxes") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t d = 4 + seed % 5;
    const auto domain = testing::strip_domain(d);
    const auto bb = testing::seeded_box(domain, SyntheticKind::segment_logit, 5, seed);
    const std::vector<std::size_t> classes{0, 2, 4};
    const auto sample = weigh_points(enumerate_domain(d));
    const Matrix targets = predict_points(*bb, domain, sample.points, classes);
    for (std::size_t bound = 1; bound <= d; ++bound) {
      const auto tree = relabel_leaves(fit_tree(sample.points, targets, sample.weights, bound, classes), *bb, domain);
      for (const auto& [leaf, point] : minimal_set(tree)) {
        const Matrix f = predict_points(*bb, domain, std::vector{point}, classes);
        CHECK(tree.predict(point) == std::vector<double>(f.row(0).begin(), f.row(0).end()));
      }
    }
  }
}

TEST_CASE("complete trees reproduce the black box exactly") {
  const auto domain = testing::strip_domain(2);
  const auto xor_box = testing::seeded_box(domain, SyntheticKind::xor_pair, 2, 5);
  const std::vector<std::size_t> classes{0, 1};
  const auto tree = fit_complete(*xor_box, domain, classes);
  CHECK(tree.depth() == 2);
  CHECK(tree.width() == 4);
  CHECK(tree.nodes().size() == 7);
  CHECK(tree.meta().variant == TreeVariant::complete);
  const auto points = testing::all_points(2);
  CHECK(loss_limetree(predict_points(*xor_box, domain, points, classes), tree.predict_all(points),
                      std::vector<double>(4, 1.0)) == 0.0);
  std::vector<std::string> minimal;
  for (const auto& [leaf, p] : minimal_set(tree)) minimal.push_back(p.to_string());
  std::sort(minimal.begin(), minimal.end());
  CHECK(minimal == std::vector<std::string>{"00", "01", "10", "11"});

  for (std::size_t d : {1u, 6u, 9u}) {
    const auto dom = testing::strip_domain(d);
    const auto bb = testing::seeded_box(dom, SyntheticKind::segment_logit, 3, d);
    const auto complete = fit_complete(*bb, dom, std::vector<std::size_t>{2, 0});
    const auto pts = testing::all_points(d);
    CHECK(complete.width() == pts.size());
    CHECK(verify_fidelity(complete, *bb, dom, FidelityScope::full_enumeration).max_abs_deviation == 0.0);
    // relabeling a complete tree changes nothing
    CHECK(relabel_leaves(complete, *bb, dom).predict_all(pts) == complete.predict_all(pts));
  }
  CHECK_THROWS_AS(fit_complete(3, Matrix(8, 1), std::vector<std::size_t>{0}, true, 2), Error);
}

TEST_CASE("non-bijective domains mark the guarantee as degraded") {
  const auto points = testing::all_points(2);
  const Matrix targets = and_table();
  const auto tree = fit_tree(points, targets, std::vector<double>(4, 1.0), 1, {0, 1});
  const auto ms = minimal_set(tree);
  Matrix minimal_targets(ms.size(), 2, 0.5);
  CHECK(relabel_leaves(tree, minimal_targets, false).meta().guarantee_degraded);
  CHECK_FALSE(relabel_leaves(tree, minimal_targets, true).meta().guarantee_degraded);
  CHECK(fit_complete(2, targets, std::vector<std::size_t>{0, 1}, false).meta().guarantee_degraded);
  CHECK(parse_fidelity_scope("full-enumeration") == FidelityScope::full_enumeration);
}
