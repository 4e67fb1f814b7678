#include <doctest.h>

#include <algorithm>
#include <random>

#include <nlohmann/json.hpp>

#include "limetree/error.hpp"
#include "limetree/explanations.hpp"
#include "limetree/fidelity.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace limetree;

namespace {

Matrix and_table() {
  return testing::table_from(2, 2, [](const auto& b) {
    const double y = (b[0] && b[1]) ? 1.0 : 0.0;
    return std::vector<double>{y, 1.0 - y};
  });
}

// Single-output AND tree fitted on the uniform enumeration.
SurrogateTree and_tree() {
  const auto points = testing::all_points(2);
  Matrix y(4, 1);
  for (std::size_t i = 0; i < 4; ++i) y(i, 0) = (points[i][0] && points[i][1]) ? 1.0 : 0.0;
  return fit_tree(points, y, std::vector<double>(4, 1.0), 2);
}

std::vector<std::string> strings(const std::vector<InterpretablePoint>& points) {
  std::vector<std::string> out;
  for (const auto& p : points) out.push_back(p.to_string());
  return out;
}

}  // namespace

TEST_CASE("feature importance of the AND tree") {
  const auto imp = feature_importance(and_tree());
  REQUIRE(imp.size() == 2);
  CHECK(imp[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(imp[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  const SurrogateTree stump(3, {0}, {[] {
                              TreeNode n;
                              n.weight = 1.0;
                              n.prediction = {1.0};
                              return n;
                            }()},
                            {});
  CHECK(feature_importance(stump) == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("importance ignores features the model does not read") {
  const auto domain = testing::strip_domain(3);
  const auto bb = testing::table_box(domain, testing::table_from(3, 2, [](const auto& b) {
    const double y = 0.2 + 0.5 * b[0] + 0.2 * b[2];
    return std::vector<double>{y, 1.0 - y};
  }));
  const auto tree = fit_complete(*bb, domain, std::vector<std::size_t>{0, 1});
  const auto imp = feature_importance(tree);
  CHECK(imp[1] == 0.0);
  CHECK(imp[0] + imp[1] + imp[2] == doctest::Approx(1.0));
  CHECK(imp[0] > imp[2]);
}

TEST_CASE("rules") {
  const auto tree = and_tree();
  const std::size_t rr = tree.leaf_of(InterpretablePoint::from_string("11"));
  const auto rule = extract_rule(tree, rr);
  CHECK(rule.to_string() == "x0 = 1 AND x1 = 1");
  CHECK(rule.prediction == std::vector<double>{1.0});
  CHECK(rule.minimal_point.to_string() == "11");
  const auto left = extract_rule(tree, tree.leaf_of(InterpretablePoint::from_string("00")));
  REQUIRE(left.literals.size() == 1);
  CHECK(left.literals[0].feature == 0);
  CHECK_FALSE(left.literals[0].value);
  CHECK(left.to_json().at("literals").size() == 1);
  const SurrogateTree stump(2, {0}, {[] {
                              TreeNode n;
                              n.weight = 1.0;
                              n.prediction = {1.0};
                              return n;
                            }()},
                            {});
  CHECK(extract_rule(stump, 0).to_string() == "always");
  CHECK_THROWS_AS(extract_rule(tree, 0), Error);
}

TEST_CASE("exemplars on complete trees") {
  const auto domain = testing::strip_domain(2);
  const auto bb = testing::table_box(domain, and_table());
  const auto tree = fit_complete(*bb, domain, std::vector<std::size_t>{0, 1});
  const std::size_t anchor = tree.leaf_of(InterpretablePoint::ones(2));

  const auto own = exemplars(tree, anchor, 0, ClassFilter::any);
  CHECK(own.neighbours.empty());
  CHECK(strings(own.anchor.points) == std::vector<std::string>{"11"});

  const auto ring = exemplars(tree, anchor, 1, ClassFilter::any);
  REQUIRE(ring.neighbours.size() == 2);
  CHECK(ring.neighbours[0].minimal_point.to_string() == "01");
  CHECK(ring.neighbours[1].minimal_point.to_string() == "10");
  CHECK(ring.neighbours[0].distance == 1);

  CHECK(exemplars(tree, anchor, 1, ClassFilter::different).neighbours.size() == 2);
  CHECK(exemplars(tree, anchor, 1, ClassFilter::same).neighbours.empty());
  const auto wide = exemplars(tree, anchor, 2, ClassFilter::any);
  REQUIRE(wide.neighbours.size() == 3);
  CHECK(wide.neighbours[2].minimal_point.to_string() == "00");
}

TEST_CASE("exemplar points of a greedy leaf") {
  const auto tree = and_tree();
  const std::size_t left = tree.leaf_of(InterpretablePoint::from_string("00"));
  const auto result = exemplars(tree, left, 0, ClassFilter::any);
  CHECK(strings(result.anchor.points) == std::vector<std::string>{"00", "01"});
  CHECK(result.enumerated);
  const auto lean = exemplars(tree, left, 0, ClassFilter::any, false);
  CHECK(lean.anchor.points.empty());
}

TEST_CASE("what-if answers with the requested oracle") {
  const auto domain = testing::strip_domain(2);
  const auto bb = testing::table_box(domain, and_table());
  const auto points = testing::all_points(2);
  const std::vector<std::size_t> classes{0, 1};
  const auto stump = fit_tree(points, predict_points(*bb, domain, points, classes), std::vector<double>(4, 1.0), 1,
                              classes);
  const auto p = InterpretablePoint::from_string("10");
  const auto by_tree = what_if(p, Oracle::tree, stump, domain, bb.get());
  const auto by_model = what_if(p, Oracle::black_box, stump, domain, bb.get());
  CHECK(by_tree.probabilities[0] == doctest::Approx(0.5));
  CHECK(by_model.probabilities == std::vector<double>{0.0, 1.0});
  CHECK(by_tree.leaf.has_value());
  CHECK_FALSE(by_model.leaf.has_value());
  CHECK(by_tree.to_json().at("oracle") == "tree");
  CHECK(what_if(InterpretablePoint::ones(2), Oracle::black_box, stump, domain, bb.get()).probabilities ==
        std::vector<double>{1.0, 0.0});
  CHECK_THROWS_AS(what_if(InterpretablePoint::ones(3), Oracle::tree, stump, domain, bb.get()), Error);

  const auto complete = fit_complete(*bb, domain, classes);
  CHECK(default_oracle(complete) == Oracle::tree);
  CHECK(default_oracle(stump) == Oracle::black_box);
  for (const auto& q : points)
    CHECK(what_if(q, Oracle::tree, complete, domain, bb.get()).probabilities ==
          what_if(q, Oracle::black_box, complete, domain, bb.get()).probabilities);
}

TEST_CASE("counterfactual examples") {
  const auto domain = testing::strip_domain(3);
  // class 1 wins exactly when bit 0 is cleared
  const auto bb = testing::table_box(domain, testing::table_from(3, 2, [](const auto& b) {
    return b[0] ? std::vector<double>{0.7, 0.3} : std::vector<double>{0.2, 0.8};
  }));
  const auto tree = fit_complete(*bb, domain, std::vector<std::size_t>{0, 1});

  CounterfactualQuery q;
  q.target = CounterfactualTarget::argmax(0);
  auto r = counterfactual(q, tree, domain, bb.get());
  CHECK(r.distance == std::optional<std::size_t>{0});
  CHECK(strings(r.points) == std::vector<std::string>{"111"});

  q.target = CounterfactualTarget::argmax(1);
  r = counterfactual(q, tree, domain, bb.get());
  CHECK(r.distance == std::optional<std::size_t>{1});
  CHECK(strings(r.points) == std::vector<std::string>{"011"});
  CHECK(r.mode == CandidateMode::enumeration);

  q.despite = {0};
  r = counterfactual(q, tree, domain, bb.get());
  CHECK_FALSE(r.distance.has_value());
  CHECK(r.points.empty());
  CHECK(r.to_json().at("impossible") == true);

  q.despite.clear();
  q.given = {{2, false}};
  r = counterfactual(q, tree, domain, bb.get());
  CHECK(strings(r.points) == std::vector<std::string>{"010"});

  q.despite = {2};
  try {
    counterfactual(q, tree, domain, bb.get());
    FAIL("expected invalid-argument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_argument);
  }
  q.despite.clear();
  q.given = {{7, true}};
  CHECK_THROWS_AS(counterfactual(q, tree, domain, bb.get()), Error);
  q.given.clear();
  q.target = CounterfactualTarget::argmax(5);
  CHECK_THROWS_AS(counterfactual(q, tree, domain, bb.get()), Error);
}

TEST_CASE("counterfactual query JSON round trip") {
  CounterfactualQuery q;
  q.reference = InterpretablePoint::from_string("1101");
  q.target = CounterfactualTarget::at_least(2, 0.4);
  q.given = {{1, true}, {3, false}};
  q.despite = {0};
  q.oracle = Oracle::tree;
  const auto back = CounterfactualQuery::from_json(q.to_json());
  CHECK(back.to_json() == q.to_json());
  CHECK(back.target.kind == CounterfactualTarget::Kind::probability_at_least);
  CHECK(back.target.threshold == 0.4);
  CHECK(back.given.at(3) == false);
  CHECK_THROWS_AS(CounterfactualQuery::from_json({{"target", {{"kind", "argmax-maybe"}, {"class", 0}}}}), Error);
  CHECK_THROWS_AS(CounterfactualQuery::from_json({{"target", {{"kind", "argmax-is"}, {"class", 0}}}, {"given", {{"x", 1}}}}),
                  Error);
}

TEST_CASE("counterfactuals agree with a brute-force scan") {
  std::mt19937_64 rng(77);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t d = 2 + rng() % 7;
    const auto domain = testing::strip_domain(d);
    const auto kind = static_cast<SyntheticKind>(rng() % 3);
    const auto bb = testing::seeded_box(domain, kind, 4, rng());
    const std::vector<std::size_t> classes{0, 1, 2};
    const auto sample = weigh_points(enumerate_domain(d));
    const auto tree = fit_tree(sample.points, predict_points(*bb, domain, sample.points, classes), sample.weights,
                               1 + rng() % d, classes);
    CounterfactualQuery q;
    const int k = static_cast<int>(rng() % 3);
    const std::size_t c = rng() % 3;
    q.target = k == 0 ? CounterfactualTarget::argmax(c)
                      : k == 1 ? CounterfactualTarget::not_argmax(c)
                               : CounterfactualTarget::at_least(c, std::uniform_real_distribution<double>(0.1, 0.6)(rng));
    if (rng() % 2) q.reference = InterpretablePoint::from_index(rng() % (1u << d), d);
    for (std::size_t f = 0; f < d; ++f) {
      const auto roll = rng() % 6;
      if (roll == 0) q.given[f] = rng() % 2;
      else if (roll == 1) q.despite.insert(f);
    }
    q.oracle = rng() % 2 ? Oracle::tree : Oracle::black_box;
    const auto got = counterfactual(q, tree, domain, bb.get());
    const auto [distance, points] = testing::brute_force(q, tree, domain, *bb);
    if (got.distance != distance || strings(got.points) != points) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("large domains fall back to the minimal set") {
  const auto domain = testing::strip_domain(13);
  const auto bb = testing::seeded_box(domain, SyntheticKind::segment_logit, 3, 1);
  SamplingOptions o;
  o.samples = 200;
  const auto sample = build_sample(13, o);
  const std::vector<std::size_t> classes{0, 1};
  const auto tree = fit_tree(sample.points, predict_points(*bb, domain, sample.points, classes), sample.weights, 3,
                             classes);
  CounterfactualQuery q;
  q.target = CounterfactualTarget::not_argmax(classes[argmax(tree.predict(InterpretablePoint::ones(13)))]);
  q.oracle = Oracle::tree;
  const auto r = counterfactual(q, tree, domain, bb.get());
  CHECK(r.mode == CandidateMode::minimal_set);
  const auto ms = minimal_set(tree);
  for (const auto& p : r.points)
    CHECK(std::any_of(ms.begin(), ms.end(), [&](const auto& e) { return e.second == p; }));
}

TEST_CASE("shortest explanations") {
  const auto domain = testing::strip_domain(3);
  const std::vector<std::size_t> classes{0, 1};
  const auto constant = testing::table_box(domain, testing::table_from(3, 2, [](const auto&) {
    return std::vector<double>{0.9, 0.1};
  }));
  auto tree = fit_complete(*constant, domain, classes);
  auto r = shortest_explanation(0, tree, domain, constant.get(), Oracle::black_box);
  CHECK(r.length == std::optional<std::size_t>{0});
  CHECK(strings(r.points) == std::vector<std::string>{"000"});
  CHECK_FALSE(shortest_explanation(1, tree, domain, constant.get(), Oracle::black_box).length.has_value());

  const auto bit1 = testing::table_box(domain, testing::table_from(3, 2, [](const auto& b) {
    return b[1] ? std::vector<double>{0.6, 0.4} : std::vector<double>{0.3, 0.7};
  }));
  tree = fit_complete(*bit1, domain, classes);
  r = shortest_explanation(0, tree, domain, bit1.get(), Oracle::tree);
  CHECK(r.length == std::optional<std::size_t>{1});
  CHECK(strings(r.points) == std::vector<std::string>{"010"});

  const auto either = testing::table_box(domain, testing::table_from(3, 2, [](const auto& b) {
    return (b[0] || b[2]) ? std::vector<double>{0.6, 0.4} : std::vector<double>{0.3, 0.7};
  }));
  tree = fit_complete(*either, domain, classes);
  r = shortest_explanation(0, tree, domain, either.get(), Oracle::black_box);
  CHECK(strings(r.points) == std::vector<std::string>{"001", "100"});
}

TEST_CASE("render_tree documents") {
  const auto domain = testing::strip_domain(2);
  const auto doc = render_tree(and_tree(), domain);
  CHECK(doc.at("kind") == "tree");
  REQUIRE(doc.at("nodes").size() == 5);
  std::vector<std::vector<double>> leaf_predictions;
  for (const auto& n : doc.at("nodes"))
    if (n.contains("prediction")) {
      leaf_predictions.push_back(n.at("prediction").get<std::vector<double>>());
      CHECK(n.at("thumbnail") == "render/" + n.at("minimal_point").get<std::string>() + ".png");
    }
  CHECK(leaf_predictions == std::vector<std::vector<double>>{{0.0}, {0.0}, {1.0}});

  const auto bb = testing::table_box(domain, and_table());
  const auto complete = render_tree(fit_complete(*bb, domain, std::vector<std::size_t>{0, 1}), domain);
  CHECK(complete.at("nodes").size() == 7);
  std::size_t thumbs = 0;
  for (const auto& n : complete.at("nodes")) thumbs += n.contains("thumbnail");
  CHECK(thumbs == 4);

  const auto text = InterpretableDomain::text("good bad film");
  const SurrogateTree stump(3, {0}, {[] {
                              TreeNode n;
                              n.weight = 1.0;
                              n.prediction = {1.0};
                              return n;
                            }()},
                            {});
  const auto tdoc = render_tree(stump, text);
  CHECK(tdoc.at("nodes").size() == 1);
  CHECK(tdoc.at("nodes")[0].at("thumbnail") == "good bad film");
}
