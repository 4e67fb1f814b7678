#include <doctest.h>

#include <cmath>
#include <optional>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "limetree/error.hpp"
#include "limetree/sampling.hpp"
#include "limetree/surrogate_tree.hpp"
#include "support.hpp"

using namespace limetree;

namespace {

std::vector<double> ones(std::size_t n) { return std::vector<double>(n, 1.0); }

Matrix targets_for(const std::vector<InterpretablePoint>& points, const Matrix& table) {
  Matrix out(points.size(), table.cols());
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t c = 0; c < table.cols(); ++c) out(i, c) = table(points[i].to_index(), c);
  return out;
}

// Reference implementation of the multi-output loss straight from its formula.
double reference_loss(const Matrix& f, const Matrix& g, const std::vector<double>& w, bool halve) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < f.rows(); ++i) {
    double inner = 0.0;
    for (std::size_t c = 0; c < f.cols(); ++c) inner += (f(i, c) - g(i, c)) * (f(i, c) - g(i, c));
    num += w[i] * (halve ? 0.5 * inner : inner);
    den += w[i];
  }
  return num / den;
}

double weighted_variance_mean(const std::vector<std::size_t>& rows, const Matrix& y, const std::vector<double>& w) {
  double total = 0.0;
  for (std::size_t i : rows) total += w[i];
  if (total <= 0.0) return 0.0;
  double out = 0.0;
  for (std::size_t c = 0; c < y.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t i : rows) mean += w[i] * y(i, c);
    mean /= total;
    double var = 0.0;
    for (std::size_t i : rows) var += w[i] * (y(i, c) - mean) * (y(i, c) - mean);
    out += var / total;
  }
  return out / static_cast<double>(y.cols());
}

Matrix random_simplex_table(std::size_t rows, std::size_t classes, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Matrix out(rows, classes);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) s += out(r, c) = e(rng);
    for (std::size_t c = 0; c < classes; ++c) out(r, c) /= s;
  }
  return out;
}

}  // namespace

TEST_CASE("AND is recovered exactly at depth 2") {
  const auto points = testing::all_points(2);
  const Matrix table = testing::table_from(2, 2, [](const auto& b) {
    const double y = (b[0] && b[1]) ? 1.0 : 0.0;
    return std::vector<double>{y, 1.0 - y};
  });
  const Matrix targets = targets_for(points, table);
  const auto tree = fit_tree(points, targets, ones(4), 2);
  CHECK(tree.depth() == 2);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 2; ++c) CHECK(tree.predict(points[i])[c] == targets(i, c));
  CHECK(loss_limetree(targets, tree.predict_all(points), ones(4)) == 0.0);

  const auto stump = fit_tree(points, targets, ones(4), 1);
  REQUIRE(stump.depth() == 1);
  CHECK(*stump.node(0).feature == 0);  // both features tie; lowest index wins
  CHECK(stump.predict(points[0]) == std::vector<double>{0.0, 1.0});
  CHECK(stump.predict(points[3])[0] == doctest::Approx(0.5));
}

TEST_CASE("constant targets give a single leaf") {
  const auto points = testing::all_points(3);
  const Matrix targets(8, 2, 0.5);
  const auto tree = fit_tree(points, targets, ones(8), 3);
  CHECK(tree.depth() == 0);
  CHECK(tree.nodes().size() == 1);
  CHECK(tree.predict(points[5]) == std::vector<double>{0.5, 0.5});
}

TEST_CASE("XOR has no first split under uniform weights") {
  const auto points = testing::all_points(2);
  const Matrix table = testing::table_from(2, 2, [](const auto& b) {
    const double y = (b[0] ^ b[1]) ? 1.0 : 0.0;
    return std::vector<double>{y, 1.0 - y};
  });
  const Matrix targets = targets_for(points, table);
  const auto tree = fit_tree(points, targets, ones(4), 2);
  CHECK(tree.depth() == 0);
  CHECK(loss_limetree(targets, tree.predict_all(points), ones(4)) == doctest::Approx(0.25));
}

TEST_CASE("XOR is split once the kernel breaks the symmetry") {
  const auto sample = weigh_points(enumerate_domain(2));
  const Matrix table = testing::table_from(2, 2, [](const auto& b) {
    const double y = (b[0] ^ b[1]) ? 1.0 : 0.0;
    return std::vector<double>{y, 1.0 - y};
  });
  const Matrix targets = targets_for(sample.points, table);
  const auto tree = fit_tree(sample.points, targets, sample.weights, 2);
  CHECK(tree.depth() == 2);
  CHECK(loss_limetree(targets, tree.predict_all(sample.points), sample.weights) < 1e-12);
}

TEST_CASE("loss anchors") {
  const Matrix f = Matrix::from_rows({{1.0, 0.0, 0.0}});
  const Matrix g = Matrix::from_rows({{0.0, 0.0, 1.0}});
  CHECK(loss_limetree(f, g, ones(1)) == 1.0);
  CHECK(loss_limetree(f, f, ones(1)) == 0.0);
  CHECK(loss_limetree(f, g, ones(1), false) == 2.0);
  const std::vector<double> y{1.0, 0.0, 0.5}, p{0.5, 0.5, 0.5}, w{2.0, 1.0, 3.0};
  CHECK(loss_lime(y, p, w) == doctest::Approx(2.0 * 0.25 + 0.25));
  const std::vector<std::size_t> a{0, 1, 2}, b{0, 2, 2};
  CHECK(loss_classification(a, b, w) == 1.0);
  CHECK_THROWS_AS(loss_limetree(f, Matrix(2, 3), ones(1)), Error);
}

TEST_CASE("loss_limetree agrees with the formula on random inputs") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 20, k = 1 + rng() % 5;
    const Matrix f = random_simplex_table(n, k, rng), g = random_simplex_table(n, k, rng);
    std::vector<double> w(n);
    for (auto& v : w) v = u(rng);
    const double loss = loss_limetree(f, g, w);
    CHECK(loss == doctest::Approx(reference_loss(f, g, w, true)).epsilon(1e-12));
    CHECK(loss >= 0.0);
    CHECK(loss <= 1.0 + 1e-12);
    CHECK(loss_limetree(f, g, w, false) == doctest::Approx(reference_loss(f, g, w, false)).epsilon(1e-12));
  }
}

TEST_CASE("root split matches a brute-force impurity search") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 2 + rng() % 5, k = 2 + rng() % 3;
    const auto points = testing::all_points(d);
    const Matrix targets = random_simplex_table(points.size(), k, rng);
    std::vector<double> w(points.size());
    for (auto& v : w) v = u(rng);
    std::vector<std::size_t> all = testing::iota(points.size());
    double total = 0.0;
    for (double v : w) total += v;
    const double parent = weighted_variance_mean(all, targets, w);
    double best_gain = 0.0;
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<std::size_t> l, r;
      double wl = 0.0, wr = 0.0;
      for (std::size_t i : all) (points[i][j] ? (wr += w[i], r) : (wl += w[i], l)).push_back(i);
      const double gain =
          (total * parent - wl * weighted_variance_mean(l, targets, w) - wr * weighted_variance_mean(r, targets, w)) /
          total;
      if (gain > best_gain + 1e-15) {
        best_gain = gain;
        best = j;
      }
    }
    const auto tree = fit_tree(points, targets, w, 1);
    REQUIRE(best.has_value());
    CHECK(tree.node(0).feature == best);
    CHECK(tree.node(0).impurity == doctest::Approx(parent).epsilon(1e-10));
  }
}

TEST_CASE("leaf predictions are weighted means of the routed targets") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  const auto points = testing::all_points(4);
  const Matrix targets = random_simplex_table(points.size(), 3, rng);
  std::vector<double> w(points.size());
  for (auto& v : w) v = u(rng);
  const auto tree = fit_tree(points, targets, w, 2);
  for (std::size_t leaf : tree.leaves()) {
    std::vector<double> mean(3, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
      if (tree.leaf_of(points[i]) == leaf) {
        total += w[i];
        for (std::size_t c = 0; c < 3; ++c) mean[c] += w[i] * targets(i, c);
      }
    for (std::size_t c = 0; c < 3; ++c) CHECK(tree.node(leaf).prediction[c] == doctest::Approx(mean[c] / total));
    CHECK(tree.node(leaf).weight == doctest::Approx(total));
  }
}

TEST_CASE("a feature is used at most once per path and depth respects the bound") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 3 + rng() % 4;
    const auto sample = weigh_points(enumerate_domain(d));
    const Matrix targets = random_simplex_table(sample.size(), 3, rng);
    for (std::size_t bound = 1; bound <= d; ++bound) {
      const auto tree = fit_tree(sample.points, targets, sample.weights, bound);
      CHECK(tree.depth() <= bound);
      for (std::size_t leaf : tree.leaves()) {
        std::set<std::size_t> seen;
        for (const auto& step : tree.path_to(leaf)) CHECK(seen.insert(step.feature).second);
      }
    }
  }
}

TEST_CASE("full-enumeration loss is non-increasing in the depth bound") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 3 + rng() % 5;
    const auto sample = weigh_points(enumerate_domain(d));
    const Matrix targets = random_simplex_table(sample.size(), 3, rng);
    double previous = 2.0;
    for (std::size_t bound = 1; bound <= d; ++bound) {
      const auto tree = fit_tree(sample.points, targets, sample.weights, bound);
      const double loss = loss_limetree(targets, tree.predict_all(sample.points), sample.weights);
      CHECK(loss <= previous + 1e-15);
      previous = loss;
    }
  }
}

TEST_CASE("complexity") {
  const auto points = testing::all_points(3);
  const Matrix table = testing::table_from(3, 2, [](const auto& b) {
    const double y = b[0] ? 1.0 : 0.0;
    return std::vector<double>{y, 1.0 - y};
  });
  const auto tree = fit_tree(points, targets_for(points, table), ones(8), 3);
  CHECK(tree.depth() == 1);
  CHECK(tree.width() == 2);
  CHECK(complexity(tree, ComplexityForm::depth) == doctest::Approx(1.0 / 3.0));
  CHECK(complexity(tree, ComplexityForm::width) == doctest::Approx(2.0 / 8.0));
}

TEST_CASE("fit_limetree stops at the first bound meeting epsilon") {
  const auto sample = weigh_points(enumerate_domain(3));
  const Matrix table = testing::table_from(3, 2, [](const auto& b) {
    const double y = (b[0] && b[1]) ? 0.9 : 0.1;
    return std::vector<double>{y, 1.0 - y};
  });
  const Matrix targets = targets_for(sample.points, table);
  const std::vector<std::size_t> classes{0, 1};
  const auto loose = fit_limetree(sample, targets, classes, 0.0, 3);
  CHECK(loose.report.depth_bound == 1);
  CHECK(loose.report.epsilon_met);
  const auto tight = fit_limetree(sample, targets, classes, 1.0, 3);
  CHECK(tight.report.final_loss < 1e-12);
  CHECK(tight.tree.depth() == 2);
  CHECK(tight.report.epsilon_met);
  REQUIRE(tight.report.depth_losses.size() == tight.report.depth_bound);
  for (std::size_t i = 0; i < tight.report.depth_losses.size(); ++i) {
    const auto t = fit_tree(sample.points, targets, sample.weights, i + 1);
    CHECK(tight.report.depth_losses[i] ==
          doctest::Approx(reference_loss(targets, t.predict_all(sample.points), sample.weights, true)));
  }
  CHECK(tight.tree.meta().achieved_fidelity == doctest::Approx(1.0 - tight.report.final_loss));
  CHECK_THROWS_AS(fit_limetree(sample, targets, classes, 1.5, 3), Error);
  CHECK_THROWS_AS(fit_limetree(sample, targets, classes, 0.5, 0), Error);
}

TEST_CASE("single-class fits use the unhalved loss") {
  const auto sample = weigh_points(enumerate_domain(3));
  const Matrix table = testing::table_from(3, 1, [](const auto& b) { return std::vector<double>{b[2] ? 0.8 : 0.2}; });
  const Matrix targets = targets_for(sample.points, table);
  const std::vector<std::size_t> classes{0};
  const auto fit = fit_limetree(sample, targets, classes, 0.99, 3);
  const double unhalved = reference_loss(targets, fit.tree.predict_all(sample.points), sample.weights, false);
  CHECK(fit.report.final_loss == doctest::Approx(unhalved));
  CHECK(1.0 - unhalved >= 0.99);
}

TEST_CASE("JSON round trip preserves the tree") {
  std::mt19937_64 rng(4);
  const auto sample = weigh_points(enumerate_domain(5));
  const Matrix targets = random_simplex_table(sample.size(), 3, rng);
  const auto fit = fit_limetree(sample, targets, std::vector<std::size_t>{4, 1, 7}, 0.99, 5);
  const auto json = fit.tree.to_json();
  const auto back = SurrogateTree::from_json(nlohmann::json::parse(json.dump()));
  CHECK(back.to_json() == json);
  CHECK(back.classes() == std::vector<std::size_t>{4, 1, 7});
  CHECK(back.structure_signature() == fit.tree.structure_signature());
  CHECK(back.predict_all(sample.points) == fit.tree.predict_all(sample.points));
  CHECK(back.meta().variant == TreeVariant::greedy);
  CHECK(parse_tree_variant(to_string(TreeVariant::relabeled)) == TreeVariant::relabeled);

  auto broken = json;
  broken["nodes"][0]["left"] = 999;
  CHECK_THROWS_AS(SurrogateTree::from_json(broken), Error);
}

TEST_CASE("fit_tree input validation") {
  const auto points = testing::all_points(2);
  CHECK_THROWS_AS(fit_tree(points, Matrix(3, 2), ones(4), 1), Error);
  CHECK_THROWS_AS(fit_tree(points, Matrix(4, 2), ones(3), 1), Error);
  CHECK_THROWS_AS(fit_tree(points, Matrix(4, 2), std::vector<double>{1, -1, 1, 1}, 1), Error);
}
