#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "limetree/error.hpp"
#include "limetree/lime_baseline.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace limetree;

namespace {

struct Problem {
  std::vector<InterpretablePoint> points;
  std::vector<double> y, w;
};

Problem random_problem(std::mt19937_64& rng, std::size_t d, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Problem p;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint8_t> bits(d);
    for (auto& b : bits) b = rng() % 2;
    p.points.emplace_back(bits);
    p.y.push_back(u(rng));
    p.w.push_back(0.05 + u(rng));
  }
  return p;
}

}  // namespace

TEST_CASE("ridge recovers an exact linear function") {
  const auto points = testing::all_points(3);
  std::vector<double> y, w(8, 1.0);
  for (const auto& p : points) y.push_back(0.1 + 0.5 * p[0] - 0.2 * p[2]);
  const auto s = fit_ridge(points, y, w, 0.0);
  CHECK(s.intercept == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(s.coefficients[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(s.coefficients[1]) < 1e-12);
  CHECK(s.coefficients[2] == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(s.ranking() == std::vector<std::size_t>{0, 2, 1});
  CHECK(s.predict(InterpretablePoint::from_string("101")) == doctest::Approx(0.4));
}

TEST_CASE("penalty shrinks the coefficients") {
  const auto points = testing::all_points(3);
  std::vector<double> y, w(8, 1.0);
  for (const auto& p : points) y.push_back(p[1] ? 1.0 : 0.0);
  const double free_fit = fit_ridge(points, y, w, 0.0).coefficients[1];
  const double ridge = fit_ridge(points, y, w, 10.0).coefficients[1];
  CHECK(free_fit == doctest::Approx(1.0));
  // balanced design: centred columns are orthogonal with squared norm 2
  CHECK(ridge == doctest::Approx(2.0 / (2.0 + 10.0)).epsilon(1e-12));
}

TEST_CASE("alpha = 0 on a rank-deficient design is a degenerate fit") {
  const std::vector<InterpretablePoint> points{InterpretablePoint::from_string("11"),
                                               InterpretablePoint::from_string("00")};
  const std::vector<double> y{1.0, 0.0}, w{1.0, 1.0};
  try {
    fit_ridge(points, y, w, 0.0);
    FAIL("expected degenerate fit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate_fit);
  }
  CHECK_NOTHROW(fit_ridge(points, y, w, 1.0));
  CHECK_THROWS_AS(fit_ridge(points, y, w, -1.0), Error);
}

TEST_CASE("alpha = 0 matches the weighted normal equations") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 2 + rng() % 6;
    const auto p = random_problem(rng, d, 40 + rng() % 40);
    const auto oracle = testing::weighted_ridge(p.points, p.y, p.w, 0.0);
    if (!oracle) continue;
    const auto s = fit_ridge(p.points, p.y, p.w, 0.0);
    CHECK(std::abs(s.intercept - (*oracle)[0]) < 1e-9);
    for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(s.coefficients[j] - (*oracle)[j + 1]) < 1e-9);
  }
}

TEST_CASE("ridge solutions zero the gradient of the penalised objective") {
  std::mt19937_64 rng(202);
  for (double alpha : {0.1, 1.0, 10.0})
    for (int trial = 0; trial < 20; ++trial) {
      const auto p = random_problem(rng, 1 + rng() % 8, 10 + rng() % 50);
      const auto s = fit_ridge(p.points, p.y, p.w, alpha);
      CHECK(testing::ridge_residual(p.points, p.y, p.w, alpha, s.intercept, s.coefficients) < 1e-8);
    }
}

TEST_CASE("lime_explain fits one surrogate per class") {
  const auto domain = testing::strip_domain(4);
  const auto bb = testing::seeded_box(domain, SyntheticKind::segment_logit, 3, 4);
  const auto sample = build_sample(4);
  const std::vector<std::size_t> classes{2, 0};
  const auto lime = lime_explain(*bb, domain, sample, classes);
  REQUIRE(lime.surrogates.size() == 2);
  CHECK(lime.surrogates[0].class_index == 2);
  const Matrix targets = predict_points(*bb, domain, sample.points, classes);
  const auto direct = fit_ridge(sample.points, targets.column(1), sample.weights, 1.0, 0);
  CHECK(lime.surrogates[1].coefficients == direct.coefficients);
  const Matrix pred = lime.predict_all(sample.points);
  CHECK(pred(3, 1) == doctest::Approx(direct.predict(sample.points[3])));
  const auto json = lime.to_json();
  CHECK(json.at("kind") == "lime");
  CHECK(json.at("surrogates")[0].at("class") == 2);
  CHECK(json.at("surrogates")[0].at("ranking").size() == 4);
}
