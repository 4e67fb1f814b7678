#include "limetree/lime_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "limetree/error.hpp"

namespace limetree {

double LinearSurrogate::predict(const InterpretablePoint& point) const {
  require(point.size() == coefficients.size(), "point length does not match the surrogate");
  double value = intercept;
  for (std::size_t i = 0; i < coefficients.size(); ++i)
    if (point[i]) value += coefficients[i];
  return value;
}

std::vector<std::size_t> LinearSurrogate::ranking() const {
  std::vector<std::size_t> order(coefficients.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(coefficients[a]) > std::abs(coefficients[b]); });
  return order;
}

nlohmann::json LinearSurrogate::to_json() const {
  return {{"class", class_index}, {"alpha", alpha}, {"intercept", intercept}, {"coefficients", coefficients}};
}

LinearSurrogate fit_ridge(std::span<const InterpretablePoint> points, std::span<const double> targets,
                          std::span<const double> weights, double alpha, std::size_t class_index) {
  require(!points.empty(), "cannot fit a surrogate to an empty sample");
  require(targets.size() == points.size() && weights.size() == points.size(),
          "points, targets and weights must have equal lengths");
  require(alpha >= 0.0 && std::isfinite(alpha), "alpha must be finite and non-negative");
  const std::size_t n = points.size();
  const std::size_t d = points.front().size();

  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    require(points[i].size() == d, "sample points have inconsistent lengths");
    require(weights[i] >= 0.0, "weights must be non-negative");
    for (std::size_t j = 0; j < d; ++j) x(i, j) = points[i][j];
    y(i) = targets[i];
    w(i) = weights[i];
  }
  const double total = w.sum();
  require(total > 0.0, "weights must not all be zero");

  // Centre on the weighted means so the intercept drops out of the penalty.
  const Eigen::RowVectorXd x_mean = (w.transpose() * x) / total;
  const double y_mean = w.dot(y) / total;
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;
  Eigen::MatrixXd gram = xc.transpose() * w.asDiagonal() * xc;
  gram.diagonal().array() += alpha;
  const Eigen::VectorXd rhs = xc.transpose() * (w.asDiagonal() * yc);

  Eigen::VectorXd beta;
  if (alpha > 0.0) {
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) fail(ErrorCode::degenerate_fit, "ridge system is not positive definite");
    beta = llt.solve(rhs);
  } else {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(d))
      fail(ErrorCode::degenerate_fit, "weighted design is rank deficient (rank " + std::to_string(qr.rank()) +
                                          " of " + std::to_string(d) + "); use alpha > 0");
    beta = qr.solve(rhs);
  }

  LinearSurrogate s;
  s.class_index = class_index;
  s.alpha = alpha;
  s.intercept = y_mean - x_mean.dot(beta);
  s.coefficients.assign(beta.data(), beta.data() + d);
  return s;
}

Matrix LimeExplanation::predict_all(std::span<const InterpretablePoint> points) const {
  Matrix out(points.size(), surrogates.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t c = 0; c < surrogates.size(); ++c) out(i, c) = surrogates[c].predict(points[i]);
  return out;
}

nlohmann::json LimeExplanation::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& s : surrogates) {
    auto j = s.to_json();
    j["ranking"] = s.ranking();
    list.push_back(std::move(j));
  }
  return {{"kind", "lime"}, {"surrogates", list}};
}

LimeExplanation lime_explain(const WeightedSample& sample, const Matrix& targets, std::span<const std::size_t> classes,
                             double alpha) {
  require(!classes.empty(), "at least one class must be explained");
  require(targets.rows() == sample.size() && targets.cols() == classes.size(),
          "targets must have one row per sample point and one column per class");
  LimeExplanation out;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto column = targets.column(c);
    out.surrogates.push_back(fit_ridge(sample.points, column, sample.weights, alpha, classes[c]));
  }
  return out;
}

LimeExplanation lime_explain(const BlackBox& black_box, const InterpretableDomain& domain,
                             const WeightedSample& sample, std::span<const std::size_t> classes, double alpha) {
  require(!classes.empty(), "at least one class must be explained");
  const Matrix targets = predict_points(black_box, domain, sample.points, classes);
  return lime_explain(sample, targets, classes, alpha);
}

}  // namespace limetree
