#include "limetree/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "limetree/error.hpp"
#include "limetree/fidelity.hpp"
#include "limetree/lime_baseline.hpp"
#include "limetree/random.hpp"
#include "limetree/surrogate_tree.hpp"

namespace limetree {

void ExperimentConfig::validate(bool needs_enumeration) const {
  require(trials >= 1, "trial count must be at least 1");
  require(d >= 1, "d must be at least 1");
  require(class_count >= 2, "black boxes need at least 2 classes");
  require(top >= 1 && top <= class_count, "top must lie in 1..class_count");
  require(kernel_width > 0.0, "kernel width must be positive");
  require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0, 1]");
  require(alpha >= 0.0, "alpha must be non-negative");
  require(d <= kDefaultEnumerationCap, "complete trees need d within the enumeration cap of " +
                                           std::to_string(kDefaultEnumerationCap));
  if (needs_enumeration)
    require((std::uint64_t{1} << d) <= enumeration_budget, "depth sweeps need 2^d within the enumeration budget");
  if (family == SyntheticKind::xor_pair) require(d >= 2, "the xor-pair family needs d >= 2");
  if (family == SyntheticKind::boolean_table) require(d <= 16, "the boolean-table family supports d <= 16");
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::pair<double, double> mean_stderr(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double n = static_cast<double>(values.size());
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

TrialSetup make_trial(const ExperimentConfig& config, std::uint64_t trial_seed) {
  // 4x4 pixel cells with seeded colours kept away from the black fill so the
  // occlusion mapping stays injective.
  SeededRandom rng(mix_seed(trial_seed, 0xA11CE));
  const std::size_t cell = 4;
  RgbImage anchor(cell * config.d, cell);
  for (std::size_t s = 0; s < config.d; ++s) {
    const Rgb colour{static_cast<std::uint8_t>(32 + rng.below(224)), static_cast<std::uint8_t>(32 + rng.below(224)),
                     static_cast<std::uint8_t>(32 + rng.below(224))};
    for (std::size_t y = 0; y < cell; ++y)
      for (std::size_t x = 0; x < cell; ++x) anchor.set_pixel(y * anchor.width() + s * cell + x, colour);
  }
  auto seg = build_grid_segmentation(anchor.width(), anchor.height(), 1, config.d);
  TrialSetup setup{InterpretableDomain::image(std::move(anchor), std::move(seg), OcclusionStrategy::solid()), nullptr,
                   {}};
  SyntheticSpec spec;
  spec.kind = config.family;
  spec.d = config.d;
  spec.class_count = config.class_count;
  spec.seed = mix_seed(trial_seed, 0xB1ACB0);
  setup.black_box = make_synthetic(spec, setup.domain);
  setup.classes = top_classes(*setup.black_box, setup.domain, config.top);
  return setup;
}

namespace {

std::string class_scope(std::size_t k) { return "class" + std::to_string(k); }
std::string top_scope(std::size_t n) { return "top" + std::to_string(n); }

Matrix first_columns(const Matrix& m, std::size_t n) {
  std::vector<std::size_t> cols(n);
  for (std::size_t i = 0; i < n; ++i) cols[i] = i;
  return m.select_columns(cols);
}

// Both metrics over the full enumeration for one method: per-class LIME loss
// from the `per_class` predictions and top-n LIMEtree loss from `per_scope[n-1]`.
void record(TrialResult& out, const std::string& method, const WeightedSample& eval, const Matrix& truth,
            const Matrix& per_class, const std::vector<Matrix>& per_scope) {
  for (std::size_t k = 0; k < per_class.cols(); ++k) {
    const auto f = truth.column(k);
    const auto g = per_class.column(k);
    out.values[{method, "lime_loss", class_scope(k + 1)}] = loss_lime(f, g, eval.weights);
  }
  for (std::size_t n = 1; n <= per_scope.size(); ++n)
    out.values[{method, "limetree_loss", top_scope(n)}] =
        loss_limetree(first_columns(truth, n), per_scope[n - 1], eval.weights, n > 1);
}

}  // namespace

TrialResult run_fidelity_trial(const ExperimentConfig& config, std::uint64_t trial_seed) {
  const TrialSetup setup = make_trial(config, trial_seed);
  const std::size_t d = config.d;
  const std::size_t top = setup.classes.size();

  SamplingOptions options;
  options.samples = config.samples;
  options.seed = mix_seed(trial_seed, 0x5A3B1E);
  options.kernel_width = config.kernel_width;
  options.enumeration_budget = config.enumeration_budget;
  const WeightedSample train = build_sample(d, options);
  const WeightedSample eval = weigh_points(enumerate_domain(d), config.kernel_width);

  const Matrix truth = predict_points(*setup.black_box, setup.domain, eval.points, setup.classes);
  const Matrix train_targets =
      train.enumerated ? truth : predict_points(*setup.black_box, setup.domain, train.points, setup.classes);

  TrialResult result;
  result.seed = trial_seed;

  const LimeExplanation lime = lime_explain(train, train_targets, setup.classes, config.alpha);
  const Matrix lime_rows = lime.predict_all(eval.points);
  std::vector<Matrix> lime_scopes;
  for (std::size_t n = 1; n <= top; ++n) lime_scopes.push_back(first_columns(lime_rows, n));
  record(result, kMethodLime, eval, truth, lime_rows, lime_scopes);

  std::vector<Matrix> limet_scopes, relabeled_scopes, complete_scopes;
  for (std::size_t n = 1; n <= top; ++n) {
    const std::vector<std::size_t> classes(setup.classes.begin(), setup.classes.begin() + n);
    const LimetreeFit fit = fit_limetree(train, first_columns(train_targets, n), classes, config.epsilon, d);
    const SurrogateTree relabeled = relabel_leaves(fit.tree, *setup.black_box, setup.domain);
    const SurrogateTree complete = fit_complete(d, first_columns(truth, n), classes, setup.domain.bijective());
    limet_scopes.push_back(fit.tree.predict_all(eval.points));
    relabeled_scopes.push_back(relabeled.predict_all(eval.points));
    complete_scopes.push_back(complete.predict_all(eval.points));
    if (n == top) result.limet_depth = fit.tree.depth();
  }
  record(result, kMethodLimet, eval, truth, limet_scopes.back(), limet_scopes);
  record(result, kMethodRelabeled, eval, truth, relabeled_scopes.back(), relabeled_scopes);
  record(result, kMethodComplete, eval, truth, complete_scopes.back(), complete_scopes);
  return result;
}

namespace {

const std::vector<std::string>& method_order() {
  static const std::vector<std::string> order{kMethodLime, kMethodLimet, kMethodRelabeled, kMethodComplete};
  return order;
}

std::vector<std::pair<std::string, std::string>> metric_order(std::size_t top) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t k = 1; k <= top; ++k) out.emplace_back("lime_loss", class_scope(k));
  for (std::size_t n = 1; n <= top; ++n) out.emplace_back("limetree_loss", top_scope(n));
  return out;
}

std::string format_number(double value) { return fmt::format("{:.10g}", value); }

}  // namespace

FidelityTable run_fidelity_experiment(const ExperimentConfig& config) {
  config.validate(false);
  FidelityTable table;
  table.trials.resize(config.trials);
  parallel_for(config.trials, config.threads,
               [&](std::size_t t) { table.trials[t] = run_fidelity_trial(config, mix_seed(config.seed, t)); });
  for (const auto& method : method_order())
    for (const auto& [metric, scope] : metric_order(config.top)) {
      std::vector<double> values;
      for (const auto& trial : table.trials) values.push_back(trial.values.at({method, metric, scope}));
      const auto [mean, se] = mean_stderr(values);
      table.rows.push_back({method, metric, scope, mean, se, config.trials, config.d});
    }
  return table;
}

void FidelityTable::write_csv(std::ostream& out) const {
  out << "method,metric,class_scope,mean,stderr,trials,d\n";
  for (const auto& r : rows)
    out << fmt::format("{},{},{},{},{},{},{}\n", r.method, r.metric, r.class_scope, format_number(r.mean),
                       format_number(r.stderr_), r.trials, r.d);
}

DepthSweepTable run_depth_sweep(const ExperimentConfig& config) {
  config.validate(true);
  const std::size_t d = config.d;
  DepthSweepTable table;
  table.trials.resize(config.trials);
  parallel_for(config.trials, config.threads, [&](std::size_t t) {
    const std::uint64_t trial_seed = mix_seed(config.seed, t);
    const TrialSetup setup = make_trial(config, trial_seed);
    const std::size_t top = setup.classes.size();
    const WeightedSample eval = weigh_points(enumerate_domain(d), config.kernel_width);
    const Matrix truth = predict_points(*setup.black_box, setup.domain, eval.points, setup.classes);

    SweepTrial trial;
    trial.seed = trial_seed;
    auto curve = [&](const std::string& method, const std::string& metric, const std::string& scope) -> SweepCurve& {
      for (auto& c : trial.curves)
        if (c.method == method && c.metric == metric && c.class_scope == scope) return c;
      trial.curves.push_back({method, metric, scope, {}, {}});
      return trial.curves.back();
    };
    auto add_point = [&](const std::string& method, double ratio, const Matrix& per_class,
                         const std::vector<Matrix>& per_scope) {
      TrialResult tmp;
      record(tmp, method, eval, truth, per_class, per_scope);
      for (const auto& [key, value] : tmp.values) {
        auto& c = curve(std::get<0>(key), std::get<1>(key), std::get<2>(key));
        c.depth_ratio.push_back(ratio);
        c.loss.push_back(value);
      }
    };

    const LimeExplanation lime = lime_explain(eval, truth, setup.classes, config.alpha);
    const Matrix lime_rows = lime.predict_all(eval.points);
    std::vector<Matrix> lime_scopes;
    for (std::size_t n = 1; n <= top; ++n) lime_scopes.push_back(first_columns(lime_rows, n));

    // Minimal-point targets are shared across depths through a per-point cache.
    std::map<InterpretablePoint, std::size_t> index_of;
    for (std::size_t i = 0; i < eval.points.size(); ++i) index_of[eval.points[i]] = i;

    for (std::size_t bound = 1; bound <= d; ++bound) {
      const double ratio = static_cast<double>(bound) / static_cast<double>(d);
      add_point(kMethodLime, ratio, lime_rows, lime_scopes);
      std::vector<Matrix> limet_scopes, relabeled_scopes;
      for (std::size_t n = 1; n <= top; ++n) {
        const std::vector<std::size_t> classes(setup.classes.begin(), setup.classes.begin() + n);
        const Matrix targets = first_columns(truth, n);
        const SurrogateTree tree = fit_tree(eval.points, targets, eval.weights, bound, classes);
        const MinimalSet minimal = minimal_set(tree);
        Matrix minimal_targets(minimal.size(), n);
        std::size_t row = 0;
        for (const auto& entry : minimal) {
          const auto src = targets.row(index_of.at(entry.second));
          std::copy(src.begin(), src.end(), minimal_targets.row(row++).begin());
        }
        const SurrogateTree relabeled = relabel_leaves(tree, minimal_targets, setup.domain.bijective());
        limet_scopes.push_back(tree.predict_all(eval.points));
        relabeled_scopes.push_back(relabeled.predict_all(eval.points));
      }
      add_point(kMethodLimet, ratio, limet_scopes.back(), limet_scopes);
      add_point(kMethodRelabeled, ratio, relabeled_scopes.back(), relabeled_scopes);
    }
    std::vector<Matrix> complete_scopes;
    for (std::size_t n = 1; n <= top; ++n) {
      const std::vector<std::size_t> classes(setup.classes.begin(), setup.classes.begin() + n);
      complete_scopes.push_back(
          fit_complete(d, first_columns(truth, n), classes, setup.domain.bijective()).predict_all(eval.points));
    }
    add_point(kMethodComplete, 1.0, complete_scopes.back(), complete_scopes);
    table.trials[t] = std::move(trial);
  });

  for (const auto& method : method_order())
    for (const auto& [metric, scope] : metric_order(config.top)) {
      const std::size_t points = method == kMethodComplete ? 1 : d;
      for (std::size_t i = 0; i < points; ++i) {
        std::vector<double> values;
        double ratio = 0.0;
        for (const auto& trial : table.trials)
          for (const auto& c : trial.curves)
            if (c.method == method && c.metric == metric && c.class_scope == scope) {
              values.push_back(c.loss[i]);
              ratio = c.depth_ratio[i];
            }
        const auto [mean, se] = mean_stderr(values);
        table.rows.push_back({method, metric, scope, mean, se, config.trials, d, ratio});
      }
    }
  return table;
}

void DepthSweepTable::write_csv(std::ostream& out) const {
  out << "method,metric,class_scope,depth_ratio,mean,stderr,trials,d\n";
  for (const auto& r : rows)
    out << fmt::format("{},{},{},{},{},{},{},{}\n", r.method, r.metric, r.class_scope, format_number(r.depth_ratio),
                       format_number(r.mean), format_number(r.stderr_), r.trials, r.d);
}

}  // namespace limetree
