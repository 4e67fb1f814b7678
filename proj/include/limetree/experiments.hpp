#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "limetree/blackbox.hpp"
#include "limetree/interpretable_domain.hpp"
#include "limetree/sampling.hpp"

namespace limetree {

struct ExperimentConfig {
  SyntheticKind family = SyntheticKind::segment_logit;
  std::size_t trials = 100;
  std::size_t d = 8;
  std::size_t top = 3;           // classes explained (top-n of f(anchor))
  std::size_t class_count = 10;  // classes of each synthetic black box
  std::uint64_t seed = 42;
  double kernel_width = kDefaultKernelWidth;
  double epsilon = 0.99;
  std::size_t samples = 1000;    // used only when 2^d exceeds the enumeration budget
  std::size_t enumeration_budget = kDefaultEnumerationBudget;
  double alpha = 1.0;
  std::size_t threads = 0;       // 0: hardware concurrency

  void validate(bool needs_enumeration) const;
};

inline const char* const kMethodLime = "lime";
inline const char* const kMethodLimet = "limet";
inline const char* const kMethodRelabeled = "limet-relabeled";
inline const char* const kMethodComplete = "limet-complete";

/// (method, metric, class_scope), e.g. ("limet", "limetree_loss", "top2").
using MetricKey = std::tuple<std::string, std::string, std::string>;

struct TrialResult {
  std::uint64_t seed = 0;
  std::map<MetricKey, double> values;
  std::size_t limet_depth = 0;  // depth of the top-n LIMEt tree
};

/// One synthetic explanation problem: an image domain on a 1 x d grid with a
/// seeded anchor, its synthetic black box and the explained classes.
struct TrialSetup {
  InterpretableDomain domain;
  BlackBoxPtr black_box;
  std::vector<std::size_t> classes;
};

TrialSetup make_trial(const ExperimentConfig& config, std::uint64_t trial_seed);

TrialResult run_fidelity_trial(const ExperimentConfig& config, std::uint64_t trial_seed);

struct SummaryRow {
  std::string method, metric, class_scope;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t trials = 0;
  std::size_t d = 0;
  double depth_ratio = -1.0;  // depth sweeps only
};

struct FidelityTable {
  std::vector<TrialResult> trials;
  std::vector<SummaryRow> rows;

  void write_csv(std::ostream& out) const;
};

FidelityTable run_fidelity_experiment(const ExperimentConfig& config);

struct SweepCurve {
  std::string method, metric, class_scope;
  std::vector<double> depth_ratio;
  std::vector<double> loss;
};

struct SweepTrial {
  std::uint64_t seed = 0;
  std::vector<SweepCurve> curves;
};

struct DepthSweepTable {
  std::vector<SweepTrial> trials;
  std::vector<SummaryRow> rows;

  void write_csv(std::ostream& out) const;
};

/// Trains on the full enumeration at every depth bound 1..d.
DepthSweepTable run_depth_sweep(const ExperimentConfig& config);

/// Mean and standard error (0 for a single value).
std::pair<double, double> mean_stderr(const std::vector<double>& values);

/// Runs `body(i)` for i in [0, count) on a pool of `threads` workers.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace limetree
