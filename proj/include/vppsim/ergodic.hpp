#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vppsim/ensemble.hpp"
#include "vppsim/rational.hpp"
#include "vppsim/simloop.hpp"

namespace vppsim {

class EmptyWindowError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EmptySampleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DegeneratePairError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Mean of series[burn_in..]. Throws EmptyWindowError when burn_in >= size.
double time_average(std::span<const double> series, std::size_t burn_in);

// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
// Throws EmptySampleError if either sample is empty.
double ks_distance(std::span<const double> a, std::span<const double> b);

// One experimental arm: a config and the traces it produced.
struct Arm {
  std::optional<SimConfig> config;
  std::vector<SimulationTrace> traces;
};

// Throws ConfigMismatchError unless a and b agree on everything except the
// initial controller state and the initial commitment.
void require_same_except_initial_state(const SimConfig& a, const SimConfig& b);

struct SeriesGap {
  std::string series;
  double mean_a = 0.0;  // mean over runs of per-run tail time-averages
  double mean_b = 0.0;
  double gap = 0.0;      // |mean_a - mean_b|
  double std_err = 0.0;  // sqrt(var_a/n_a + var_b/n_b) of the per-run tail averages
};

struct PredictabilityReport {
  std::vector<SeriesGap> gaps;  // pi, e, p, p_hat, xc
  double ks_pi = 0.0;           // pooled tail samples of pi

  const SeriesGap& gap_of(const std::string& series) const;
};

// Compares two arms run by run. When both arms carry configs they must differ
// only in initial state; runs are paired by run id (shared noise seeds).
PredictabilityReport predictability_gap(const Arm& a, const Arm& b, std::size_t burn_in);

struct GroupFairness {
  std::string group;
  std::size_t agents = 0;
  double max_gap = 0.0;  // max_{i,j in group} |rbar_i - rbar_j|
  // Root-mean-square over the group of the cross-run standard deviation of
  // the per-run time average of y_i (the per-agent estimator of rbar_i).
  double sigma = 0.0;
};

struct CrossGroupGap {
  std::string group_a;
  std::string group_b;
  double gap = 0.0;  // |mean rbar over a - mean rbar over b|
};

struct FairnessReport {
  std::vector<double> agent_mean;   // rbar_i averaged over runs
  std::vector<double> agent_sigma;  // cross-run std of the per-run rbar_i
  std::vector<GroupFairness> groups;
  std::vector<CrossGroupGap> cross;
};

// grouping[i] names agent i's group. Per-run averages come from the stored
// tail means when the trace burn-in matches, otherwise from unthinned
// per-agent series; anything else is rejected.
FairnessReport fairness_gap(std::span<const SimulationTrace> traces, std::span<const std::string> grouping,
                            std::size_t burn_in);

// Group statistics from per-agent estimates (agent_mean, agent_sigma).
FairnessReport fairness_from_estimates(std::vector<double> agent_mean, std::vector<double> agent_sigma,
                                       std::span<const std::string> grouping);

struct ContractionEstimate {
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
  std::size_t samples = 0;  // evaluated (pair, pi) points
  std::size_t skipped = 0;  // degenerate pairs (x == x_hat)
  double margin = 0.0;
  bool certified = false;  // max_ratio < 1 - margin
};

// Draws the index-th state pair.
using PairSampler = std::function<std::pair<IfsState, IfsState>(const RngStream& rng, std::uint64_t index)>;

// Evaluates sum_m p_m(x, pi) ||F_m(x) - F_m(x_hat)|| / ||x - x_hat|| (Euclidean
// norm) for `samples` pairs and every pi in pi_grid. Throws
// DegeneratePairError if every pair is degenerate.
ContractionEstimate estimate_average_contraction(const Ifs& sys, std::span<const double> pi_grid,
                                                 const PairSampler& sampler, std::size_t samples,
                                                 const RngStream& rng = {}, double margin = 1e-9);

// Uniform pairs in the box [lo, hi]^dim.
PairSampler box_pair_sampler(std::size_t dim, double lo, double hi);

// coeff * basis, where basis "" means 1 and any other tag names an
// irrational number. Distinct tags are taken to be rationally independent.
struct SymbolicReal {
  Rational coeff;
  std::string basis;

  bool operator==(const SymbolicReal&) const = default;
};

struct DiscreteGroupResult {
  bool discrete = false;
  std::optional<SymbolicReal> generator;  // nonnegative; set when discrete
};

// Additive group generated by {r - y : y in output_values}: always discrete,
// generated by the gcd of the differences (0 for the trivial group).
DiscreteGroupResult discrete_group_check(std::span<const Rational> output_values, const Rational& r);

// Group generated by symbolic reals: discrete iff all nonzero generators share
// one basis; the generator is then gcd(coefficients) * basis.
DiscreteGroupResult discrete_group_check(std::span<const SymbolicReal> generators);

struct ReportRow {
  std::string metric;
  double value = 0.0;
  std::optional<double> threshold;
  std::string verdict;  // "pass", "fail" or "info"
};

// Predictability, fairness and the combined unique-ergodicity verdict for one
// pair of arms, using thresholds t.
std::vector<ReportRow> ergodicity_report(const Arm& a, const Arm& b, std::size_t burn_in,
                                         std::span<const std::string> grouping, const Thresholds& t);

// CSV with header metric,value,threshold,verdict.
std::string format_report_csv(std::span<const ReportRow> rows);

}  // namespace vppsim
