#include "vppsim/ergodic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "vppsim/config.hpp"
#include "vppsim/numfmt.hpp"

namespace vppsim {

double time_average(std::span<const double> series, std::size_t burn_in) {
  if (burn_in >= series.size())
    throw EmptyWindowError("time_average: burn-in " + std::to_string(burn_in) + " leaves no samples of " +
                           std::to_string(series.size()));
  double s = 0.0;
  for (std::size_t i = burn_in; i < series.size(); ++i) s += series[i];
  return s / static_cast<double>(series.size() - burn_in);
}

double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw EmptySampleError("ks_distance: empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    // Step past every copy of v in both samples before comparing the CDFs.
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

void require_same_except_initial_state(const SimConfig& a, const SimConfig& b) {
  SimConfig x = a;
  SimConfig y = b;
  y.xc0 = x.xc0;
  y.initial_commitment = x.initial_commitment;
  const std::string sx = serialize_sim_config(x);
  const std::string sy = serialize_sim_config(y);
  if (sx == sy) return;
  std::istringstream ix(sx), iy(sy);
  std::string lx, ly;
  while (std::getline(ix, lx) && std::getline(iy, ly)) {
    if (lx != ly) throw ConfigMismatchError("arms differ beyond initial state: '" + lx + "' vs '" + ly + "'");
  }
  throw ConfigMismatchError("arms differ beyond initial state");
}

namespace {

const std::vector<double>& series_of(const SimulationTrace& t, const std::string& name) {
  if (name == "pi") return t.pi;
  if (name == "e") return t.e;
  if (name == "p") return t.p;
  if (name == "p_hat") return t.p_hat;
  if (name == "xc") return t.xc;
  if (name == "losses") return t.losses;
  throw std::invalid_argument("unknown series '" + name + "'");
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // sample variance, 0 for a single value
  std::size_t n = 0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  m.n = v.size();
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(m.n);
  if (m.n > 1) {
    for (double x : v) m.var += (x - m.mean) * (x - m.mean);
    m.var /= static_cast<double>(m.n - 1);
  }
  return m;
}

std::vector<double> per_run_tail(const std::vector<SimulationTrace>& traces, const std::string& name,
                                 std::size_t burn_in) {
  std::vector<double> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back(time_average(series_of(t, name), burn_in));
  return out;
}

}  // namespace

const SeriesGap& PredictabilityReport::gap_of(const std::string& series) const {
  for (const auto& g : gaps)
    if (g.series == series) return g;
  throw std::out_of_range("no gap for series '" + series + "'");
}

PredictabilityReport predictability_gap(const Arm& a, const Arm& b, std::size_t burn_in) {
  if (a.traces.empty() || b.traces.empty()) throw EmptySampleError("predictability_gap: an arm has no traces");
  if (a.config && b.config) require_same_except_initial_state(*a.config, *b.config);

  PredictabilityReport rep;
  for (const std::string name : {"pi", "e", "p", "p_hat", "xc"}) {
    const Moments ma = moments(per_run_tail(a.traces, name, burn_in));
    const Moments mb = moments(per_run_tail(b.traces, name, burn_in));
    SeriesGap g;
    g.series = name;
    g.mean_a = ma.mean;
    g.mean_b = mb.mean;
    g.gap = std::abs(ma.mean - mb.mean);
    g.std_err = std::sqrt(ma.var / static_cast<double>(ma.n) + mb.var / static_cast<double>(mb.n));
    rep.gaps.push_back(g);
  }

  std::vector<double> pool_a, pool_b;
  for (const auto& t : a.traces) pool_a.insert(pool_a.end(), t.pi.begin() + static_cast<std::ptrdiff_t>(burn_in), t.pi.end());
  for (const auto& t : b.traces) pool_b.insert(pool_b.end(), t.pi.begin() + static_cast<std::ptrdiff_t>(burn_in), t.pi.end());
  rep.ks_pi = ks_distance(pool_a, pool_b);
  return rep;
}

FairnessReport fairness_gap(std::span<const SimulationTrace> traces, std::span<const std::string> grouping,
                            std::size_t burn_in) {
  if (traces.empty()) throw EmptySampleError("fairness_gap: no traces");
  const std::size_t n_agents = grouping.size();

  // rbar[run][agent]
  std::vector<std::vector<double>> rbar;
  for (const auto& t : traces) {
    if (t.agent_tail_mean.size() != n_agents)
      throw std::invalid_argument("fairness_gap: grouping has " + std::to_string(n_agents) + " agents, trace has " +
                                  std::to_string(t.agent_tail_mean.size()));
    if (t.burn_in == burn_in) {
      rbar.push_back(t.agent_tail_mean);
    } else if (t.agent_thin == 1 && !t.agent_output.empty()) {
      if (burn_in >= t.agent_output.size()) throw EmptyWindowError("fairness_gap: burn-in leaves no samples");
      std::vector<double> avg(n_agents, 0.0);
      for (std::size_t j = burn_in; j < t.agent_output.size(); ++j)
        for (std::size_t i = 0; i < n_agents; ++i) avg[i] += t.agent_output[j][i];
      for (double& v : avg) v /= static_cast<double>(t.agent_output.size() - burn_in);
      rbar.push_back(std::move(avg));
    } else {
      throw std::invalid_argument("fairness_gap: traces were recorded with burn-in " + std::to_string(t.burn_in) +
                                  " and no unthinned per-agent series");
    }
  }

  std::vector<double> mean(n_agents, 0.0);
  std::vector<double> sigma(n_agents, 0.0);
  std::vector<double> column(traces.size());
  for (std::size_t i = 0; i < n_agents; ++i) {
    for (std::size_t r = 0; r < rbar.size(); ++r) column[r] = rbar[r][i];
    const Moments m = moments(column);
    mean[i] = m.mean;
    sigma[i] = std::sqrt(m.var);
  }
  return fairness_from_estimates(std::move(mean), std::move(sigma), grouping);
}

FairnessReport fairness_from_estimates(std::vector<double> agent_mean, std::vector<double> agent_sigma,
                                       std::span<const std::string> grouping) {
  const std::size_t n_agents = grouping.size();
  if (agent_mean.size() != n_agents || agent_sigma.size() != n_agents)
    throw std::invalid_argument("fairness: estimates and grouping have different lengths");
  FairnessReport rep;
  rep.agent_mean = std::move(agent_mean);
  rep.agent_sigma = std::move(agent_sigma);

  std::vector<std::string> names;
  for (const auto& g : grouping)
    if (std::find(names.begin(), names.end(), g) == names.end()) names.push_back(g);

  std::vector<double> group_mean;
  for (const auto& name : names) {
    GroupFairness gf;
    gf.group = name;
    double lo = 0.0, hi = 0.0, sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n_agents; ++i) {
      if (grouping[i] != name) continue;
      const double v = rep.agent_mean[i];
      if (gf.agents == 0) lo = hi = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
      sq += rep.agent_sigma[i] * rep.agent_sigma[i];
      ++gf.agents;
    }
    gf.max_gap = hi - lo;
    gf.sigma = std::sqrt(sq / static_cast<double>(gf.agents));
    group_mean.push_back(sum / static_cast<double>(gf.agents));
    rep.groups.push_back(gf);
  }
  for (std::size_t g = 0; g < names.size(); ++g)
    for (std::size_t h = g + 1; h < names.size(); ++h)
      rep.cross.push_back({names[g], names[h], std::abs(group_mean[g] - group_mean[h])});
  return rep;
}

ContractionEstimate estimate_average_contraction(const Ifs& sys, std::span<const double> pi_grid,
                                                 const PairSampler& sampler, std::size_t samples,
                                                 const RngStream& rng, double margin) {
  if (samples < 1) throw std::invalid_argument("estimate_average_contraction: samples must be >= 1");
  if (pi_grid.empty()) throw std::invalid_argument("estimate_average_contraction: empty pi grid");
  if (sys.maps.size() != sys.probs.size() || sys.maps.empty())
    throw std::invalid_argument("estimate_average_contraction: maps and probabilities must be non-empty and paired");

  auto dist = [](const IfsState& u, const IfsState& v) {
    if (u.size() != v.size()) throw std::invalid_argument("estimate_average_contraction: state dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - v[i]) * (u[i] - v[i]);
    return std::sqrt(s);
  };

  ContractionEstimate est;
  est.margin = margin;
  double total = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto [x, xh] = sampler(rng, s);
    const double d = dist(x, xh);
    if (d == 0.0) {
      ++est.skipped;
      continue;
    }
    std::vector<double> stretch(sys.maps.size());
    for (std::size_t m = 0; m < sys.maps.size(); ++m) stretch[m] = dist(sys.maps[m](x), sys.maps[m](xh)) / d;
    for (double pi : pi_grid) {
      double ratio = 0.0;
      for (std::size_t m = 0; m < sys.maps.size(); ++m) ratio += sys.probs[m](x, pi) * stretch[m];
      est.max_ratio = est.samples == 0 ? ratio : std::max(est.max_ratio, ratio);
      total += ratio;
      ++est.samples;
    }
  }
  if (est.samples == 0) throw DegeneratePairError("estimate_average_contraction: every sampled pair had x == x_hat");
  est.mean_ratio = total / static_cast<double>(est.samples);
  est.certified = est.max_ratio < 1.0 - margin;
  return est;
}

PairSampler box_pair_sampler(std::size_t dim, double lo, double hi) {
  return [dim, lo, hi](const RngStream& rng, std::uint64_t index) {
    std::pair<IfsState, IfsState> out{IfsState(dim), IfsState(dim)};
    for (std::size_t j = 0; j < dim; ++j) {
      const auto lane = static_cast<std::uint32_t>(2 * j);
      out.first[j] = lo + (hi - lo) * rng.uniform(index, lane);
      out.second[j] = lo + (hi - lo) * rng.uniform(index, lane + 1);
    }
    return out;
  };
}

DiscreteGroupResult discrete_group_check(std::span<const Rational> output_values, const Rational& r) {
  Rational g(0);
  for (const auto& y : output_values) g = gcd(g, r - y);
  return {true, SymbolicReal{g, ""}};
}

DiscreteGroupResult discrete_group_check(std::span<const SymbolicReal> generators) {
  std::optional<std::string> basis;
  Rational g(0);
  for (const auto& s : generators) {
    if (s.coeff.is_zero()) continue;
    if (basis && *basis != s.basis) return {false, std::nullopt};
    basis = s.basis;
    g = gcd(g, s.coeff);
  }
  return {true, SymbolicReal{g, basis.value_or("")}};
}

std::vector<ReportRow> ergodicity_report(const Arm& a, const Arm& b, std::size_t burn_in,
                                         std::span<const std::string> grouping, const Thresholds& t) {
  std::vector<ReportRow> rows;
  auto verdict = [](bool ok) { return std::string(ok ? "pass" : "fail"); };

  const PredictabilityReport pred = predictability_gap(a, b, burn_in);
  bool gap_ok = true;
  for (const auto& g : pred.gaps) {
    const double thr = t.gap_se_factor * g.std_err;
    const bool ok = g.gap <= thr;
    if (g.series == "pi") gap_ok = ok;
    rows.push_back({"tail_mean_a[" + g.series + "]", g.mean_a, std::nullopt, "info"});
    rows.push_back({"tail_mean_b[" + g.series + "]", g.mean_b, std::nullopt, "info"});
    rows.push_back({"tail_gap[" + g.series + "]", g.gap, thr, verdict(ok)});
  }
  const bool ks_ok = pred.ks_pi <= t.ks_max;
  rows.push_back({"ks_distance[pi]", pred.ks_pi, t.ks_max, verdict(ks_ok)});

  if (!grouping.empty()) {
    for (const auto* arm : {&a, &b}) {
      const std::string tag = arm == &a ? "a" : "b";
      const FairnessReport fr = fairness_gap(arm->traces, grouping, burn_in);
      for (const auto& g : fr.groups) {
        const double thr = t.fairness_sigma_factor * g.sigma;
        rows.push_back({"fairness_gap_" + tag + "[" + g.group + "]", g.max_gap, thr, verdict(g.max_gap <= thr)});
      }
      for (const auto& c : fr.cross)
        rows.push_back({"cross_group_gap_" + tag + "[" + c.group_a + "|" + c.group_b + "]", c.gap, std::nullopt, "info"});
    }
  }

  std::size_t nonconverged = 0;
  for (const auto* arm : {&a, &b})
    for (const auto& tr : arm->traces) nonconverged += tr.nonconverged_count;
  rows.push_back({"nonconverged_steps", static_cast<double>(nonconverged), std::nullopt, "info"});

  const bool unique = gap_ok && ks_ok;
  rows.push_back({"unique_ergodicity", unique ? 1.0 : 0.0, std::nullopt, verdict(unique)});
  return rows;
}

std::string format_report_csv(std::span<const ReportRow> rows) {
  std::string out = "metric,value,threshold,verdict\n";
  for (const auto& r : rows) {
    out += r.metric + "," + format_double(r.value) + "," + (r.threshold ? format_double(*r.threshold) : "") + "," +
           r.verdict + "\n";
  }
  return out;
}

}  // namespace vppsim
