#include "vppsim/simloop.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vppsim {

std::string_view to_string(ReferenceMode mode) {
  return mode == ReferenceMode::FixedR ? "fixed" : "r_plus_initial_losses";
}

ReferenceMode reference_mode_from_string(std::string_view name) {
  if (name == "fixed" || name == "fixed_r") return ReferenceMode::FixedR;
  if (name == "r_plus_initial_losses") return ReferenceMode::RPlusInitialLosses;
  throw ConfigError("reference.mode: unknown mode '" + std::string(name) +
                    "' (expected fixed or r_plus_initial_losses)");
}

Commitment parse_commitment_spec(const std::string& spec, std::size_t n) {
  if (spec == "all_off") return Commitment::all(n, false);
  if (spec == "all_on") return Commitment::all(n, true);
  Commitment out;
  std::istringstream in(spec);
  std::string tok;
  while (in >> tok) {
    const auto star = tok.find('*');
    if (star == std::string::npos) {
      for (char c : tok) {
        if (c != '0' && c != '1')
          throw ConfigError("simulation.initial_commitment: bad token '" + tok + "'");
        out.on.push_back(c == '1' ? 1 : 0);
      }
      continue;
    }
    const std::string bit = tok.substr(0, star);
    const std::string count = tok.substr(star + 1);
    std::size_t used = 0;
    long long reps = -1;
    try {
      reps = std::stoll(count, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if ((bit != "0" && bit != "1") || used != count.size() || reps < 0)
      throw ConfigError("simulation.initial_commitment: bad token '" + tok + "'");
    out.on.insert(out.on.end(), static_cast<std::size_t>(reps), bit == "1" ? 1 : 0);
  }
  if (out.size() != n)
    throw ConfigError("simulation.initial_commitment: " + std::to_string(out.size()) + " bits for " +
                      std::to_string(n) + " DERs");
  return out;
}

void SimConfig::validate() const {
  if (!network) throw ConfigError("case: no network loaded");
  if (network->der_count() == 0) throw ConfigError("case: network has no DER agents");
  if (!std::isfinite(r_base)) throw ConfigError("reference.r_base: must be finite");
  if (horizon < 1) throw ConfigError("simulation.horizon: must be >= 1");
  if (runs < 1) throw ConfigError("simulation.runs: must be >= 1");
  if (seed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
    throw ConfigError("simulation.seed: must be < 2^63");
  if (burn_in >= horizon) throw ConfigError("simulation.burn_in: must be < simulation.horizon");
  if (!(powerflow.tolerance > 0.0)) throw ConfigError("powerflow.tolerance: must be > 0");
  if (powerflow.max_iterations < 1) throw ConfigError("powerflow.max_iterations: must be >= 1");
  try {
    controller.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (static_cast<std::size_t>(xc0.size()) != controller.state_dim())
    throw ConfigError("controller.xc0: expected " + std::to_string(controller.state_dim()) + " entries");
  resolve_initial_commitment();
  if (!noise_lanes.empty() && noise_lanes.size() != network->der_count())
    throw ConfigError("simulation.noise_lanes: expected " + std::to_string(network->der_count()) + " entries");
}

Commitment SimConfig::resolve_initial_commitment() const {
  return parse_commitment_spec(initial_commitment, network ? network->der_count() : 0);
}

LoopContext make_loop_context(const Network& net, double r, const PowerFlowOptions& pf,
                              const std::vector<std::uint32_t>& noise_lanes) {
  LoopContext ctx;
  ctx.network = &net;
  ctx.agents = make_agents(net);
  if (!noise_lanes.empty()) {
    if (noise_lanes.size() != ctx.agents.size())
      throw ConfigError("simulation.noise_lanes: expected one lane per DER");
    for (std::size_t i = 0; i < ctx.agents.size(); ++i) ctx.agents[i].noise_lane = noise_lanes[i];
  }
  ctx.r = r;
  ctx.powerflow = pf;
  for (const auto& a : ctx.agents) {
    auto it = std::find(ctx.group_names.begin(), ctx.group_names.end(), a.group);
    if (it == ctx.group_names.end()) {
      ctx.group_names.push_back(a.group);
      ctx.agent_group.push_back(ctx.group_names.size() - 1);
    } else {
      ctx.agent_group.push_back(static_cast<std::size_t>(it - ctx.group_names.begin()));
    }
  }
  return ctx;
}

namespace {

std::vector<double> der_outputs(const LoopContext& ctx, const PowerFlowSolution& sol) {
  std::vector<double> out(ctx.agents.size());
  for (std::size_t i = 0; i < ctx.agents.size(); ++i) out[i] = sol.p_gen[ctx.agents[i].gen_index];
  return out;
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

StepResult step(const LoopContext& ctx, const LoopState& st, std::uint64_t k, const RngStream& rng,
                PowerFlowSolver& solver) {
  StepResult res;
  TraceRow& row = res.row;
  row.agent_output = st.agent_output;
  row.p = sum(st.agent_output);
  row.losses = st.losses;

  const FilterOutput f = filter_step(st.filter, row.p, st.losses);
  row.p_hat = f.p_hat;
  row.e = error_signal(ctx.r, row.p_hat);

  const ControllerOutput c = controller_step(st.controller, row.e);
  row.pi = c.pi;
  row.xc = c.next.xc[0];

  res.commitment = sample_commitment(ctx.agents, row.pi, rng, k);
  const PowerFlowSolution sol = solver.solve(res.commitment, ctx.powerflow);

  res.next.controller = c.next;
  res.next.filter = f.next;
  if (sol.converged) {
    res.next.agent_output = der_outputs(ctx, sol);
    res.next.losses = sol.losses;
  } else {
    row.nonconverged = true;
    res.next.agent_output = st.agent_output;
    res.next.losses = st.losses;
  }
  return res;
}

SimulationTrace run(const SimConfig& cfg, std::size_t run_id) {
  cfg.validate();
  const Network& net = *cfg.network;
  PowerFlowSolver solver(net);

  const Commitment u0 = cfg.resolve_initial_commitment();
  const PowerFlowSolution sol0 = solver.solve(u0, cfg.powerflow);
  if (!sol0.converged)
    throw std::runtime_error(std::string("initial power flow did not converge (") + to_string(sol0.status) + ")");

  SimulationTrace tr;
  tr.run_id = run_id;
  tr.seed = cfg.seed;
  tr.burn_in = cfg.burn_in;
  tr.losses0 = sol0.losses;
  tr.r = cfg.reference_mode == ReferenceMode::FixedR ? cfg.r_base : cfg.r_base + sol0.losses;

  LoopContext ctx = make_loop_context(net, tr.r, cfg.powerflow, cfg.noise_lanes);
  LoopState st;
  st.agent_output = der_outputs(ctx, sol0);
  st.losses = sol0.losses;
  tr.p0 = sum(st.agent_output);
  st.filter = FilterState::initial(tr.p0);
  st.controller = ControllerState::initial(cfg.controller, cfg.xc0);

  const std::size_t n = cfg.horizon;
  const std::size_t n_agents = ctx.agents.size();
  for (auto* v : {&tr.pi, &tr.e, &tr.p, &tr.p_hat, &tr.losses, &tr.xc}) v->reserve(n);
  tr.nonconverged.reserve(n);
  tr.group_names = ctx.group_names;
  tr.group_power.assign(ctx.group_names.size(), std::vector<double>(n, 0.0));
  tr.agent_mean.assign(n_agents, 0.0);
  tr.agent_tail_mean.assign(n_agents, 0.0);
  tr.agent_thin = cfg.agent_thin;

  const RngStream rng{cfg.seed, run_id};
  for (std::size_t j = 0; j < n; ++j) {
    StepResult s = step(ctx, st, j + 1, rng, solver);
    const TraceRow& row = s.row;
    tr.pi.push_back(row.pi);
    tr.e.push_back(row.e);
    tr.p.push_back(row.p);
    tr.p_hat.push_back(row.p_hat);
    tr.losses.push_back(row.losses);
    tr.xc.push_back(row.xc);
    tr.nonconverged.push_back(row.nonconverged ? 1 : 0);
    if (row.nonconverged) ++tr.nonconverged_count;
    for (std::size_t i = 0; i < n_agents; ++i) {
      const double y = row.agent_output[i];
      tr.group_power[ctx.agent_group[i]][j] += y;
      tr.agent_mean[i] += y;
      if (j >= cfg.burn_in) tr.agent_tail_mean[i] += y;
    }
    if (cfg.agent_thin > 0 && j % cfg.agent_thin == 0) tr.agent_output.push_back(row.agent_output);
    st = std::move(s.next);
  }
  for (std::size_t i = 0; i < n_agents; ++i) {
    tr.agent_mean[i] /= static_cast<double>(n);
    tr.agent_tail_mean[i] /= static_cast<double>(n - cfg.burn_in);
  }
  return tr;
}

const std::vector<double>& EnsembleStats::mean_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("no ensemble series '" + name + "'");
  return mean[static_cast<std::size_t>(it - names.begin())];
}

const std::vector<double>& EnsembleStats::std_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("no ensemble series '" + name + "'");
  return std[static_cast<std::size_t>(it - names.begin())];
}

EnsembleStats compute_stats(const std::vector<SimulationTrace>& traces) {
  EnsembleStats stats;
  stats.runs = traces.size();
  if (traces.empty()) return stats;

  std::vector<std::pair<std::string, std::function<const std::vector<double>&(const SimulationTrace&)>>> series = {
      {"pi", [](const SimulationTrace& t) -> const std::vector<double>& { return t.pi; }},
      {"e", [](const SimulationTrace& t) -> const std::vector<double>& { return t.e; }},
      {"p", [](const SimulationTrace& t) -> const std::vector<double>& { return t.p; }},
      {"p_hat", [](const SimulationTrace& t) -> const std::vector<double>& { return t.p_hat; }},
      {"losses", [](const SimulationTrace& t) -> const std::vector<double>& { return t.losses; }},
      {"xc", [](const SimulationTrace& t) -> const std::vector<double>& { return t.xc; }},
  };
  const auto& groups = traces.front().group_names;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    series.emplace_back("p_" + groups[g],
                        [g](const SimulationTrace& t) -> const std::vector<double>& { return t.group_power[g]; });
  }

  const std::size_t len = traces.front().length();
  for (const auto& t : traces) {
    if (t.length() != len || t.group_names != groups)
      throw std::invalid_argument("compute_stats: traces have different shapes");
  }
  const double n = static_cast<double>(traces.size());
  for (const auto& [name, get] : series) {
    std::vector<double> mean(len, 0.0);
    std::vector<double> sd(len, 0.0);
    for (const auto& t : traces) {
      const auto& v = get(t);
      for (std::size_t j = 0; j < len; ++j) mean[j] += v[j];
    }
    for (double& m : mean) m /= n;
    if (traces.size() > 1) {
      for (const auto& t : traces) {
        const auto& v = get(t);
        for (std::size_t j = 0; j < len; ++j) sd[j] += (v[j] - mean[j]) * (v[j] - mean[j]);
      }
      for (double& s : sd) s = std::sqrt(s / (n - 1.0));
    }
    stats.names.push_back(name);
    stats.mean.push_back(std::move(mean));
    stats.std.push_back(std::move(sd));
  }
  return stats;
}

namespace {

EnsembleResult collect(std::vector<SimulationTrace>& traces, std::vector<std::string>& errors) {
  EnsembleResult res;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (errors[i].empty())
      res.traces.push_back(std::move(traces[i]));
    else
      res.errors.push_back("run " + std::to_string(i) + ": " + errors[i]);
  }
  res.stats = compute_stats(res.traces);
  return res;
}

}  // namespace

EnsembleResult run_ensemble(const SimConfig& cfg, int threads) {
  cfg.validate();
  const auto n = static_cast<std::int64_t>(cfg.runs);
  std::vector<SimulationTrace> traces(cfg.runs);
  std::vector<std::string> errors(cfg.runs);
#ifdef _OPENMP
  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
#else
  (void)threads;
#endif
  for (std::int64_t i = 0; i < n; ++i) {
    const auto id = static_cast<std::size_t>(i);
    try {
      traces[id] = run(cfg, id);
    } catch (const std::exception& e) {
      errors[id] = e.what();
    }
  }
  return collect(traces, errors);
}

EnsembleResult run_ensemble_serial(const SimConfig& cfg) {
  cfg.validate();
  std::vector<SimulationTrace> traces(cfg.runs);
  std::vector<std::string> errors(cfg.runs);
  for (std::size_t i = 0; i < cfg.runs; ++i) {
    try {
      traces[i] = run(cfg, i);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  return collect(traces, errors);
}

}  // namespace vppsim
