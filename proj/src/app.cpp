#include "vppsim/app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"
#include "vppsim/casefmt.hpp"
#include "vppsim/config.hpp"
#include "vppsim/io.hpp"
#include "vppsim/numfmt.hpp"

namespace vppsim::app {

namespace fs = std::filesystem;

void apply_overrides(SimConfig& cfg, const SimulateOverrides& o) {
  if (o.controller) {
    ControllerKind kind;
    try {
      kind = controller_kind_from_string(*o.controller);
    } catch (const std::invalid_argument&) {
      throw ConfigError("controller.kind: unknown controller '" + *o.controller + "' (expected pi, lag or linear_ss)");
    }
    const ControllerParams& old = cfg.controller;
    if (kind != old.kind) {
      if (kind == ControllerKind::LinearSS)
        throw ConfigError("controller.kind: linear_ss needs matrices a, b, c, d; set it in the config file");
      ControllerParams p = kind == ControllerKind::PI ? ControllerParams::pi(old.kp, old.ki)
                                                      : ControllerParams::lag(old.kp, old.ki, 0.99);
      p.pi_min = old.pi_min;
      p.pi_max = old.pi_max;
      cfg.controller = p;
      cfg.xc0 = Eigen::VectorXd::Constant(1, cfg.xc0.size() > 0 ? cfg.xc0[0] : 0.0);
    }
  }
  if (o.xc0) cfg.xc0 = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(cfg.controller.state_dim()), *o.xc0);
  if (o.runs) cfg.runs = *o.runs;
  if (o.horizon) {
    cfg.horizon = *o.horizon;
    cfg.burn_in = cfg.horizon / 2;
  }
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
}

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string manifest_text(const SimConfig& cfg, const fs::path& out_dir, const std::string& status, double seconds,
                          std::size_t completed, std::size_t failed) {
  std::ostringstream o;
  o << "# `vppsim simulate manifest.toml` re-runs the [config] snapshot.\n";
  o << "[manifest]\n";
  o << "tool = \"vppsim\"\n";
  o << "tool_version = " << quote(kVersion) << "\n";
  o << "preset = " << quote(cfg.preset) << "\n";
  o << "seed = " << cfg.seed << "\n";
  o << "output_dir = " << quote(out_dir.string()) << "\n";
  o << "status = " << quote(status) << "\n";
  o << "wall_clock_seconds = " << format_toml_double(seconds) << "\n";
  o << "runs_completed = " << completed << "\n";
  o << "runs_failed = " << failed << "\n\n";
  o << serialize_sim_config(cfg, "config");
  return o.str();
}

const char* kFigureMap =
    "# figure id -> data files (columns)\n"
    "aggregate-power  ensemble_mean.csv + ensemble_std.csv (p, p_hat): mean and mean +/- std over runs\n"
    "control-signal   ensemble_mean.csv + ensemble_std.csv (pi, xc)\n"
    "group-powers     ensemble_mean.csv + ensemble_std.csv (p_<group>): DER power per group\n"
    "losses           ensemble_mean.csv + ensemble_std.csv (losses)\n"
    "agent-averages   agents_mean.csv (tail_mean_output per agent)\n"
    "single-run       trace_run<id>.csv\n";

}  // namespace

SimulateOutcome simulate_to_dir(const SimConfig& cfg, const fs::path& out_dir, int threads) {
  cfg.validate();
  fs::create_directories(out_dir);
  const fs::path dir = fs::absolute(out_dir).lexically_normal();
  write_text_file(dir / "manifest.toml", manifest_text(cfg, dir, "running", 0.0, 0, 0));

  const auto t0 = std::chrono::steady_clock::now();
  SimulateOutcome out;
  out.result = run_ensemble(cfg, threads);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto& traces = out.result.traces;
  for (const auto& t : traces) {
    write_text_file(dir / ("trace_run" + std::to_string(t.run_id) + ".csv"), format_trace_csv(t));
    if (t.agent_thin > 0)
      write_text_file(dir / ("agents_run" + std::to_string(t.run_id) + ".csv"), format_agent_series_csv(t));
    out.nonconverged_steps += t.nonconverged_count;
    out.total_steps += t.length();
  }
  const std::string mean = format_stats_csv(out.result.stats, false);
  const std::string sd = format_stats_csv(out.result.stats, true);
  write_text_file(dir / "ensemble_mean.csv", mean);
  write_text_file(dir / "ensemble_std.csv", sd);
  write_text_file(dir / "ensemble_mean.dat", csv_to_dat(mean));
  write_text_file(dir / "ensemble_std.dat", csv_to_dat(sd));
  if (!traces.empty()) {
    const std::string agents = format_agents_csv(*cfg.network, traces);
    write_text_file(dir / "agents_mean.csv", agents);
    write_text_file(dir / "agents_mean.dat", csv_to_dat(agents));
    write_text_file(dir / "agents_tail_by_run.csv", format_agent_tails_csv(traces));
  }
  write_text_file(dir / "figure_map.txt", kFigureMap);
  if (!out.result.errors.empty()) {
    std::string text;
    for (const auto& e : out.result.errors) text += e + "\n";
    write_text_file(dir / "errors.txt", text);
  }
  write_text_file(dir / "manifest.toml", manifest_text(cfg, dir, "complete", out.wall_seconds, traces.size(),
                                                       out.result.errors.size()));
  return out;
}

std::vector<std::string> agent_groups(const Network& net) {
  std::vector<std::string> g;
  for (const auto& d : net.ders) g.push_back(d.group);
  return g;
}

Arm load_arm(const fs::path& dir) {
  Arm arm;
  const fs::path manifest = dir / "manifest.toml";
  if (!fs::exists(manifest)) throw UsageError(dir.string() + ": no manifest.toml (not a simulate output directory)");
  arm.config = load_sim_config(manifest);
  const SimConfig& cfg = *arm.config;
  for (std::size_t id = 0; id < cfg.runs; ++id) {
    const fs::path p = dir / ("trace_run" + std::to_string(id) + ".csv");
    if (!fs::exists(p)) continue;
    SimulationTrace t = parse_trace_csv(read_text_file(p));
    t.run_id = id;
    t.seed = cfg.seed;
    t.burn_in = cfg.burn_in;
    arm.traces.push_back(std::move(t));
  }
  if (arm.traces.empty()) throw RunFailure(dir.string() + ": no trace files");
  const fs::path tails = dir / "agents_tail_by_run.csv";
  if (fs::exists(tails)) apply_agent_tails_csv(read_text_file(tails), arm.traces);
  return arm;
}

std::vector<ReportRow> ergodicity_for_dirs(const fs::path& a, const fs::path& b, std::optional<std::size_t> burn_in) {
  const Arm arm_a = load_arm(a);
  const Arm arm_b = load_arm(b);
  const SimConfig& cfg = *arm_a.config;
  const std::size_t bi = burn_in.value_or(cfg.burn_in);
  std::vector<std::string> grouping;
  if (bi == cfg.burn_in && arm_a.traces.front().agent_tail_mean.size() == cfg.network->der_count() &&
      arm_b.traces.front().agent_tail_mean.size() == cfg.network->der_count())
    grouping = agent_groups(*cfg.network);
  return ergodicity_report(arm_a, arm_b, bi, grouping, cfg.thresholds);
}

const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids = {"serial-aggregate", "serial-signal", "serial-agents", "bus3-all",
                                               "case118-signal"};
  return ids;
}

namespace {

struct FigureSpec {
  const char* preset;
  const char* description;
};

FigureSpec figure_spec(const std::string& id) {
  if (id == "serial-aggregate")
    return {"serial.toml", "aggregate power p and filtered p_hat: ensemble_mean.csv/ensemble_std.csv (p, p_hat)"};
  if (id == "serial-signal")
    return {"serial.toml", "control signal and controller state: ensemble_mean.csv/ensemble_std.csv (pi, xc)"};
  if (id == "serial-agents")
    return {"serial.toml",
            "DER power by group: ensemble_mean.csv/ensemble_std.csv (p_type2, p_type1); per-agent averages: "
            "agents_mean.csv"};
  if (id == "bus3-all")
    return {"bus3.toml",
            "powers (p, p_type1, p_type2), observations (p_hat), signal and state (pi, xc): "
            "ensemble_mean.csv/ensemble_std.csv"};
  if (id == "case118-signal")
    return {"case118.toml",
            "control signal and controller state: ensemble_mean.csv/ensemble_std.csv (pi, xc); bus powers: "
            "p_bus10_type1, p_bus10_type2, p_bus25_type1, p_bus25_type2"};
  std::string known;
  for (const auto& f : figure_ids()) known += (known.empty() ? "" : ", ") + f;
  throw UsageError("unknown figure id '" + id + "' (expected one of: " + known + ")");
}

}  // namespace

void reproduce(const std::string& figure_id, const ReproduceOptions& opts, std::ostream& log) {
  const FigureSpec spec = figure_spec(figure_id);
  SimConfig base = load_sim_config(opts.presets_dir / spec.preset);
  SimulateOverrides ov;
  ov.runs = opts.runs;
  ov.horizon = opts.horizon;
  apply_overrides(base, ov);

  fs::create_directories(opts.out_dir);
  std::string map = "# " + figure_id + ": " + spec.description + "\n";
  bool failed = false;
  for (const char* ctrl : {"pi", "lag"}) {
    std::vector<fs::path> dirs;
    for (const double xc0 : {0.0, 300.0}) {
      SimConfig cfg = base;
      SimulateOverrides arm;
      arm.controller = ctrl;
      arm.xc0 = xc0;
      apply_overrides(cfg, arm);
      const std::string name = std::string(ctrl) + "_xc0_" + format_double(xc0);
      const fs::path dir = opts.out_dir / name;
      log << "running " << name << " (" << cfg.runs << " runs x " << cfg.horizon << " steps)\n";
      const SimulateOutcome res = simulate_to_dir(cfg, dir, opts.threads);
      failed = failed || !res.result.errors.empty();
      map += name + "/  controller " + ctrl + ", x_c(0) = " + format_double(xc0) + "\n";
      dirs.push_back(dir);
    }
    const auto rows = ergodicity_for_dirs(dirs[0], dirs[1]);
    const std::string report = "ergodicity_" + std::string(ctrl) + ".csv";
    write_text_file(opts.out_dir / report, format_report_csv(rows));
    map += report + "  " + ctrl + " arms compared (metric, value, threshold, verdict)\n";
    for (const auto& r : rows)
      if (r.metric == "unique_ergodicity") log << ctrl << ": unique_ergodicity " << r.verdict << "\n";
  }
  write_text_file(opts.out_dir / "figure_map.txt", map);
  if (failed) throw RunFailure("some runs failed; see errors.txt in the arm directories");
}

std::string powerflow_csv(const Network& net, const PowerFlowSolution& sol) {
  std::string out = "id,vm,va_deg,p_inj,q_inj\n";
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    out += std::to_string(net.buses[i].id) + "," + format_double(sol.v_mag[i]) + "," +
           format_double(sol.v_ang[i] * 180.0 / M_PI) + "," + format_double(sol.p_inj[i]) + "," +
           format_double(sol.q_inj[i]) + "\n";
  }
  out += "# status=" + std::string(to_string(sol.status)) + " converged=" + (sol.converged ? "1" : "0") +
         " iterations=" + std::to_string(sol.iterations) + " losses_mw=" + format_double(sol.losses) +
         " max_mismatch_pu=" + format_double(sol.max_mismatch) + "\n";
  return out;
}

namespace {

[[noreturn]] void spec_error(const toml::node& n, const std::string& msg) {
  throw UsageError("line " + std::to_string(n.source().begin.line) + ": " + msg);
}

double num(const toml::node& n, const std::string& what) {
  if (!(n.is_floating_point() || n.is_integer())) spec_error(n, what + ": expected a number");
  return *n.value<double>();
}

std::vector<double> num_array(const toml::node* n, const std::string& what) {
  if (!n) throw UsageError(what + ": missing");
  const toml::array* arr = n->as_array();
  if (!arr) spec_error(*n, what + ": expected an array of numbers");
  std::vector<double> v;
  for (const auto& x : *arr) v.push_back(num(x, what));
  return v;
}

}  // namespace

std::string check_contraction(const fs::path& spec_path, ContractionEstimate* out) {
  toml::table root;
  try {
    root = toml::parse(read_text_file(spec_path));
  } catch (const toml::parse_error& e) {
    throw UsageError(spec_path.string() + ": line " + std::to_string(e.source().begin.line) + ": " +
                     std::string(e.description()));
  }
  for (const auto& [k, v] : root) {
    const std::string key(k.str());
    if (key != "samples" && key != "seed" && key != "pi_grid" && key != "box" && key != "margin" && key != "map")
      spec_error(v, "unknown key '" + key + "'");
  }
  const auto samples = root["samples"].value_or<std::int64_t>(1000);
  const auto seed = root["seed"].value_or<std::int64_t>(1);
  const double margin = root["margin"].value_or(1e-9);
  const std::vector<double> grid = root.contains("pi_grid") ? num_array(root.get("pi_grid"), "pi_grid")
                                                            : std::vector<double>{0.0};
  const std::vector<double> box = root.contains("box") ? num_array(root.get("box"), "box")
                                                       : std::vector<double>{-10.0, 10.0};
  if (box.size() != 2 || !(box[0] < box[1])) throw UsageError("box: expected [lo, hi] with lo < hi");
  if (samples < 1) throw UsageError("samples: must be >= 1");

  const toml::array* maps = root["map"].as_array();
  if (!maps || maps->empty()) throw UsageError("map: at least one [[map]] entry is required");
  Ifs sys;
  std::size_t dim = 0;
  for (const auto& item : *maps) {
    const toml::table* t = item.as_table();
    if (!t) spec_error(item, "map: expected a table");
    for (const auto& [k, v] : *t) {
      const std::string key(k.str());
      if (key != "a" && key != "b" && key != "prob") spec_error(v, "map: unknown key '" + key + "'");
    }
    AffineMap m;
    const toml::array* rows = (*t)["a"].as_array();
    if (!rows || rows->empty()) spec_error(*t, "map.a: expected a non-empty matrix");
    for (const auto& r : *rows) m.a.push_back(num_array(&r, "map.a"));
    m.b = t->contains("b") ? num_array(t->get("b"), "map.b") : std::vector<double>(m.a.size(), 0.0);
    if (dim == 0) dim = m.a.size();
    for (const auto& r : m.a)
      if (r.size() != dim) spec_error(*t, "map.a: expected a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
    if (m.a.size() != dim || m.b.size() != dim) spec_error(*t, "map: dimensions disagree");
    sys.maps.emplace_back(m);

    const toml::node* pn = t->get("prob");
    if (!pn) spec_error(*t, "map.prob: missing");
    if (pn->is_floating_point() || pn->is_integer()) {
      const double c = num(*pn, "map.prob");
      sys.probs.emplace_back([c](const IfsState&, double) { return c; });
    } else if (const toml::table* pt = pn->as_table()) {
      ProbFunction f;
      f.kind = prob_kind_from_string((*pt)["kind"].value_or<std::string>("constant"));
      f.xi = (*pt)["xi"].value_or(0.0);
      f.x0 = (*pt)["x0"].value_or(0.0);
      f.value = (*pt)["value"].value_or(0.0);
      sys.probs.emplace_back([f](const IfsState&, double pi) { return eval_prob(f, pi); });
    } else {
      spec_error(*pn, "map.prob: expected a number or a probability-function table");
    }
  }

  const ContractionEstimate est =
      estimate_average_contraction(sys, grid, box_pair_sampler(dim, box[0], box[1]), static_cast<std::size_t>(samples),
                                   RngStream{static_cast<std::uint64_t>(seed), 0}, margin);
  if (out) *out = est;
  std::string csv = "metric,value\n";
  csv += "max_ratio," + format_double(est.max_ratio) + "\n";
  csv += "mean_ratio," + format_double(est.mean_ratio) + "\n";
  csv += "samples," + std::to_string(est.samples) + "\n";
  csv += "skipped," + std::to_string(est.skipped) + "\n";
  csv += "margin," + format_double(est.margin) + "\n";
  csv += std::string("certified,") + (est.certified ? "1" : "0") + "\n";
  return csv;
}

std::string case_info(const Network& net) {
  return std::to_string(net.buses.size()) + " buses, " + std::to_string(net.branches.size()) + " branches, " +
         std::to_string(net.der_count()) + " DERs";
}

}  // namespace vppsim::app
