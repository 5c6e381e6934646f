// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "vppsim/casefmt.hpp"
#include "vppsim/config.hpp"
#include "vppsim/ergodic.hpp"
#include "vppsim/powerflow.hpp"
#include "vppsim/simloop.hpp"

#ifndef VPPSIM_CLI
#define VPPSIM_CLI "vppsim"
#endif

using namespace vppsim;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " " << id << " " << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Runs f and reports an exception as a failure of criterion id.
void criterion(int id, const char* name, const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

struct Arms {
  Arm lag0, lag300, pi0, pi300;
};

Arm make_arm(const SimConfig& base, const ControllerParams& ctrl, double xc0) {
  SimConfig cfg = base;
  cfg.controller = ctrl;
  cfg.xc0 = Eigen::VectorXd::Constant(1, xc0);
  EnsembleResult res = run_ensemble(cfg);
  if (!res.errors.empty()) throw std::runtime_error(res.errors.front());
  return Arm{cfg, std::move(res.traces)};
}

CaseErrorKind error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const CaseError& e) {
    return e.kind();
  }
  throw std::runtime_error("expected a CaseError");
}

std::vector<fs::path> data_files(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".csv" || ext == ".dat")) out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "vppsim_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  criterion(1, "power-flow correctness", [] {
    const Network two = testing::two_bus(100.0);
    const PowerFlowSolution s2 = solve_power_flow(two, Commitment{});
    const double v2 = std::sqrt((1.0 + std::sqrt(0.96)) / 2.0), th2 = -0.5 * std::asin(0.2);
    const double err2 = std::max(std::abs(s2.v_mag[1] - v2), std::abs(s2.v_ang[1] - th2));
    bool ok = s2.converged && s2.max_mismatch <= 1e-8 && err2 <= 1e-8;

    struct Preset {
      fs::path file, der;
    };
    const std::vector<Preset> presets = {{testing::preset("serial.case"), {}},
                                         {testing::preset("bus3.case"), {}},
                                         {testing::preset("case118.m"), testing::preset("case118_der.toml")}};
    double worst_balance = 0.0;
    double worst_gs = 0.0;
    std::size_t solves = 0;
    for (const auto& p : presets) {
      const Network net = load_case(p.file, CaseFormat::Auto, p.der);
      PowerFlowSolver solver(net);
      const std::size_t n = net.der_count();
      std::vector<Commitment> commits = {Commitment::all(n, false), Commitment::all(n, true)};
      const RngStream rng{99, 0};
      for (std::uint64_t k = 0; k < 20; ++k) {
        Commitment c = Commitment::all(n, false);
        for (std::size_t i = 0; i < n; ++i) c.on[i] = rng.uniform(k, static_cast<std::uint32_t>(i)) < 0.5;
        commits.push_back(c);
      }
      for (const auto& c : commits) {
        const PowerFlowSolution sol = solver.solve(c);
        ++solves;
        if (!sol.converged) {
          ok = false;
          continue;
        }
        const double bal = testing::total_generation(net, sol) - testing::total_load(net) - sol.losses;
        worst_balance = std::max(worst_balance, std::abs(bal));
        if (net.buses.size() <= 3) {
          const auto gs = testing::gauss_seidel(net, c);
          ok = ok && gs.converged;
          for (std::size_t i = 0; i < net.buses.size(); ++i)
            worst_gs = std::max(worst_gs, std::abs(std::polar(sol.v_mag[i], sol.v_ang[i]) - gs.v[i]));
        }
      }
    }
    ok = ok && worst_balance <= 1e-4 && worst_gs <= 1e-6;
    report(1, "power-flow correctness", ok,
           "2-bus error " + num(err2) + " (<= 1e-8), max balance residual " + num(worst_balance) + " MW over " +
               std::to_string(solves) + " solves (<= 1e-4), Gauss-Seidel gap " + num(worst_gs) + " (<= 1e-6)");
  });

  // Criteria 2-4 and 6 share the serial-preset arms.
  Arms arms;
  bool have_arms = false;
  try {
    SimConfig base = load_sim_config(testing::preset("serial.toml"));
    base.runs = 50;
    base.horizon = 2000;
    base.burn_in = 1000;
    const auto lag = base.controller;
    const auto pi = ControllerParams::pi(lag.kp, lag.ki);
    arms.lag0 = make_arm(base, lag, 0.0);
    arms.lag300 = make_arm(base, lag, 300.0);
    arms.pi0 = make_arm(base, pi, 0.0);
    arms.pi300 = make_arm(base, pi, 300.0);
    have_arms = true;
  } catch (const std::exception& e) {
    for (int id : {2, 3, 4, 6}) report(id, "serial ensemble", false, std::string("exception: ") + e.what());
  }

  if (have_arms) {
    criterion(2, "regulation", [&] {
      const double r = arms.lag0.traces.front().r;
      double sum = 0.0;
      for (const auto& t : arms.lag0.traces) sum += time_average(t.p_hat, 1000);
      const double mean = sum / static_cast<double>(arms.lag0.traces.size());
      const double rel = std::abs(mean - r) / r;
      report(2, "regulation", rel <= 0.05,
             "tail mean p_hat " + num(mean) + " MW vs r " + num(r) + " MW, deviation " + num(100.0 * rel) +
                 "% (<= 5%)");
    });

    criterion(3, "predictability under LAG", [&] {
      const auto rep = predictability_gap(arms.lag0, arms.lag300, 1000);
      const auto& g = rep.gap_of("pi");
      const bool ok = g.gap <= 2.0 * g.std_err && rep.ks_pi <= 0.1;
      report(3, "predictability under LAG", ok,
             "pi tail gap " + num(g.gap) + " <= 2*SE " + num(2.0 * g.std_err) + ", KS " + num(rep.ks_pi) +
                 " (<= 0.1)");
    });

    criterion(4, "PI initial-condition dependence", [&] {
      const double lag_gap = predictability_gap(arms.lag0, arms.lag300, 1000).gap_of("xc").gap;
      const double pi_gap = predictability_gap(arms.pi0, arms.pi300, 1000).gap_of("xc").gap;
      const auto& input = arms.pi0.traces.front().e;
      const auto probe = incremental_iss_probe(ControllerParams::pi(0.02, 0.01), input, Eigen::VectorXd::Zero(1),
                                               Eigen::VectorXd::Constant(1, 300.0), 2000);
      double worst = 0.0;
      for (double d : probe.difference) worst = std::max(worst, std::abs(d - 300.0));
      const bool ok = pi_gap > 10.0 * lag_gap && worst <= 1e-12 && probe.difference.size() == 2001;
      report(4, "PI initial-condition dependence", ok,
             "x_c tail gap PI " + num(pi_gap) + " vs LAG " + num(lag_gap) + " (ratio " + num(pi_gap / lag_gap) +
                 ", > 10), probe |d - 300| max " + num(worst) + " (<= 1e-12)");
    });
  }

  criterion(5, "incremental contraction of LAG", [&] {
    std::vector<double> input(2000);
    for (std::size_t k = 0; k < input.size(); ++k)
      input[k] = have_arms ? arms.lag0.traces.front().e[k] : std::sin(static_cast<double>(k));
    const auto probe = incremental_iss_probe(ControllerParams::lag(0.02, 0.01, 0.99), input, Eigen::VectorXd::Zero(1),
                                             Eigen::VectorXd::Constant(1, 300.0), 2000);
    double worst = 0.0;
    for (std::size_t k = 0; k <= 2000; ++k) {
      const double expect = 300.0 * std::pow(0.99, static_cast<double>(k));
      worst = std::max(worst, std::abs(probe.difference[k] - expect) / expect);
    }
    report(5, "incremental contraction of LAG", worst <= 1e-10,
           "max relative error vs 300*0.99^k over k <= 2000: " + num(worst) + " (<= 1e-10)");
  });

  if (have_arms) {
    criterion(6, "fairness within groups", [&] {
      const auto& net = *arms.lag0.config->network;
      std::vector<std::string> grouping;
      for (const auto& d : net.ders) grouping.push_back(d.group);
      const FairnessReport f = fairness_gap(arms.lag0.traces, grouping, 1000);
      bool ok = true;
      std::string detail;
      for (const auto& g : f.groups) {
        ok = ok && g.max_gap <= 3.0 * g.sigma;
        detail += g.group + " gap " + num(g.max_gap) + " <= 3 sigma " + num(3.0 * g.sigma) + "; ";
      }

      // Two identical agents driven by the same noise lane.
      auto pair = std::make_shared<Network>(parse_native_case(
          "system = { name = \"pair\", base_mva = 100.0 }\n"
          "bus = [ { id = 1, kind = \"slack\" }, { id = 2, kind = \"pq\", p_load = 30.0 } ]\n"
          "branch = [ { from = 1, to = 2, r = 0.01, x = 0.1 } ]\n"
          "gen = [ { bus = 2, p_out = 10.0 }, { bus = 2, p_out = 10.0 } ]\n"
          "der = [ { gen = 0, prob = \"type1\", xi = 1.0, x0 = 0.0 },"
          " { gen = 1, prob = \"type1\", xi = 1.0, x0 = 0.0 } ]\n"));
      SimConfig cfg;
      cfg.network = pair;
      cfg.r_base = 10.0;
      cfg.horizon = 2000;
      cfg.burn_in = 1000;
      cfg.runs = 10;
      cfg.seed = 4;
      cfg.noise_lanes = {0, 0};
      const std::vector<std::string> same = {"type1", "type1"};
      const double sym = fairness_gap(run_ensemble(cfg).traces, same, 1000).groups.front().max_gap;
      ok = ok && sym == 0.0;
      report(6, "fairness within groups", ok, detail + "symmetric pair gap " + num(sym) + " (== 0)");
    });
  }

  criterion(7, "contraction-on-average estimator", [] {
    auto affine = [](std::vector<double> slopes, std::vector<double> probs) {
      Ifs sys;
      for (std::size_t m = 0; m < slopes.size(); ++m) {
        sys.maps.emplace_back(AffineMap{{{slopes[m]}}, {static_cast<double>(m)}});
        const double p = probs[m];
        sys.probs.emplace_back([p](const IfsState&, double) { return p; });
      }
      return sys;
    };
    // Pairs at least 1 apart keep the ratio free of cancellation.
    const PairSampler sampler = [](const RngStream& rng, std::uint64_t i) {
      const double x = -10.0 + 10.0 * rng.uniform(i, 0);
      return std::make_pair(IfsState{x}, IfsState{x + 1.0 + 9.0 * rng.uniform(i, 1)});
    };
    const std::vector<double> grid = {-1.0, 0.0, 1.0};
    struct Case {
      Ifs sys;
      double expect;
      bool certified;
    };
    const std::vector<Case> cases = {{affine({0.5, 0.5}, {0.5, 0.5}), 0.5, true},
                                     {affine({2.0}, {1.0}), 2.0, false},
                                     {affine({0.2, 1.5}, {0.9, 0.1}), 0.33, true}};
    bool ok = true;
    std::string detail;
    for (const auto& c : cases) {
      const auto est = estimate_average_contraction(c.sys, grid, sampler, 1000, RngStream{7, 0});
      const double err = std::max(std::abs(est.max_ratio - c.expect), std::abs(est.mean_ratio - c.expect));
      ok = ok && err <= 1e-13 && est.certified == c.certified;
      detail += num(c.expect) + ": error " + num(err) + (est.certified ? " certified; " : " not certified; ");
    }
    report(7, "contraction-on-average estimator", ok, detail + "tolerance 1e-13");
  });

  criterion(8, "discrete-group check", [] {
    const std::vector<Rational> o1 = {Rational(0), Rational(1, 2), Rational(1)};
    const auto a = discrete_group_check(o1, Rational(1, 4));
    const std::vector<Rational> o2 = {Rational(0)};
    const auto b = discrete_group_check(o2, Rational(0));
    const std::vector<Rational> o3 = {Rational(5), Rational(15, 2), Rational(20)};
    const auto c = discrete_group_check(o3, Rational(0));
    const std::vector<SymbolicReal> irr = {{Rational(1), ""}, {Rational(1), "sqrt2"}};
    const auto d = discrete_group_check(irr);
    const bool ok = a.discrete && a.generator && a.generator->coeff == Rational(1, 4) && b.discrete && b.generator &&
                    b.generator->coeff == Rational(0) && c.discrete && c.generator &&
                    c.generator->coeff == Rational(5, 2) && !d.discrete;
    report(8, "discrete-group check", ok,
           "{0,1/2,1} r=1/4 -> " + (a.generator ? a.generator->coeff.to_string() : std::string("none")) +
               "; {0} r=0 -> " + (b.generator ? b.generator->coeff.to_string() : std::string("none")) +
               "; {5,15/2,20} r=0 -> " + (c.generator ? c.generator->coeff.to_string() : std::string("none")) +
               "; {1, sqrt2} -> " + (d.discrete ? "discrete" : "not discrete"));
  });

  criterion(9, "parser", [] {
    const Network stock = load_case(testing::preset("case118.m"));
    bool ok = stock.buses.size() == 118;
    std::size_t round_trips = 0;
    for (const auto& n : {load_case(testing::preset("serial.case")), load_case(testing::preset("bus3.case")), stock,
                          load_case(testing::preset("case118.m"), CaseFormat::Auto,
                                    testing::preset("case118_der.toml"))}) {
      ok = ok && parse_native_case(serialize_native_case(n)) == n;
      ++round_trips;
    }
    std::string two = testing::two_bus_text(100.0);
    std::string tap0 = two, dangling = two;
    tap0.replace(tap0.find("x = 0.1"), 7, "x = 0.1, tap = 0.0");
    dangling.replace(dangling.find("to = 2"), 6, "to = 9");
    const std::string ragged = "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 1 0;\n2 1 100;\n];\n"
                               "mpc.gen = [];\nmpc.branch = [];\n";
    ok = ok && error_kind([] { parse_matpower_case(""); }) == CaseErrorKind::MissingSection &&
         error_kind([&] { parse_matpower_case(ragged); }) == CaseErrorKind::MalformedMatrix &&
         error_kind([&] { parse_native_case(tap0); }) == CaseErrorKind::SchemaViolation &&
         error_kind([&] { parse_native_case(dangling); }) == CaseErrorKind::UnknownBusReference;
    report(9, "parser", ok,
           "case118 buses " + std::to_string(stock.buses.size()) + ", native round trips " +
               std::to_string(round_trips) + ", malformed inputs raise their error kinds");
  });

  criterion(10, "reproducibility", [&] {
    const fs::path a = work / "rep_a", b = work / "rep_b";
    const std::string cmd = std::string(VPPSIM_CLI) + " reproduce serial-signal --runs 5 --out ";
    const int rc_a = std::system((cmd + a.string() + " > " + (work / "rep_a.log").string()).c_str());
    const int rc_b = std::system((cmd + b.string() + " --threads 1 > " + (work / "rep_b.log").string()).c_str());
    bool ok = rc_a == 0 && rc_b == 0;
    const auto files_a = data_files(a), files_b = data_files(b);
    ok = ok && !files_a.empty() && files_a == files_b;
    std::size_t differing = 0;
    for (const auto& f : files_a)
      if (read_text_file(a / f) != read_text_file(b / f)) ++differing;
    ok = ok && differing == 0;

    SimConfig cfg = load_sim_config(testing::preset("bus3.toml"));
    cfg.runs = 8;
    cfg.horizon = 500;
    cfg.burn_in = 250;
    const EnsembleResult serial = run_ensemble_serial(cfg);
    const EnsembleResult parallel = run_ensemble(cfg, 4);
    bool same = serial.stats == parallel.stats && serial.traces.size() == parallel.traces.size();
    for (std::size_t i = 0; same && i < serial.traces.size(); ++i) same = serial.traces[i] == parallel.traces[i];
    ok = ok && same;
    report(10, "reproducibility", ok,
           std::to_string(files_a.size()) + " CSV/dat files compared across two reproduce runs, " +
               std::to_string(differing) + " differ; serial vs 4-thread ensemble " + (same ? "identical" : "different"));
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
