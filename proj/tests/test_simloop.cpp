#include <cmath>
#include <memory>

#include <doctest.h>

#include "helpers.hpp"
#include "vppsim/config.hpp"
#include "vppsim/simloop.hpp"

using namespace vppsim;

namespace {

// Two buses joined by a lossless line; `n` DERs of 10 MW at bus 2 with a
// constant commitment probability.
std::shared_ptr<const Network> constant_net(int n, double prob) {
  std::string text =
      "system = { name = \"const\", base_mva = 100.0 }\n"
      "bus = [ { id = 1, kind = \"slack\" }, { id = 2, kind = \"pq\", p_load = 20.0 } ]\n"
      "branch = [ { from = 1, to = 2, r = 0.0, x = 0.1 } ]\n"
      "gen = [\n";
  for (int i = 0; i < n; ++i) text += "  { bus = 2, p_out = 10.0 },\n";
  text += "]\nder = [\n";
  for (int i = 0; i < n; ++i)
    text += "  { gen = " + std::to_string(i) + ", prob = \"constant\", value = " + std::to_string(prob) + " },\n";
  text += "]\n";
  return std::make_shared<const Network>(parse_native_case(text));
}

SimConfig base_config(std::shared_ptr<const Network> net, double r) {
  SimConfig cfg;
  cfg.network = std::move(net);
  cfg.r_base = r;
  cfg.horizon = 50;
  cfg.burn_in = 25;
  cfg.runs = 1;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("saturated loop") {
  SimConfig cfg = base_config(constant_net(4, 1.0), 100.0);
  const SimulationTrace tr = run(cfg, 0);
  REQUIRE(tr.length() == 50);
  CHECK(tr.p[0] == 0.0);
  for (std::size_t j = 1; j < tr.length(); ++j) {
    CHECK(tr.p[j] == 40.0);
    CHECK(std::abs(tr.losses[j]) < 1e-9);
  }
  CHECK(tr.nonconverged_count == 0);
}

TEST_CASE("dormant loop") {
  SimConfig cfg = base_config(constant_net(3, 0.0), 100.0);
  const SimulationTrace tr = run(cfg, 0);
  for (std::size_t j = 0; j < tr.length(); ++j) {
    CHECK(tr.p[j] == 0.0);
    CHECK(tr.e[j] == doctest::Approx(100.0).epsilon(1e-12));
  }
}

TEST_CASE("loop recursion by hand") {
  const auto net = constant_net(2, 1.0);
  SimConfig cfg = base_config(net, 30.0);
  cfg.controller = ControllerParams::lag(0.5, 0.25, 0.9);
  cfg.xc0 = Eigen::VectorXd::Constant(1, 2.0);
  cfg.horizon = 3;
  cfg.burn_in = 1;
  const SimulationTrace tr = run(cfg, 0);
  // Lossless, so p_hat = (p + p_prev) / 2 with p(0) = 0.
  const double p[] = {0.0, 20.0, 20.0};
  double p_prev = 0.0, x = 2.0;
  for (int j = 0; j < 3; ++j) {
    const double p_hat = (p[j] + p_prev) / 2.0;
    const double e = 30.0 - p_hat;
    const double pi = 0.5 * e + 0.25 * (0.9 * x + e);
    x = 0.9 * x + e;
    p_prev = p[j];
    CHECK(tr.p[j] == p[j]);
    CHECK(tr.p_hat[j] == doctest::Approx(p_hat).epsilon(1e-12));
    CHECK(tr.e[j] == doctest::Approx(e).epsilon(1e-12));
    CHECK(tr.pi[j] == doctest::Approx(pi).epsilon(1e-12));
    CHECK(tr.xc[j] == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("single step is deterministic") {
  const auto cfg = load_sim_config(testing::preset("bus3.toml"));
  const LoopContext ctx = make_loop_context(*cfg.network, cfg.r_base, cfg.powerflow);
  PowerFlowSolver s1(*cfg.network), s2(*cfg.network);
  LoopState st{ControllerState::initial(cfg.controller, cfg.xc0), FilterState::initial(0.0),
               std::vector<double>(cfg.network->der_count(), 0.0), 0.0};
  const RngStream rng{cfg.seed, 0};
  const StepResult a = step(ctx, st, 1, rng, s1);
  const StepResult b = step(ctx, st, 1, rng, s2);
  CHECK(a.row == b.row);
  CHECK(a.commitment.on == b.commitment.on);
}

TEST_CASE("serial preset reference and horizon") {
  SimConfig cfg = load_sim_config(testing::preset("serial.toml"));
  cfg.horizon = 2000;
  cfg.burn_in = 1000;
  cfg.runs = 1;
  const SimulationTrace tr = run(cfg, 0);
  CHECK(tr.length() == 2000);
  const double losses0 = solve_power_flow(*cfg.network, cfg.resolve_initial_commitment()).losses;
  CHECK(tr.losses0 == losses0);
  CHECK(tr.r == 300.0 + losses0);
  CHECK(tr.p0 == 300.0);
  for (std::size_t j = 0; j < tr.length(); ++j) {
    double g = 0.0;
    for (const auto& col : tr.group_power) g += col[j];
    CHECK(g == doctest::Approx(tr.p[j]).epsilon(1e-12));
  }
  CHECK(run(cfg, 0) == tr);
  CHECK_FALSE(run(cfg, 1) == tr);
}

TEST_CASE("ensemble statistics") {
  SimConfig cfg = load_sim_config(testing::preset("bus3.toml"));
  cfg.horizon = 40;
  cfg.burn_in = 20;
  cfg.runs = 1;
  const EnsembleResult one = run_ensemble_serial(cfg);
  for (const auto& s : one.stats.std)
    for (double v : s) CHECK(v == 0.0);

  cfg.runs = 4;
  const EnsembleResult serial = run_ensemble_serial(cfg);
  const EnsembleResult parallel = run_ensemble(cfg, 3);
  CHECK(serial.stats == parallel.stats);
  REQUIRE(serial.traces.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(serial.traces[i] == parallel.traces[i]);

  // Column mean and sample std recomputed directly.
  const auto& mean = serial.stats.mean_of("pi");
  const auto& sd = serial.stats.std_of("pi");
  for (std::size_t j = 0; j < 40; j += 7) {
    double m = 0.0;
    for (const auto& t : serial.traces) m += t.pi[j];
    m /= 4.0;
    double v = 0.0;
    for (const auto& t : serial.traces) v += (t.pi[j] - m) * (t.pi[j] - m);
    CHECK(mean[j] == doctest::Approx(m).epsilon(1e-12));
    CHECK(sd[j] == doctest::Approx(std::sqrt(v / 3.0)).epsilon(1e-12));
  }
  CHECK(serial.stats.names.back() == "p_type2");
}

TEST_CASE("config validation") {
  SimConfig cfg = base_config(constant_net(2, 0.5), 10.0);
  CHECK_NOTHROW(cfg.validate());
  auto expect = [](SimConfig c, const char* field) {
    try {
      c.validate();
      FAIL("no error for " << field);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };
  SimConfig c = cfg;
  c.horizon = 0;
  expect(c, "horizon");
  c = cfg;
  c.burn_in = 50;
  expect(c, "burn_in");
  c = cfg;
  c.runs = 0;
  expect(c, "runs");
  c = cfg;
  c.xc0 = Eigen::VectorXd::Zero(2);
  expect(c, "xc0");
  c = cfg;
  c.initial_commitment = "1*3";
  expect(c, "initial_commitment");
  c = cfg;
  c.controller = ControllerParams::lag(0.1, 0.1, 1.5);
  expect(c, "controller");
}

TEST_CASE("commitment specs") {
  CHECK(parse_commitment_spec("all_on", 3).on == std::vector<std::uint8_t>{1, 1, 1});
  CHECK(parse_commitment_spec("0*2 1", 3).on == std::vector<std::uint8_t>{0, 0, 1});
  CHECK(parse_commitment_spec("101", 3).on == std::vector<std::uint8_t>{1, 0, 1});
  CHECK_THROWS_AS(parse_commitment_spec("1*2", 3), ConfigError);
  CHECK_THROWS_AS(parse_commitment_spec("2", 1), ConfigError);
}
