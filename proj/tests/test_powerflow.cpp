#include <cmath>

#include <doctest.h>

#include "helpers.hpp"
#include "vppsim/casefmt.hpp"
#include "vppsim/powerflow.hpp"
#include "vppsim/simloop.hpp"

using namespace vppsim;

TEST_CASE("ybus single line and charging") {
  Network net = testing::two_bus();
  auto y = build_ybus(net).toDense();
  CHECK(std::abs(y(0, 1) - std::complex<double>(0.0, 10.0)) < 1e-12);
  CHECK(std::abs(y(0, 0) - std::complex<double>(0.0, -10.0)) < 1e-12);

  net.branches[0].b_charging = 0.2;
  y = build_ybus(net).toDense();
  CHECK(std::abs(y(0, 0) - std::complex<double>(0.0, -9.9)) < 1e-12);
  CHECK(std::abs(y(1, 1) - std::complex<double>(0.0, -9.9)) < 1e-12);

  net.branches[0].in_service = false;
  y = build_ybus(net).toDense();
  CHECK(y.norm() == 0.0);
}

TEST_CASE("two-bus closed form") {
  const Network net = testing::two_bus(100.0);
  const PowerFlowSolution sol = solve_power_flow(net, Commitment{});
  REQUIRE(sol.converged);
  CHECK(sol.max_mismatch <= 1e-8);
  // v^4 - v^2 + 0.01 = 0 on the upper branch, cos(d) = v, sin(2d) = 0.2.
  const double v2 = std::sqrt((1.0 + std::sqrt(0.96)) / 2.0);
  const double theta2 = -0.5 * std::asin(0.2);
  CHECK(std::abs(sol.v_mag[1] - v2) <= 1e-8);
  CHECK(std::abs(sol.v_ang[1] - theta2) <= 1e-8);
  CHECK(sol.p_inj[0] == doctest::Approx(100.0).epsilon(1e-8));
  CHECK(std::abs(sol.losses) < 1e-8);
}

TEST_CASE("no load, no DERs gives the flat solution") {
  Network net = testing::two_bus(0.0);
  const PowerFlowSolution sol = solve_power_flow(net, Commitment{});
  REQUIRE(sol.converged);
  CHECK(sol.v_mag[1] == 1.0);
  CHECK(sol.v_ang[1] == 0.0);
  CHECK(sol.losses == 0.0);
  CHECK(sol.iterations == 0);
}

TEST_CASE("bus3 matches Gauss-Seidel") {
  const Network net = load_case(testing::preset("bus3.case"));
  for (const char* spec : {"all_off", "all_on", "1*5 0*5", "0*5 1*5", "1010101010"}) {
    const Commitment c = parse_commitment_spec(spec, net.der_count());
    const PowerFlowSolution nr = solve_power_flow(net, c);
    const auto gs = testing::gauss_seidel(net, c);
    REQUIRE(nr.converged);
    REQUIRE(gs.converged);
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
      const auto v = std::polar(nr.v_mag[i], nr.v_ang[i]);
      CHECK(std::abs(v - gs.v[i]) <= 1e-6);
    }
  }
}

TEST_CASE("serial preset power balance") {
  const Network net = load_case(testing::preset("serial.case"));
  const PowerFlowSolution sol = solve_power_flow(net, Commitment::all(net.der_count(), true));
  REQUIRE(sol.converged);
  CHECK(total_der_output(sol, net) == 600.0);
  const double gen = testing::total_generation(net, sol);
  CHECK(std::abs(gen - testing::total_load(net) - sol.losses) <= 1e-4);
  CHECK(sol.losses > 0.0);
}

TEST_CASE("DER output sums") {
  const Network net = load_case(testing::preset("serial.case"));
  PowerFlowSolver solver(net);
  CHECK(total_der_output(solver.solve(parse_commitment_spec("1*60 0*60", 120)), net) == 300.0);
  CHECK(total_der_output(solver.solve(Commitment::all(120, false)), net) == 0.0);

  const Network big = load_case(testing::preset("case118.m"), CaseFormat::Auto, testing::preset("case118_der.toml"));
  // DERs 0..7 sit at bus 10.
  const PowerFlowSolution sol = solve_power_flow(big, parse_commitment_spec("1*8 0*4", 12));
  CHECK(total_der_output(sol, big) == 880.0);
}

TEST_CASE("case118 stock solution") {
  // Reference values from an independent Newton solver (pypower runpf) on
  // the unmodified file. That solver keeps the slack at its case angle of 30
  // degrees; ours puts it at 0, so angles are compared relative to the slack.
  const Network net = load_case(testing::preset("case118.m"));
  const PowerFlowSolution sol = solve_power_flow(net, Commitment{});
  REQUIRE(sol.converged);
  CHECK(sol.losses == doctest::Approx(132.86287188869028).epsilon(1e-7));
  const auto b1 = *net.bus_index(1), b2 = *net.bus_index(2), b3 = *net.bus_index(3);
  const double deg = M_PI / 180.0;
  const double slack = sol.v_ang[net.slack_index];
  CHECK(slack == 0.0);
  CHECK(sol.v_mag[b1] == doctest::Approx(0.955).epsilon(1e-7));
  CHECK(sol.v_ang[b1] - slack == doctest::Approx(-30.0 * deg + 10.97273998 * deg).epsilon(1e-7));
  CHECK(sol.v_mag[b2] == doctest::Approx(0.97139279).epsilon(1e-7));
  CHECK(sol.v_ang[b2] - slack == doctest::Approx(-30.0 * deg + 11.51254745 * deg).epsilon(1e-7));
  CHECK(sol.v_mag[b3] == doctest::Approx(0.96769194).epsilon(1e-7));
  CHECK(sol.v_ang[b3] - slack == doctest::Approx(-30.0 * deg + 11.85619002 * deg).epsilon(1e-7));
  CHECK(sol.p_inj[net.slack_index] + net.buses[net.slack_index].p_load ==
        doctest::Approx(513.86287189).epsilon(1e-7));
}

TEST_CASE("solver errors") {
  const Network net = load_case(testing::preset("bus3.case"));
  CHECK_THROWS_AS(solve_power_flow(net, Commitment::all(3, true)), CommitmentSizeError);

  Network bad = testing::two_bus();
  bad.branches[0].x = 0.0;
  CHECK_THROWS_AS(build_ybus(bad), SingularBranchError);

  Network heavy = testing::two_bus(5000.0);
  const PowerFlowSolution sol = solve_power_flow(heavy, Commitment{});
  CHECK_FALSE(sol.converged);
  CHECK(sol.status != PowerFlowStatus::Converged);
}
