#pragma once

#include <complex>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "vppsim/rational.hpp"

namespace vppsim {

enum class ControllerKind { PI, Lag, LinearSS };

std::string_view to_string(ControllerKind kind);
// Throws std::invalid_argument on unknown names ("pi", "lag", "linear_ss").
ControllerKind controller_kind_from_string(std::string_view name);

// Controller description. PI and LAG share one scalar recursion
//
//   pi(k+1)   = Kp*e(k) + Ki*(leak*x_c(k) + e(k))
//   x_c(k+1)  = leak*x_c(k) + e(k)
//
// with leak = 1 for PI. LINEAR_SS updates the state first and reads the
// output from the new state: x <- A x + B e, pi = C x + D e, so PI is the
// special case A = 1, B = 1, C = Ki, D = Kp.
struct ControllerParams {
  ControllerKind kind = ControllerKind::Lag;
  double kp = 0.02;
  double ki = 0.01;
  double leak = 0.99;  // LAG only, 0 < leak < 1

  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::RowVectorXd c;
  double d = 0.0;

  // Optional actuator clamp on pi; off unless both are set.
  std::optional<double> pi_min;
  std::optional<double> pi_max;

  static ControllerParams pi(double kp, double ki);
  static ControllerParams lag(double kp, double ki, double leak = 0.99);
  static ControllerParams linear_ss(Eigen::MatrixXd a, Eigen::VectorXd b, Eigen::RowVectorXd c, double d);

  std::size_t state_dim() const;
  // State-transition matrix of the controller (leak for LAG, 1 for PI).
  Eigen::MatrixXd transition() const;
  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
};

struct ControllerState {
  ControllerParams params;
  Eigen::VectorXd xc;

  static ControllerState initial(const ControllerParams& params, double xc0);
  static ControllerState initial(const ControllerParams& params, const Eigen::VectorXd& xc0);
};

struct ControllerOutput {
  ControllerState next;
  double pi = 0.0;
};

ControllerOutput controller_step(const ControllerState& st, double e);

// Moving-average filter with loss compensation:
//   p_hat(k) = (p(k) + p(k-1)) / 2 + losses(k)
struct FilterState {
  double p_prev = 0.0;
  double losses_current = 0.0;

  // p_prev(0) := p(0), the first measured aggregate.
  static FilterState initial(double p0) { return {p0, 0.0}; }
};

struct FilterOutput {
  FilterState next;
  double p_hat = 0.0;
};

FilterOutput filter_step(const FilterState& st, double p, double losses);

inline double error_signal(double r, double p_hat) { return r - p_hat; }

// Incremental-stability probe: two copies of the controller driven by the
// same input from different initial states.
struct IncrementalProbe {
  // ||x_a(k) - x_b(k)|| for k = 0..horizon, propagated through the
  // controller's (affine) incremental dynamics d <- A d. Exact up to the
  // rounding of the repeated products.
  std::vector<double> difference;
  // The same quantity read off the two simulated trajectories; agrees with
  // `difference` up to cancellation error in the trajectories.
  std::vector<double> trajectory_gap;
};

// Requires horizon >= 1 and input.size() >= horizon.
IncrementalProbe incremental_iss_probe(const ControllerParams& params, std::span<const double> input,
                                       const Eigen::VectorXd& x0_a, const Eigen::VectorXd& x0_b,
                                       std::size_t horizon);

enum class StabilityVerdict { AsymptoticallyStable, MarginallyStable, Unstable };

std::string_view to_string(StabilityVerdict v);

struct StabilityReport {
  StabilityVerdict verdict = StabilityVerdict::AsymptoticallyStable;
  std::vector<std::complex<double>> poles;  // sorted by (arg, modulus)
  // For each unit-modulus pole e^{j q pi}: q when it is rational (|q - p/n| <= 1e-9).
  std::vector<std::optional<Rational>> unit_circle_angles;
};

// Classifies the controller poles against the unit circle with tolerance 1e-9.
StabilityReport is_marginally_unstable(const ControllerParams& params, double tol = 1e-9);

}  // namespace vppsim
