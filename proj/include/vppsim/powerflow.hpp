#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "vppsim/network.hpp"

namespace vppsim {

using Complex = std::complex<double>;
using SparseComplex = Eigen::SparseMatrix<Complex>;

// u(k): one bit per DER generator, in generator order.
struct Commitment {
  std::vector<std::uint8_t> on;

  std::size_t size() const { return on.size(); }
  std::size_t count() const;
  bool operator==(const Commitment&) const = default;

  static Commitment all(std::size_t n, bool value) { return {std::vector<std::uint8_t>(n, value ? 1 : 0)}; }
  // Accepts '0'/'1' characters; throws std::invalid_argument otherwise.
  static Commitment from_bits(std::string_view bits);
  std::string to_bits() const;
};

struct PowerFlowOptions {
  double tolerance = 1e-8;  // infinity-norm of the mismatch, p.u.
  int max_iterations = 20;
};

enum class PowerFlowStatus { Converged, MaxIterations, SingularJacobian };

struct PowerFlowSolution {
  std::vector<double> v_mag;  // p.u.
  std::vector<double> v_ang;  // rad
  std::vector<double> p_inj;  // MW
  std::vector<double> q_inj;  // MVAr
  std::vector<double> p_gen;  // MW per generator
  double losses = 0.0;        // MW, sum over branches of Re(S_from + S_to)
  double max_mismatch = 0.0;  // p.u.
  int iterations = 0;
  bool converged = false;
  PowerFlowStatus status = PowerFlowStatus::MaxIterations;

  bool operator==(const PowerFlowSolution&) const = default;
};

class SingularBranchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CommitmentSizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bus admittance matrix in p.u. Branch pi-model: series y = 1/(r + jx),
// b_charging/2 at each end, off-nominal tap on the from side; bus shunts
// add (shunt_g + j shunt_b) to the diagonal. Out-of-service branches are
// skipped. Throws SingularBranchError for an in-service branch with r = x = 0.
SparseComplex build_ybus(const Network& net);

// Newton-Raphson polar power flow with flat start. Reusable across
// commitments of the same network; not thread-safe (owns LU workspace), so
// give each thread its own copy.
class PowerFlowSolver {
 public:
  explicit PowerFlowSolver(const Network& net);

  PowerFlowSolution solve(const Commitment& commit, const PowerFlowOptions& opts = {});

  const Network& network() const { return *net_; }
  const SparseComplex& ybus() const { return ybus_; }

 private:
  void mismatch(const Eigen::VectorXcd& v, const Eigen::VectorXcd& s_spec, Eigen::VectorXd& f,
                Eigen::VectorXcd& s_calc) const;
  void jacobian(const Eigen::VectorXcd& v, const Eigen::VectorXcd& s_calc);

  const Network* net_;
  SparseComplex ybus_;
  std::vector<int> angle_var_;      // per bus: index of its angle unknown, or -1
  std::vector<int> magnitude_var_;  // per bus: index of its magnitude unknown, or -1
  std::vector<std::size_t> pvpq_;
  std::vector<std::size_t> pq_;
  Eigen::VectorXcd s_fixed_;  // p.u. injections independent of the commitment
  std::vector<std::size_t> der_gens_;
  std::vector<Eigen::Triplet<double>> triplets_;
  Eigen::SparseMatrix<double> jac_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  bool pattern_ready_ = false;
};

PowerFlowSolution solve_power_flow(const Network& net, const Commitment& commit, const PowerFlowOptions& opts = {});

// p(k): summed active output of DER generators, MW.
double total_der_output(const PowerFlowSolution& sol, const Network& net);

const char* to_string(PowerFlowStatus status);

}  // namespace vppsim
