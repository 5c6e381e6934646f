#pragma once

#include <string>
#include <string_view>

namespace vppsim {

// Commitment-probability response of a DER agent to the aggregator signal pi.
//
//   TYPE1(pi) = 0.02 + 0.95 / (1 + exp(-xi*pi - x0))   nondecreasing, in [0.02, 0.97]
//   TYPE2(pi) = 0.98 - 0.95 / (1 + exp(-xi*pi - x0))   nonincreasing, in [0.03, 0.98]
//   CONSTANT  = value
//
// The exponent is taken literally as (-xi*pi - x0). TYPE1 and TYPE2 with the
// same (xi, x0) sum to one.
enum class ProbKind { Type1, Type2, Constant };

struct ProbFunction {
  ProbKind kind = ProbKind::Constant;
  double xi = 0.0;
  double x0 = 0.0;
  double value = 0.0;  // CONSTANT only

  static ProbFunction type1(double xi, double x0) { return {ProbKind::Type1, xi, x0, 0.0}; }
  static ProbFunction type2(double xi, double x0) { return {ProbKind::Type2, xi, x0, 0.0}; }
  static ProbFunction constant(double p) { return {ProbKind::Constant, 0.0, 0.0, p}; }

  bool operator==(const ProbFunction&) const = default;
};

double eval_prob(const ProbFunction& f, double pi);

std::string_view to_string(ProbKind kind);
// Throws std::invalid_argument on unknown names.
ProbKind prob_kind_from_string(std::string_view name);

}  // namespace vppsim
