#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace vppsim {

// Exact rational num/den with den > 0 and gcd(|num|, den) = 1.
// Arithmetic throws std::overflow_error instead of wrapping.
class Rational {
 public:
  Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);  // NOLINT(google-explicit-constructor)

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  bool is_zero() const { return num_ == 0; }

  Rational operator-() const;
  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend bool operator==(const Rational& a, const Rational& b) = default;

  // Accepts "p/q", "p" or a decimal literal such as "0.25".
  static Rational parse(const std::string& text);
  std::string to_string() const;

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

// Nonnegative generator of the additive group spanned by a and b:
// gcd(a, b) = gcd(num_a*den_b, num_b*den_a) / (den_a*den_b), reduced.
Rational gcd(const Rational& a, const Rational& b);

// Best rational approximation p/q of x with q <= max_den, if one lies within tol.
std::optional<Rational> rationalize(double x, double tol = 1e-9, std::int64_t max_den = 1000000);

}  // namespace vppsim
