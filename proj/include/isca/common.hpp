#ifndef ISCA_COMMON_HPP
#define ISCA_COMMON_HPP

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace isca {

// All scores are natural-log probabilities. Impossible events carry the
// log-zero sentinel rather than NaN.
constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline bool is_log_zero(double x) { return x == kLogZero; }

// ln(e^a + e^b), safe for the log-zero sentinel on either side.
inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (is_log_zero(b)) return a;
  return a + std::log1p(std::exp(b - a));
}

double log_sum(std::span<const double> xs);

// Error in user-supplied input (files, flags, configs). The CLI maps this
// to exit code 1; internal invariant violations (std::logic_error) map to 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_double(double value);          // shortest exact round-trip text
double parse_double(const std::string& text);     // accepts "inf"/"-inf"

}  // namespace isca

#endif
