#include "isca/common.hpp"

#include <algorithm>
#include <charconv>
#include <system_error>

namespace isca {

double log_sum(std::span<const double> xs) {
  double best = kLogZero;
  for (double x : xs) best = std::max(best, x);
  if (is_log_zero(best)) return kLogZero;
  double acc = 0.0;
  for (double x : xs)
    if (!is_log_zero(x)) acc += std::exp(x - best);
  return best + std::log(acc);
}

std::string format_double(double value) {
  if (value == std::numeric_limits<double>::infinity()) return "inf";
  if (value == kLogZero) return "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last)
    throw InputError("not a number: '" + text + "'");
  return value;
}

}  // namespace isca
