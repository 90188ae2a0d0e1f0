#pragma once

#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

namespace hmc {

/// Shortest text that reads back to the same double; "inf"/"nan" otherwise.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace hmc
