#pragma once

#include <cmath>
#include <compare>
#include <ostream>

namespace hqm {

/// Nanosecond time value used for every timestamp and duration in the simulator.
struct TimeNs {
  double value = 0.0;

  constexpr TimeNs() = default;
  constexpr explicit TimeNs(double ns) : value(ns) {}

  [[nodiscard]] bool finite() const { return std::isfinite(value); }

  constexpr TimeNs& operator+=(TimeNs o) {
    value += o.value;
    return *this;
  }
  constexpr TimeNs& operator-=(TimeNs o) {
    value -= o.value;
    return *this;
  }

  friend constexpr TimeNs operator+(TimeNs a, TimeNs b) { return TimeNs{a.value + b.value}; }
  friend constexpr TimeNs operator-(TimeNs a, TimeNs b) { return TimeNs{a.value - b.value}; }
  friend constexpr TimeNs operator-(TimeNs a) { return TimeNs{-a.value}; }
  friend constexpr TimeNs operator*(TimeNs a, double s) { return TimeNs{a.value * s}; }
  friend constexpr TimeNs operator*(double s, TimeNs a) { return TimeNs{a.value * s}; }
  friend constexpr double operator/(TimeNs a, TimeNs b) { return a.value / b.value; }
  friend constexpr TimeNs operator/(TimeNs a, double s) { return TimeNs{a.value / s}; }

  friend constexpr auto operator<=>(TimeNs, TimeNs) = default;
  friend constexpr bool operator==(TimeNs, TimeNs) = default;

  friend std::ostream& operator<<(std::ostream& os, TimeNs t) { return os << t.value << " ns"; }
};

namespace literals {
constexpr TimeNs operator""_ns(long double v) { return TimeNs{static_cast<double>(v)}; }
constexpr TimeNs operator""_ns(unsigned long long v) { return TimeNs{static_cast<double>(v)}; }
}  // namespace literals

}  // namespace hqm
