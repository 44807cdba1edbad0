// units.hpp — unit conventions shared by every module.
//
// Internally all frequencies are angular, in rad/us, and all times are in us.
// Linear frequencies (GHz, MHz, kHz) and ns only appear at the I/O boundary.

#pragma once

#include <limits>
#include <numbers>

namespace qmem::units {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Linear frequency -> angular rad/us.
constexpr double GHz(double f) noexcept { return two_pi * 1.0e3 * f; }
constexpr double MHz(double f) noexcept { return two_pi * f; }
constexpr double kHz(double f) noexcept { return two_pi * 1.0e-3 * f; }

// Angular rad/us -> linear frequency.
constexpr double to_GHz(double w) noexcept { return w / (two_pi * 1.0e3); }
constexpr double to_MHz(double w) noexcept { return w / two_pi; }
constexpr double to_kHz(double w) noexcept { return w / (two_pi * 1.0e-3); }

// Times.
constexpr double ns(double t) noexcept { return 1.0e-3 * t; }
constexpr double us(double t) noexcept { return t; }
constexpr double to_ns(double t) noexcept { return 1.0e3 * t; }

// Sentinel for "no finite value" results (unbounded lifetimes and the like).
inline constexpr double unbounded = std::numeric_limits<double>::infinity();

}  // namespace qmem::units
