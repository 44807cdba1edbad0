// device.hpp — device parameters of the 3D-cavity memory sample and the
// closed-form quantities derived from them.
//
// Every field is stored in internal units (rad/us, us). Use the units:: helpers
// to build values from linear frequencies.
//
// Dispersive sign convention: a mode of frequency omega_m is shifted to
// omega_m + chi_m * sigma_z with sigma_z = -1 for |g>, so the mode frequency
// differs by 2*chi_m between the qubit-g and qubit-e manifolds.

#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "qmem/error.hpp"
#include "qmem/units.hpp"

namespace qmem {

struct DeviceParams {
    double omega_ro = units::GHz(5.518);
    double omega_s = units::GHz(8.707546);
    double omega_q = units::GHz(6.234);
    double alpha = units::MHz(-185.0);
    double g = units::MHz(53.0);
    double g_102 = units::MHz(8.0);  // informational, not part of the default dynamics
    double chi_ro = units::MHz(3.6);
    double chi_s = units::MHz(1.1);
    double kappa_ro = units::MHz(4.0);
    double kappa_s = units::kHz(24.7);
    double t1_q = 1.32;
    double t2_q = 2.49;
    double q0_ro = 1.9e6;
    double q0_s = 1.0e6;
    double n_ro = 0.0;
    double p_thermal = 0.003;  // equilibrium excited-state population of the qubit

    static DeviceParams paper() { return {}; }

    double omega_ef() const noexcept { return omega_q + alpha; }

    std::vector<std::string> violations() const {
        std::vector<std::string> out;
        auto positive = [&](double v, const char* name) {
            if (!(v > 0.0)) out.push_back(std::string(name) + " must be > 0");
        };
        positive(omega_ro, "omega_ro");
        positive(omega_s, "omega_s");
        positive(omega_q, "omega_q");
        positive(g, "g");
        positive(kappa_ro, "kappa_ro");
        positive(kappa_s, "kappa_s");
        positive(t1_q, "t1_q");
        positive(t2_q, "t2_q");
        if (!(alpha < 0.0)) out.push_back("alpha must be negative");
        if (g_102 < 0.0) out.push_back("g_102 must be >= 0");
        if (t2_q > 2.0 * t1_q * (1.0 + 1e-9)) out.push_back("t2_q exceeds 2*t1_q");
        if (n_ro < 0.0) out.push_back("n_ro must be >= 0");
        if (p_thermal < 0.0 || p_thermal >= 0.5) out.push_back("p_thermal must lie in [0, 0.5)");
        return out;
    }

    void require_valid() const {
        const auto v = violations();
        if (!v.empty()) throw Error(ErrorKind::invalid_parameters, v.front());
    }
};

// Two-photon blue-sideband transition frequency |g0> -> |e1>. The drive
// carrier is half of this.
inline double bsb_frequency(const DeviceParams& p) {
    return p.omega_s + p.omega_q + p.chi_s + (2.0 * p.n_ro - 1.0) * p.chi_ro;
}

struct BsbDetunings {
    double storage;  // omega_s - omega_b/2
    double qubit;    // omega_q - omega_b/2
};

inline BsbDetunings bsb_detunings(const DeviceParams& p) {
    const double half = 0.5 * bsb_frequency(p);
    return {p.omega_s - half, p.omega_q - half};
}

inline constexpr double degenerate_drive_tol = units::MHz(1.0);

// Effective sideband coupling g^3 Omega^2 / (Delta_s^2 Delta_q^2) multiplying
// (a^dag sigma^+ + a sigma^-). Omega_drv is the co-rotating drive coefficient,
// H_d = Omega_drv (c^dag e^{-i w t} + h.c.); a pulse segment of Rabi amplitude A
// realizes Omega_drv = A / 2.
inline double bsb_effective_rate(const DeviceParams& p, double omega_drv) {
    const auto d = bsb_detunings(p);
    if (std::abs(d.storage) < degenerate_drive_tol || std::abs(d.qubit) < degenerate_drive_tol) {
        throw Error(ErrorKind::degenerate_drive, "omega_b/2 is resonant with a bare mode");
    }
    return p.g * p.g * p.g * omega_drv * omega_drv / (d.storage * d.storage * d.qubit * d.qubit);
}

// Swap time |g0> -> |e1> under H = Omega_eff (a^dag sigma^+ + h.c.).
inline double bsb_pi_time(double omega_eff) {
    return omega_eff > 0.0 ? std::numbers::pi / (2.0 * omega_eff) : units::unbounded;
}

// Third-order sideband rate of a Duffing transmon driven on its charge port
// with co-rotating coefficient eps. In the two-level limit (alpha -> -inf) and
// with eps = g * Omega_drv / Delta_s this reduces to bsb_effective_rate; a
// finite alpha suppresses it by roughly alpha / (2 Delta_q + alpha).
inline double bsb_transmon_rate(const DeviceParams& p, double eps) {
    const auto d = bsb_detunings(p);
    const double two_level = 1.0 / (d.qubit * d.storage);
    const double via_f = 2.0 / (d.qubit * (2.0 * d.qubit + p.alpha));
    return std::abs(eps * eps * p.g * (two_level + via_f));
}

// Storage-port amplitude whose induced qubit drive equals eps.
inline double storage_equivalent_amplitude(const DeviceParams& p, double eps) {
    return std::abs(eps * bsb_detunings(p).storage / p.g);
}

// Estimator chi = g^2 alpha / (Delta (Delta + alpha)); the measured shifts in
// DeviceParams remain authoritative for all frequency bookkeeping.
inline double dispersive_shift_estimate(double g, double delta, double alpha) {
    const double tol = units::MHz(1.0);
    if (std::abs(delta) < tol || std::abs(delta + alpha) < tol) {
        throw Error(ErrorKind::singular_detuning, "detuning straddles a transmon resonance");
    }
    return g * g * alpha / (delta * (delta + alpha));
}

// Single-mode Purcell limit 1 / (kappa_ro (g/Delta)^2).
inline double purcell_limit(const DeviceParams& p) {
    const double delta = p.omega_q - p.omega_ro;
    if (std::abs(delta) < 5.0 * p.g) {
        throw Error(ErrorKind::invalid_regime, "qubit-readout detuning is not large compared with g");
    }
    const double rate = p.kappa_ro * (p.g / delta) * (p.g / delta);
    return rate > 0.0 ? 1.0 / rate : units::unbounded;
}

inline double pure_dephasing_time(double t1, double t2) {
    if (!(t1 > 0.0) || !(t2 > 0.0)) throw Error(ErrorKind::nonphysical_pair, "T1 and T2 must be positive");
    const double rate = 1.0 / t2 - 1.0 / (2.0 * t1);
    if (rate < -1e-12 / t2) throw Error(ErrorKind::nonphysical_pair, "T2 exceeds 2*T1");
    if (rate <= 1e-15 / t2) return units::unbounded;
    return 1.0 / rate;
}

// Equilibrium excited population from Gamma_phi ~= P_e * kappa_q.
inline double thermal_population(double gamma_phi, double kappa_q) {
    if (!(kappa_q > 0.0)) throw Error(ErrorKind::invalid_parameters, "kappa_q must be > 0");
    return gamma_phi / kappa_q;
}

}  // namespace qmem
