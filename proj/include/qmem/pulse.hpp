// pulse.hpp — flat-top Gaussian envelopes and memory-protocol sequences.
//
// Envelope convention: rise = 2*sigma. Each flank is a Gaussian truncated at
// 2.5*sigma, shifted to a zero baseline and renormalized to peak amplitude, so
// a segment lasts plateau + 5*sigma. `start` is the first instant of the
// rising flank.
//
// Amplitude convention: a segment of amplitude A on channel c adds
//   (A/2) env(t) (e^{-i(w t + phi)} c^dag + h.c.)
// to the Hamiltonian, i.e. A is the resonant Rabi frequency of a two-level
// transition with unit matrix element.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmem/device.hpp"
#include "qmem/error.hpp"
#include "qmem/units.hpp"

namespace qmem {

enum class DriveChannel { qubit, storage, readout };

inline std::string to_string(DriveChannel c) {
    switch (c) {
        case DriveChannel::qubit: return "qubit";
        case DriveChannel::storage: return "storage";
        case DriveChannel::readout: return "readout";
    }
    return "unknown";
}

inline DriveChannel drive_channel_from_string(const std::string& s) {
    if (s == "qubit") return DriveChannel::qubit;
    if (s == "storage") return DriveChannel::storage;
    if (s == "readout") return DriveChannel::readout;
    throw Error(ErrorKind::invalid_pulse, "unknown drive channel '" + s + "'");
}

enum class SegmentRole { prep, bsb_store, qubit_store, qubit_retrieve, bsb_retrieve, analysis, drive };

inline std::string to_string(SegmentRole r) {
    switch (r) {
        case SegmentRole::prep: return "prep";
        case SegmentRole::bsb_store: return "bsb_store";
        case SegmentRole::qubit_store: return "qubit_store";
        case SegmentRole::qubit_retrieve: return "qubit_retrieve";
        case SegmentRole::bsb_retrieve: return "bsb_retrieve";
        case SegmentRole::analysis: return "analysis";
        case SegmentRole::drive: return "drive";
    }
    return "drive";
}

inline SegmentRole segment_role_from_string(const std::string& s) {
    for (auto r : {SegmentRole::prep, SegmentRole::bsb_store, SegmentRole::qubit_store, SegmentRole::qubit_retrieve,
                   SegmentRole::bsb_retrieve, SegmentRole::analysis, SegmentRole::drive}) {
        if (to_string(r) == s) return r;
    }
    throw Error(ErrorKind::invalid_pulse, "unknown segment role '" + s + "'");
}

inline constexpr double default_rise = units::ns(20.0);
inline constexpr double flank_sigmas = 2.5;

struct PulseSegment {
    DriveChannel target = DriveChannel::qubit;
    double amplitude = 0.0;  // rad/us
    double carrier = 0.0;    // rad/us
    double phase = 0.0;      // rad
    double plateau = 0.0;    // us
    double rise = default_rise;
    double start = 0.0;
    SegmentRole role = SegmentRole::drive;

    double sigma() const noexcept { return 0.5 * rise; }
    double flank() const noexcept { return flank_sigmas * sigma(); }
    double duration() const noexcept { return plateau + 2.0 * flank(); }
    double end() const noexcept { return start + duration(); }

    void validate() const {
        if (amplitude < 0.0) throw Error(ErrorKind::invalid_pulse, "amplitude must be >= 0");
        if (plateau < 0.0) throw Error(ErrorKind::invalid_pulse, "plateau must be >= 0");
        if (!(rise > 0.0)) throw Error(ErrorKind::invalid_pulse, "rise must be > 0");
    }

    friend bool operator==(const PulseSegment&, const PulseSegment&) = default;
};

// Normalized flank value a distance tau (>= 0) into the flank, reaching 1 at tau = flank.
inline double flank_shape(double tau, double sigma) noexcept {
    const double u = (tau - flank_sigmas * sigma) / sigma;
    const double base = std::exp(-0.5 * flank_sigmas * flank_sigmas);
    return (std::exp(-0.5 * u * u) - base) / (1.0 - base);
}

// Normalized envelope in [0, 1].
inline double envelope_shape(const PulseSegment& seg, double t) noexcept {
    const double tau = t - seg.start;
    if (tau <= 0.0 || tau >= seg.duration()) return 0.0;
    const double f = seg.flank();
    if (tau < f) return flank_shape(tau, seg.sigma());
    if (tau <= f + seg.plateau) return 1.0;
    return flank_shape(seg.duration() - tau, seg.sigma());
}

inline double envelope_at(const PulseSegment& seg, double t) noexcept { return seg.amplitude * envelope_shape(seg, t); }

// Integral of one normalized flank.
inline double flank_area(double rise) noexcept {
    const double sigma = 0.5 * rise;
    const double s = flank_sigmas;
    const double base = std::exp(-0.5 * s * s);
    const double gauss = std::sqrt(std::numbers::pi / 2.0) * std::erf(s / std::numbers::sqrt2);
    return sigma * (gauss - s * base) / (1.0 - base);
}

// Rotation angle of a resonant two-level drive: amplitude * integral of the shape.
inline double pulse_area(const PulseSegment& seg) noexcept {
    return seg.amplitude * (seg.plateau + 2.0 * flank_area(seg.rise));
}

// ------------------------------- sequences ----------------------------------

class PulseSequence {
public:
    PulseSequence() = default;

    void add(const PulseSegment& seg) {
        seg.validate();
        for (const auto& s : segments_) {
            if (s.target == seg.target && seg.start < s.end() - 1e-12 && s.start < seg.end() - 1e-12) {
                throw Error(ErrorKind::invalid_pulse, "segments overlap on channel " + to_string(seg.target));
            }
        }
        segments_.push_back(seg);
        std::stable_sort(segments_.begin(), segments_.end(),
                         [](const PulseSegment& a, const PulseSegment& b) { return a.start < b.start; });
    }

    const std::vector<PulseSegment>& segments() const noexcept { return segments_; }
    bool empty() const noexcept { return segments_.empty(); }

    double start_time() const noexcept { return segments_.empty() ? 0.0 : segments_.front().start; }
    double end_time() const noexcept {
        double e = 0.0;
        for (const auto& s : segments_) e = std::max(e, s.end());
        if (readout_marker_) e = std::max(e, *readout_marker_);
        return e;
    }
    double total_duration() const noexcept { return end_time() - start_time(); }

    void set_readout_marker(double t) { readout_marker_ = t; }
    std::optional<double> readout_marker() const noexcept { return readout_marker_; }

    // Storage + retrieval window (prep and analysis pulses excluded).
    void set_protocol_window(double from, double to) {
        window_from_ = from;
        window_to_ = to;
    }
    double protocol_length() const noexcept { return window_to_ - window_from_; }
    double protocol_start() const noexcept { return window_from_; }
    double protocol_end() const noexcept { return window_to_; }

    std::vector<PulseSegment> with_role(SegmentRole r) const {
        std::vector<PulseSegment> out;
        for (const auto& s : segments_)
            if (s.role == r) out.push_back(s);
        return out;
    }

    // True when some segment overlaps the open interval (from, to).
    bool driven_between(double from, double to) const noexcept {
        for (const auto& s : segments_)
            if (s.amplitude > 0.0 && s.start < to && s.end() > from) return true;
        return false;
    }

private:
    std::vector<PulseSegment> segments_;
    std::optional<double> readout_marker_;
    double window_from_ = 0.0;
    double window_to_ = 0.0;
};

// ------------------------------- calibration --------------------------------

struct PiPulse {
    DriveChannel channel = DriveChannel::qubit;
    double amplitude = 0.0;
    double carrier = 0.0;
    double plateau = 0.0;
    double rise = default_rise;
    double transfer = 0.0;      // achieved target population, noiseless
    double stark_offset = 0.0;  // carrier shift relative to the undriven transition (rad/us)

    double duration() const noexcept { return plateau + 2.0 * flank_sigmas * 0.5 * rise; }
};

struct CalibrationResult {
    std::optional<PiPulse> qubit;
    std::optional<PiPulse> bsb;
};

struct MemorySequenceOptions {
    double t0 = 0.0;
    // Optional final qubit rotation (Ramsey analysis pulse) with its phase.
    std::optional<double> analysis_angle;
    double analysis_phase = 0.0;
    bool include_prep = true;
};

namespace detail {

inline PulseSegment from_pi(const PiPulse& pi, double start, SegmentRole role) {
    PulseSegment s;
    s.target = pi.channel;
    s.amplitude = pi.amplitude;
    s.carrier = pi.carrier;
    s.plateau = pi.plateau;
    s.rise = pi.rise;
    s.start = start;
    s.role = role;
    return s;
}

// Qubit rotation by angle theta using the calibrated pi-pulse shape.
inline PulseSegment rotation(const PiPulse& pi, double theta, double phase, double start, SegmentRole role) {
    PulseSegment s = from_pi(pi, start, role);
    s.amplitude = pi.amplitude * std::abs(theta) / std::numbers::pi;
    s.phase = phase + (theta < 0.0 ? std::numbers::pi : 0.0);
    return s;
}

// Qubit pi-pulse repeated `multiplier` times by extending the plateau.
inline PulseSegment odd_pi(const PiPulse& pi, int multiplier, double start, SegmentRole role) {
    PulseSegment s = from_pi(pi, start, role);
    s.plateau = pi.plateau + (multiplier - 1) * std::numbers::pi / pi.amplitude;
    return s;
}

}  // namespace detail

// prep(theta) -> BSB pi -> qubit pi*m -> wait -> qubit pi*m -> BSB pi -> [analysis] -> readout.
inline PulseSequence build_memory_sequence(const DeviceParams& p, double prep_angle, double storage_delay,
                                           const CalibrationResult& cal, int qubit_pi_multiplier = 1,
                                           const MemorySequenceOptions& opt = {}) {
    p.require_valid();
    if (!cal.qubit || !cal.bsb) throw Error(ErrorKind::uncalibrated_protocol, "qubit and BSB pi-pulses are required");
    if (qubit_pi_multiplier < 1 || qubit_pi_multiplier % 2 == 0) {
        throw Error(ErrorKind::invalid_pulse, "qubit pi multiplier must be a positive odd integer");
    }
    if (storage_delay < 0.0) throw Error(ErrorKind::invalid_pulse, "storage delay must be >= 0");
    const PiPulse& qpi = *cal.qubit;
    const PiPulse& bpi = *cal.bsb;

    PulseSequence seq;
    double t = opt.t0;
    if (opt.include_prep) {
        auto prep = detail::rotation(qpi, prep_angle, 0.0, t, SegmentRole::prep);
        seq.add(prep);
        t = prep.end();
    }
    const double window_from = t;

    auto b1 = detail::from_pi(bpi, t, SegmentRole::bsb_store);
    seq.add(b1);
    t = b1.end();
    auto q1 = detail::odd_pi(qpi, qubit_pi_multiplier, t, SegmentRole::qubit_store);
    seq.add(q1);
    t = q1.end() + storage_delay;
    auto q2 = detail::odd_pi(qpi, qubit_pi_multiplier, t, SegmentRole::qubit_retrieve);
    seq.add(q2);
    t = q2.end();
    auto b2 = detail::from_pi(bpi, t, SegmentRole::bsb_retrieve);
    seq.add(b2);
    t = b2.end();
    // The idle storage time is not part of the protocol length.
    seq.set_protocol_window(window_from, t - storage_delay);

    if (opt.analysis_angle) {
        auto a = detail::rotation(qpi, *opt.analysis_angle, opt.analysis_phase, t, SegmentRole::analysis);
        seq.add(a);
        t = a.end();
    }
    seq.set_readout_marker(t);
    return seq;
}

// ------------------------------- serialization ------------------------------

// Times in ns, frequencies in GHz (linear), amplitudes in MHz (linear).
inline nlohmann::json to_json(const PulseSegment& s) {
    return {{"target", to_string(s.target)},
            {"role", to_string(s.role)},
            {"amplitude_MHz", units::to_MHz(s.amplitude)},
            {"carrier_GHz", units::to_GHz(s.carrier)},
            {"phase_rad", s.phase},
            {"start_ns", units::to_ns(s.start)},
            {"plateau_ns", units::to_ns(s.plateau)},
            {"rise_ns", units::to_ns(s.rise)}};
}

inline PulseSegment segment_from_json(const nlohmann::json& j) {
    PulseSegment s;
    s.target = drive_channel_from_string(j.at("target").get<std::string>());
    s.role = segment_role_from_string(j.value("role", std::string("drive")));
    s.amplitude = units::MHz(j.at("amplitude_MHz").get<double>());
    s.carrier = units::GHz(j.at("carrier_GHz").get<double>());
    s.phase = j.value("phase_rad", 0.0);
    s.start = units::ns(j.at("start_ns").get<double>());
    s.plateau = units::ns(j.at("plateau_ns").get<double>());
    s.rise = units::ns(j.value("rise_ns", units::to_ns(default_rise)));
    return s;
}

inline nlohmann::json to_json(const PulseSequence& seq) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : seq.segments()) segs.push_back(to_json(s));
    nlohmann::json j = {{"segments", segs},
                        {"total_duration_ns", units::to_ns(seq.total_duration())},
                        {"protocol_start_ns", units::to_ns(seq.protocol_start())},
                        {"protocol_end_ns", units::to_ns(seq.protocol_end())}};
    if (seq.readout_marker()) j["readout_ns"] = units::to_ns(*seq.readout_marker());
    return j;
}

inline PulseSequence sequence_from_json(const nlohmann::json& j) {
    PulseSequence seq;
    for (const auto& s : j.at("segments")) seq.add(segment_from_json(s));
    seq.set_protocol_window(units::ns(j.value("protocol_start_ns", 0.0)), units::ns(j.value("protocol_end_ns", 0.0)));
    if (j.contains("readout_ns")) seq.set_readout_marker(units::ns(j.at("readout_ns").get<double>()));
    return seq;
}

}  // namespace qmem
