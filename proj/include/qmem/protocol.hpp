// protocol.hpp — storage/retrieval protocol and the experiments built on it.
//
// Simulation runs in the bare multi-rotating frame. Driven intervals are
// integrated with RK4; undriven intervals (storage delays, ringdown) use the
// exact propagator. p_g is the transmon ground population with both modes
// traced out.

#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qmem/analysis.hpp"
#include "qmem/calibration.hpp"
#include "qmem/device.hpp"
#include "qmem/error.hpp"
#include "qmem/lindblad.hpp"
#include "qmem/parallel.hpp"
#include "qmem/pulse.hpp"
#include "qmem/qsys.hpp"
#include "qmem/tomography.hpp"
#include "qmem/units.hpp"

namespace qmem {

enum class FrameChoice { bare, storage, qubit };

inline std::string to_string(FrameChoice f) {
    switch (f) {
        case FrameChoice::bare: return "bare";
        case FrameChoice::storage: return "storage";
        case FrameChoice::qubit: return "qubit";
    }
    return "bare";
}

inline FrameChoice frame_from_string(const std::string& s) {
    if (s == "bare") return FrameChoice::bare;
    if (s == "storage") return FrameChoice::storage;
    if (s == "qubit") return FrameChoice::qubit;
    throw Error(ErrorKind::config, "unknown frame '" + s + "' (bare | storage | qubit)");
}

inline Frame make_frame(const DeviceParams& p, FrameChoice f) {
    switch (f) {
        case FrameChoice::storage: return Frame::uniform(p.omega_s);
        case FrameChoice::qubit: return Frame::uniform(p.omega_q);
        case FrameChoice::bare: break;
    }
    return Frame::bare(p);
}

struct SimulationSettings {
    SubsystemDims dims{};
    double dt = units::ns(0.02);
    FrameChoice frame = FrameChoice::bare;
    Decoherence decoherence = Decoherence::all();
    bool drive_rwa = true;
};

inline nlohmann::json to_json(const SimulationSettings& s) {
    return {{"dims", {s.dims.n_transmon_levels, s.dims.n_storage_photons, s.dims.n_readout_photons}},
            {"dt_ns", units::to_ns(s.dt)},
            {"frame", to_string(s.frame)},
            {"drive_rwa", s.drive_rwa},
            {"decoherence",
             {{"qubit_relaxation", s.decoherence.qubit_relaxation},
              {"qubit_dephasing", s.decoherence.qubit_dephasing},
              {"thermal", s.decoherence.thermal},
              {"storage_decay", s.decoherence.storage_decay},
              {"readout_decay", s.decoherence.readout_decay},
              {"storage_dephasing_time_us", s.decoherence.storage_dephasing_time
                                                ? nlohmann::json(*s.decoherence.storage_dephasing_time)
                                                : nlohmann::json(nullptr)}}}};
}

inline LindbladModel make_model(const DeviceParams& p, const SimulationSettings& s, const PulseSequence& seq) {
    ModelOptions mo;
    mo.frame = make_frame(p, s.frame);
    mo.drive_rwa = s.drive_rwa;
    mo.decoherence = s.decoherence;
    return build_model(p, s.dims, seq, mo);
}

inline std::shared_ptr<FreePropagator> make_free_propagator(const DeviceParams& p, const SimulationSettings& s) {
    return std::make_shared<FreePropagator>(make_model(p, s, PulseSequence{}));
}

// Evolves a density matrix through a pulse sequence.
class SequenceRunner {
public:
    SequenceRunner(const DeviceParams& p, const SimulationSettings& s, const PulseSequence& seq,
                   std::shared_ptr<FreePropagator> free = nullptr)
        : settings_(s), model_(make_model(p, s, seq)), free_(std::move(free)) {
        model_.check_step(s.dt);
        if (!free_) free_ = make_free_propagator(p, s);
        for (const auto& seg : seq.segments()) {
            if (seg.amplitude <= 0.0) continue;
            if (!busy_.empty() && seg.start <= busy_.back().second + 1e-12) {
                busy_.back().second = std::max(busy_.back().second, seg.end());
            } else {
                busy_.emplace_back(seg.start, seg.end());
            }
        }
    }

    OperatorMatrix run(OperatorMatrix rho, double t_from, double t_to) const {
        double t = t_from;
        EvolveOptions eo;
        eo.dt = settings_.dt;
        for (const auto& [a, b] : busy_) {
            if (b <= t) continue;
            if (a >= t_to) break;
            if (a > t) {
                rho = free_->propagate(rho, t, a - t);
                t = a;
            }
            const double stop = std::min(b, t_to);
            rho = evolve(model_, QuantumState(rho, model_.dims, false), t, stop, eo).final_rho;
            t = stop;
        }
        if (t_to > t) rho = free_->propagate(rho, t, t_to - t);
        return rho;
    }

    const LindbladModel& model() const noexcept { return model_; }

private:
    SimulationSettings settings_;
    LindbladModel model_;
    std::shared_ptr<FreePropagator> free_;
    std::vector<std::pair<double, double>> busy_;
};

inline double ground_population(const OperatorMatrix& rho, const SubsystemDims& dims) {
    return transmon_populations(rho, dims)[0];
}

// ------------------------------- calibration --------------------------------

struct ProtocolOptions {
    SimulationSettings sim;
    std::optional<CalibrationResult> calibration;  // calibrated on demand when empty
    double qubit_amplitude = units::MHz(20.0);
    double bsb_amplitude = units::GHz(1.0);  // Rabi amplitude; the co-rotating coefficient is half of it
    DriveChannel bsb_route = DriveChannel::qubit;
    int multiplier = 1;
    int jobs = 1;
};

inline CalibrationOptions calibration_options(const ProtocolOptions& o) {
    CalibrationOptions c;
    c.dt = o.sim.dt;
    c.route = o.bsb_route;
    return c;
}

inline CalibrationResult calibrate_protocol(const DeviceParams& p, const ProtocolOptions& o) {
    CalibrationResult c;
    const CalibrationOptions co = calibration_options(o);
    c.qubit = calibrate_pi_pulse(p, o.sim.dims, PiTarget::qubit, o.qubit_amplitude, co);
    c.bsb = calibrate_pi_pulse(p, o.sim.dims, PiTarget::bsb, o.bsb_amplitude, co);
    return c;
}

inline const CalibrationResult& ensure_calibrated(const DeviceParams& p, ProtocolOptions& o) {
    if (!o.calibration) o.calibration = calibrate_protocol(p, o);
    return *o.calibration;
}

// ------------------------------- memory protocol ----------------------------

struct ProtocolResult {
    double p_g = 0.0;
    double protocol_length = 0.0;
    PulseSequence sequence;
    OperatorMatrix final_rho;
    std::optional<OperatorMatrix> stored_rho;  // after the storage half
};

struct MemoryRunOptions {
    std::optional<double> analysis_angle;
    double analysis_phase = 0.0;
    bool keep_stored = false;
};

inline ProtocolResult run_memory_protocol(const DeviceParams& p, double prep_angle, double storage_delay,
                                          ProtocolOptions opt, const MemoryRunOptions& run = {}) {
    const CalibrationResult& cal = ensure_calibrated(p, opt);
    MemorySequenceOptions mo;
    mo.analysis_angle = run.analysis_angle;
    mo.analysis_phase = run.analysis_phase;
    ProtocolResult r;
    r.sequence = build_memory_sequence(p, prep_angle, storage_delay, cal, opt.multiplier, mo);
    r.protocol_length = r.sequence.protocol_length();
    const SequenceRunner runner(p, opt.sim, r.sequence);
    OperatorMatrix rho = QuantumState::basis(opt.sim.dims, 0).rho();
    if (run.keep_stored) {
        const double t_mid = r.sequence.with_role(SegmentRole::qubit_store).front().end();
        rho = runner.run(rho, 0.0, t_mid);
        r.stored_rho = rho;
        rho = runner.run(rho, t_mid, r.sequence.end_time());
    } else {
        rho = runner.run(rho, 0.0, r.sequence.end_time());
    }
    r.final_rho = rho;
    r.p_g = ground_population(rho, opt.sim.dims);
    return r;
}

// p_g after the prep pulse alone (reference for F_Z).
inline double reference_ground_population(const DeviceParams& p, double prep_angle, ProtocolOptions opt) {
    const CalibrationResult& cal = ensure_calibrated(p, opt);
    PulseSequence seq;
    const auto prep = detail::rotation(*cal.qubit, prep_angle, 0.0, 0.0, SegmentRole::prep);
    seq.add(prep);
    seq.set_readout_marker(prep.end());
    const SequenceRunner runner(p, opt.sim, seq);
    return ground_population(runner.run(QuantumState::basis(opt.sim.dims, 0).rho(), 0.0, prep.end()), opt.sim.dims);
}

// ------------------------------- records ------------------------------------

struct DataPoint {
    double x = 0.0;
    double y = 0.0;
    double sigma = 0.0;
};

struct ExperimentRecord {
    std::string kind;
    std::string sweep_variable;
    std::string observable;
    std::vector<DataPoint> data;
    std::map<std::string, std::vector<DataPoint>> extra;  // further observables on the same sweep values
    std::map<std::string, FitResult> fits;
    std::map<std::string, double> summary;
    nlohmann::json meta;

    void validate() const {
        if (data.empty()) throw Error(ErrorKind::insufficient_data, kind + ": record has no data");
        for (std::size_t i = 1; i < data.size(); ++i) {
            if (!(data[i].x > data[i - 1].x)) throw Error(ErrorKind::insufficient_data, kind + ": sweep values not increasing");
        }
    }

    std::vector<double> xs() const {
        std::vector<double> v;
        for (const auto& d : data) v.push_back(d.x);
        return v;
    }
    std::vector<double> ys() const {
        std::vector<double> v;
        for (const auto& d : data) v.push_back(d.y);
        return v;
    }
};

inline void write_csv(std::ostream& os, const ExperimentRecord& r) {
    os.precision(17);
    os << r.sweep_variable << ",observable,value,uncertainty\n";
    for (const auto& d : r.data) os << d.x << ',' << r.observable << ',' << d.y << ',' << d.sigma << '\n';
    for (const auto& [name, series] : r.extra)
        for (const auto& d : series) os << d.x << ',' << name << ',' << d.y << ',' << d.sigma << '\n';
}

inline nlohmann::json fits_json(const ExperimentRecord& r) {
    nlohmann::json j = nlohmann::json::object();
    j["kind"] = r.kind;
    for (const auto& [name, f] : r.fits) j["fits"][name] = to_json(f);
    for (const auto& [k, v] : r.summary) j["summary"][k] = v;
    return j;
}

inline nlohmann::json params_json(const DeviceParams& p) {
    using namespace units;
    return {{"omega_ro_GHz", p.omega_ro / GHz(1)}, {"omega_s_GHz", p.omega_s / GHz(1)},
            {"omega_q_GHz", p.omega_q / GHz(1)},   {"alpha_MHz", to_MHz(p.alpha)},
            {"g_MHz", to_MHz(p.g)},                {"g_102_MHz", to_MHz(p.g_102)},
            {"chi_ro_MHz", to_MHz(p.chi_ro)},      {"chi_s_MHz", to_MHz(p.chi_s)},
            {"kappa_ro_MHz", to_MHz(p.kappa_ro)},  {"kappa_s_kHz", to_kHz(p.kappa_s)},
            {"t1_q_us", p.t1_q},                   {"t2_q_us", p.t2_q},
            {"q0_ro", p.q0_ro},                    {"q0_s", p.q0_s},
            {"n_ro", p.n_ro},                      {"p_thermal", p.p_thermal}};
}

inline nlohmann::json to_json(const PiPulse& pi) {
    return {{"channel", to_string(pi.channel)},
            {"amplitude_MHz", units::to_MHz(pi.amplitude)},
            {"carrier_GHz", pi.carrier / units::GHz(1)},
            {"plateau_ns", units::to_ns(pi.plateau)},
            {"rise_ns", units::to_ns(pi.rise)},
            {"duration_ns", units::to_ns(pi.duration())},
            {"transfer", pi.transfer},
            {"stark_offset_MHz", units::to_MHz(pi.stark_offset)}};
}

inline nlohmann::json to_json(const CalibrationResult& c) {
    nlohmann::json j = nlohmann::json::object();
    if (c.qubit) j["qubit"] = to_json(*c.qubit);
    if (c.bsb) j["bsb"] = to_json(*c.bsb);
    return j;
}

inline nlohmann::json record_meta(const DeviceParams& p, const ProtocolOptions& o) {
    nlohmann::json j{{"params", params_json(p)}, {"simulation", to_json(o.sim)}, {"multiplier", o.multiplier}};
    if (o.calibration) j["calibration"] = to_json(*o.calibration);
    return j;
}

// ------------------------------- delay sweeps -------------------------------

namespace detail {

// Runs the storage half once and every delay from the stored state.
inline std::vector<double> delay_sweep(const DeviceParams& p, ProtocolOptions& opt, double prep_angle,
                                       const std::vector<double>& delays,
                                       const std::function<std::optional<std::pair<double, double>>(double)>& analysis) {
    const CalibrationResult& cal = ensure_calibrated(p, opt);
    auto free = make_free_propagator(p, opt.sim);
    const PulseSequence base = build_memory_sequence(p, prep_angle, 0.0, cal, opt.multiplier);
    const double t_mid = base.with_role(SegmentRole::qubit_store).front().end();
    const OperatorMatrix stored =
        SequenceRunner(p, opt.sim, base, free).run(QuantumState::basis(opt.sim.dims, 0).rho(), 0.0, t_mid);
    return parallel_map(
        delays,
        [&](double delay) {
            MemorySequenceOptions mo;
            if (auto a = analysis(delay)) {
                mo.analysis_angle = a->first;
                mo.analysis_phase = a->second;
            }
            const PulseSequence seq = build_memory_sequence(p, prep_angle, delay, cal, opt.multiplier, mo);
            const OperatorMatrix rho = SequenceRunner(p, opt.sim, seq, free).run(stored, t_mid, seq.end_time());
            return ground_population(rho, opt.sim.dims);
        },
        opt.jobs);
}

inline void require_increasing_delays(const std::vector<double>& delays) {
    if (delays.size() < 5) throw Error(ErrorKind::insufficient_data, "need >= 5 delays");
    for (std::size_t i = 1; i < delays.size(); ++i)
        if (!(delays[i] > delays[i - 1])) throw Error(ErrorKind::insufficient_data, "delays must increase");
    if (delays.front() < 0.0) throw Error(ErrorKind::insufficient_data, "delays must be >= 0");
}

}  // namespace detail

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}

// |1>_s stored for each delay; p_g decays with the storage lifetime.
inline ExperimentRecord fock_decay_experiment(const DeviceParams& p, const std::vector<double>& delays,
                                              ProtocolOptions opt = {}) {
    detail::require_increasing_delays(delays);
    const auto pg = detail::delay_sweep(p, opt, 0.0, delays, [](double) { return std::nullopt; });
    ExperimentRecord r;
    r.kind = "fock-decay";
    r.sweep_variable = "delay_us";
    r.observable = "p_g";
    for (std::size_t i = 0; i < delays.size(); ++i) r.data.push_back({delays[i], pg[i], 0.0});
    r.validate();
    const FitResult fit = fit_exponential(r.xs(), r.ys());
    r.fits["exponential"] = fit;
    r.summary["T1_s_us"] = fit.value("T");
    r.summary["T1_s_sigma_us"] = fit.sigma("T");
    r.summary["T1_s_over_T1_q"] = fit.value("T") / p.t1_q;
    r.meta = record_meta(p, opt);
    return r;
}

// Dressed storage frequency with the qubit in |g>, relative to the bare omega_s.
inline double storage_frame_offset(const DeviceParams& p, const SubsystemDims& dims) {
    return dressed_transition(p, dims, {0, 0, 0}, {0, 1, 0}) - p.omega_s;
}

// (|0> + |1>)/sqrt2 stored; the final pi/2 pulse phase advances at
// 2 pi detuning per unit delay, so the retrieved p_g oscillates near
// `detuning` (linear frequency, MHz). Residual dressed shifts show up in fringe_MHz.
inline ExperimentRecord memory_ramsey_experiment(const DeviceParams& p, const std::vector<double>& delays,
                                                 double detuning_mhz, ProtocolOptions opt = {}) {
    detail::require_increasing_delays(delays);
    const double w = 2.0 * std::numbers::pi * detuning_mhz;
    const auto pg = detail::delay_sweep(p, opt, 0.5 * std::numbers::pi, delays, [&](double d) {
        return std::optional<std::pair<double, double>>({0.5 * std::numbers::pi, w * d});
    });
    ExperimentRecord r;
    r.kind = "memory-ramsey";
    r.sweep_variable = "delay_us";
    r.observable = "p_g";
    for (std::size_t i = 0; i < delays.size(); ++i) r.data.push_back({delays[i], pg[i], 0.0});
    r.validate();
    const FitResult fit = fit_decaying_cosine(r.xs(), r.ys());
    r.fits["decaying_cosine"] = fit;
    r.summary["T2_s_us"] = fit.value("T2");
    r.summary["T2_s_sigma_us"] = fit.sigma("T2");
    r.summary["fringe_MHz"] = fit.value("f");
    r.summary["detuning_MHz"] = detuning_mhz;
    r.meta = record_meta(p, opt);
    return r;
}

// Prep rotation swept at a fixed storage delay; the retrieved p_g follows
// the prep angle as a cosine.
inline ExperimentRecord prep_angle_experiment(const DeviceParams& p, const std::vector<double>& angles,
                                              double storage_delay, ProtocolOptions opt = {}) {
    if (angles.size() < 4) throw Error(ErrorKind::insufficient_data, "need >= 4 prep angles");
    ensure_calibrated(p, opt);
    const CompositeOperators ops(opt.sim.dims);
    const OperatorMatrix n_s = ops.a_s.adjoint() * ops.a_s;
    MemoryRunOptions ro;
    ro.keep_stored = true;
    const auto runs = parallel_map(
        angles,
        [&](double a) {
            const ProtocolResult res = run_memory_protocol(p, a, storage_delay, opt, ro);
            return std::pair<double, double>(res.p_g, (*res.stored_rho * n_s).trace().real());
        },
        opt.jobs);
    ExperimentRecord r;
    r.kind = "memory-protocol";
    r.sweep_variable = "prep_angle_rad";
    r.observable = "p_g";
    for (std::size_t i = 0; i < angles.size(); ++i) {
        r.data.push_back({angles[i], runs[i].first, 0.0});
        r.extra["stored_n"].push_back({angles[i], runs[i].second, 0.0});
    }
    r.validate();
    const FitResult fit = fit_angle_cosine(r.xs(), r.ys());
    r.fits["cosine"] = fit;
    r.summary["r_squared"] = fit.derived.at("r_squared");
    r.summary["contrast"] = 2.0 * fit.value("A");
    r.summary["storage_delay_us"] = storage_delay;
    r.meta = record_meta(p, opt);
    return r;
}

// ------------------------------- BSB rate scaling ---------------------------

// Effective BSB rate against the drive amplitude ("omega_drv_GHz") or the
// coupling ("g_MHz"); the log-log slope and the ratio to the closed form
// are in the summary.
inline ExperimentRecord bsb_check_experiment(const DeviceParams& p, const std::string& variable,
                                             const std::vector<double>& values, double omega_drv,
                                             const BsbCheckOptions& opt = {}, int jobs = 1) {
    if (variable != "omega_drv_GHz" && variable != "g_MHz") {
        throw Error(ErrorKind::usage, "bsb-check sweeps omega_drv_GHz or g_MHz, not '" + variable + "'");
    }
    if (values.size() < 2) throw Error(ErrorKind::insufficient_data, "bsb-check needs >= 2 sweep values");
    const bool amp = variable == "omega_drv_GHz";
    const auto recs = parallel_map(
        values,
        [&](double v) {
            DeviceParams q = p;
            if (!amp) q.g = units::MHz(v);
            return effective_bsb_check(q, amp ? units::GHz(v) : omega_drv, opt);
        },
        jobs);
    ExperimentRecord r;
    r.kind = "bsb-check";
    r.sweep_variable = variable;
    r.observable = "omega_eff_MHz";
    std::vector<double> lx, ly;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto& c = recs[i];
        r.data.push_back({values[i], units::to_MHz(c.measured), 0.0});
        r.extra["predicted_MHz"].push_back({values[i], units::to_MHz(c.predicted), 0.0});
        r.extra["spectral_MHz"].push_back({values[i], units::to_MHz(c.spectral), 0.0});
        r.extra["ratio"].push_back({values[i], c.ratio, 0.0});
        r.extra["stark_offset_MHz"].push_back({values[i], units::to_MHz(c.stark_offset), 0.0});
        r.extra["contrast"].push_back({values[i], c.contrast, 0.0});
        lx.push_back(std::log(values[i]));
        ly.push_back(std::log(c.measured));
        lo = std::min(lo, c.ratio);
        hi = std::max(hi, c.ratio);
    }
    r.validate();
    r.summary["slope"] = detail::linear_regression(lx, ly).second;
    r.summary["expected_slope"] = amp ? 2.0 : 3.0;
    r.summary["min_ratio"] = lo;
    r.summary["max_ratio"] = hi;
    r.meta = {{"params", params_json(p)},
              {"dims", {opt.dims.n_transmon_levels, opt.dims.n_storage_photons, opt.dims.n_readout_photons}},
              {"route", to_string(opt.route)}};
    return r;
}

// ------------------------------- ringdown -----------------------------------

enum class Mode { storage, readout };

inline std::string to_string(Mode m) { return m == Mode::storage ? "storage" : "readout"; }

inline Mode mode_from_string(const std::string& s) {
    if (s == "storage") return Mode::storage;
    if (s == "readout") return Mode::readout;
    throw Error(ErrorKind::usage, "unknown mode '" + s + "'");
}

struct RingdownOptions {
    SimulationSettings sim;
    double target_amplitude = 0.2;  // coherent amplitude reached by the drive
    int samples = 81;
    double span_decay_times = 4.0;  // sampled window in units of 2/kappa
};

// Drives the mode to a small coherent amplitude, switches the drive off and
// follows |<a>| and <n>; their exponential fits give the amplitude (2/kappa)
// and energy (1/kappa) decay times.
inline ExperimentRecord mode_ringdown_experiment(const DeviceParams& p, Mode mode, const RingdownOptions& opt = {}) {
    const SubsystemDims& dims = opt.sim.dims;
    const Slot slot = mode == Mode::storage ? Slot::storage : Slot::readout;
    if (dims.levels(slot) < 2) throw Error(ErrorKind::invalid_dimension, "ringdown needs >= 2 levels in the mode");
    const Level one = mode == Mode::storage ? Level{0, 1, 0} : Level{0, 0, 1};
    PulseSegment seg;
    seg.target = mode == Mode::storage ? DriveChannel::storage : DriveChannel::readout;
    seg.carrier = dressed_transition(p, dims, {0, 0, 0}, one);
    seg.plateau = units::ns(10.0);
    seg.amplitude = 2.0 * opt.target_amplitude / (seg.plateau + 2.0 * flank_area(seg.rise));
    seg.role = SegmentRole::drive;
    PulseSequence seq;
    seq.add(seg);

    auto free = make_free_propagator(p, opt.sim);
    const SequenceRunner runner(p, opt.sim, seq, free);
    OperatorMatrix rho = runner.run(QuantumState::basis(dims, 0).rho(), 0.0, seg.end());

    const CompositeOperators ops(dims);
    const OperatorMatrix& a = mode == Mode::storage ? ops.a_s : ops.a_r;
    const OperatorMatrix n = a.adjoint() * a;
    const double kappa = mode == Mode::storage ? p.kappa_s : p.kappa_ro;
    const double dt = opt.span_decay_times * 2.0 / kappa / (opt.samples - 1);

    ExperimentRecord r;
    r.kind = "ringdown";
    r.sweep_variable = "t_us";
    r.observable = "abs_a";
    for (int k = 0; k < opt.samples; ++k) {
        if (k > 0) rho = free->propagate(rho, seg.end() + (k - 1) * dt, dt);
        const QuantumState s(rho, dims, false);
        r.data.push_back({k * dt, std::abs(expectation(s, a)), 0.0});
        r.extra["n"].push_back({k * dt, expectation(s, n).real(), 0.0});
    }
    r.validate();
    std::vector<double> ns;
    for (const auto& d : r.extra["n"]) ns.push_back(d.y);
    const FitResult fa = fit_exponential(r.xs(), r.ys());
    const FitResult fe = fit_exponential(r.xs(), ns);
    r.fits["amplitude"] = fa;
    r.fits["energy"] = fe;
    r.summary["amplitude_decay_us"] = fa.value("T");
    r.summary["energy_decay_us"] = fe.value("T");
    r.summary["amplitude_decay_ns"] = units::to_ns(fa.value("T"));
    r.summary["energy_decay_ns"] = units::to_ns(fe.value("T"));
    r.meta = {{"params", params_json(p)}, {"simulation", to_json(opt.sim)}, {"mode", to_string(mode)}};
    return r;
}

// ------------------------------- Z fidelity ---------------------------------

struct WorkingPoint {
    double bsb_amplitude = 0.0;
    int multiplier = 1;
};

struct ZFidelityPoint {
    WorkingPoint wp;
    double t_p = 0.0;
    double p_g = 0.0;
    double p_g0 = 0.0;
    double f_z = 0.0;
    double f_z_corr = 0.0;
    PiPulse bsb;
};

inline double corrected_fidelity(double f_z, double t_p, double t1_q) { return f_z / std::exp(-t_p / t1_q); }

inline ZFidelityPoint z_fidelity_point(const DeviceParams& p, const WorkingPoint& wp, ProtocolOptions opt,
                                       std::optional<double> p_g0 = std::nullopt) {
    CalibrationResult cal = opt.calibration.value_or(CalibrationResult{});
    const CalibrationOptions co = calibration_options(opt);
    if (!cal.qubit) cal.qubit = calibrate_pi_pulse(p, opt.sim.dims, PiTarget::qubit, opt.qubit_amplitude, co);
    if (!cal.bsb || cal.bsb->amplitude != wp.bsb_amplitude) {
        cal.bsb = calibrate_pi_pulse(p, opt.sim.dims, PiTarget::bsb, wp.bsb_amplitude, co);
    }
    opt.calibration = cal;
    opt.multiplier = wp.multiplier;
    ZFidelityPoint z;
    z.wp = wp;
    z.bsb = *cal.bsb;
    z.p_g0 = p_g0 ? *p_g0 : reference_ground_population(p, 0.0, opt);
    const ProtocolResult res = run_memory_protocol(p, 0.0, 0.0, opt);
    z.t_p = res.protocol_length;
    z.p_g = res.p_g;
    z.f_z = z.p_g / z.p_g0;
    z.f_z_corr = corrected_fidelity(z.f_z, z.t_p, p.t1_q);
    return z;
}

// Protocol length for a BSB amplitude, estimated from the driven resonance.
inline double estimated_protocol_length(const DeviceParams& p, const ProtocolOptions& opt, double bsb_amplitude,
                                        double qubit_duration) {
    const Resonance res = find_resonance(p, opt.sim.dims, opt.bsb_route, 0.5 * bsb_amplitude, {0, 0, 0}, {1, 1, 0});
    const double flank = flank_sigmas * 0.5 * default_rise;
    const double bsb = std::max(0.0, std::numbers::pi / (2.0 * res.rate) - flank) + 2.0 * flank;
    return 2.0 * bsb + 2.0 * qubit_duration;
}

// BSB amplitude whose calibrated protocol length is closest to target_tp.
inline WorkingPoint find_working_point(const DeviceParams& p, double target_tp, int multiplier, ProtocolOptions opt) {
    const CalibrationOptions co = calibration_options(opt);
    const PiPulse qpi = opt.calibration && opt.calibration->qubit
                            ? *opt.calibration->qubit
                            : calibrate_pi_pulse(p, opt.sim.dims, PiTarget::qubit, opt.qubit_amplitude, co);
    const double q_dur = qpi.duration() + (multiplier - 1) * std::numbers::pi / qpi.amplitude;
    double lo = units::GHz(0.2), hi = units::GHz(2.0);
    if (estimated_protocol_length(p, opt, hi, q_dur) > target_tp || estimated_protocol_length(p, opt, lo, q_dur) < target_tp) {
        throw Error(ErrorKind::calibration_failed, "target protocol length outside the reachable range");
    }
    for (int it = 0; it < 40; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (estimated_protocol_length(p, opt, mid, q_dur) > target_tp) lo = mid;
        else hi = mid;
    }
    // Refine with full calibrations (secant on log amplitude).
    double a0 = std::sqrt(lo * hi);
    auto tp_of = [&](double a) {
        return 2.0 * calibrate_pi_pulse(p, opt.sim.dims, PiTarget::bsb, a, co).duration() + 2.0 * q_dur;
    };
    double t0 = tp_of(a0);
    double a1 = a0 * std::pow(t0 / target_tp, 0.5);
    for (int it = 0; it < 4 && std::abs(t0 - target_tp) > units::ns(2.0); ++it) {
        const double t1 = tp_of(a1);
        if (std::abs(t1 - t0) < 1e-12) break;
        const double a2 = std::exp(std::log(a1) + (target_tp - t1) * (std::log(a1) - std::log(a0)) / (t1 - t0));
        a0 = a1;
        t0 = t1;
        a1 = a2;
    }
    return {a0, multiplier};
}

inline ExperimentRecord z_fidelity_sweep(const DeviceParams& p, const std::vector<WorkingPoint>& wps,
                                         ProtocolOptions opt = {}) {
    if (wps.empty()) throw Error(ErrorKind::insufficient_data, "no working points");
    const CalibrationOptions co = calibration_options(opt);
    CalibrationResult cal = opt.calibration.value_or(CalibrationResult{});
    if (!cal.qubit) cal.qubit = calibrate_pi_pulse(p, opt.sim.dims, PiTarget::qubit, opt.qubit_amplitude, co);
    opt.calibration = cal;
    const double p_g0 = reference_ground_population(p, 0.0, opt);
    auto points = parallel_map(wps, [&](const WorkingPoint& wp) { return z_fidelity_point(p, wp, opt, p_g0); }, opt.jobs);
    std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) { return a.t_p < b.t_p; });

    ExperimentRecord r;
    r.kind = "zfidelity-sweep";
    r.sweep_variable = "t_p_us";
    r.observable = "F_Z";
    std::vector<double> tps, corr;
    for (const auto& z : points) {
        r.data.push_back({z.t_p, z.f_z, 0.0});
        r.extra["F_Z_corr"].push_back({z.t_p, z.f_z_corr, 0.0});
        r.extra["p_g"].push_back({z.t_p, z.p_g, 0.0});
        r.extra["bsb_amplitude_MHz"].push_back({z.t_p, units::to_MHz(z.wp.bsb_amplitude), 0.0});
        r.extra["multiplier"].push_back({z.t_p, static_cast<double>(z.wp.multiplier), 0.0});
        tps.push_back(z.t_p);
        corr.push_back(z.f_z_corr);
    }
    r.validate();
    r.summary["p_g0"] = p_g0;
    const auto best = std::max_element(points.begin(), points.end(), [](const auto& a, const auto& b) { return a.f_z < b.f_z; });
    r.summary["max_F_Z"] = best->f_z;
    r.summary["max_F_Z_t_p_us"] = best->t_p;
    if (points.size() >= 4) {
        try {
            r.fits["leakage"] = fit_leakage(tps, corr);
        } catch (const Error& e) {
            r.summary["leakage_fit_failed"] = 1.0;
        }
    }
    r.meta = record_meta(p, opt);
    return r;
}

// ------------------------------- process tomography -------------------------

struct MemoryQpt {
    ProcessTomography tomography;
    ZOptimizedFidelity fidelity;
    double t_p = 0.0;
};

// Memory channel on the four tomography inputs (the input is placed on the
// transmon directly, no prep pulse); output is the g/e block of the transmon.
inline MemoryQpt memory_process_tomography(const DeviceParams& p, ProtocolOptions opt,
                                           const std::optional<ShotSampling>& sampling = std::nullopt,
                                           double storage_delay = 0.0) {
    const CalibrationResult& cal = ensure_calibrated(p, opt);
    MemorySequenceOptions mo;
    mo.include_prep = false;
    const PulseSequence seq = build_memory_sequence(p, 0.0, storage_delay, cal, opt.multiplier, mo);
    auto free = make_free_propagator(p, opt.sim);
    const SequenceRunner runner(p, opt.sim, seq, free);
    const auto inputs = tomography_inputs();
    const std::vector<Qubit2> in(inputs.begin(), inputs.end());
    const auto outs = parallel_map(
        in,
        [&](const Qubit2& q) {
            OperatorMatrix rq = OperatorMatrix::Zero(2, 2);
            rq = q;
            const QuantumState s0 = QuantumState::from_transmon(rq, opt.sim.dims);
            const OperatorMatrix rho = runner.run(s0.rho(), 0.0, seq.end_time());
            const OperatorMatrix t = partial_trace_keep(rho, opt.sim.dims, Slot::transmon);
            return Qubit2(t.topLeftCorner(2, 2));
        },
        opt.jobs);
    std::array<Qubit2, 4> out;
    for (int k = 0; k < 4; ++k) out[k] = outs[k];
    MemoryQpt r;
    r.tomography = process_tomography(out, sampling);
    r.fidelity = z_optimized_fidelity(r.tomography);
    r.t_p = seq.protocol_length();
    return r;
}

// QPT and F_Z at the working point closest to target_tp.
inline ExperimentRecord qpt_experiment(const DeviceParams& p, double target_tp, ProtocolOptions opt = {},
                                       const std::optional<ShotSampling>& sampling = std::nullopt) {
    const CalibrationOptions co = calibration_options(opt);
    CalibrationResult cal;
    cal.qubit = calibrate_pi_pulse(p, opt.sim.dims, PiTarget::qubit, opt.qubit_amplitude, co);
    opt.calibration = cal;
    const WorkingPoint wp = find_working_point(p, target_tp, opt.multiplier, opt);
    const ZFidelityPoint z = z_fidelity_point(p, wp, opt);
    opt.calibration->bsb = z.bsb;
    opt.bsb_amplitude = wp.bsb_amplitude;
    const MemoryQpt q = memory_process_tomography(p, opt, sampling);

    ExperimentRecord r;
    r.kind = "qpt";
    r.sweep_variable = "chi_index";
    r.observable = "chi_re";
    const ChiMatrix& chi = q.fidelity.chi;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const double x = 4 * i + j;
            r.data.push_back({x, chi.entries(i, j).real(), 0.0});
            r.extra["chi_im"].push_back({x, chi.entries(i, j).imag(), 0.0});
            r.extra["chi_raw_re"].push_back({x, q.tomography.chi.entries(i, j).real(), 0.0});
            r.extra["chi_raw_im"].push_back({x, q.tomography.chi.entries(i, j).imag(), 0.0});
        }
    r.validate();
    r.summary["F_QPT"] = q.fidelity.optimized;
    r.summary["F_QPT_raw"] = q.fidelity.raw;
    r.summary["z_angle_rad"] = q.fidelity.angle;
    r.summary["F_Z"] = z.f_z;
    r.summary["F_Z_corr"] = z.f_z_corr;
    r.summary["t_p_us"] = z.t_p;
    r.summary["bsb_amplitude_MHz"] = units::to_MHz(wp.bsb_amplitude);
    r.meta = record_meta(p, opt);
    r.meta["chi_basis"] = "row-major index 4*m+n over {I, X, Y, Z}";
    if (sampling) r.meta["sampling"] = {{"shots", sampling->shots}, {"seed", sampling->seed}};
    return r;
}

}  // namespace qmem
