// Master equation, calibration, protocol and configuration tests.

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "integrator_checks.hpp"
#include "qmem/calibration.hpp"
#include "qmem/config.hpp"
#include "qmem/protocol.hpp"

using namespace qmem;
constexpr double pi = std::numbers::pi;

// ------------------------------- integrator ---------------------------------

TEST(Lindblad, AnalyticDecay) {
    EXPECT_LT(checks::analytic_decay_error(0.01), 1e-4);
    EXPECT_LT(checks::analytic_decay_error(0.002, 4.0, 1.0), 1e-4);
}

TEST(Lindblad, StepHalvingIsFourthOrder) {
    const double r = checks::step_halving_ratio();
    EXPECT_GT(r, 12.0);
    EXPECT_LT(r, 20.0);
}

TEST(Lindblad, ResonantRabi) { EXPECT_LT(checks::rabi_error(), 1e-4); }

TEST(Lindblad, RamseyT2) {
    const auto r = checks::ramsey_t2();
    EXPECT_NEAR(r.fitted / r.expected, 1.0, 0.02);
    DeviceParams p;
    p.t2_q = 1.5;
    const auto r2 = checks::ramsey_t2(p);
    EXPECT_NEAR(r2.fitted / r2.expected, 1.0, 0.02);
}

TEST(Lindblad, TracePositivityPurity) {
    const auto r = checks::invariants();
    EXPECT_GE(r.span, 10.0);
    EXPECT_LT(r.max_trace_error, 1e-8);
    EXPECT_GE(r.min_eigenvalue, -1e-9);
    EXPECT_LE(r.max_purity, 1.0 + 1e-9);
}

TEST(Lindblad, DephasingNeverPurifies) {
    EXPECT_LE(checks::purity_increase(checks::dephasing_only()), 1e-12);
    // Amplitude damping does purify towards the vacuum.
    EXPECT_GT(checks::purity_increase(Decoherence::all()), 0.0);
}

TEST(Lindblad, FrameInvariance) { EXPECT_LT(checks::frame_invariance_error(), 1e-6); }

TEST(Lindblad, ThermalSteadyState) {
    const DeviceParams p;
    const SubsystemDims dims{2, 2, 1};
    LindbladModel m;
    m.params = p;
    m.dims = dims;
    m.frame = Frame::uniform(p.omega_q);
    m.drift = OperatorMatrix::Zero(dims.total(), dims.total());
    Decoherence d = Decoherence::none();
    d.qubit_relaxation = true;
    d.thermal = true;
    m.channels = collapse_channels(p, dims, d);
    EvolveOptions o;
    o.dt = units::ns(5.0);
    const auto traj = evolve(m, QuantumState::basis(dims, 0), 0.0, 15.0 * p.t1_q, o);
    const double pe = transmon_populations(traj.final_rho, dims)[1];
    EXPECT_NEAR(pe / p.p_thermal, 1.0, 0.05);
}

TEST(Lindblad, DephasingChannelRate) {
    const DeviceParams p;
    const auto ch = collapse_channels(p, {3, 2, 1}, Decoherence::all());
    bool found = false;
    for (const auto& c : ch) {
        if (c.name != "qubit_dephasing") continue;
        found = true;
        EXPECT_NEAR(c.rate, 2.0 / pure_dephasing_time(p.t1_q, p.t2_q), 1e-12);
    }
    EXPECT_TRUE(found);
    DeviceParams q;
    q.t2_q = 2.0 * q.t1_q;
    for (const auto& c : collapse_channels(q, {3, 2, 1}, Decoherence::all())) EXPECT_NE(c.name, "qubit_dephasing");
}

TEST(Lindblad, StepBound) {
    const DeviceParams p;
    const LindbladModel m = build_model(p, {3, 5, 2}, PulseSequence{});
    EXPECT_NO_THROW(m.check_step(units::ns(0.02)));
    try {
        m.check_step(units::ns(0.05));
        FAIL() << "no step-size error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::step_size);
        EXPECT_NE(std::string(e.what()).find("required dt <="), std::string::npos);
    }
    EXPECT_THROW(m.check_step(0.0), Error);
}

TEST(Lindblad, DivergenceDetected) {
    const LindbladModel m = checks::decay_model(1000.0);
    EvolveOptions o;
    o.dt = 0.01;
    o.check_positivity = false;
    o.sample_every = 1;
    try {
        evolve(m, QuantumState::basis(m.dims, 0, 1, 0), 0.0, 2.0, o);
        FAIL() << "no divergence error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::integration_diverged);
    }
}

TEST(Lindblad, CounterRotatingTerms) {
    const DeviceParams p;
    PulseSequence seq;
    PulseSegment s;
    s.amplitude = units::MHz(20.0);
    s.carrier = p.omega_q;
    seq.add(s);
    ModelOptions mo;
    const auto rwa = build_model(p, {3, 2, 1}, seq, mo);
    mo.drive_rwa = false;
    const auto full = build_model(p, {3, 2, 1}, seq, mo);
    EXPECT_EQ(full.terms.size(), rwa.terms.size() + 1);
    EXPECT_NEAR(full.terms.back().freq, -2.0 * p.omega_q, 1e-9);
    EXPECT_TRUE(full.hermitian_generator());
}

TEST(Lindblad, FreePropagatorMatchesRk4) {
    const DeviceParams p;
    const SubsystemDims dims{2, 3, 2};
    const LindbladModel m = build_model(p, dims, PulseSequence{});
    StateVector psi = StateVector::Zero(dims.total());
    psi(dims.index(0, 0, 0)) = 1.0;
    psi(dims.index(1, 1, 0)) = 1.0;
    psi(dims.index(0, 2, 1)) = cplx(0.0, 1.0);
    const QuantumState rho0 = QuantumState::pure(psi, dims);
    FreePropagator fp(m);
    const double t0 = 0.013, span = 0.05;
    const OperatorMatrix exact = fp.propagate(rho0.rho(), t0, span);
    auto error = [&](double dt) {
        EvolveOptions o;
        o.dt = dt;
        return max_abs(exact - evolve(m, rho0, t0, t0 + span, o).final_rho);
    };
    const double coarse = error(units::ns(0.02)), fine = error(units::ns(0.005));
    EXPECT_LT(coarse, 1e-4);
    EXPECT_LT(fine, 1e-7);
    EXPECT_GT(coarse / fine, 100.0);
}

TEST(Lindblad, TrajectoryCsv) {
    const LindbladModel m = checks::decay_model(1.0);
    const CompositeOperators ops(m.dims);
    EvolveOptions o;
    o.dt = 0.1;
    o.sample_every = 5;
    o.observables = {{"n_s", ops.a_s.adjoint() * ops.a_s}};
    const auto traj = evolve(m, QuantumState::basis(m.dims, 0, 1, 0), 0.0, 1.0, o);
    std::ostringstream os;
    write_trajectory_csv(os, traj);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t_us,observable_name,value");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 3);
}

TEST(Lindblad, DressedStorageShift) {
    const DeviceParams p;
    const SubsystemDims d{3, 5, 2};
    const double shift = dressed_transition(p, d, {1, 0, 0}, {1, 1, 0}) - dressed_transition(p, d, {0, 0, 0}, {0, 1, 0});
    const double chi = dispersive_shift_estimate(p.g, p.omega_q - p.omega_s, p.alpha);
    EXPECT_NEAR(shift / (2.0 * chi), 1.0, 0.15);
}

// ------------------------------- calibration --------------------------------

TEST(Calibration, QubitPiHasAreaPi) {
    DeviceParams p;
    p.g = units::MHz(1e-3);
    const PiPulse pi_pulse = calibrate_pi_pulse(p, {2, 2, 1}, PiTarget::qubit, units::MHz(20.0));
    PulseSegment s;
    s.amplitude = pi_pulse.amplitude;
    s.plateau = pi_pulse.plateau;
    s.rise = pi_pulse.rise;
    EXPECT_NEAR(pulse_area(s) / pi, 1.0, 0.01);
    EXPECT_GT(pi_pulse.transfer, 0.999);
}

TEST(Calibration, SidebandTimeAndScaling) {
    const DeviceParams p;
    CalibrationOptions co;
    co.route = DriveChannel::storage;
    const SubsystemDims d{2, 6, 2};
    const double a1 = units::GHz(0.4), a2 = units::GHz(0.8);
    const PiPulse lo = calibrate_pi_pulse(p, d, PiTarget::bsb, a1, co);
    const PiPulse hi = calibrate_pi_pulse(p, d, PiTarget::bsb, a2, co);
    EXPECT_NEAR(hi.duration() / bsb_pi_time(bsb_effective_rate(p, 0.5 * a2)), 1.0, 0.2);
    EXPECT_NEAR(lo.duration() / hi.duration(), 4.0, 0.4);
    const PiPulse again = calibrate_pi_pulse(p, d, PiTarget::bsb, a2, co);
    EXPECT_EQ(again.plateau, hi.plateau);
}

TEST(Calibration, RejectsZeroAmplitude) {
    EXPECT_THROW(calibrate_pi_pulse(DeviceParams{}, {3, 5, 2}, PiTarget::qubit, 0.0), Error);
}

// ------------------------------- protocol -----------------------------------

TEST(Protocol, CorrectionIdentity) {
    for (double fz : {0.5, 0.82, 0.97})
        for (double tp : {0.1, 0.37, 0.8}) {
            const double c = corrected_fidelity(fz, tp, 1.32);
            EXPECT_NEAR(c * std::exp(-tp / 1.32), fz, 1e-12);
        }
    EXPECT_EQ(corrected_fidelity(0.9, 0.37, units::unbounded), 0.9);
}

TEST(Protocol, StorageRingdown) {
    RingdownOptions o;
    const auto r = mode_ringdown_experiment(DeviceParams{}, Mode::storage, o);
    const double t1 = 1.0 / DeviceParams{}.kappa_s;
    EXPECT_NEAR(r.summary.at("energy_decay_us") / t1, 1.0, 0.05);
    EXPECT_NEAR(r.summary.at("amplitude_decay_us") / (2.0 * t1), 1.0, 0.05);
}

TEST(Protocol, RecordCsv) {
    ExperimentRecord r;
    r.kind = "fock-decay";
    r.sweep_variable = "delay_us";
    r.observable = "p_g";
    r.data = {{1.0, 0.5, 0.0}, {2.0, 1.0 / 3.0, 0.01}};
    r.validate();
    std::ostringstream os;
    write_csv(os, r);
    std::istringstream in(os.str());
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    std::getline(in, row);
    EXPECT_NE(header.find("delay_us"), std::string::npos);
    EXPECT_NE(row.find("0.33333333333333331"), std::string::npos);
}

// ------------------------------- configuration ------------------------------

namespace {

const char* minimal_config = R"(# test
omega_q = 6.234 GHz
kappa_s = 24.7 kHz
t1_q = 1320 ns
dt = 0.02 ns
transmon_levels = 3
)";

}  // namespace

TEST(Config, ParsesUnits) {
    const RunConfig c = parse_config(minimal_config);
    EXPECT_NEAR(c.device.omega_q, 2.0 * pi * 6234.0, 1e-9);
    EXPECT_NEAR(c.device.kappa_s, 2.0 * pi * 0.0247, 1e-12);
    EXPECT_NEAR(c.device.t1_q, 1.32, 1e-12);
    EXPECT_NEAR(c.sim.dt, 2e-5, 1e-15);
}

TEST(Config, RejectsBadInput) {
    EXPECT_THROW(parse_config("omega_q = 6.234"), Error);
    EXPECT_THROW(parse_config("t1_q = 1.32"), Error);
    EXPECT_THROW(parse_config("t1_q = 1.32 GHz"), Error);
    EXPECT_THROW(parse_config("omega_q = 6 GHz\nomega_q = 6 GHz"), Error);
    EXPECT_THROW(parse_config("colour = red"), Error);
    EXPECT_THROW(parse_config("omega_q ="), Error);
    EXPECT_THROW(parse_config("omega_q"), Error);
    try {
        parse_config("alpha = -185 MHz\nfoo = 1", "dev.cfg");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
        EXPECT_NE(std::string(e.what()).find("dev.cfg:2"), std::string::npos);
    }
    try {
        load_config("/nonexistent/qmem.cfg");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::usage);
    }
}

TEST(Config, Violations) {
    RunConfig c = parse_config(minimal_config);
    EXPECT_TRUE(config_violations(c).empty());
    c.device.t2_q = 3.0 * c.device.t1_q;
    EXPECT_FALSE(config_violations(c).empty());
    c = parse_config(minimal_config);
    c.sim.dt = units::ns(0.05);
    const auto v = config_violations(c);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_NE(v.front().find("required dt <="), std::string::npos);
    c = parse_config(minimal_config);
    c.multiplier = 2;
    EXPECT_FALSE(config_violations(c).empty());
}

TEST(Config, ManifestRoundTrip) {
    RunConfig c = parse_config(minimal_config);
    c.experiment = "memory-ramsey";
    c.sweep = parse_sweep("delay_us=0:20:41");
    c.seed = 7;
    c.sim.decoherence = Decoherence::storage_only();
    const auto j = to_manifest(c);
    const RunConfig back = from_manifest(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(to_manifest(back).dump(), j.dump());
    EXPECT_EQ(back.device.omega_q, c.device.omega_q);
    EXPECT_EQ(back.seed, 7u);
}

TEST(Config, Sweeps) {
    const Sweep s = parse_sweep("t_p_us=0.3:0.6:4");
    EXPECT_EQ(s.variable, "t_p_us");
    ASSERT_EQ(s.values().size(), 4u);
    EXPECT_NEAR(s.values()[3], 0.6, 1e-15);
    EXPECT_THROW(parse_sweep("x=1:2"), Error);
    EXPECT_THROW(parse_sweep("x=2:1:3"), Error);
    EXPECT_THROW(parse_sweep("x=a:1:3"), Error);
}
