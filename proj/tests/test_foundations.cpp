// Operator algebra, device relations, envelopes, fitters and tomography.

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "qmem/analysis.hpp"
#include "qmem/device.hpp"
#include "qmem/pulse.hpp"
#include "qmem/qsys.hpp"
#include "qmem/tomography.hpp"

using namespace qmem;
using cd = std::complex<double>;
constexpr double pi = std::numbers::pi;

// ------------------------------- qsys ---------------------------------------

TEST(Qsys, AnnihilationEntries) {
    const auto a2 = annihilation(2);
    EXPECT_EQ(a2(0, 1), cd(1.0));
    EXPECT_EQ(a2(1, 0), cd(0.0));
    const auto a3 = annihilation(3);
    EXPECT_DOUBLE_EQ(a3(1, 2).real(), std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(a3(0, 1).real(), 1.0);
    EXPECT_EQ((a3.cwiseAbs().array() > 0).count(), 2);
    const auto a4 = annihilation(4);
    const OperatorMatrix n = a4.adjoint() * a4;
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(n(k, k).real(), k, 1e-15);
    EXPECT_THROW(annihilation(1), Error);
}

TEST(Qsys, CommutatorOnUntruncatedBlock) {
    const int d = 6;
    const auto a = annihilation(d);
    const OperatorMatrix c = commutator(a, a.adjoint());
    EXPECT_LT(max_abs(c.topLeftCorner(d - 1, d - 1) - OperatorMatrix::Identity(d - 1, d - 1)), 1e-12);
}

TEST(Qsys, DuffingLadder) {
    const double wq = units::GHz(6.234), al = units::MHz(-185.0);
    const auto h2 = transmon_hamiltonian(2, wq, al);
    EXPECT_DOUBLE_EQ(h2(1, 1).real(), wq);
    const auto h3 = transmon_hamiltonian(3, wq, al);
    EXPECT_NEAR(units::to_GHz(h3(2, 2).real()), 2 * 6.234 - 0.185, 1e-12);
    const auto hh = transmon_hamiltonian(3, 5.0, 0.0);
    EXPECT_DOUBLE_EQ(hh(2, 2).real(), 10.0);
}

TEST(Qsys, TensorEmbedding) {
    const SubsystemDims d{2, 2, 1};
    const auto as = tensor_embed(annihilation(2), Slot::storage, d);
    ASSERT_EQ(as.rows(), 4);
    // |q n> index 2q + n: a_s maps |q 1> to |q 0>
    EXPECT_EQ(as(0, 1), cd(1.0));
    EXPECT_EQ(as(2, 3), cd(1.0));
    EXPECT_EQ(as.cwiseAbs().sum(), 2.0);

    const SubsystemDims e{3, 4, 2};
    EXPECT_LT(max_abs(tensor_embed(OperatorMatrix::Identity(4, 4), Slot::storage, e) - OperatorMatrix::Identity(24, 24)), 1e-15);
    const auto a = tensor_embed(annihilation(3), Slot::transmon, e);
    const auto b = tensor_embed(annihilation(4), Slot::storage, e);
    EXPECT_LT(max_abs(commutator(a, b)), 1e-12);
    EXPECT_THROW(tensor_embed(annihilation(3), Slot::storage, e), Error);

    // Spectrum of an embedded operator: each eigenvalue repeated 3*2 times.
    OperatorMatrix h = OperatorMatrix::Zero(4, 4);
    h(0, 1) = cd(0, 1);
    h(1, 0) = cd(0, -1);
    h(2, 2) = 3.0;
    const auto big = tensor_embed(h, Slot::storage, e);
    EXPECT_TRUE(is_hermitian(big));
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(big);
    const auto ev = es.eigenvalues();
    EXPECT_EQ(((ev.array().abs() - 1.0).abs() < 1e-12).count(), 12);
    EXPECT_EQ(((ev.array() - 3.0).abs() < 1e-12).count(), 6);
}

TEST(Qsys, DimsValidation) {
    EXPECT_NO_THROW((SubsystemDims{3, 5, 2}.validate()));
    EXPECT_THROW((SubsystemDims{1, 5, 2}.validate()), Error);
    EXPECT_THROW((SubsystemDims{3, 20, 10}.validate()), Error);
    EXPECT_NO_THROW((SubsystemDims{3, 20, 10}.validate(1000)));
}

TEST(Qsys, Expectations) {
    const SubsystemDims d{2, 3, 1};
    const auto g = QuantumState::basis(d, 0);
    const auto nq = tensor_embed(number_operator(2), Slot::transmon, d);
    EXPECT_EQ(expectation(g, nq), cd(0.0));
    const auto e = QuantumState::basis(d, 1);
    const auto pe = tensor_embed(projector(2, 1), Slot::transmon, d);
    EXPECT_NEAR(expectation(e, pe).real(), 1.0, 1e-15);
    const auto mixed = QuantumState::from_transmon(0.5 * OperatorMatrix::Identity(2, 2), d);
    EXPECT_NEAR(expectation(mixed, pe).real(), 0.5, 1e-15);
    EXPECT_LT(std::abs(expectation(mixed, pe).imag()), 1e-9);
}

TEST(Qsys, StateInvariants) {
    const SubsystemDims d{2, 2, 1};
    OperatorMatrix bad = OperatorMatrix::Zero(4, 4);
    bad(0, 0) = 0.5;
    EXPECT_THROW(QuantumState(bad, d), Error);
    bad(1, 1) = 0.6;
    bad(2, 2) = -0.1;
    EXPECT_THROW(QuantumState(bad, d), Error);
    const auto s = QuantumState::basis(d, 1, 1);
    EXPECT_TRUE(s.violations().empty());
    EXPECT_NEAR(s.purity(), 1.0, 1e-14);
}

TEST(Qsys, PartialTrace) {
    const SubsystemDims d{3, 4, 2};
    const auto s = QuantumState::basis(d, 1, 2, 1);
    const auto rq = partial_trace_keep(s.rho(), d, Slot::transmon);
    EXPECT_NEAR(rq(1, 1).real(), 1.0, 1e-15);
    const auto rs = partial_trace_keep(s.rho(), d, Slot::storage);
    EXPECT_NEAR(rs(2, 2).real(), 1.0, 1e-15);
    const auto pops = transmon_populations(s.rho(), d);
    EXPECT_NEAR(pops[1], 1.0, 1e-15);
}

// ------------------------------- device -------------------------------------

TEST(Device, PaperDefaults) {
    const auto p = DeviceParams::paper();
    EXPECT_TRUE(p.violations().empty());
    EXPECT_NEAR(units::to_GHz(p.omega_s), 8.707546, 1e-12);
    EXPECT_NEAR(units::to_kHz(p.kappa_s), 24.7, 1e-12);
    auto q = p;
    q.t2_q = 3.0 * q.t1_q;
    EXPECT_FALSE(q.violations().empty());
}

TEST(Device, BsbFrequency) {
    auto p = DeviceParams::paper();
    EXPECT_NEAR(units::to_GHz(bsb_frequency(p)), 8.707546 + 6.234 + 0.0011 - 0.0036, 1e-9);
    EXPECT_NEAR(units::to_GHz(bsb_frequency(p)) / 2.0, 7.469523, 1e-9);
    auto q = p;
    q.n_ro = 1.0;
    EXPECT_NEAR(bsb_frequency(q) - bsb_frequency(p), 2.0 * p.chi_ro, 1e-9);
    q = p;
    q.chi_s = q.chi_ro = 0.0;
    EXPECT_DOUBLE_EQ(bsb_frequency(q), q.omega_s + q.omega_q);
}

TEST(Device, EffectiveRateScaling) {
    auto p = DeviceParams::paper();
    EXPECT_EQ(bsb_effective_rate(p, 0.0), 0.0);
    const double w = units::GHz(0.3);
    EXPECT_NEAR(bsb_effective_rate(p, 2 * w) / bsb_effective_rate(p, w), 4.0, 4.0 * 1e-12);
    auto q = p;
    q.g = 2.0 * p.g;
    EXPECT_NEAR(bsb_effective_rate(q, w) / bsb_effective_rate(p, w), 8.0, 8.0 * 1e-12);
    // Oracle: closed form with the detunings written out in linear GHz.
    const double ds = 8.707546 - 7.469523, dq = 6.234 - 7.469523;
    EXPECT_NEAR(ds, 1.238, 1e-3);
    EXPECT_NEAR(dq, -1.2355, 1e-3);
    const double g = 0.053, om = 0.3;
    const double expect = units::GHz(g * g * g * om * om / (ds * ds * dq * dq));
    EXPECT_NEAR(bsb_effective_rate(p, w), expect, 1e-9 * expect);
}

TEST(Device, DispersiveEstimate) {
    const double g = units::MHz(53), d = units::MHz(716), a = units::MHz(-185);
    EXPECT_NEAR(std::abs(units::to_MHz(dispersive_shift_estimate(g, d, a))), 1.37, 0.01);
    EXPECT_EQ(dispersive_shift_estimate(0.0, d, a), 0.0);
    const double big = dispersive_shift_estimate(g, d, units::MHz(-1e9));
    EXPECT_NEAR(big, g * g / d, 1e-6 * g * g / d);
    EXPECT_THROW(dispersive_shift_estimate(g, 0.0, a), Error);
}

TEST(Device, PurcellLimit) {
    auto p = DeviceParams::paper();
    const double tp = purcell_limit(p);
    const double delta = 6.234 - 5.518;
    const double oracle = 1.0 / (2 * pi * 4.0 * std::pow(0.053 / delta, 2));
    EXPECT_NEAR(tp, oracle, 1e-9 * oracle);
    EXPECT_NEAR(tp, 7.3, 0.1);
    auto q = p;
    q.g = 0.5 * p.g;
    EXPECT_NEAR(purcell_limit(q) / tp, 4.0, 1e-12);
}

TEST(Device, DephasingAndThermal) {
    EXPECT_NEAR(pure_dephasing_time(8.0, 15.5), 496.0, 0.5);
    EXPECT_EQ(pure_dephasing_time(4.0, 8.0), units::unbounded);
    EXPECT_NEAR(pure_dephasing_time(1.32, 2.49), 43.8, 0.1);
    EXPECT_THROW(pure_dephasing_time(1.0, 2.5), Error);
    const double t1 = 3.0, tphi = 40.0;
    const double t2 = 1.0 / (1.0 / tphi + 1.0 / (2.0 * t1));
    EXPECT_NEAR(pure_dephasing_time(t1, t2), tphi, 1e-10 * tphi);

    EXPECT_NEAR(thermal_population(1.0 / 496.0, 1.0 / 1.32), 0.00266, 5e-5);
    EXPECT_EQ(thermal_population(0.0, 1.0), 0.0);
    EXPECT_NEAR(thermal_population(0.02, 1.0), 2.0 * thermal_population(0.01, 1.0), 1e-15);
}

// ------------------------------- pulse --------------------------------------

TEST(Pulse, FlatTopEnvelope) {
    PulseSegment s;
    s.amplitude = 3.0;
    s.plateau = 0.1;
    s.start = 0.2;
    const double a = s.start + s.flank();
    EXPECT_DOUBLE_EQ(envelope_at(s, a + 0.05), 3.0);
    EXPECT_DOUBLE_EQ(envelope_at(s, a), 3.0);
    EXPECT_LT(envelope_at(s, a - 5.0 * s.sigma()), 4e-6 * 3.0);
    double worst = 0.0, peak = 0.0;
    for (double t = s.start - 0.01; t < s.end() + 0.01; t += 1e-4) {
        worst = std::max(worst, std::abs(envelope_at(s, t + 1e-6) - envelope_at(s, t)));
        peak = std::max(peak, envelope_at(s, t));
    }
    EXPECT_LT(worst, 1e-3 * 3.0);
    EXPECT_LE(peak, 3.0);

    PulseSegment longer = s;
    longer.plateau += 0.037;
    EXPECT_NEAR(pulse_area(longer) - pulse_area(s), 3.0 * 0.037, 1e-12);
}

TEST(Pulse, MemorySequenceLayout) {
    const auto p = DeviceParams::paper();
    CalibrationResult cal;
    cal.qubit = PiPulse{DriveChannel::qubit, units::MHz(20), p.omega_q, 0.005, default_rise, 1.0, 0.0};
    cal.bsb = PiPulse{DriveChannel::qubit, units::GHz(1), 0.5 * bsb_frequency(p), 0.15, default_rise, 1.0, 0.0};
    EXPECT_THROW(build_memory_sequence(p, 0.0, 0.0, CalibrationResult{}), Error);
    const auto seq = build_memory_sequence(p, pi / 2, 1.5, cal);
    ASSERT_EQ(seq.segments().size(), 5u);
    const auto& s = seq.segments();
    // Retrieval mirrors storage.
    EXPECT_DOUBLE_EQ(s[1].duration(), s[4].duration());
    EXPECT_DOUBLE_EQ(s[1].amplitude, s[4].amplitude);
    EXPECT_DOUBLE_EQ(s[2].duration(), s[3].duration());
    EXPECT_NEAR(s[3].start - s[2].end(), 1.5, 1e-12);
    EXPECT_NEAR(seq.protocol_length(), 2 * s[1].duration() + 2 * s[2].duration(), 1e-12);

    const auto seq3 = build_memory_sequence(p, 0.0, 0.0, cal, 3);
    const double extra = 2.0 * 2.0 * pi / cal.qubit->amplitude;
    EXPECT_NEAR(seq3.protocol_length() - build_memory_sequence(p, 0.0, 0.0, cal).protocol_length(), extra, 1e-12);
    EXPECT_THROW(build_memory_sequence(p, 0.0, 0.0, cal, 2), Error);

    const auto back = sequence_from_json(to_json(seq));
    ASSERT_EQ(back.segments().size(), seq.segments().size());
    for (std::size_t i = 0; i < back.segments().size(); ++i) {
        EXPECT_NEAR(back.segments()[i].start, seq.segments()[i].start, 1e-12);
        EXPECT_NEAR(back.segments()[i].carrier, seq.segments()[i].carrier, 1e-6);
    }
}

// ------------------------------- analysis -----------------------------------

namespace {

std::vector<double> grid(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
    return v;
}

}  // namespace

TEST(Fits, ExponentialNoiseless) {
    const auto xs = grid(0, 20, 40);
    std::vector<double> ys;
    for (double x : xs) ys.push_back(std::exp(-x / 6.44));
    const auto f = fit_exponential(xs, ys);
    EXPECT_TRUE(f.converged);
    EXPECT_NEAR(f.value("T"), 6.44, 6.44e-6);
}

TEST(Fits, ExponentialNoisy) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 0.01);
    const double t = 6.44;
    const auto xs = grid(0, 3 * t, 50);
    std::vector<double> ys;
    for (double x : xs) ys.push_back(std::exp(-x / t) + n(rng));
    EXPECT_NEAR(fit_exponential(xs, ys).value("T"), t, 0.03 * t);
}

TEST(Fits, ExponentialConstant) {
    const auto xs = grid(0, 1, 10);
    const std::vector<double> ys(10, 0.3);
    const auto f = fit_exponential(xs, ys);
    EXPECT_FALSE(f.converged);
    EXPECT_TRUE(std::isinf(f.value("T")));
}

TEST(Fits, DecayingCosine) {
    const auto xs = grid(0, 20, 200);
    std::vector<double> ys;
    for (double x : xs) ys.push_back(0.4 * std::exp(-x / 15.5) * std::cos(2 * pi * 0.5 * x + 0.3) + 0.5);
    const auto f = fit_decaying_cosine(xs, ys);
    EXPECT_NEAR(f.value("T2"), 15.5, 15.5e-4);
    EXPECT_NEAR(f.value("f"), 0.5, 0.5e-4);

    EXPECT_THROW(fit_decaying_cosine(xs, std::vector<double>(xs.size(), 0.5)), Error);

    std::vector<double> decay;
    for (double x : xs) decay.push_back(0.7 * std::exp(-x / 5.0) + 0.1);
    const auto fc = fit_decaying_cosine(xs, decay);
    const auto fe = fit_exponential(xs, decay);
    EXPECT_NEAR(fc.value("T2"), fe.value("T"), 0.01 * fe.value("T"));
    EXPECT_EQ(fc.value("f"), 0.0);
}

TEST(Fits, LorentzianNoiseless) {
    const double f0 = 8.707546e6, w = 24.7;  // kHz
    const auto xs = grid(f0 - 100, f0 + 100, 81);
    std::vector<double> ys;
    for (double x : xs) ys.push_back(1.0 / (1 + 4 * std::pow((x - f0) / w, 2)) + 0.01);
    const auto f = fit_lorentzian(xs, ys);
    EXPECT_NEAR(f.value("f0"), f0, 1e-6 * f0);
    EXPECT_NEAR(f.value("fwhm"), w, 1e-6 * w);
    // symmetric grid: centre exactly
    EXPECT_NEAR(f.value("f0"), 0.5 * (xs.front() + xs.back()), 1e-6);
}

TEST(Fits, LorentzianNoisy) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 0.05);
    const double f0 = 0.0, w = 24.7;
    const auto xs = grid(-150, 150, 301);
    std::vector<double> ys;
    for (double x : xs) ys.push_back((1.0 / (1 + 4 * std::pow((x - f0) / w, 2))) * (1.0 + n(rng)));
    EXPECT_NEAR(fit_lorentzian(xs, ys).value("fwhm"), w, 0.02 * w);
}

TEST(Fits, LorentzianNarrowSpan) {
    const auto xs = grid(-5, 5, 11);
    std::vector<double> ys;
    for (double x : xs) ys.push_back(1.0 / (1 + 4 * std::pow(x / 100.0, 2)));
    EXPECT_THROW(fit_lorentzian(xs, ys), Error);
}

TEST(Fits, AngleCosine) {
    const auto xs = grid(0, 2 * pi, 9);
    std::vector<double> ys;
    for (double x : xs) ys.push_back(0.5 + 0.49 * std::cos(x));
    const auto f = fit_angle_cosine(xs, ys);
    EXPECT_NEAR(f.value("A"), 0.49, 1e-8);
    EXPECT_NEAR(f.derived.at("r_squared"), 1.0, 1e-12);
}

TEST(Leakage, ClosedForm) {
    for (double t : {0.1, 0.5, 2.0}) EXPECT_EQ(leakage_population(t, 0.0, 3.0), 0.0);
    for (double a : {0.1, 1.0, 20.0}) EXPECT_NEAR(leakage_population(0.4, a, 0.0), 0.5 * (1 - std::exp(-2 * a)), 1e-14);
    EXPECT_NEAR(leakage_population(0.4, 50.0, 0.0), 0.5, 1e-12);
    double prev = 1.0;
    for (double t = 0.05; t < 3.0; t += 0.05) {
        const double v = leakage_population(t, 0.5, units::MHz(13.8));
        EXPECT_LT(v, prev);
        EXPECT_GE(v, 0.0);
        EXPECT_LT(v, 1.0);
        prev = v;
    }
    EXPECT_THROW(leakage_population(0.0, 0.5, 1.0), Error);
}

TEST(Leakage, FitRoundTrips) {
    const double a = 0.5, g = units::MHz(13.8);
    const auto ts = grid(0.01, 0.5, 12);
    std::vector<double> ys;
    for (double t : ts) ys.push_back(1.0 - leakage_population(t, a, g));
    const auto f = fit_leakage(ts, ys);
    EXPECT_NEAR(f.value("a"), a, 0.05 * a);
    EXPECT_NEAR(f.derived.at("gamma_sp_MHz"), 13.8, 0.05 * 13.8);

    std::vector<double> y0;
    for (double t : ts) y0.push_back(1.0 - leakage_population(t, a, 0.0));
    const auto f0 = fit_leakage(ts, y0);
    EXPECT_LE(std::abs(f0.value("gamma_sp")), std::max(f0.sigma("gamma_sp"), 1e-6));

    const auto flat = fit_leakage(ts, std::vector<double>(ts.size(), 1.0));
    EXPECT_LE(std::abs(flat.value("a")), std::max(flat.sigma("a"), 1e-9));
}

TEST(Statistics, Samples) {
    EXPECT_THROW(sample_statistics({1, 2, 3}), Error);
    EXPECT_EQ(sample_statistics(std::vector<double>(10, 4.0)).std, 0.0);
    std::mt19937_64 rng(2018);
    std::normal_distribution<double> n(8.0, 1.8);
    std::vector<double> v;
    for (int i = 0; i < 200; ++i) v.push_back(n(rng));
    const auto s = sample_statistics(v);
    EXPECT_NEAR(s.mean, 8.0, 0.3);
    EXPECT_NEAR(s.std, 1.8, 0.3);
    int total = 0;
    for (int c : s.histogram.counts) total += c;
    EXPECT_EQ(total, 200);

    // Gaussian samples are rejected at about the nominal rate.
    int rejected = 0;
    for (int seed = 0; seed < 400; ++seed) {
        std::mt19937_64 r(seed);
        std::vector<double> w;
        for (int i = 0; i < 200; ++i) w.push_back(n(r));
        if (!sample_statistics(w).normal) ++rejected;
    }
    EXPECT_GT(rejected, 400 * 0.02);
    EXPECT_LT(rejected, 400 * 0.09);

    std::vector<double> bi;
    std::normal_distribution<double> narrow(0.0, 0.3);
    for (int i = 0; i < 200; ++i) bi.push_back((i % 2 ? 5.0 : 11.0) + narrow(rng));
    const auto sb = sample_statistics(bi);
    EXPECT_LT(sb.normality_p, normality_alpha);
    EXPECT_FALSE(sb.normal);
}

// ------------------------------- tomography ---------------------------------

namespace {

// Independent oracle: chi_mn = sum_k c_km conj(c_kn), c_km = tr(P_m K_k) / 2.
Chi4 chi_from_kraus(const std::vector<Qubit2>& ks) {
    const auto& p = pauli_basis();
    Chi4 chi = Chi4::Zero();
    for (const auto& k : ks) {
        Eigen::Vector4cd c;
        for (int m = 0; m < 4; ++m) c(m) = (p[m] * k).trace() / 2.0;
        chi += c * c.adjoint();
    }
    return chi;
}

ChannelFn kraus_channel(std::vector<Qubit2> ks) {
    return [ks](const Qubit2& r) {
        Qubit2 o = Qubit2::Zero();
        for (const auto& k : ks) o += k * r * k.adjoint();
        return o;
    };
}

std::vector<Qubit2> amplitude_damping(double g) {
    // |e> (index 1) decays to |g> (index 0)
    Qubit2 k0, k1;
    k0 << 1, 0, 0, std::sqrt(1 - g);
    k1 << 0, std::sqrt(g), 0, 0;
    return {k0, k1};
}

}  // namespace

TEST(Tomography, StateReconstruction) {
    const auto g = state_tomography(BlochVector{0, 0, 1});
    EXPECT_NEAR(g(0, 0).real(), 1.0, 1e-15);
    const auto plus = state_tomography(BlochVector{1, 0, 0});
    EXPECT_NEAR(plus(0, 1).real(), 0.5, 1e-15);
    const auto noisy = state_tomography([] { return BlochVector{0, 0, 1.06}; });
    Qubit2 gg = Qubit2::Zero();
    gg(0, 0) = 1.0;
    EXPECT_LT(trace_distance(noisy, gg), 0.03);
    EXPECT_NEAR(noisy.trace().real(), 1.0, 1e-15);
}

TEST(Tomography, IdentityAndDepolarizing) {
    const auto id = process_tomography([](const Qubit2& r) { return r; });
    EXPECT_LT((id.chi.entries - ChiMatrix::identity().entries).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(process_fidelity(id.chi), 1.0, 1e-10);
    const auto dep = process_tomography([](const Qubit2& r) { return Qubit2(0.5 * r.trace() * Qubit2::Identity()); });
    EXPECT_LT((dep.chi.entries - 0.25 * Chi4::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(process_fidelity(dep.chi), 0.25, 1e-12);
}

TEST(Tomography, AmplitudeDampingMatchesKrausOracle) {
    for (double g : {0.0, 0.1, 0.37, 0.9}) {
        const auto ks = amplitude_damping(g);
        const auto pt = process_tomography(kraus_channel(ks));
        EXPECT_LT((pt.chi.entries - chi_from_kraus(ks)).cwiseAbs().maxCoeff(), 1e-8) << g;
        EXPECT_TRUE(pt.chi.violations().empty());
        // composition with identity
        const auto fn = kraus_channel(ks);
        const auto comp = process_tomography([&](const Qubit2& r) { return fn(r); });
        EXPECT_LT((comp.chi.entries - pt.chi.entries).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LE(process_fidelity(pt.chi, pt.chi), 1.0 + 1e-12);
    }
}

TEST(Tomography, UnitaryChannelIsRankOne) {
    Qubit2 u;
    const double th = 0.7;
    u << std::cos(th / 2), cd(0, -std::sin(th / 2)), cd(0, -std::sin(th / 2)), std::cos(th / 2);
    const auto pt = process_tomography(kraus_channel({u}));
    const auto ev = pt.chi.eigenvalues();
    EXPECT_LT(ev(2), 1e-8);
    EXPECT_NEAR(ev(3), 1.0, 1e-10);
    EXPECT_NEAR(process_fidelity(pt.chi, pt.chi), 1.0, 1e-10);
}

TEST(Tomography, ZOptimizationRecoversRotation) {
    const double th = 0.8;
    Qubit2 rz = Qubit2::Zero();
    rz(0, 0) = std::polar(1.0, -th / 2);
    rz(1, 1) = std::polar(1.0, th / 2);
    const auto pt = process_tomography(kraus_channel({rz}));
    const auto z = z_optimized_fidelity(pt);
    EXPECT_GE(z.optimized, z.raw);
    EXPECT_NEAR(z.optimized, 1.0, 1e-6);
    EXPECT_NEAR(std::remainder(z.angle + th, 2 * pi), 0.0, 1e-3);
    // never decreases
    const auto ad = process_tomography(kraus_channel(amplitude_damping(0.2)));
    const auto za = z_optimized_fidelity(ad);
    EXPECT_GE(za.optimized, za.raw);
}

TEST(Tomography, ShotSamplingIsSeeded) {
    const auto fn = kraus_channel(amplitude_damping(0.2));
    const auto a = process_tomography(fn, ShotSampling{2000, 5});
    const auto b = process_tomography(fn, ShotSampling{2000, 5});
    EXPECT_EQ(a.chi.entries, b.chi.entries);
    EXPECT_TRUE(a.chi.violations().empty());
    const auto exact = process_tomography(fn);
    EXPECT_NEAR(process_fidelity(a.chi), process_fidelity(exact.chi), 0.05);
}

TEST(Tomography, Exports) {
    std::ostringstream os;
    write_chi_csv(os, ChiMatrix::identity());
    EXPECT_EQ(os.str().substr(0, 14), "row,col,abs\nI,");
    const auto j = to_json(ChiMatrix::identity());
    EXPECT_EQ(j["real"][0][0], 1.0);
}
