// lindblad.hpp — rotating-frame model of transmon + two cavity modes and the
// master-equation integrators.
//
// Frames: every subsystem k rotates at its own frequency nu_k, so an operator
// picks up c -> c e^{-i nu_k t}. Couplings and drives then appear as
// oscillating terms
//     weight * env(t) * (e^{-i(w t + phi)} X + h.c.)
// while the drift keeps the detunings omega_k - nu_k and the Kerr term.
// Qubit-mode couplings are in the rotating-wave form g (b^dag a + b a^dag).
// Drives keep only their co-rotating part unless ModelOptions::drive_rwa is
// false, in which case the counter-rotating part (at omega_c + nu_k) is kept
// as well.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qmem/device.hpp"
#include "qmem/error.hpp"
#include "qmem/pulse.hpp"
#include "qmem/qsys.hpp"
#include "qmem/units.hpp"

namespace qmem {

struct Frame {
    double transmon = 0.0;
    double storage = 0.0;
    double readout = 0.0;

    // Each subsystem at its bare frequency.
    static Frame bare(const DeviceParams& p) { return {p.omega_q, p.omega_s, p.omega_ro}; }
    // All subsystems at one frequency; undriven couplings become static.
    static Frame uniform(double nu) { return {nu, nu, nu}; }

    double of(Slot s) const noexcept {
        switch (s) {
            case Slot::transmon: return transmon;
            case Slot::storage: return storage;
            case Slot::readout: return readout;
        }
        return 0.0;
    }

    bool is_uniform() const noexcept { return transmon == storage && storage == readout; }
};

inline Slot slot_of(DriveChannel c) {
    switch (c) {
        case DriveChannel::qubit: return Slot::transmon;
        case DriveChannel::storage: return Slot::storage;
        case DriveChannel::readout: return Slot::readout;
    }
    return Slot::transmon;
}

struct CollapseChannel {
    std::string name;
    OperatorMatrix op;
    double rate = 0.0;  // 1/us, dissipator D[sqrt(rate) op]
};

struct Decoherence {
    bool qubit_relaxation = true;
    bool qubit_dephasing = true;
    bool thermal = true;
    bool storage_decay = true;
    bool readout_decay = true;
    // Extra pure dephasing of the storage mode (not part of the default model).
    std::optional<double> storage_dephasing_time;

    static Decoherence all() { return {}; }
    static Decoherence none() { return {false, false, false, false, false, std::nullopt}; }
    static Decoherence storage_only() { return {false, false, false, true, false, std::nullopt}; }
};

struct ModelOptions {
    std::optional<Frame> frame;  // bare frame when empty
    bool drive_rwa = true;
    Decoherence decoherence;
};

struct OscillatingTerm {
    std::string label;
    OperatorMatrix op;
    double weight = 1.0;
    double freq = 0.0;
    double phase = 0.0;
    std::optional<PulseSegment> envelope;  // constant when empty

    cplx coefficient(double t) const noexcept {
        const double env = envelope ? envelope_shape(*envelope, t) : 1.0;
        if (env == 0.0) return 0.0;
        return weight * env * std::polar(1.0, -(freq * t + phase));
    }
};

struct LindbladModel {
    DeviceParams params;
    SubsystemDims dims;
    Frame frame;
    OperatorMatrix drift;
    std::vector<OscillatingTerm> terms;
    std::vector<CollapseChannel> channels;

    OperatorMatrix hamiltonian(double t) const {
        OperatorMatrix h = drift;
        for (const auto& term : terms) {
            const cplx z = term.coefficient(t);
            if (z == cplx(0.0)) continue;
            h += z * term.op + std::conj(z) * term.op.adjoint();
        }
        return h;
    }

    // Largest linear frequency (MHz) the integrator has to resolve: the
    // fastest oscillating term or the Gershgorin bound of the drift.
    double max_frequency() const {
        double w = 0.0;
        for (const auto& term : terms) w = std::max(w, std::abs(term.freq));
        for (int i = 0; i < drift.rows(); ++i) w = std::max(w, drift.row(i).cwiseAbs().sum());
        return units::to_MHz(w);
    }

    // dt <= 1 / (20 f_max).
    double max_step() const {
        const double f = max_frequency();
        return f > 0.0 ? 1.0 / (20.0 * f) : units::unbounded;
    }

    void check_step(double dt) const {
        if (!(dt > 0.0)) throw Error(ErrorKind::step_size, "dt must be > 0");
        const double bound = max_step();
        if (dt > bound * (1.0 + 1e-9)) {
            std::ostringstream os;
            os << "dt = " << units::to_ns(dt) << " ns exceeds the bound for a " << max_frequency() / 1e3
               << " GHz carrier; required dt <= " << units::to_ns(bound) << " ns";
            throw Error(ErrorKind::step_size, os.str());
        }
    }

    // Verifies drift and drive couplings are Hermitian when summed with their conjugates.
    bool hermitian_generator() const {
        if (!is_hermitian(drift, 1e-9)) return false;
        for (const auto& term : terms) {
            if (term.op.rows() != drift.rows()) return false;
        }
        return true;
    }
};

// Undriven Hamiltonian in a uniform frame nu (static).
inline OperatorMatrix static_hamiltonian(const DeviceParams& p, const SubsystemDims& dims, double nu) {
    const CompositeOperators ops(dims);
    const OperatorMatrix nb = ops.b.adjoint() * ops.b;
    const OperatorMatrix kerr = ops.b.adjoint() * ops.b.adjoint() * ops.b * ops.b;
    OperatorMatrix h = (p.omega_q - nu) * nb + 0.5 * p.alpha * kerr +
                       (p.omega_s - nu) * (ops.a_s.adjoint() * ops.a_s) +
                       (p.omega_ro - nu) * (ops.a_r.adjoint() * ops.a_r);
    const OperatorMatrix cs = p.g * ops.b.adjoint() * ops.a_s;
    const OperatorMatrix cr = p.g * ops.b.adjoint() * ops.a_r;
    h += cs + cs.adjoint() + cr + cr.adjoint();
    return h;
}

inline const OperatorMatrix& channel_operator(const CompositeOperators& ops, DriveChannel c) {
    switch (c) {
        case DriveChannel::qubit: return ops.b;
        case DriveChannel::storage: return ops.a_s;
        case DriveChannel::readout: return ops.a_r;
    }
    return ops.b;
}

// Static Hamiltonian in the frame co-rotating with a single drive tone:
// H = static_hamiltonian(carrier) + eps (e^{-i phi} c^dag + e^{i phi} c).
inline OperatorMatrix drive_frame_hamiltonian(const DeviceParams& p, const SubsystemDims& dims, double carrier,
                                              DriveChannel channel, double eps, double phase = 0.0) {
    const CompositeOperators ops(dims);
    const OperatorMatrix& c = channel_operator(ops, channel);
    const OperatorMatrix x = eps * std::polar(1.0, -phase) * c.adjoint();
    return static_hamiltonian(p, dims, carrier) + x + x.adjoint();
}

inline std::vector<CollapseChannel> collapse_channels(const DeviceParams& p, const SubsystemDims& dims,
                                                      const Decoherence& d) {
    const CompositeOperators ops(dims);
    std::vector<CollapseChannel> out;
    if (d.storage_decay) out.push_back({"storage_decay", ops.a_s, p.kappa_s});
    if (d.readout_decay && dims.n_readout_photons >= 2) out.push_back({"readout_decay", ops.a_r, p.kappa_ro});
    if (d.qubit_relaxation) out.push_back({"qubit_relaxation", ops.b, 1.0 / p.t1_q});
    if (d.qubit_dephasing) {
        const double t_phi = pure_dephasing_time(p.t1_q, p.t2_q);
        // D[sqrt(r) n] damps the g-e coherence at r/2, hence r = 2/T_phi.
        if (std::isfinite(t_phi)) out.push_back({"qubit_dephasing", ops.b.adjoint() * ops.b, 2.0 / t_phi});
    }
    if (d.thermal && p.p_thermal > 0.0) out.push_back({"thermal_excitation", ops.b.adjoint(), p.p_thermal / p.t1_q});
    if (d.storage_dephasing_time) {
        out.push_back({"storage_dephasing", ops.a_s.adjoint() * ops.a_s, 2.0 / *d.storage_dephasing_time});
    }
    return out;
}

inline LindbladModel build_model(const DeviceParams& p, const SubsystemDims& dims, const PulseSequence& seq,
                                 const ModelOptions& opt = {}) {
    p.require_valid();
    dims.validate();
    LindbladModel m;
    m.params = p;
    m.dims = dims;
    m.frame = opt.frame.value_or(Frame::bare(p));
    const CompositeOperators ops(dims);

    const OperatorMatrix nb = ops.b.adjoint() * ops.b;
    m.drift = (p.omega_q - m.frame.transmon) * nb + 0.5 * p.alpha * (ops.b.adjoint() * ops.b.adjoint() * ops.b * ops.b) +
              (p.omega_s - m.frame.storage) * (ops.a_s.adjoint() * ops.a_s) +
              (p.omega_ro - m.frame.readout) * (ops.a_r.adjoint() * ops.a_r);

    auto add_coupling = [&](const std::string& label, const OperatorMatrix& mode, double nu_mode) {
        if (mode.isZero(0.0)) return;
        const OperatorMatrix x = p.g * ops.b.adjoint() * mode;
        const double w = nu_mode - m.frame.transmon;
        if (w == 0.0) {
            m.drift += x + x.adjoint();
        } else {
            m.terms.push_back({label, x, 1.0, w, 0.0, std::nullopt});
        }
    };
    add_coupling("g_storage", ops.a_s, m.frame.storage);
    add_coupling("g_readout", ops.a_r, m.frame.readout);

    for (const auto& seg : seq.segments()) {
        if (seg.amplitude == 0.0) continue;
        const OperatorMatrix& c = channel_operator(ops, seg.target);
        if (c.isZero(0.0)) continue;
        const double nu = m.frame.of(slot_of(seg.target));
        const std::string label = "drive_" + to_string(seg.target) + "_" + to_string(seg.role);
        m.terms.push_back({label, c.adjoint(), 0.5 * seg.amplitude, seg.carrier - nu, seg.phase, seg});
        if (!opt.drive_rwa) {
            m.terms.push_back({label + "_counter", c.adjoint(), 0.5 * seg.amplitude, -(seg.carrier + nu), -seg.phase, seg});
        }
    }
    m.channels = collapse_channels(p, dims, opt.decoherence);
    return m;
}

// ------------------------------- integration --------------------------------

using SparseOp = Eigen::SparseMatrix<cplx>;

// Compiled right-hand side of the master equation.
class MasterEquation {
public:
    explicit MasterEquation(const LindbladModel& m) : dim_(m.dims.total()) {
        OperatorMatrix heff = m.drift;
        for (const auto& c : m.channels) heff -= cplx(0.0, 0.5 * c.rate) * (c.op.adjoint() * c.op);
        h0_ = m.drift.sparseView(0.0, 0.0);
        h0_eff_ = heff.sparseView(0.0, 0.0);
        for (const auto& t : m.terms) {
            terms_.push_back({t.op.sparseView(0.0, 0.0), OperatorMatrix(t.op.adjoint()).sparseView(0.0, 0.0), t});
        }
        for (const auto& c : m.channels) {
            const OperatorMatrix l = std::sqrt(c.rate) * c.op;
            jumps_.push_back(l.sparseView(0.0, 0.0));
            jumps_dag_.push_back(OperatorMatrix(l.adjoint()).sparseView(0.0, 0.0));
        }
    }

    int dim() const noexcept { return dim_; }

    // drho/dt = -i (Heff rho - rho Heff^dag) + sum L rho L^dag
    void density(double t, const OperatorMatrix& rho, OperatorMatrix& out) const {
        a_.noalias() = h0_eff_ * rho;
        for (const auto& term : terms_) {
            const cplx z = term.info.coefficient(t);
            if (z == cplx(0.0)) continue;
            tmp_.noalias() = term.x * rho;
            a_ += z * tmp_;
            tmp_.noalias() = term.xd * rho;
            a_ += std::conj(z) * tmp_;
        }
        out.noalias() = cplx(0.0, -1.0) * a_;
        out += cplx(0.0, 1.0) * a_.adjoint();
        for (std::size_t k = 0; k < jumps_.size(); ++k) {
            tmp_.noalias() = jumps_[k] * rho;
            out.noalias() += tmp_ * jumps_dag_[k];
        }
    }

    void pure(double t, const StateVector& psi, StateVector& out) const {
        out.noalias() = h0_ * psi;
        for (const auto& term : terms_) {
            const cplx z = term.info.coefficient(t);
            if (z == cplx(0.0)) continue;
            out += z * (term.x * psi);
            out += std::conj(z) * (term.xd * psi);
        }
        out *= cplx(0.0, -1.0);
    }

private:
    struct Term {
        SparseOp x;
        SparseOp xd;
        OscillatingTerm info;
    };

    int dim_;
    SparseOp h0_;
    SparseOp h0_eff_;
    std::vector<Term> terms_;
    std::vector<SparseOp> jumps_;
    std::vector<SparseOp> jumps_dag_;
    mutable OperatorMatrix a_;
    mutable OperatorMatrix tmp_;
};

struct Observable {
    std::string name;
    OperatorMatrix op;
};

struct EvolveOptions {
    double dt = units::ns(0.02);
    // Emit a sample every `sample_every` steps (0: only the endpoints).
    int sample_every = 0;
    bool keep_states = false;
    bool check_positivity = true;
    std::vector<Observable> observables;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<QuantumState> states;
    std::map<std::string, std::vector<cplx>> expectations;
    OperatorMatrix final_rho;
    double max_trace_error = 0.0;
    double min_eigenvalue = 0.0;
    double max_purity = 0.0;
};

inline constexpr double trace_divergence_tol = 1e-6;

namespace detail {

inline int step_count(double span, double dt) {
    if (span <= 0.0) return 0;
    return std::max(1, static_cast<int>(std::ceil(span / dt - 1e-9)));
}

}  // namespace detail

// Fixed-step RK4 integration of the master equation over [t0, t1].
inline Trajectory evolve(const LindbladModel& model, const QuantumState& rho0, double t0, double t1,
                         const EvolveOptions& opt = {}) {
    if (rho0.dims() != model.dims) throw Error(ErrorKind::dimension_mismatch, "state and model dims differ");
    if (t1 < t0) throw Error(ErrorKind::invalid_parameters, "t1 < t0");
    model.check_step(opt.dt);
    const MasterEquation eq(model);
    const int n = detail::step_count(t1 - t0, opt.dt);
    const double h = n > 0 ? (t1 - t0) / n : 0.0;

    Trajectory traj;
    traj.min_eigenvalue = 1.0;
    OperatorMatrix rho = rho0.rho();
    OperatorMatrix k1, k2, k3, k4, y;

    auto sample = [&](double t) {
        const double tr_err = std::abs(rho.trace() - cplx(1.0));
        traj.max_trace_error = std::max(traj.max_trace_error, tr_err);
        if (!(tr_err <= trace_divergence_tol)) {
            std::ostringstream os;
            os << "trace drifted by " << tr_err << " at t = " << t << " us; retry with dt <= "
               << units::to_ns(0.5 * h > 0 ? 0.5 * h : opt.dt) << " ns";
            throw Error(ErrorKind::integration_diverged, os.str());
        }
        traj.times.push_back(t);
        for (const auto& o : opt.observables) traj.expectations[o.name].push_back((rho.transpose().cwiseProduct(o.op)).sum());
        if (opt.check_positivity || opt.keep_states) {
            const QuantumState s(0.5 * (rho + rho.adjoint()), model.dims, false);
            traj.min_eigenvalue = std::min(traj.min_eigenvalue, s.min_eigenvalue());
            traj.max_purity = std::max(traj.max_purity, s.purity());
            if (opt.keep_states) traj.states.push_back(s);
        }
    };

    sample(t0);
    for (int i = 0; i < n; ++i) {
        const double t = t0 + i * h;
        eq.density(t, rho, k1);
        y = rho + 0.5 * h * k1;
        eq.density(t + 0.5 * h, y, k2);
        y = rho + 0.5 * h * k2;
        eq.density(t + 0.5 * h, y, k3);
        y = rho + h * k3;
        eq.density(t + h, y, k4);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const bool last = i == n - 1;
        if (last || (opt.sample_every > 0 && (i + 1) % opt.sample_every == 0)) sample(t + h);
    }
    traj.final_rho = rho;
    return traj;
}

// Noiseless Schrodinger evolution with the same Hamiltonian (RK4).
inline StateVector evolve_pure(const LindbladModel& model, const StateVector& psi0, double t0, double t1, double dt) {
    model.check_step(dt);
    const MasterEquation eq(model);
    const int n = detail::step_count(t1 - t0, dt);
    const double h = n > 0 ? (t1 - t0) / n : 0.0;
    StateVector psi = psi0, k1, k2, k3, k4;
    for (int i = 0; i < n; ++i) {
        const double t = t0 + i * h;
        eq.pure(t, psi, k1);
        eq.pure(t + 0.5 * h, psi + 0.5 * h * k1, k2);
        eq.pure(t + 0.5 * h, psi + 0.5 * h * k2, k3);
        eq.pure(t + h, psi + h * k3, k4);
        psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return psi;
}

// ------------------------------- frames -------------------------------------

// Diagonal of H_to - H_from where H_F = sum_k nu_k n_k.
inline Eigen::VectorXd frame_difference(const SubsystemDims& dims, const Frame& from, const Frame& to) {
    Eigen::VectorXd d(dims.total());
    for (int i = 0; i < dims.total(); ++i) {
        const auto o = dims.occupation(i);
        d(i) = (to.transmon - from.transmon) * o[0] + (to.storage - from.storage) * o[1] +
               (to.readout - from.readout) * o[2];
    }
    return d;
}

// rho_to(t) = e^{iDt} rho_from(t) e^{-iDt} with D = H_to - H_from.
inline OperatorMatrix change_frame(const OperatorMatrix& rho, const SubsystemDims& dims, const Frame& from,
                                   const Frame& to, double t) {
    const Eigen::VectorXd d = frame_difference(dims, from, to);
    OperatorMatrix out(rho.rows(), rho.cols());
    for (int j = 0; j < rho.cols(); ++j)
        for (int i = 0; i < rho.rows(); ++i) out(i, j) = rho(i, j) * std::polar(1.0, (d(i) - d(j)) * t);
    return out;
}

inline StateVector change_frame(const StateVector& psi, const SubsystemDims& dims, const Frame& from, const Frame& to,
                                double t) {
    const Eigen::VectorXd d = frame_difference(dims, from, to);
    StateVector out(psi.size());
    for (int i = 0; i < psi.size(); ++i) out(i) = psi(i) * std::polar(1.0, d(i) * t);
    return out;
}

// Column-major vectorized Lindbladian of a static Hamiltonian.
inline OperatorMatrix liouvillian(const OperatorMatrix& h, const std::vector<CollapseChannel>& channels) {
    const int n = static_cast<int>(h.rows());
    const OperatorMatrix id = OperatorMatrix::Identity(n, n);
    OperatorMatrix l = cplx(0.0, -1.0) * (Eigen::kroneckerProduct(id, h).eval() -
                                          Eigen::kroneckerProduct(OperatorMatrix(h.transpose()), id).eval());
    for (const auto& c : channels) {
        const OperatorMatrix op = std::sqrt(c.rate) * c.op;
        const OperatorMatrix ldl = op.adjoint() * op;
        l += Eigen::kroneckerProduct(OperatorMatrix(op.conjugate()), op).eval();
        l -= 0.5 * Eigen::kroneckerProduct(id, ldl).eval();
        l -= 0.5 * Eigen::kroneckerProduct(OperatorMatrix(ldl.transpose()), id).eval();
    }
    return l;
}

// Exact propagation through undriven intervals. The state is moved into a
// uniform frame where the Hamiltonian is static, multiplied by exp(L T), and
// moved back. Without drives every term conserves the total excitation
// number N, so L is block diagonal in N_i - N_j and each block is
// exponentiated separately. Propagators are cached per duration.
class FreePropagator {
public:
    explicit FreePropagator(const LindbladModel& m)
        : dims_(m.dims), model_frame_(m.frame), static_frame_(Frame::uniform(m.frame.storage)) {
        const OperatorMatrix l = liouvillian(static_hamiltonian(m.params, m.dims, static_frame_.storage), m.channels);
        const int n = dims_.total();
        std::map<int, std::vector<int>> groups;
        for (int j = 0; j < n; ++j) {
            const auto oj = dims_.occupation(j);
            for (int i = 0; i < n; ++i) {
                const auto oi = dims_.occupation(i);
                groups[(oi[0] + oi[1] + oi[2]) - (oj[0] + oj[1] + oj[2])].push_back(i + j * n);
            }
        }
        for (auto& [k, idx] : groups) {
            Block blk;
            blk.index = idx;
            const int sz = static_cast<int>(idx.size());
            blk.generator.resize(sz, sz);
            for (int c = 0; c < sz; ++c)
                for (int r = 0; r < sz; ++r) blk.generator(r, c) = l(idx[r], idx[c]);
            blocks_.push_back(std::move(blk));
        }
    }

    OperatorMatrix propagate(const OperatorMatrix& rho, double t_from, double duration) {
        if (duration <= 0.0) return rho;
        const OperatorMatrix u = change_frame(rho, dims_, model_frame_, static_frame_, t_from);
        const Exps exps = propagators(duration);
        OperatorMatrix w(u.rows(), u.cols());
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            const auto& idx = blocks_[b].index;
            Eigen::VectorXcd v(idx.size());
            for (std::size_t r = 0; r < idx.size(); ++r) v(r) = u.data()[idx[r]];
            const Eigen::VectorXcd y = (*exps)[b] * v;
            for (std::size_t r = 0; r < idx.size(); ++r) w.data()[idx[r]] = y(r);
        }
        return change_frame(w, dims_, static_frame_, model_frame_, t_from + duration);
    }

    std::size_t block_count() const noexcept { return blocks_.size(); }

private:
    struct Block {
        std::vector<int> index;
        OperatorMatrix generator;
    };

    using Exps = std::shared_ptr<const std::vector<OperatorMatrix>>;

    Exps propagators(double duration) {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            for (const auto& [t, p] : cache_) {
                if (std::abs(t - duration) <= 1e-12 * std::max(1.0, duration)) return p;
            }
        }
        auto exps = std::make_shared<std::vector<OperatorMatrix>>();
        exps->reserve(blocks_.size());
        for (const auto& blk : blocks_) exps->emplace_back((blk.generator * duration).exp());
        std::lock_guard<std::mutex> lock(mutex_);
        if (cache_.size() >= cache_limit) cache_.erase(cache_.begin());
        cache_.emplace_back(duration, exps);
        return exps;
    }

    static constexpr std::size_t cache_limit = 32;

    SubsystemDims dims_;
    Frame model_frame_;
    Frame static_frame_;
    std::vector<Block> blocks_;
    std::vector<std::pair<double, Exps>> cache_;
    std::mutex mutex_;
};

// ------------------------------- dressed levels -----------------------------

struct DressedSpectrum {
    Eigen::VectorXd energies;
    OperatorMatrix vectors;  // columns

    // Eigenvector with the largest weight on a bare basis state.
    int index_of(int bare) const {
        Eigen::Index k = 0;
        vectors.row(bare).cwiseAbs2().maxCoeff(&k);
        return static_cast<int>(k);
    }
};

inline DressedSpectrum diagonalize(const OperatorMatrix& h) {
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(0.5 * (h + h.adjoint()));
    if (es.info() != Eigen::Success) throw Error(ErrorKind::invalid_parameters, "eigendecomposition failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

// Lab-frame transition frequency between the dressed partners of two bare
// states, divided by the number of drive photons.
inline double dressed_transition(const DeviceParams& p, const SubsystemDims& dims, std::array<int, 3> from,
                                 std::array<int, 3> to, int photons = 1) {
    const double nu = p.omega_q;
    const DressedSpectrum s = diagonalize(static_hamiltonian(p, dims, nu));
    const int i = dims.index(from[0], from[1], from[2]);
    const int j = dims.index(to[0], to[1], to[2]);
    const int exc_from = from[0] + from[1] + from[2];
    const int exc_to = to[0] + to[1] + to[2];
    const double de = s.energies(s.index_of(j)) - s.energies(s.index_of(i)) + nu * (exc_to - exc_from);
    return de / photons;
}

// ------------------------------- export -------------------------------------

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os.precision(17);
    os << "t_us,observable_name,value\n";
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        for (const auto& [name, values] : traj.expectations) {
            os << traj.times[k] << ',' << name << ',' << values[k].real() << '\n';
        }
    }
}

}  // namespace qmem
