// qsys.hpp — Hilbert space and operator algebra for transmon ⊗ storage ⊗ readout.
//
// Tensor order is fixed everywhere: slot 0 = transmon, slot 1 = storage mode,
// slot 2 = readout mode. A composite basis index is ((q * n_s) + n) * n_ro + m.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "qmem/error.hpp"

namespace qmem {

using cplx = std::complex<double>;
using OperatorMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

enum class Slot : int { transmon = 0, storage = 1, readout = 2 };

struct SubsystemDims {
    static constexpr int default_cap = 512;

    int n_transmon_levels = 3;
    int n_storage_photons = 5;  // number of retained Fock levels
    int n_readout_photons = 2;

    int total() const noexcept { return n_transmon_levels * n_storage_photons * n_readout_photons; }

    int levels(Slot s) const noexcept {
        switch (s) {
            case Slot::transmon: return n_transmon_levels;
            case Slot::storage: return n_storage_photons;
            case Slot::readout: return n_readout_photons;
        }
        return 0;
    }

    int index(int q, int n, int m) const noexcept {
        return (q * n_storage_photons + n) * n_readout_photons + m;
    }

    // Inverse of index(): {transmon level, storage photons, readout photons}.
    std::array<int, 3> occupation(int i) const noexcept {
        const int m = i % n_readout_photons;
        const int n = (i / n_readout_photons) % n_storage_photons;
        const int q = i / (n_readout_photons * n_storage_photons);
        return {q, n, m};
    }

    void validate(int cap = default_cap) const {
        if (n_transmon_levels < 2 || n_storage_photons < 2 || n_readout_photons < 1) {
            throw Error(ErrorKind::invalid_dimension,
                        "truncation requires transmon >= 2, storage >= 2, readout >= 1 levels");
        }
        if (total() < 4 || total() > cap) {
            throw Error(ErrorKind::invalid_dimension,
                        "total dimension " + std::to_string(total()) + " outside [4, " +
                            std::to_string(cap) + "]");
        }
    }

    friend bool operator==(const SubsystemDims&, const SubsystemDims&) = default;
};

// ------------------------------- operators ----------------------------------

inline OperatorMatrix annihilation(int dim) {
    if (dim < 2) throw Error(ErrorKind::invalid_dimension, "annihilation needs dim >= 2");
    OperatorMatrix a = OperatorMatrix::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

inline OperatorMatrix creation(int dim) { return annihilation(dim).adjoint(); }

inline OperatorMatrix number_operator(int dim) {
    OperatorMatrix n = OperatorMatrix::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) n(k, k) = static_cast<double>(k);
    return n;
}

inline OperatorMatrix projector(int dim, int level) {
    if (level < 0 || level >= dim) throw Error(ErrorKind::invalid_dimension, "projector level out of range");
    OperatorMatrix p = OperatorMatrix::Zero(dim, dim);
    p(level, level) = 1.0;
    return p;
}

// Duffing ladder E_n = n*omega_q + n(n-1)/2 * alpha.
inline OperatorMatrix transmon_hamiltonian(int levels, double omega_q, double alpha) {
    if (levels < 2) throw Error(ErrorKind::invalid_dimension, "transmon needs >= 2 levels");
    OperatorMatrix h = OperatorMatrix::Zero(levels, levels);
    for (int n = 0; n < levels; ++n) {
        h(n, n) = n * omega_q + 0.5 * n * (n - 1) * alpha;
    }
    return h;
}

inline double max_abs(const OperatorMatrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

inline bool is_hermitian(const OperatorMatrix& a, double tol = 1e-12) {
    return a.rows() == a.cols() && max_abs(a - a.adjoint()) < tol;
}

inline OperatorMatrix commutator(const OperatorMatrix& a, const OperatorMatrix& b) { return a * b - b * a; }

inline OperatorMatrix tensor_embed(const OperatorMatrix& op, Slot slot, const SubsystemDims& dims) {
    if (op.rows() != op.cols() || op.rows() != dims.levels(slot)) {
        throw Error(ErrorKind::invalid_embedding,
                    "operator of dimension " + std::to_string(op.rows()) + " does not match slot size " +
                        std::to_string(dims.levels(slot)));
    }
    const auto id = [](int n) -> OperatorMatrix { return OperatorMatrix::Identity(n, n); };
    const OperatorMatrix t = slot == Slot::transmon ? op : id(dims.n_transmon_levels);
    const OperatorMatrix s = slot == Slot::storage ? op : id(dims.n_storage_photons);
    const OperatorMatrix r = slot == Slot::readout ? op : id(dims.n_readout_photons);
    const OperatorMatrix ts = Eigen::kroneckerProduct(t, s).eval();
    return Eigen::kroneckerProduct(ts, r).eval();
}

// Ladder operators of the composite space.
struct CompositeOperators {
    OperatorMatrix b;    // transmon lowering
    OperatorMatrix a_s;  // storage annihilation
    OperatorMatrix a_r;  // readout annihilation (zero when the readout has a single level)

    explicit CompositeOperators(const SubsystemDims& dims) {
        b = tensor_embed(annihilation(dims.n_transmon_levels), Slot::transmon, dims);
        a_s = tensor_embed(annihilation(dims.n_storage_photons), Slot::storage, dims);
        if (dims.n_readout_photons >= 2) {
            a_r = tensor_embed(annihilation(dims.n_readout_photons), Slot::readout, dims);
        } else {
            a_r = OperatorMatrix::Zero(dims.total(), dims.total());
        }
    }
};

// ------------------------------- states -------------------------------------

class QuantumState {
public:
    static constexpr double trace_tol = 1e-8;
    static constexpr double hermitian_tol = 1e-10;
    static constexpr double positivity_tol = 1e-9;

    QuantumState(OperatorMatrix rho, SubsystemDims dims, bool check = true)
        : rho_(std::move(rho)), dims_(dims) {
        if (rho_.rows() != dims_.total() || rho_.cols() != dims_.total()) {
            throw Error(ErrorKind::dimension_mismatch, "density matrix does not match subsystem dims");
        }
        if (check) {
            const auto problems = violations();
            if (!problems.empty()) throw Error(ErrorKind::invalid_state, problems.front());
        }
    }

    static QuantumState pure(const StateVector& psi, const SubsystemDims& dims) {
        const StateVector v = psi / psi.norm();
        return QuantumState(v * v.adjoint(), dims);
    }

    static QuantumState basis(const SubsystemDims& dims, int q, int n = 0, int m = 0) {
        return pure(basis_vector(dims, q, n, m), dims);
    }

    static StateVector basis_vector(const SubsystemDims& dims, int q, int n = 0, int m = 0) {
        if (q >= dims.n_transmon_levels || n >= dims.n_storage_photons || m >= dims.n_readout_photons) {
            throw Error(ErrorKind::invalid_dimension, "basis state outside truncation");
        }
        StateVector v = StateVector::Zero(dims.total());
        v(dims.index(q, n, m)) = 1.0;
        return v;
    }

    // Transmon density matrix tensored with the vacuum of both modes.
    static QuantumState from_transmon(const OperatorMatrix& rho_q, const SubsystemDims& dims) {
        if (rho_q.rows() > dims.n_transmon_levels) {
            throw Error(ErrorKind::dimension_mismatch, "transmon state larger than truncation");
        }
        OperatorMatrix rho = OperatorMatrix::Zero(dims.total(), dims.total());
        for (int i = 0; i < rho_q.rows(); ++i)
            for (int j = 0; j < rho_q.cols(); ++j) rho(dims.index(i, 0, 0), dims.index(j, 0, 0)) = rho_q(i, j);
        return QuantumState(rho, dims);
    }

    std::vector<std::string> violations() const {
        std::vector<std::string> out;
        const double tr_err = std::abs(rho_.trace() - cplx(1.0, 0.0));
        if (tr_err > trace_tol) out.push_back("trace deviates from 1 by " + std::to_string(tr_err));
        const double herm = max_abs(rho_ - rho_.adjoint());
        if (herm > hermitian_tol) out.push_back("not Hermitian (max |rho - rho^dag| = " + std::to_string(herm) + ")");
        const double lmin = min_eigenvalue();
        if (lmin < -positivity_tol) out.push_back("negative eigenvalue " + std::to_string(lmin));
        return out;
    }

    double min_eigenvalue() const {
        const OperatorMatrix h = 0.5 * (rho_ + rho_.adjoint());
        Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(h, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    double purity() const { return (rho_ * rho_).trace().real(); }

    const OperatorMatrix& rho() const noexcept { return rho_; }
    const SubsystemDims& dims() const noexcept { return dims_; }

private:
    OperatorMatrix rho_;
    SubsystemDims dims_;
};

inline cplx expectation(const QuantumState& state, const OperatorMatrix& op) {
    if (op.rows() != state.rho().rows() || op.cols() != state.rho().cols()) {
        throw Error(ErrorKind::dimension_mismatch, "observable does not match state dimension");
    }
    // trace(rho * op) without forming the product.
    return (state.rho().transpose().cwiseProduct(op)).sum();
}

// Reduced density matrix of one slot.
inline OperatorMatrix partial_trace_keep(const OperatorMatrix& rho, const SubsystemDims& dims, Slot keep) {
    const int d = dims.levels(keep);
    OperatorMatrix out = OperatorMatrix::Zero(d, d);
    const int n = dims.total();
    for (int i = 0; i < n; ++i) {
        const auto oi = dims.occupation(i);
        for (int j = 0; j < n; ++j) {
            const auto oj = dims.occupation(j);
            bool same_rest = true;
            for (int s = 0; s < 3; ++s) {
                if (s != static_cast<int>(keep) && oi[s] != oj[s]) {
                    same_rest = false;
                    break;
                }
            }
            if (same_rest) out(oi[static_cast<int>(keep)], oj[static_cast<int>(keep)]) += rho(i, j);
        }
    }
    return out;
}

// Population of each transmon level with both modes traced out.
inline std::vector<double> transmon_populations(const OperatorMatrix& rho, const SubsystemDims& dims) {
    std::vector<double> p(dims.n_transmon_levels, 0.0);
    for (int i = 0; i < dims.total(); ++i) p[dims.occupation(i)[0]] += rho(i, i).real();
    return p;
}

}  // namespace qmem
