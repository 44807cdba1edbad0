// tomography.hpp — single-qubit state and process tomography.
//
// Conventions: basis order (|g>, |e>), Z = diag(1, -1) so <Z> = +1 for |g>.
// A channel is E(rho) = sum_mn chi_mn P_m rho P_n with P = {I, X, Y, Z};
// trace-preserving channels have trace(chi) = 1 and the identity channel is
// chi = diag(1, 0, 0, 0).

#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "qmem/error.hpp"

namespace qmem {

using Qubit2 = Eigen::Matrix2cd;
using Chi4 = Eigen::Matrix4cd;

inline const std::array<Qubit2, 4>& pauli_basis() {
    static const std::array<Qubit2, 4> p = [] {
        using c = std::complex<double>;
        std::array<Qubit2, 4> m;
        m[0] << 1, 0, 0, 1;
        m[1] << 0, 1, 1, 0;
        m[2] << 0, c(0, -1), c(0, 1), 0;
        m[3] << 1, 0, 0, -1;
        return m;
    }();
    return p;
}

struct BlochVector {
    double x = 0.0, y = 0.0, z = 0.0;
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline BlochVector bloch_of(const Qubit2& rho) {
    const auto& p = pauli_basis();
    return {(rho * p[1]).trace().real(), (rho * p[2]).trace().real(), (rho * p[3]).trace().real()};
}

// rho = (I + xX + yY + zZ) / 2; vectors outside the ball are scaled onto its
// surface, which is the closest physical state.
inline Qubit2 state_tomography(BlochVector r) {
    const double n = r.norm();
    if (n > 1.0) {
        r.x /= n;
        r.y /= n;
        r.z /= n;
    }
    const auto& p = pauli_basis();
    return 0.5 * (p[0] + r.x * p[1] + r.y * p[2] + r.z * p[3]);
}

inline Qubit2 state_tomography(const std::function<BlochVector()>& measure) { return state_tomography(measure()); }

inline double trace_distance(const Qubit2& a, const Qubit2& b) {
    Eigen::SelfAdjointEigenSolver<Qubit2> es(a - b, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

// Inputs |g>, |e>, |+>, |+i>.
inline std::array<Qubit2, 4> tomography_inputs() {
    using c = std::complex<double>;
    const double h = 1.0 / std::sqrt(2.0);
    const std::array<Eigen::Vector2cd, 4> kets = {Eigen::Vector2cd(1, 0), Eigen::Vector2cd(0, 1),
                                                  Eigen::Vector2cd(h, h), Eigen::Vector2cd(h, c(0, h))};
    std::array<Qubit2, 4> out;
    for (int k = 0; k < 4; ++k) out[k] = kets[k] * kets[k].adjoint();
    return out;
}

struct ChiMatrix {
    Chi4 entries = Chi4::Zero();

    static ChiMatrix identity() {
        ChiMatrix c;
        c.entries(0, 0) = 1.0;
        return c;
    }

    // Applies the channel to a qubit state.
    Qubit2 apply(const Qubit2& rho) const {
        const auto& p = pauli_basis();
        Qubit2 out = Qubit2::Zero();
        for (int m = 0; m < 4; ++m)
            for (int n = 0; n < 4; ++n) out += entries(m, n) * p[m] * rho * p[n];
        return out;
    }

    Eigen::Vector4d eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<Chi4> es(0.5 * (entries + entries.adjoint()), Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }

    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if ((entries - entries.adjoint()).cwiseAbs().maxCoeff() > 1e-10) v.push_back("chi is not Hermitian");
        if (std::abs(entries.trace() - std::complex<double>(1.0)) > 1e-8) v.push_back("trace(chi) != 1");
        if (eigenvalues().minCoeff() < -1e-9) v.push_back("chi is not positive");
        return v;
    }
};

// Eigenvalue clipping at zero and trace renormalization.
inline ChiMatrix project_physical(const Chi4& raw) {
    Eigen::SelfAdjointEigenSolver<Chi4> es(0.5 * (raw + raw.adjoint()));
    Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
    const double tr = ev.sum();
    if (!(tr > 0.0)) throw Error(ErrorKind::reconstruction, "chi has no positive part");
    ev /= tr;
    ChiMatrix c;
    c.entries = es.eigenvectors() * ev.cast<std::complex<double>>().asDiagonal() * es.eigenvectors().adjoint();
    c.entries = 0.5 * (c.entries + c.entries.adjoint()).eval();
    return c;
}

namespace detail {

inline Eigen::Vector4cd vec(const Qubit2& m) { return Eigen::Map<const Eigen::Vector4cd>(m.data()); }

// beta maps vec(chi) (column-major) to vec(S), S the column-major superoperator.
inline const Eigen::Matrix<std::complex<double>, 16, 16>& beta_inverse() {
    static const Eigen::Matrix<std::complex<double>, 16, 16> inv = [] {
        const auto& p = pauli_basis();
        Eigen::Matrix<std::complex<double>, 16, 16> b;
        for (int n = 0; n < 4; ++n)
            for (int m = 0; m < 4; ++m) {
                // vec(P_m X P_n) = (P_n^T kron P_m) vec(X)
                Chi4 k;
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) k.block<2, 2>(2 * i, 2 * j) = p[n](j, i) * p[m];
                b.col(m + 4 * n) = Eigen::Map<const Eigen::Matrix<std::complex<double>, 16, 1>>(k.data());
            }
        return Eigen::Matrix<std::complex<double>, 16, 16>(b.fullPivLu().inverse());
    }();
    return inv;
}

}  // namespace detail

// Linear inversion from the outputs of the four inputs, without projection.
inline Chi4 chi_from_outputs(const std::array<Qubit2, 4>& inputs, const std::array<Qubit2, 4>& outputs) {
    Eigen::Matrix4cd in, out;
    for (int k = 0; k < 4; ++k) {
        in.col(k) = detail::vec(inputs[k]);
        out.col(k) = detail::vec(outputs[k]);
    }
    Eigen::FullPivLU<Eigen::Matrix4cd> lu(in);
    if (lu.rank() < 4) throw Error(ErrorKind::reconstruction, "tomography inputs do not span the operator space");
    const Eigen::Matrix4cd s = out * lu.inverse();
    const Eigen::Matrix<std::complex<double>, 16, 1> chi_vec =
        detail::beta_inverse() * Eigen::Map<const Eigen::Matrix<std::complex<double>, 16, 1>>(s.data());
    return Eigen::Map<const Chi4>(chi_vec.data());
}

struct ShotSampling {
    int shots = 0;
    std::uint64_t seed = 0;
};

struct ProcessTomography {
    std::array<Qubit2, 4> inputs;
    std::array<Qubit2, 4> outputs;
    ChiMatrix chi;
};

using ChannelFn = std::function<Qubit2(const Qubit2&)>;

// Outputs are measured exactly unless sampling.shots > 0, in which case each
// Pauli expectation is estimated from a binomial draw.
inline ProcessTomography process_tomography(const std::array<Qubit2, 4>& outputs,
                                            const std::optional<ShotSampling>& sampling = std::nullopt) {
    ProcessTomography r;
    r.inputs = tomography_inputs();
    r.outputs = outputs;
    if (sampling && sampling->shots > 0) {
        std::mt19937_64 rng(sampling->seed);
        for (auto& o : r.outputs) {
            const double tr = o.trace().real();
            BlochVector b = bloch_of(o / tr);
            for (double* e : {&b.x, &b.y, &b.z}) {
                std::binomial_distribution<int> draw(sampling->shots, std::clamp(0.5 * (1.0 + *e), 0.0, 1.0));
                *e = 2.0 * draw(rng) / sampling->shots - 1.0;
            }
            o = tr * state_tomography(b);
        }
    }
    r.chi = project_physical(chi_from_outputs(r.inputs, r.outputs));
    return r;
}

inline ProcessTomography process_tomography(const ChannelFn& channel,
                                            const std::optional<ShotSampling>& sampling = std::nullopt) {
    const auto in = tomography_inputs();
    std::array<Qubit2, 4> out;
    for (int k = 0; k < 4; ++k) out[k] = channel(in[k]);
    return process_tomography(out, sampling);
}

// Re trace(chi chi_ideal); for the identity channel this is chi_II.
inline double process_fidelity(const ChiMatrix& chi, const ChiMatrix& ideal = ChiMatrix::identity()) {
    return (chi.entries * ideal.entries).trace().real();
}

struct ZOptimizedFidelity {
    double raw = 0.0;
    double optimized = 0.0;
    double angle = 0.0;  // rad, applied as exp(-i angle Z / 2) after the channel
    ChiMatrix chi;       // reconstruction with the optimal rotation applied
};

inline constexpr double z_scan_resolution = 1e-3;

// Scans a deterministic Z rotation applied to the outputs at 1e-3 rad steps.
inline ZOptimizedFidelity z_optimized_fidelity(const ProcessTomography& pt) {
    ZOptimizedFidelity r;
    r.raw = process_fidelity(pt.chi);
    r.optimized = r.raw;
    r.chi = pt.chi;
    const int half = static_cast<int>(std::ceil(std::numbers::pi / z_scan_resolution));
    double best_raw_chi = -1.0;
    double best_angle = 0.0;
    for (int k = -half; k <= half; ++k) {
        const double th = k * z_scan_resolution;
        Qubit2 rz = Qubit2::Zero();
        rz(0, 0) = std::polar(1.0, -0.5 * th);
        rz(1, 1) = std::polar(1.0, 0.5 * th);
        std::array<Qubit2, 4> rot;
        for (int i = 0; i < 4; ++i) rot[i] = rz * pt.outputs[i] * rz.adjoint();
        const double f = chi_from_outputs(pt.inputs, rot)(0, 0).real();
        if (f > best_raw_chi) {
            best_raw_chi = f;
            best_angle = th;
        }
    }
    Qubit2 rz = Qubit2::Zero();
    rz(0, 0) = std::polar(1.0, -0.5 * best_angle);
    rz(1, 1) = std::polar(1.0, 0.5 * best_angle);
    std::array<Qubit2, 4> rot;
    for (int i = 0; i < 4; ++i) rot[i] = rz * pt.outputs[i] * rz.adjoint();
    const ChiMatrix chi = project_physical(chi_from_outputs(pt.inputs, rot));
    const double f = process_fidelity(chi);
    if (f > r.optimized) {
        r.optimized = f;
        r.angle = best_angle;
        r.chi = chi;
    }
    return r;
}

inline nlohmann::json to_json(const ChiMatrix& c) {
    nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
    for (int i = 0; i < 4; ++i) {
        nlohmann::json rr = nlohmann::json::array(), ii = nlohmann::json::array();
        for (int j = 0; j < 4; ++j) {
            rr.push_back(c.entries(i, j).real());
            ii.push_back(c.entries(i, j).imag());
        }
        re.push_back(rr);
        im.push_back(ii);
    }
    return {{"basis", {"I", "X", "Y", "Z"}}, {"real", re}, {"imag", im}};
}

inline void write_chi_csv(std::ostream& os, const ChiMatrix& c) {
    static const char* names[] = {"I", "X", "Y", "Z"};
    os.precision(17);
    os << "row,col,abs\n";
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) os << names[i] << ',' << names[j] << ',' << std::abs(c.entries(i, j)) << '\n';
}

}  // namespace qmem
