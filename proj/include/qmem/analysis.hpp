// analysis.hpp — least-squares fitters and sample statistics.
//
// All fitters share one Levenberg-Marquardt core (numeric Jacobian, at most
// 200 iterations, relative step tolerance 1e-10). Uncertainties come from the
// linearized covariance (J^T J)^-1 * s^2 with s^2 = SSR / (n - p).
//
// Seeds:
//   exponential       log-linear regression on |y - c| with c just beyond the tail
//   decaying cosine   periodogram peak for f, linear solve for amplitude/phase
//   lorentzian        maximum for f0, half-maximum crossings for the width
//   leakage           floor of the shortest working point for a, grid for gamma

#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "qmem/error.hpp"
#include "qmem/units.hpp"

namespace qmem {

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> params;
    std::vector<double> uncertainties;
    double residual_norm = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
    std::map<std::string, double> derived;  // quantities computed from the fit
    std::string note;

    std::size_t position(const std::string& name) const {
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw Error(ErrorKind::fit_failed, "no parameter named " + name);
        return static_cast<std::size_t>(it - names.begin());
    }
    double value(const std::string& name) const { return params[position(name)]; }
    double sigma(const std::string& name) const { return uncertainties[position(name)]; }
};

inline nlohmann::json to_json(const FitResult& f) {
    nlohmann::json j;
    j["converged"] = f.converged;
    j["iterations"] = f.iterations;
    j["residual_norm"] = f.residual_norm;
    for (std::size_t i = 0; i < f.names.size(); ++i) {
        j["params"][f.names[i]] = {{"value", f.params[i]}, {"sigma", f.uncertainties[i]}};
    }
    for (const auto& [k, v] : f.derived) j["derived"][k] = v;
    if (!f.note.empty()) j["note"] = f.note;
    return j;
}

using ModelFn = std::function<double(double, const std::vector<double>&)>;

struct LmOptions {
    int max_iterations = 200;
    double step_tolerance = 1e-10;
};

namespace detail {

inline double sum_squares(const ModelFn& f, const std::vector<double>& xs, const std::vector<double>& ys,
                          const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - f(xs[i], p);
        s += r * r;
    }
    return s;
}

inline Eigen::MatrixXd jacobian(const ModelFn& f, const std::vector<double>& xs, const std::vector<double>& p) {
    const int n = static_cast<int>(xs.size());
    const int m = static_cast<int>(p.size());
    Eigen::MatrixXd j(n, m);
    std::vector<double> q = p;
    for (int k = 0; k < m; ++k) {
        const double h = 1e-7 * std::max(std::abs(p[k]), 1e-6);
        q[k] = p[k] + h;
        std::vector<double> up(n);
        for (int i = 0; i < n; ++i) up[i] = f(xs[i], q);
        q[k] = p[k] - h;
        for (int i = 0; i < n; ++i) j(i, k) = (up[i] - f(xs[i], q)) / (2.0 * h);
        q[k] = p[k];
    }
    return j;
}

inline bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace detail

inline FitResult levenberg_marquardt(const ModelFn& f, const std::vector<double>& xs, const std::vector<double>& ys,
                                     std::vector<double> p, std::vector<std::string> names,
                                     const LmOptions& opt = {}) {
    if (xs.size() != ys.size()) throw Error(ErrorKind::fit_failed, "xs and ys differ in length");
    if (xs.size() < p.size()) throw Error(ErrorKind::insufficient_data, "fewer points than parameters");
    const int m = static_cast<int>(p.size());
    FitResult out;
    out.names = std::move(names);

    double cost = detail::sum_squares(f, xs, ys, p);
    double lambda = 1e-3;
    bool converged = false;
    int it = 0;
    for (; it < opt.max_iterations && !converged; ++it) {
        if (cost == 0.0) {
            converged = true;
            break;
        }
        const Eigen::MatrixXd j = detail::jacobian(f, xs, p);
        Eigen::VectorXd r(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) r(i) = ys[i] - f(xs[i], p);
        const Eigen::MatrixXd a = j.transpose() * j;
        bool improved = false;
        const int n = static_cast<int>(xs.size());
        // Damped step as the least-squares solution of [J; sqrt(lambda) D] delta = [r; 0].
        Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, m);
        aug.topRows(n) = j;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);
        rhs.head(n) = r;
        while (!improved) {
            for (int k = 0; k < m; ++k) aug(n + k, k) = std::sqrt(lambda * std::max(a(k, k), 1e-30));
            const Eigen::VectorXd delta = aug.colPivHouseholderQr().solve(rhs);
            std::vector<double> trial = p;
            for (int k = 0; k < m; ++k) trial[k] += delta(k);
            const double c = detail::all_finite(trial) ? detail::sum_squares(f, xs, ys, trial) : cost + 1.0;
            if (std::isfinite(c) && c <= cost) {
                bool small = true;
                for (int k = 0; k < m; ++k) {
                    if (std::abs(delta(k)) > opt.step_tolerance * (std::abs(p[k]) + opt.step_tolerance)) small = false;
                }
                p = trial;
                const bool flat = cost - c <= 1e-15 * cost && lambda <= 1e-2;
                cost = c;
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = true;
                if (small || flat) converged = true;
            } else {
                lambda *= 10.0;
                if (lambda > 1e14) {
                    // No downhill step left: p is a minimum to working precision.
                    converged = true;
                    break;
                }
            }
        }
    }

    out.params = p;
    out.iterations = it;
    out.converged = converged;
    out.residual_norm = std::sqrt(cost);

    const int n = static_cast<int>(xs.size());
    const Eigen::MatrixXd j = detail::jacobian(f, xs, p);
    const Eigen::MatrixXd cov_unscaled = (j.transpose() * j).completeOrthogonalDecomposition().pseudoInverse();
    const double s2 = n > m ? cost / (n - m) : 0.0;
    out.uncertainties.resize(m);
    for (int k = 0; k < m; ++k) out.uncertainties[k] = std::sqrt(std::max(cov_unscaled(k, k) * s2, 0.0));
    return out;
}

namespace detail {

inline void require_increasing(const std::vector<double>& xs) {
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (!(xs[i] > xs[i - 1])) throw Error(ErrorKind::fit_failed, "xs must be strictly increasing");
    }
}

inline void require_converged(const FitResult& r, const std::string& what) {
    if (!r.converged || !all_finite(r.params)) {
        std::string msg = what + " did not converge after " + std::to_string(r.iterations) + " iterations; params:";
        for (std::size_t i = 0; i < r.names.size(); ++i) msg += " " + r.names[i] + "=" + std::to_string(r.params[i]);
        throw Error(ErrorKind::fit_failed, msg);
    }
}

inline double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

// Least-squares line y = c0 + c1 x.
inline std::pair<double, double> linear_regression(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    const double c1 = sxx > 0.0 ? sxy / sxx : 0.0;
    return {my - c1 * mx, c1};
}

}  // namespace detail

// ------------------------------- exponential --------------------------------

// A exp(-x/T) + offset.
inline FitResult fit_exponential(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() < 5 || xs.size() != ys.size()) throw Error(ErrorKind::insufficient_data, "exponential fit needs >= 5 points");
    detail::require_increasing(xs);
    const auto [lo, hi] = std::minmax_element(ys.begin(), ys.end());
    const double range = *hi - *lo;
    const double scale = std::max(std::abs(*hi), std::abs(*lo));
    if (range <= 1e-14 * std::max(scale, 1e-300)) {
        FitResult r;
        r.names = {"A", "T", "offset"};
        r.params = {0.0, units::unbounded, detail::mean(ys)};
        r.uncertainties = {0.0, units::unbounded, 0.0};
        r.residual_norm = 0.0;
        r.converged = false;
        r.note = "constant data";
        return r;
    }

    const double s = ys.front() >= ys.back() ? 1.0 : -1.0;
    const double c = (s > 0 ? *lo : *hi) - s * 0.01 * range;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double v = s * (ys[i] - c);
        if (v > 0.0) {
            lx.push_back(xs[i]);
            ly.push_back(std::log(v));
        }
    }
    const auto [c0, c1] = detail::linear_regression(lx, ly);
    const double span = xs.back() - xs.front();
    const double t0 = c1 < 0.0 ? -1.0 / c1 : span;
    const double a0 = s * std::exp(c0);

    const ModelFn model = [](double x, const std::vector<double>& p) { return p[0] * std::exp(-x / p[1]) + p[2]; };
    FitResult r = levenberg_marquardt(model, xs, ys, {a0, t0, c}, {"A", "T", "offset"});
    detail::require_converged(r, "exponential fit");
    return r;
}

// ------------------------------- decaying cosine ----------------------------

namespace detail {

struct CosineSeed {
    double amplitude, t2, phase, offset, residual;
};

// Best A, phase, offset for fixed f and T2 (linear least squares).
inline CosineSeed linear_cosine(const std::vector<double>& xs, const std::vector<double>& ys, double f, double t2) {
    const int n = static_cast<int>(xs.size());
    Eigen::MatrixXd m(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const double e = std::exp(-xs[i] / t2);
        const double w = 2.0 * std::numbers::pi * f * xs[i];
        m(i, 0) = e * std::cos(w);
        m(i, 1) = e * std::sin(w);
        m(i, 2) = 1.0;
        y(i) = ys[i];
    }
    const Eigen::VectorXd c = m.colPivHouseholderQr().solve(y);
    const double res = (m * c - y).squaredNorm();
    return {std::hypot(c(0), c(1)), t2, std::atan2(-c(1), c(0)), c(2), res};
}

}  // namespace detail

// A exp(-x/T2) cos(2 pi f x + phase) + offset. Zero-frequency data reduce to
// fit_exponential (f = 0, phase = 0).
inline FitResult fit_decaying_cosine(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() < 8 || xs.size() != ys.size()) throw Error(ErrorKind::insufficient_data, "cosine fit needs >= 8 points");
    detail::require_increasing(xs);
    const std::size_t n = xs.size();
    const double span = xs.back() - xs.front();
    const double mean = detail::mean(ys);
    double var = 0.0;
    for (double y : ys) var += (y - mean) * (y - mean);
    if (var <= 1e-24 * n * (1.0 + mean * mean)) throw Error(ErrorKind::fit_failed, "no spectral peak: data are constant");

    // Reference level from the last quarter so that a pure decay peaks at f = 0.
    const std::size_t tail = std::max<std::size_t>(1, n / 4);
    double ref = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) ref += ys[i];
    ref /= tail;

    const double nyquist = 0.5 * (n - 1) / span;
    const int grid = static_cast<int>(10 * n);
    double best_power = -1.0, best_f = 0.0;
    for (int k = 0; k <= grid; ++k) {
        const double f = nyquist * k / grid;
        std::complex<double> acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += (ys[i] - ref) * std::polar(1.0, -2.0 * std::numbers::pi * f * xs[i]);
        const double pw = std::norm(acc);
        if (pw > best_power) {
            best_power = pw;
            best_f = f;
        }
    }
    if (best_f == 0.0) {
        FitResult e = fit_exponential(xs, ys);
        FitResult r;
        r.names = {"A", "T2", "f", "phase", "offset"};
        r.params = {e.params[0], e.params[1], 0.0, 0.0, e.params[2]};
        r.uncertainties = {e.uncertainties[0], e.uncertainties[1], 0.0, 0.0, e.uncertainties[2]};
        r.residual_norm = e.residual_norm;
        r.converged = e.converged;
        r.iterations = e.iterations;
        r.note = "no oscillation: exponential fit";
        return r;
    }

    detail::CosineSeed seed{0, 0, 0, 0, std::numeric_limits<double>::infinity()};
    for (double k : {0.25, 0.5, 1.0, 2.0, 4.0, 16.0}) {
        const auto s = detail::linear_cosine(xs, ys, best_f, k * span);
        if (s.residual < seed.residual) seed = s;
    }
    if (!(seed.amplitude > 0.0)) throw Error(ErrorKind::fit_failed, "zero oscillation amplitude");

    const ModelFn model = [](double x, const std::vector<double>& p) {
        return p[0] * std::exp(-x / p[1]) * std::cos(2.0 * std::numbers::pi * p[2] * x + p[3]) + p[4];
    };
    FitResult r = levenberg_marquardt(model, xs, ys, {seed.amplitude, seed.t2, best_f, seed.phase, seed.offset},
                                      {"A", "T2", "f", "phase", "offset"});
    detail::require_converged(r, "decaying-cosine fit");
    if (r.params[0] < 0.0) {
        r.params[0] = -r.params[0];
        r.params[3] += std::numbers::pi;
    }
    if (r.params[2] < 0.0) {
        r.params[2] = -r.params[2];
        r.params[3] = -r.params[3];
    }
    r.params[3] = std::remainder(r.params[3], 2.0 * std::numbers::pi);
    return r;
}

inline double r_squared(const std::vector<double>& ys, const std::vector<double>& model) {
    const double m = detail::mean(ys);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        ss_res += (ys[i] - model[i]) * (ys[i] - model[i]);
        ss_tot += (ys[i] - m) * (ys[i] - m);
    }
    return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
}

// A cos(x + phase) + offset for angles x in rad (period fixed to 2 pi).
// derived: r_squared.
inline FitResult fit_angle_cosine(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() < 4 || xs.size() != ys.size()) throw Error(ErrorKind::insufficient_data, "angle fit needs >= 4 points");
    detail::require_increasing(xs);
    const auto seed = detail::linear_cosine(xs, ys, 0.5 / std::numbers::pi, std::numeric_limits<double>::infinity());
    const ModelFn model = [](double x, const std::vector<double>& p) { return p[0] * std::cos(x + p[1]) + p[2]; };
    FitResult r = levenberg_marquardt(model, xs, ys, {seed.amplitude, seed.phase, seed.offset}, {"A", "phase", "offset"});
    detail::require_converged(r, "angle-cosine fit");
    std::vector<double> fitted;
    for (double x : xs) fitted.push_back(model(x, r.params));
    r.derived["r_squared"] = r_squared(ys, fitted);
    return r;
}

// ------------------------------- lorentzian ---------------------------------

// peak / (1 + 4 (f - f0)^2 / fwhm^2) + floor, fitted in coordinates centred
// on the sample grid.
inline FitResult fit_lorentzian(const std::vector<double>& freqs, const std::vector<double>& powers) {
    if (freqs.size() < 7 || freqs.size() != powers.size()) {
        throw Error(ErrorKind::insufficient_data, "lorentzian fit needs >= 7 points");
    }
    detail::require_increasing(freqs);
    const double center = 0.5 * (freqs.front() + freqs.back());
    const double half = 0.5 * (freqs.back() - freqs.front());
    std::vector<double> u(freqs.size());
    for (std::size_t i = 0; i < freqs.size(); ++i) u[i] = (freqs[i] - center) / half;

    const auto imax = static_cast<std::size_t>(std::max_element(powers.begin(), powers.end()) - powers.begin());
    const double floor0 = *std::min_element(powers.begin(), powers.end());
    const double peak0 = powers[imax] - floor0;
    const double level = floor0 + 0.5 * peak0;
    std::size_t l = imax, r = imax;
    while (l > 0 && powers[l] > level) --l;
    while (r + 1 < powers.size() && powers[r] > level) ++r;
    if (powers[l] > level || powers[r] > level) {
        throw Error(ErrorKind::insufficient_span, "sample span does not cover the linewidth");
    }
    const double w0 = std::max(u[r] - u[l], 2.0 / static_cast<double>(freqs.size()));

    const ModelFn model = [](double x, const std::vector<double>& p) {
        const double d = (x - p[0]) / p[1];
        return p[2] / (1.0 + 4.0 * d * d) + p[3];
    };
    FitResult fit = levenberg_marquardt(model, u, powers, {u[imax], w0, peak0, floor0}, {"f0", "fwhm", "peak", "floor"});
    detail::require_converged(fit, "lorentzian fit");
    fit.params[1] = std::abs(fit.params[1]);
    if (fit.params[1] > 2.0) throw Error(ErrorKind::insufficient_span, "fitted linewidth exceeds the sample span");
    fit.params[0] = center + half * fit.params[0];
    fit.uncertainties[0] *= half;
    fit.params[1] *= half;
    fit.uncertainties[1] *= half;
    return fit;
}

// ------------------------------- leakage ------------------------------------

// P_L = a / (2a + gamma t) [1 - exp(-2a - gamma t)].
inline double leakage_population(double t_p, double a, double gamma_sp) {
    if (a < 0.0 || gamma_sp < 0.0 || !(t_p > 0.0)) {
        throw Error(ErrorKind::invalid_parameters, "leakage model needs a >= 0, gamma_sp >= 0, t_p > 0");
    }
    const double rate = 2.0 * a + gamma_sp * t_p;
    if (rate == 0.0) return 0.0;
    return a / rate * -std::expm1(-rate);
}

// Short-pulse fidelity floor 1 - (1 - exp(-2a)) / 2.
inline double leakage_floor(double a) { return 1.0 + 0.5 * std::expm1(-2.0 * a); }

// F_corr = 1 - P_L(t_p, a, gamma_sp); gamma_sp in rad/us (derived gamma_sp_MHz is gamma/2pi).
inline FitResult fit_leakage(const std::vector<double>& t_ps, const std::vector<double>& f_corrs) {
    if (t_ps.size() < 4 || t_ps.size() != f_corrs.size()) {
        throw Error(ErrorKind::insufficient_data, "leakage fit needs >= 4 working points");
    }
    detail::require_increasing(t_ps);
    // Unconstrained in the fit; the closed form is evaluated with the signs kept.
    const ModelFn model = [](double t, const std::vector<double>& p) {
        const double rate = 2.0 * p[0] + p[1] * t;
        if (std::abs(rate) < 1e-300) return 1.0;
        return 1.0 - p[0] / rate * -std::expm1(-rate);
    };
    const double leak = std::clamp(1.0 - f_corrs.front(), 0.0, 0.49);
    double a0 = -0.5 * std::log1p(-2.0 * leak);
    std::vector<double> best{a0, 0.0};
    double best_cost = std::numeric_limits<double>::infinity();
    for (double a : {a0, 2.0 * a0 + 0.05, 0.5 * a0}) {
        for (int k = 0; k <= 40; ++k) {
            const double g = k == 0 ? 0.0 : std::pow(10.0, -1.0 + 0.1 * k);  // 0.1 .. 1000 rad/us
            const double c = detail::sum_squares(model, t_ps, f_corrs, {a, g});
            if (c < best_cost) {
                best_cost = c;
                best = {a, g};
            }
        }
    }
    FitResult r = levenberg_marquardt(model, t_ps, f_corrs, best, {"a", "gamma_sp"});
    detail::require_converged(r, "leakage fit");
    r.derived["gamma_sp_MHz"] = units::to_MHz(r.params[1]);
    r.derived["gamma_sp_MHz_sigma"] = units::to_MHz(r.uncertainties[1]);
    r.derived["floor"] = leakage_floor(r.params[0]);
    return r;
}

// ------------------------------- statistics ---------------------------------

struct Histogram {
    std::vector<double> edges;  // size = counts + 1
    std::vector<int> counts;
};

struct SampleStatistics {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n - 1)
    double median = 0.0;
    double iqr = 0.0;
    // Shapiro-Francia W' and its Royston p-value; normal when p >= 0.05.
    double normality_w = 0.0;
    double normality_p = 0.0;
    bool normal = false;
    Histogram histogram;
};

inline constexpr double normality_alpha = 0.05;

namespace detail {

// Linear-interpolated quantile of sorted data (type 7).
inline double quantile(const std::vector<double>& sorted, double q) {
    const double h = (sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

// Histogram bins follow Freedman-Diaconis: width 2 IQR n^(-1/3), anchored at the minimum.
inline SampleStatistics sample_statistics(std::vector<double> samples) {
    const std::size_t n = samples.size();
    if (n < 8) throw Error(ErrorKind::insufficient_data, "statistics need >= 8 samples");
    std::sort(samples.begin(), samples.end());
    SampleStatistics s;
    s.mean = detail::mean(samples);
    double ss = 0.0;
    for (double x : samples) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / (n - 1));
    s.median = detail::quantile(samples, 0.5);
    s.iqr = detail::quantile(samples, 0.75) - detail::quantile(samples, 0.25);

    if (ss > 0.0) {
        const boost::math::normal_distribution<> z;
        std::vector<double> m(n);
        double mm = 0.0, mx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = boost::math::quantile(z, (i + 1 - 0.375) / (n + 0.25));
            mm += m[i] * m[i];
            mx += m[i] * samples[i];
        }
        s.normality_w = mx * mx / (mm * ss);
        const double ln = std::log(static_cast<double>(n));
        const double lln = std::log(ln);
        const double mu = -1.2725 + 1.0521 * (lln - ln);
        const double sd = 1.0308 - 0.26758 * (lln + 2.0 / ln);
        const double score = (std::log(std::max(1.0 - s.normality_w, 1e-300)) - mu) / sd;
        s.normality_p = boost::math::cdf(boost::math::complement(z, score));
        s.normal = s.normality_p >= normality_alpha;
    } else {
        s.normality_w = std::numeric_limits<double>::quiet_NaN();
        s.normality_p = std::numeric_limits<double>::quiet_NaN();
        s.normal = false;
    }

    const double lo = samples.front(), hi = samples.back();
    const double width = 2.0 * s.iqr / std::cbrt(static_cast<double>(n));
    const int bins = (width > 0.0 && hi > lo) ? std::max(1, static_cast<int>(std::ceil((hi - lo) / width))) : 1;
    const double w = bins > 1 ? width : std::max(hi - lo, 0.0);
    s.histogram.counts.assign(bins, 0);
    for (int k = 0; k <= bins; ++k) s.histogram.edges.push_back(lo + k * w);
    for (double x : samples) {
        int k = w > 0.0 ? static_cast<int>((x - lo) / w) : 0;
        s.histogram.counts[std::clamp(k, 0, bins - 1)]++;
    }
    return s;
}

}  // namespace qmem
