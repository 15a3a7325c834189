// signal.hpp - synchronization measure, probe spectra, linewidths and correlation indicators

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fftw3.h>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "qsync/dynamics.hpp"
#include "qsync/errors.hpp"
#include "qsync/spin_model.hpp"
#include "qsync/state.hpp"

namespace qsync {

// ---------------------------------------------------------------------------------------------
// Pearson correlation over a forward window [t_index, t_index + window)

inline std::optional<double> sync_measure(std::span<const double> f, std::span<const double> g,
                                          std::size_t t_index, std::size_t window) {
    if (window < 8) throw DomainError("sync window needs at least 8 samples");
    if (t_index + window > f.size() || t_index + window > g.size())
        throw DomainError("sync window does not fit inside the signals");
    const auto fs = f.subspan(t_index, window), gs = g.subspan(t_index, window);
    double mf = 0.0, mg = 0.0, scale_f = 0.0, scale_g = 0.0;
    for (std::size_t k = 0; k < window; ++k) {
        mf += fs[k];
        mg += gs[k];
        scale_f = std::max(scale_f, std::abs(fs[k]));
        scale_g = std::max(scale_g, std::abs(gs[k]));
    }
    mf /= static_cast<double>(window);
    mg /= static_cast<double>(window);
    double sff = 0.0, sgg = 0.0, sfg = 0.0;
    for (std::size_t k = 0; k < window; ++k) {
        const double df = fs[k] - mf, dg = gs[k] - mg;
        sff += df * df;
        sgg += dg * dg;
        sfg += df * dg;
    }
    const double n = static_cast<double>(window);
    // Variance at rounding level of the signal itself counts as constant.
    const double floor_f = n * std::pow(1e-14 * scale_f, 2), floor_g = n * std::pow(1e-14 * scale_g, 2);
    if (!(sff > floor_f) || !(sgg > floor_g)) return std::nullopt;
    return std::clamp(sfg / std::sqrt(sff * sgg), -1.0, 1.0);
}

// ---------------------------------------------------------------------------------------------
// Spectra

struct SpectrumOptions {
    int pad_factor{4};
    std::optional<double> max_frequency; // band edge of the returned grid; Nyquist when unset
    double median_factor{5.0};           // peaks must exceed this multiple of the median magnitude
    double relative_floor{0.05};         // and this fraction of the tallest bin (rejects taper sidelobes)
    bool operator==(const SpectrumOptions&) const = default;
};

struct SpectralPeak {
    double frequency;
    double height;
    std::optional<double> fwhm; // raw magnitude half-maximum width, none when a side is shadowed
    std::size_t bin;
};

struct SpectrumEstimate {
    std::vector<double> freqs;
    std::vector<double> magnitude;
    std::vector<SpectralPeak> peaks; // by height, descending
    // Window bookkeeping needed to model the estimator itself.
    double t_start{0.0};
    double t_end{0.0};
    double dt{0.0};
    std::size_t n_samples{0};
    int pad_factor{4};

    double bin_width() const { return 2.0 * std::numbers::pi / (static_cast<double>(n_samples * pad_factor) * dt); }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Real-input transform of fixed length; only fftw_execute is thread safe, so planning is serialized.
class RealFFT {
public:
    explicit RealFFT(std::size_t n) : n_(n) {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        in_ = fftw_alloc_real(n_);
        out_ = fftw_alloc_complex(n_ / 2 + 1);
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), in_, out_, FFTW_ESTIMATE);
    }
    RealFFT(const RealFFT&) = delete;
    RealFFT& operator=(const RealFFT&) = delete;
    ~RealFFT() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(in_);
        fftw_free(out_);
    }

    std::size_t size() const { return n_; }

    // |X_j| * scale for j < n_bins; input beyond `data.size()` is zero padding.
    void magnitude(std::span<const double> data, double scale, std::size_t n_bins, std::vector<double>& out) {
        std::fill(in_, in_ + n_, 0.0);
        std::copy(data.begin(), data.end(), in_);
        fftw_execute(plan_);
        out.resize(n_bins);
        for (std::size_t j = 0; j < n_bins; ++j) out[j] = scale * std::hypot(out_[j][0], out_[j][1]);
    }

private:
    std::size_t n_;
    double* in_;
    fftw_complex* out_;
    fftw_plan plan_;
};

inline double uniform_step(std::span<const double> times) {
    if (times.size() < 2) throw NonUniformGridError("time grid needs at least two samples");
    const double dt = times[1] - times[0];
    if (!(dt > 0.0)) throw NonUniformGridError("time grid must be increasing");
    for (std::size_t k = 1; k + 1 < times.size(); ++k)
        if (std::abs((times[k + 1] - times[k]) - dt) > 1e-9 * dt)
            throw NonUniformGridError("time grid is not uniform");
    return dt;
}

// Index range [first, last] of samples with t in [t_start, t_end].
inline std::pair<std::size_t, std::size_t> window_indices(std::span<const double> times, double t_start,
                                                          double t_end, double dt) {
    const double eps = 1e-9 * dt;
    if (!(t_end > t_start)) throw DomainError("empty spectral window");
    if (times.empty() || t_start < times.front() - eps || t_end > times.back() + eps)
        throw DomainError("window lies outside the simulated horizon");
    const auto lo = std::lower_bound(times.begin(), times.end(), t_start - eps);
    const auto hi = std::upper_bound(times.begin(), times.end(), t_end + eps);
    return {static_cast<std::size_t>(lo - times.begin()), static_cast<std::size_t>(hi - times.begin()) - 1};
}

// mean subtraction + Hann taper, in place
inline void condition_segment(std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / (n - 1.0)));
        x[k] = (x[k] - mean) * w;
    }
}

inline double median(std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

// Fractional bin where the magnitude first drops below `level`, walking from `bin` in `dir`.
// None when the band edge is hit or the magnitude rises again before crossing.
inline std::optional<double> level_crossing(const std::vector<double>& mag, std::size_t bin, int dir, double level) {
    std::ptrdiff_t j = static_cast<std::ptrdiff_t>(bin);
    const auto n = static_cast<std::ptrdiff_t>(mag.size());
    while (true) {
        const std::ptrdiff_t next = j + dir;
        if (next < 0 || next >= n) return std::nullopt;
        if (mag[next] > mag[j]) return std::nullopt;
        if (mag[next] < level) {
            const double frac = (mag[j] - level) / (mag[j] - mag[next]);
            return static_cast<double>(j) + dir * frac;
        }
        j = next;
    }
}

} // namespace detail

inline SpectrumEstimate windowed_fft(std::span<const double> signal, std::span<const double> times,
                                     double t_start, double t_end, const SpectrumOptions& options = {}) {
    if (signal.size() != times.size()) throw DomainError("signal and time grid differ in length");
    if (options.pad_factor < 1) throw DomainError("pad factor must be >= 1");
    const auto [first, last] = detail::window_indices(times, t_start, t_end, times.size() > 1 ? times[1] - times[0] : 1.0);
    const std::size_t n = last - first + 1;
    if (last < first || n < 64) throw DomainError("spectral window needs at least 64 samples");
    const double dt = detail::uniform_step(times.subspan(first, n));

    SpectrumEstimate out;
    out.t_start = times[first];
    out.t_end = times[last];
    out.dt = dt;
    out.n_samples = n;
    out.pad_factor = options.pad_factor;

    const std::size_t m = n * static_cast<std::size_t>(options.pad_factor);
    const double dw = out.bin_width();
    std::size_t n_bins = m / 2 + 1;
    if (options.max_frequency) {
        if (!(*options.max_frequency > 0.0)) throw DomainError("max_frequency must be > 0");
        n_bins = std::min(n_bins, static_cast<std::size_t>(std::floor(*options.max_frequency / dw)) + 1);
    }
    if (n_bins < 3) throw DomainError("frequency band too narrow");

    std::vector<double> seg(signal.begin() + static_cast<std::ptrdiff_t>(first),
                            signal.begin() + static_cast<std::ptrdiff_t>(last + 1));
    detail::condition_segment(seg);
    detail::RealFFT fft(m);
    fft.magnitude(seg, dt, n_bins, out.magnitude);
    out.freqs.resize(n_bins);
    for (std::size_t j = 0; j < n_bins; ++j) out.freqs[j] = static_cast<double>(j) * dw;

    const auto& mag = out.magnitude;
    const double tallest = *std::max_element(mag.begin(), mag.end());
    const double threshold = std::max(options.median_factor * detail::median(mag), options.relative_floor * tallest);
    for (std::size_t j = 1; j + 1 < n_bins; ++j) {
        if (!(mag[j] > mag[j - 1] && mag[j] >= mag[j + 1] && mag[j] > threshold)) continue;
        // three-point parabolic refinement
        const double a = mag[j - 1], b = mag[j], c = mag[j + 1];
        const double denom = a - 2.0 * b + c;
        const double p = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
        SpectralPeak pk{(static_cast<double>(j) + p) * dw, b - 0.25 * (a - c) * p, std::nullopt, j};
        const auto lo = detail::level_crossing(mag, j, -1, 0.5 * pk.height);
        const auto hi = detail::level_crossing(mag, j, +1, 0.5 * pk.height);
        if (lo && hi) pk.fwhm = (*hi - *lo) * dw;
        out.peaks.push_back(pk);
    }
    std::stable_sort(out.peaks.begin(), out.peaks.end(),
                     [](const SpectralPeak& x, const SpectralPeak& y) { return x.height > y.height; });
    return out;
}

// ---------------------------------------------------------------------------------------------
// Linewidth

struct LinewidthOptions {
    double neighbor_factor{3.0};      // isolation: no other peak within this many half-widths (FWHM)
    double max_relative_residual{0.05};
};

struct LinewidthFit {
    double fwhm;      // decay rate gamma of e^{-gamma t/2}, i.e. the power-spectrum FWHM
    double center;
    double relative_residual;
};

namespace detail {

// Estimator applied to A e^{-gamma t/2} cos(w t + phi) on the same window; fitted to the measured
// magnitudes so that the taper and finite-window broadening are modeled, not corrected for.
struct TemplateResidual {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    const SpectrumEstimate* spec;
    std::size_t first_bin;
    std::size_t n_fit;
    double height;
    RealFFT* fft;

    int inputs() const { return 4; }
    int values() const { return static_cast<int>(n_fit); }

    // x = (a, b, log gamma, omega0)
    void model(const Eigen::VectorXd& x, std::vector<double>& mag) const {
        const double gamma = std::exp(x(2)), w0 = x(3);
        std::vector<double> seg(spec->n_samples);
        for (std::size_t k = 0; k < seg.size(); ++k) {
            const double t = static_cast<double>(k) * spec->dt;
            seg[k] = std::exp(-0.5 * gamma * t) * (x(0) * std::cos(w0 * t) + x(1) * std::sin(w0 * t));
        }
        condition_segment(seg);
        fft->magnitude(seg, spec->dt, first_bin + n_fit, mag);
    }

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
        std::vector<double> mag;
        model(x, mag);
        for (std::size_t i = 0; i < n_fit; ++i)
            fvec(static_cast<Eigen::Index>(i)) = (mag[first_bin + i] - spec->magnitude[first_bin + i]) / height;
        return 0;
    }
};

} // namespace detail

inline LinewidthFit peak_linewidth(const SpectrumEstimate& spectrum, std::size_t peak_index,
                                   const LinewidthOptions& options = {}) {
    if (peak_index >= spectrum.peaks.size()) throw DomainError("peak index out of range");
    const auto& pk = spectrum.peaks[peak_index];
    if (!pk.fwhm) throw NotResolvableError("peak half-maximum is shadowed by a neighboring feature");
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < spectrum.peaks.size(); ++i) {
        if (i == peak_index) continue;
        const auto& other = spectrum.peaks[i];
        const double width = std::max(*pk.fwhm, other.fwhm.value_or(inf));
        if (std::abs(other.frequency - pk.frequency) < options.neighbor_factor * width)
            throw NotResolvableError("peaks overlap: no clear separation for a linewidth measurement");
    }

    const double dw = spectrum.bin_width();
    const double reach = std::max(2.0 * *pk.fwhm, 5.0 * dw);
    const auto lo_bin = static_cast<std::size_t>(std::max(1.0, std::floor((pk.frequency - reach) / dw)));
    const auto hi_bin = std::min(spectrum.magnitude.size() - 1,
                                 static_cast<std::size_t>(std::ceil((pk.frequency + reach) / dw)));
    if (hi_bin < lo_bin + 6) throw NotResolvableError("too few bins around the peak");

    detail::RealFFT fft(spectrum.n_samples * static_cast<std::size_t>(spectrum.pad_factor));
    detail::TemplateResidual functor{&spectrum, lo_bin, hi_bin - lo_bin + 1, pk.height, &fft};

    // Unit-amplitude template height sets the scale of (a, b).
    const double gamma_guess = std::max(*pk.fwhm / std::sqrt(3.0), 1e-6);
    Eigen::VectorXd probe(4);
    probe << 1.0, 0.0, std::log(gamma_guess), pk.frequency;
    std::vector<double> unit;
    functor.model(probe, unit);
    const double unit_peak = *std::max_element(unit.begin() + static_cast<std::ptrdiff_t>(lo_bin), unit.end());
    const double amp = unit_peak > 0.0 ? pk.height / unit_peak : 1.0;

    double best_norm = inf;
    Eigen::VectorXd best;
    const double r = std::sqrt(0.5);
    const std::pair<double, double> phases[] = {{1, 0}, {0, 1}, {r, r}, {r, -r}};
    for (double gscale : {1.0, 0.3}) {
        for (const auto& [ca, cb] : phases) {
            Eigen::VectorXd x(4);
            x << amp * ca, amp * cb, std::log(gamma_guess * gscale), pk.frequency;
            Eigen::NumericalDiff<detail::TemplateResidual> nd(functor);
            Eigen::LevenbergMarquardt<Eigen::NumericalDiff<detail::TemplateResidual>> lm(nd);
            lm.parameters.maxfev = 400;
            lm.minimize(x);
            Eigen::VectorXd f(functor.values());
            functor(x, f);
            if (std::isfinite(f.norm()) && f.norm() < best_norm) {
                best_norm = f.norm();
                best = x;
            }
        }
    }
    if (!std::isfinite(best_norm)) throw NotResolvableError("linewidth fit failed");
    double data_norm = 0.0;
    for (std::size_t j = lo_bin; j <= hi_bin; ++j) data_norm += std::pow(spectrum.magnitude[j] / pk.height, 2);
    const double rel = best_norm / std::sqrt(data_norm);
    if (rel > options.max_relative_residual)
        throw NotResolvableError("single damped-mode model does not describe the peak");
    return {std::exp(best(2)), best(3), rel};
}

// ---------------------------------------------------------------------------------------------
// State indicators

namespace detail {

inline double von_neumann(const Eigen::MatrixXcd& rho) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
        const double p = es.eigenvalues()(k);
        if (p > 1e-300) s -= p * std::log(p);
    }
    return s;
}

inline const Matrix4cd& computational(const DensityMatrix4& rho) {
    if (rho.basis() != Basis::Computational)
        throw StateValidationError("state must be given in the computational basis");
    return rho.matrix();
}

} // namespace detail

inline double mutual_information(const DensityMatrix4& state) {
    const Matrix4cd& rho = detail::computational(state);
    Matrix2cd rq = Matrix2cd::Zero(), rp = Matrix2cd::Zero();
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int k = 0; k < 2; ++k) {
                rq(a, b) += rho(2 * a + k, 2 * b + k);
                rp(a, b) += rho(2 * k + a, 2 * k + b);
            }
    const double mi = detail::von_neumann(rq) + detail::von_neumann(rp) - detail::von_neumann(rho);
    return std::max(mi, 0.0);
}

inline double mutual_information(const DensityMatrix4& state, const OperatorSet& ops) {
    return mutual_information(state.in(Basis::Computational, ops));
}

// <sigma_+^(q) sigma_-^(p)>, sigma_+ = |0><1| with |0> the sigma^z = +1 state.
inline cplx spin_correlator(const DensityMatrix4& state) {
    const Matrix4cd& rho = detail::computational(state);
    const Matrix4cd op = pauli::kron(pauli::annihilator(), pauli::annihilator().adjoint());
    return (rho * op).trace();
}

// ---------------------------------------------------------------------------------------------
// Synchronization detection

struct SyncConfig {
    double window{40.0};
    std::optional<double> step; // window / 4 when unset
    double sync_threshold{0.9};
    double nosync_threshold{0.3};
    double late_start{200.0};
    double late_end{310.0};
    double amplitude_floor{1e-9};
    SpectrumOptions spectrum{};

    double sliding_step() const { return step.value_or(window / 4.0); }
    void validate() const {
        if (!(window > 0.0)) throw ConfigError("analysis.window", "must be > 0");
        if (!(sliding_step() > 0.0)) throw ConfigError("analysis.step", "must be > 0");
        if (!(sync_threshold > 0.0 && sync_threshold <= 1.0))
            throw ConfigError("analysis.sync_threshold", "must lie in (0, 1]");
        if (!(nosync_threshold >= 0.0 && nosync_threshold < sync_threshold))
            throw ConfigError("analysis.nosync_threshold", "must lie in [0, sync_threshold)");
        if (!(late_end > late_start && late_start >= 0.0))
            throw ConfigError("analysis.late_window", "needs 0 <= start < end");
        if (!(late_end - late_start >= window))
            throw ConfigError("analysis.window", "must fit inside the late window");
        if (!(amplitude_floor >= 0.0)) throw ConfigError("analysis.amplitude_floor", "must be >= 0");
    }
    bool operator==(const SyncConfig&) const = default;
};

enum class SyncReason { None, DecayedBelowFloor, UndefinedCorrelation };

struct SyncMetrics {
    std::vector<double> c_times;               // window start times
    std::vector<std::optional<double>> c_of_t; // none where the correlation is undefined
    std::optional<double> final_c;
    std::optional<double> omega_sync;
    SyncRegime regime{SyncRegime::NoSync};
    SyncReason reason{SyncReason::None};
    double window{0.0};
    double late_amplitude{0.0};
    bool operator==(const SyncMetrics&) const = default;
};

inline SyncRegime classify(double c, const SyncConfig& cfg) {
    if (c >= cfg.sync_threshold) return SyncRegime::InPhase;
    if (c <= -cfg.sync_threshold) return SyncRegime::AntiPhase;
    if (std::abs(c) <= cfg.nosync_threshold) return SyncRegime::NoSync;
    return SyncRegime::Indeterminate;
}

inline SyncMetrics detect_sync(const Trajectory& traj, const SyncConfig& cfg = {}) {
    cfg.validate();
    const std::span<const double> times(traj.times);
    const double dt = detail::uniform_step(times);
    if (traj.times.back() < cfg.late_end - 1e-9 * dt)
        throw DomainError("trajectory ends before the late window");
    const auto [late_first, late_last] = detail::window_indices(times, cfg.late_start, cfg.late_end, dt);
    const auto w = static_cast<std::size_t>(std::llround(cfg.window / dt)) + 1;
    const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.sliding_step() / dt)));
    if (w < 8) throw ConfigError("analysis.window", "spans fewer than 8 samples");

    SyncMetrics out;
    out.window = cfg.window;
    for (std::size_t k = 0; k + w <= late_last + 1; k += step) {
        out.c_times.push_back(traj.times[k]);
        out.c_of_t.push_back(sync_measure(traj.sx_q, traj.sx_p, k, w));
    }

    double amp_q = 0.0, amp_p = 0.0;
    for (std::size_t k = late_first; k <= late_last; ++k) {
        amp_q = std::max(amp_q, std::abs(traj.sx_q[k]));
        amp_p = std::max(amp_p, std::abs(traj.sx_p[k]));
    }
    out.late_amplitude = std::min(amp_q, amp_p);
    if (out.late_amplitude < cfg.amplitude_floor) {
        out.regime = SyncRegime::NoSync;
        out.reason = SyncReason::DecayedBelowFloor;
        return out;
    }

    out.final_c = sync_measure(traj.sx_q, traj.sx_p, late_last + 1 - w, w);
    if (!out.final_c) {
        out.regime = SyncRegime::NoSync;
        out.reason = SyncReason::UndefinedCorrelation;
        return out;
    }
    out.regime = classify(*out.final_c, cfg);
    if (out.regime != SyncRegime::NoSync) {
        const auto spec = windowed_fft(traj.sx_p, times, cfg.late_start, cfg.late_end, cfg.spectrum);
        if (!spec.peaks.empty()) out.omega_sync = spec.peaks.front().frequency;
    }
    return out;
}

inline std::string to_string(SyncRegime r) {
    switch (r) {
    case SyncRegime::InPhase: return "InPhase";
    case SyncRegime::AntiPhase: return "AntiPhase";
    case SyncRegime::NoSync: return "NoSync";
    case SyncRegime::Indeterminate: return "Indeterminate";
    }
    return "NoSync";
}

inline std::string to_string(SyncReason r) {
    switch (r) {
    case SyncReason::None: return "None";
    case SyncReason::DecayedBelowFloor: return "DecayedBelowFloor";
    case SyncReason::UndefinedCorrelation: return "UndefinedCorrelation";
    }
    return "None";
}

} // namespace qsync
