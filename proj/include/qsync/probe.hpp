// probe.hpp - transition location, parameter inference and spectral-density reconstruction

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "qsync/bath.hpp"
#include "qsync/dynamics.hpp"
#include "qsync/errors.hpp"
#include "qsync/parallel.hpp"
#include "qsync/signal.hpp"
#include "qsync/spin_model.hpp"

namespace qsync {

struct TransitionPoint {
    double lambda{0.0};
    double omega_p_bar{0.0};
    double E1{0.0};
    double E2{0.0};
    double ratio{0.0};       // implied J(E1)/J(E2)
    double uncertainty{0.0}; // half-width of the final bracket (or indeterminate band)
    double temperature{0.0};
    std::optional<double> omega_sync_below; // measured just below / above the jump (signal scans)
    std::optional<double> omega_sync_above;

    bool operator==(const TransitionPoint&) const = default;
};

// Ratio J(E1)/J(E2) at which the two slowest coherence rates coincide.
inline double constraint_ratio(const EigenStructure& eig, double temperature) {
    const double t = std::tan(eig.theta_sum());
    const double n1 = bose_occupation(eig.E1, temperature), n2 = bose_occupation(eig.E2, temperature);
    return t * t * (1 + 2 * n2) / (1 + 2 * n1);
}

inline TransitionPoint make_transition_point(const QubitPairParams& base, double omega_p_bar, double uncertainty) {
    QubitPairParams p = base;
    p.omega_p = omega_p_bar;
    const auto eig = diagonalize(p);
    TransitionPoint tp;
    tp.lambda = p.lambda;
    tp.omega_p_bar = omega_p_bar;
    tp.E1 = eig.E1;
    tp.E2 = eig.E2;
    tp.ratio = constraint_ratio(eig, p.temperature);
    tp.uncertainty = uncertainty;
    tp.temperature = p.temperature;
    return tp;
}

// ---------------------------------------------------------------------------------------------
// Analytic rate crossing

struct PredictOptions {
    double tolerance{1e-12};
    int max_iterations{200};
    double rate_prefactor{kDefaultRatePrefactor};
};

inline double rate_log_ratio(const SpectralDensityModel& model, const QubitPairParams& p, double prefactor) {
    const auto r = lindblad_rates(diagonalize(p), model, p.temperature, prefactor);
    return std::log(r.total1() / r.total2());
}

// Root of total1(omega_p) = total2(omega_p) by bisection; at T = 0 this is g1_down = g2_down.
inline double predict_transition(const SpectralDensityModel& model, const QubitPairParams& base,
                                 double omega_p_lo, double omega_p_hi, const PredictOptions& options = {}) {
    validate(model);
    if (!(omega_p_lo > 0.0 && omega_p_hi > omega_p_lo)) throw DomainError("bracket needs 0 < lo < hi");
    QubitPairParams p = base;
    auto f = [&](double wp) {
        p.omega_p = wp;
        return rate_log_ratio(model, p, options.rate_prefactor);
    };
    double lo = omega_p_lo, hi = omega_p_hi;
    double flo = f(lo), fhi = f(hi);
    if (!std::isfinite(flo) || !std::isfinite(fhi) || flo * fhi > 0.0)
        throw NoTransitionError("no rate crossing inside the omega_p bracket");
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    for (int it = 0; it < options.max_iterations && hi - lo > options.tolerance; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// log_{E1/E2} tan^2(theta_+ + theta_-): the exponent a pure power law needs for a crossing here.
inline double power_law_line(const EigenStructure& eig) {
    const double t = std::tan(eig.theta_sum());
    return std::log(t * t) / std::log(eig.E1 / eig.E2);
}

// ---------------------------------------------------------------------------------------------
// Signal-level scan

enum class Branch { Lower, Upper, Indeterminate };

struct ScanConfig {
    double dt{0.05};
    double early_start{0.0};
    double early_end{110.0};
    double late_start{200.0};
    double late_end{310.0};
    double label_ratio{1.2}; // late peaks closer in height than this are not labeled
    double refine_tolerance{1e-3};
    int max_refine{60};
    double rate_prefactor{kDefaultRatePrefactor};
    SpectrumOptions spectrum{};
    std::size_t workers{0};
    DensityMatrix4 initial{plus_plus_state()};
};

struct BranchSample {
    double omega_p{0.0};
    Branch branch{Branch::Indeterminate};
    std::optional<double> omega_sync;
};

// Labels the dominant late-window probe frequency by the nearer of the two early-window peaks.
inline BranchSample classify_branch(const SpectralDensityModel& model, const QubitPairParams& p,
                                    const ScanConfig& cfg) {
    const auto eig = diagonalize(p);
    const auto ops = build_operators(p, eig);
    const auto rates = lindblad_rates(eig, model, p.temperature, cfg.rate_prefactor);
    const auto traj = evolve_analytic(eig, ops, rates, cfg.initial, uniform_times(cfg.dt, cfg.late_end));
    BranchSample out{p.omega_p, Branch::Indeterminate, std::nullopt};

    const auto early = windowed_fft(traj.sx_p, traj.times, cfg.early_start, cfg.early_end, cfg.spectrum);
    const auto late = windowed_fft(traj.sx_p, traj.times, cfg.late_start, cfg.late_end, cfg.spectrum);
    if (late.peaks.empty()) return out;
    out.omega_sync = late.peaks[0].frequency;
    if (early.peaks.size() < 2) return out;
    if (late.peaks.size() >= 2 && late.peaks[0].height < cfg.label_ratio * late.peaks[1].height) return out;
    const double a = early.peaks[0].frequency, b = early.peaks[1].frequency;
    const double upper = std::max(a, b), lower = std::min(a, b);
    out.branch = std::abs(*out.omega_sync - upper) < std::abs(*out.omega_sync - lower) ? Branch::Upper : Branch::Lower;
    return out;
}

inline TransitionPoint scan_transition(const SpectralDensityModel& model, const QubitPairParams& base,
                                       const std::vector<double>& grid, const ScanConfig& cfg = {}) {
    validate(model);
    if (grid.size() < 3) throw DomainError("scan grid needs at least 3 points");
    double step = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) throw DomainError("scan grid must be strictly increasing");
        step = std::min(step, grid[i] - grid[i - 1]);
    }
    if (!(grid.front() > 0.0)) throw DomainError("scan grid must be positive");

    auto sample = [&](double wp) {
        QubitPairParams p = base;
        p.omega_p = wp;
        return classify_branch(model, p, cfg);
    };
    const auto samples = parallel_map(grid.size(), [&](std::size_t i) { return sample(grid[i]); }, cfg.workers);

    // first definite label, then the first definite point carrying the other label
    std::size_t first = samples.size();
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].branch != Branch::Indeterminate) {
            first = i;
            break;
        }
    if (first == samples.size()) throw NoTransitionError("no branch could be identified on the scan grid");
    const Branch from = samples[first].branch;
    std::size_t j = first + 1;
    while (j < samples.size() && (samples[j].branch == from || samples[j].branch == Branch::Indeterminate)) ++j;
    if (j == samples.size()) throw NoTransitionError("synchronization frequency does not jump on the scan grid");
    std::size_t a = j - 1;
    while (samples[a].branch != from) --a;
    const Branch to = samples[j].branch;

    BranchSample lo = samples[a], hi = samples[j];
    std::optional<BranchSample> ilo, ihi;
    if (j > a + 1) {
        ilo = samples[a + 1];
        ihi = samples[j - 1];
    }
    // bisect the single bracket until an indeterminate point shows up
    for (int it = 0; !ilo && it < cfg.max_refine && hi.omega_p - lo.omega_p > cfg.refine_tolerance; ++it) {
        const auto mid = sample(0.5 * (lo.omega_p + hi.omega_p));
        if (mid.branch == from) lo = mid;
        else if (mid.branch == to) hi = mid;
        else ilo = ihi = mid;
    }
    if (ilo) {
        for (int it = 0; it < cfg.max_refine && ilo->omega_p - lo.omega_p > cfg.refine_tolerance; ++it) {
            const auto mid = sample(0.5 * (lo.omega_p + ilo->omega_p));
            if (mid.branch == from) lo = mid;
            else ilo = mid;
        }
        for (int it = 0; it < cfg.max_refine && hi.omega_p - ihi->omega_p > cfg.refine_tolerance; ++it) {
            const auto mid = sample(0.5 * (ihi->omega_p + hi.omega_p));
            if (mid.branch == to) hi = mid;
            else ihi = mid;
        }
    }
    const double left = ilo ? 0.5 * (lo.omega_p + ilo->omega_p) : lo.omega_p;
    const double right = ihi ? 0.5 * (ihi->omega_p + hi.omega_p) : hi.omega_p;
    if (ilo && right - left > step)
        throw ResolutionError("indeterminate band is wider than the scan step", 0.5 * step);

    auto tp = make_transition_point(base, 0.5 * (left + right), 0.5 * (hi.omega_p - lo.omega_p));
    tp.omega_sync_below = lo.omega_sync;
    tp.omega_sync_above = hi.omega_sync;
    return tp;
}

inline std::vector<double> linear_grid(double lo, double hi, std::size_t steps) {
    if (steps < 2) throw DomainError("grid needs at least 2 steps");
    std::vector<double> g(steps);
    for (std::size_t i = 0; i < steps; ++i)
        g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
    return g;
}

// ---------------------------------------------------------------------------------------------
// System parameters from an early-window probe spectrum

struct SystemEstimate {
    double omega_q{0.0};
    double lambda{0.0};
    double E1{0.0};
    double E2{0.0};
    double consistency{0.0}; // relative spread of omega_q across probe settings
};

struct ProbeMeasurement {
    double omega_p;
    double E1;
    double E2;
};

inline ProbeMeasurement peaks_of(const SpectrumEstimate& spectrum, double omega_p) {
    if (spectrum.peaks.size() < 2)
        throw InsufficientSpectrumError("need two resolved probe peaks to invert the eigenfrequencies");
    const double a = spectrum.peaks[0].frequency, b = spectrum.peaks[1].frequency;
    return {omega_p, std::max(a, b), std::min(a, b)};
}

// E1 E2 = omega_q omega_p, (E1 + E2)^2 = 4 lambda^2 + (omega_q + omega_p)^2.
inline SystemEstimate invert_eigenfrequencies(const ProbeMeasurement& m) {
    if (!(m.omega_p > 0.0)) throw DomainError("probe frequency must be > 0");
    if (!(m.E1 >= m.E2 && m.E2 > 0.0)) throw InversionError("eigenfrequency estimates must satisfy E1 >= E2 > 0");
    const double wq = m.E1 * m.E2 / m.omega_p;
    const double big = m.E1 + m.E2;
    double lam2 = 0.25 * (big * big - (wq + m.omega_p) * (wq + m.omega_p));
    if (lam2 < -1e-9 * big * big) throw InversionError("peak pair is inconsistent with any coupling");
    lam2 = std::max(lam2, 0.0);
    return {wq, std::sqrt(lam2), m.E1, m.E2, 0.0};
}

inline SystemEstimate infer_system_params(const SpectrumEstimate& spectrum, double omega_p) {
    return invert_eigenfrequencies(peaks_of(spectrum, omega_p));
}

namespace detail {

struct EigenfrequencyResidual {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    const std::vector<ProbeMeasurement>* data;
    int inputs() const { return 2; }
    int values() const { return static_cast<int>(2 * data->size()); }
    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
        for (std::size_t k = 0; k < data->size(); ++k) {
            const auto& m = (*data)[k];
            const double big = std::sqrt(4 * x(1) * x(1) + (x(0) + m.omega_p) * (x(0) + m.omega_p));
            const double small = std::sqrt(4 * x(1) * x(1) + (x(0) - m.omega_p) * (x(0) - m.omega_p));
            f(static_cast<Eigen::Index>(2 * k)) = 0.5 * (big + small) - m.E1;
            f(static_cast<Eigen::Index>(2 * k + 1)) = 0.5 * (big - small) - m.E2;
        }
        return 0;
    }
};

} // namespace detail

// Joint estimate from several probe settings; `consistency` reports how far the single-setting
// omega_q values disagree.
inline SystemEstimate infer_system_params(const std::vector<ProbeMeasurement>& data) {
    if (data.empty()) throw InsufficientSpectrumError("no probe measurements");
    double wq_mean = 0.0, lam_mean = 0.0, wq_min = std::numeric_limits<double>::infinity(), wq_max = 0.0;
    for (const auto& m : data) {
        const auto e = invert_eigenfrequencies(m);
        wq_mean += e.omega_q;
        lam_mean += e.lambda;
        wq_min = std::min(wq_min, e.omega_q);
        wq_max = std::max(wq_max, e.omega_q);
    }
    wq_mean /= static_cast<double>(data.size());
    lam_mean /= static_cast<double>(data.size());
    SystemEstimate out{wq_mean, lam_mean, data.front().E1, data.front().E2, (wq_max - wq_min) / wq_mean};
    if (data.size() == 1) return out;

    detail::EigenfrequencyResidual functor{&data};
    Eigen::NumericalDiff<detail::EigenfrequencyResidual> nd(functor);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<detail::EigenfrequencyResidual>> lm(nd);
    Eigen::VectorXd x(2);
    x << wq_mean, std::max(lam_mean, 1e-6);
    lm.minimize(x);
    out.omega_q = x(0);
    out.lambda = std::abs(x(1));
    return out;
}

// ---------------------------------------------------------------------------------------------
// Constraint collection

enum class ConstraintSource { Analytic, Signal };

struct CollectConfig {
    ConstraintSource source{ConstraintSource::Analytic};
    double omega_p_lo{0.6};
    double omega_p_hi{1.6};
    std::size_t grid_steps{41};
    PredictOptions predict{};
    ScanConfig scan{};
    std::size_t workers{0};
};

struct ConstraintFailure {
    double lambda;
    std::string message;
    bool operator==(const ConstraintFailure&) const = default;
};

struct ConstraintSet {
    std::vector<TransitionPoint> points; // sorted by lambda
    std::vector<ConstraintFailure> failures;
    bool operator==(const ConstraintSet&) const = default;
};

inline ConstraintSet collect_constraints(const SpectralDensityModel& model, const QubitPairParams& base,
                                         std::vector<double> lambdas, const CollectConfig& cfg = {}) {
    std::sort(lambdas.begin(), lambdas.end());
    lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
    const auto grid = linear_grid(cfg.omega_p_lo, cfg.omega_p_hi, cfg.grid_steps);
    struct Outcome {
        std::optional<TransitionPoint> point;
        std::string error;
    };
    ScanConfig scan = cfg.scan;
    scan.workers = 1; // parallelism lives at the lambda level
    const auto outcomes = parallel_map(lambdas.size(), [&](std::size_t i) {
        QubitPairParams p = base;
        p.lambda = lambdas[i];
        Outcome o;
        try {
            p.validate();
            if (cfg.source == ConstraintSource::Analytic) {
                const double w = predict_transition(model, p, cfg.omega_p_lo, cfg.omega_p_hi, cfg.predict);
                o.point = make_transition_point(p, w, 0.5 * cfg.predict.tolerance);
            } else {
                o.point = scan_transition(model, p, grid, scan);
            }
        } catch (const Error& e) {
            o.error = e.what();
        }
        return o;
    }, cfg.workers);

    ConstraintSet out;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (outcomes[i].point) out.points.push_back(*outcomes[i].point);
        else out.failures.push_back({lambdas[i], outcomes[i].error});
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Reconstruction

enum class FitFamily { PowerLaw, Tabulated };

struct LinewidthDatum {
    QubitPairParams params;
    double fwhm{0.0};
    double rate_prefactor{kDefaultRatePrefactor};
    bool operator==(const LinewidthDatum&) const = default;
};

struct FitOptions {
    std::optional<double> omega_c;    // known cutoff of the power-law family; none = pure power law
    std::vector<double> nodes;        // tabulated family grid; default spans the constrained band
    std::size_t n_nodes{6};
    double smoothness{1e-2};
};

struct FitDiagnostics {
    double rms_residual{0.0};
    int iterations{0};
    bool converged{true};
    std::size_t n_constraints{0};
    int surviving_mode{0}; // mode used for the amplitude datum, 0 when none
    bool operator==(const FitDiagnostics&) const = default;
};

struct ReconstructionResult {
    FitFamily family{FitFamily::PowerLaw};
    std::optional<PowerLawCutoff> power_law; // gamma0 is meaningful only when amplitude_identified
    std::optional<Tabulated> tabulated;      // relative to node 0 unless amplitude_identified
    bool amplitude_identified{false};
    std::vector<double> residuals;
    FitDiagnostics diagnostics;

    SpectralDensityModel model() const {
        if (power_law) return *power_law;
        return *tabulated;
    }
    bool operator==(const ReconstructionResult&) const = default;
};

namespace detail {

inline void fill_residuals(ReconstructionResult& r, const std::vector<TransitionPoint>& c) {
    const auto m = r.model();
    r.residuals.clear();
    double ss = 0.0;
    for (const auto& tp : c) {
        const double res = std::log(evaluate_J(m, tp.E1) / evaluate_J(m, tp.E2)) - std::log(tp.ratio);
        r.residuals.push_back(res);
        ss += res * res;
    }
    r.diagnostics.rms_residual = c.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(c.size()));
    r.diagnostics.n_constraints = c.size();
}

// Mode whose coherence survives under `shape`, and its rate per unit amplitude of J.
inline std::pair<int, double> surviving_rate(const SpectralDensityModel& shape, const LinewidthDatum& d) {
    const auto eig = diagonalize(d.params);
    const auto r = lindblad_rates(eig, shape, d.params.temperature, d.rate_prefactor);
    return r.total1() <= r.total2() ? std::pair{1, r.total1()} : std::pair{2, r.total2()};
}

} // namespace detail

inline ReconstructionResult fit_power_law(const std::vector<TransitionPoint>& c,
                                          const std::optional<LinewidthDatum>& datum, const FitOptions& opt) {
    if (c.empty()) throw RankDeficiencyError("power-law fit needs at least one constraint", {});
    ReconstructionResult r;
    r.family = FitFamily::PowerLaw;
    double saa = 0.0, sab = 0.0;
    for (const auto& tp : c) {
        const double a = std::log(tp.E1 / tp.E2), b = std::log(tp.ratio);
        saa += a * a;
        sab += a * b;
    }
    if (!(saa > 0.0)) throw RankDeficiencyError("constraints carry no frequency leverage (E1 = E2)", {});
    double s = sab / saa;
    if (opt.omega_c) {
        // Gauss-Newton on the exponent with the known cutoff
        const double wc2 = *opt.omega_c * *opt.omega_c;
        auto logj = [&](double e, double sv) { return sv * std::log(e) - std::log(wc2 + std::pow(e, 2 * sv)); };
        auto dlogj = [&](double e, double sv) {
            const double p = std::pow(e, 2 * sv);
            return std::log(e) * (wc2 - p) / (wc2 + p);
        };
        r.diagnostics.converged = false;
        for (int it = 0; it < 100; ++it) {
            double num = 0.0, den = 0.0;
            for (const auto& tp : c) {
                const double res = logj(tp.E1, s) - logj(tp.E2, s) - std::log(tp.ratio);
                const double d = dlogj(tp.E1, s) - dlogj(tp.E2, s);
                num += res * d;
                den += d * d;
            }
            const double ds = num / den;
            s -= ds;
            r.diagnostics.iterations = it + 1;
            if (std::abs(ds) < 1e-14 * std::max(1.0, std::abs(s))) {
                r.diagnostics.converged = true;
                break;
            }
        }
    }
    if (!(s > 0.0)) throw InversionError("fitted spectral exponent is not positive");
    PowerLawCutoff pl{1.0, s, opt.omega_c};
    if (datum) {
        const auto [mode, unit_rate] = detail::surviving_rate(pl, *datum);
        pl.gamma0 = datum->fwhm / unit_rate;
        r.amplitude_identified = true;
        r.diagnostics.surviving_mode = mode;
    }
    r.power_law = pl;
    detail::fill_residuals(r, c);
    return r;
}

inline ReconstructionResult fit_tabulated(const std::vector<TransitionPoint>& c,
                                          const std::optional<LinewidthDatum>& datum, const FitOptions& opt) {
    std::vector<double> nodes = opt.nodes;
    if (nodes.empty()) {
        if (c.empty()) throw RankDeficiencyError("tabulated fit needs at least two constraints", {});
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (const auto& tp : c) {
            lo = std::min(lo, tp.E2);
            hi = std::max(hi, tp.E1);
        }
        const std::size_t n = std::max<std::size_t>(opt.n_nodes, 2);
        for (std::size_t j = 0; j < n; ++j)
            nodes.push_back(lo * std::pow(hi / lo, static_cast<double>(j) / static_cast<double>(n - 1)));
    }
    const std::size_t n = nodes.size();
    for (std::size_t j = 1; j < n; ++j)
        if (!(nodes[j] > nodes[j - 1] && nodes[0] > 0.0)) throw DomainError("tabulated nodes must be positive and increasing");
    std::vector<std::size_t> all(n);
    for (std::size_t j = 0; j < n; ++j) all[j] = j;
    if (c.size() < 2) throw RankDeficiencyError("tabulated fit needs at least two constraints", all);

    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j) x[j] = std::log(nodes[j]);
    const double eps = 1e-9;
    auto interp_row = [&](double e, Eigen::RowVectorXd& row, double sign) {
        const double le = std::log(e);
        if (le < x.front() - eps || le > x.back() + eps) throw DomainError("constraint frequency outside the node range");
        std::size_t j = 0;
        while (j + 2 < n && le > x[j + 1]) ++j;
        const double t = std::clamp((le - x[j]) / (x[j + 1] - x[j]), 0.0, 1.0);
        row(static_cast<Eigen::Index>(j)) += sign * (1.0 - t);
        row(static_cast<Eigen::Index>(j + 1)) += sign * t;
    };

    const auto nc = static_cast<Eigen::Index>(c.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nc, static_cast<Eigen::Index>(n));
    Eigen::VectorXd b(nc);
    for (Eigen::Index k = 0; k < nc; ++k) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(n));
        interp_row(c[k].E1, row, 1.0);
        interp_row(c[k].E2, row, -1.0);
        a.row(k) = row;
        b(k) = std::log(c[k].ratio);
    }
    std::vector<std::size_t> untouched;
    for (std::size_t j = 0; j < n; ++j)
        if (a.col(static_cast<Eigen::Index>(j)).cwiseAbs().maxCoeff() < 1e-12) untouched.push_back(j);
    if (!untouched.empty()) throw RankDeficiencyError("grid nodes not reached by any constraint", untouched);

    // second-difference penalty on log J; node 0 pinned (the constraints fix only the shape)
    const Eigen::Index nd = n >= 3 ? static_cast<Eigen::Index>(n - 2) : 0;
    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(nc + nd, static_cast<Eigen::Index>(n - 1));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nc + nd);
    big.topRows(nc) = a.rightCols(static_cast<Eigen::Index>(n - 1));
    rhs.head(nc) = b;
    const double w = std::sqrt(opt.smoothness);
    for (Eigen::Index i = 0; i < nd; ++i) {
        const double coeffs[3] = {1.0, -2.0, 1.0};
        for (int q = 0; q < 3; ++q) {
            const Eigen::Index col = i + q - 1;
            if (col >= 0) big(nc + i, col) += w * coeffs[q];
        }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(big);
    if (qr.rank() < big.cols()) throw RankDeficiencyError("tabulated system is rank deficient", untouched);
    const Eigen::VectorXd sol = qr.solve(rhs);
    std::vector<double> u(n, 0.0);
    for (std::size_t j = 1; j < n; ++j) u[j] = sol(static_cast<Eigen::Index>(j - 1));

    ReconstructionResult r;
    r.family = FitFamily::Tabulated;
    auto build = [&](double shift) {
        Tabulated t;
        for (std::size_t j = 0; j < n; ++j) t.points.emplace_back(nodes[j], std::exp(u[j] + shift));
        return t;
    };
    Tabulated tab = build(0.0);
    if (datum) {
        // the gauge direction is exact: rescale the whole table to match the measured rate
        const auto [mode, unit_rate] = detail::surviving_rate(tab, *datum);
        tab = build(std::log(datum->fwhm / unit_rate));
        r.amplitude_identified = true;
        r.diagnostics.surviving_mode = mode;
    }
    r.tabulated = tab;
    detail::fill_residuals(r, c);
    return r;
}

inline ReconstructionResult fit_spectral_density(const std::vector<TransitionPoint>& constraints, FitFamily family,
                                                 const std::optional<LinewidthDatum>& datum = std::nullopt,
                                                 const FitOptions& options = {}) {
    if (datum) {
        datum->params.validate();
        if (!(datum->fwhm > 0.0)) throw DomainError("linewidth datum must be > 0");
    }
    return family == FitFamily::PowerLaw ? fit_power_law(constraints, datum, options)
                                         : fit_tabulated(constraints, datum, options);
}

inline std::string to_string(Branch b) {
    switch (b) {
    case Branch::Lower: return "Lower";
    case Branch::Upper: return "Upper";
    case Branch::Indeterminate: return "Indeterminate";
    }
    return "Indeterminate";
}

inline std::string to_string(FitFamily f) { return f == FitFamily::PowerLaw ? "power-law" : "tabulated"; }

} // namespace qsync
