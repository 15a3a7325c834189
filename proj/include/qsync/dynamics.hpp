// dynamics.hpp - secular master-equation evolution of the qubit/probe pair
//
// Two independent routes: the decoupled element blocks solved in closed form in the eigenmode
// basis (evolve_analytic), and the vectorized 16x16 Liouvillian propagated by expm
// (evolve_numeric). Outputs are Schroedinger-picture observables.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qsync/bath.hpp"
#include "qsync/errors.hpp"
#include "qsync/expm.hpp"
#include "qsync/spin_model.hpp"
#include "qsync/state.hpp"

namespace qsync {

using Matrix16cd = Eigen::Matrix<cplx, 16, 16>;
using Vector16cd = Eigen::Matrix<cplx, 16, 1>;

struct Trajectory {
    std::vector<double> times;
    std::vector<double> sx_q;
    std::vector<double> sx_p;
    // Computational-basis states, filled only when requested.
    std::vector<Matrix4cd> states;

    std::size_t size() const { return times.size(); }
};

inline std::vector<double> uniform_times(double dt, double t_end, double t_start = 0.0) {
    if (!(dt > 0.0)) throw DomainError("time step must be > 0");
    if (!(t_end >= t_start)) throw DomainError("t_end must be >= t_start");
    const auto n = static_cast<std::size_t>(std::llround((t_end - t_start) / dt)) + 1;
    std::vector<double> t(n);
    for (std::size_t k = 0; k < n; ++k) t[k] = t_start + static_cast<double>(k) * dt;
    return t;
}

namespace detail {

inline void check_times(const std::vector<double>& times) {
    if (times.empty()) throw DomainError("empty time grid");
    if (times.front() < 0.0) throw DomainError("times must be >= 0");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (!(times[k] > times[k - 1])) throw DomainError("times must be strictly increasing");
}

// exp(M t) for a real 2x2 matrix with real spectrum (b*c >= 0 for every block used here).
inline Eigen::Matrix2d expm2(const Eigen::Matrix2d& m, double t) {
    const double mean = 0.5 * (m(0, 0) + m(1, 1));
    const double half_diff = 0.5 * (m(0, 0) - m(1, 1));
    const double disc = half_diff * half_diff + m(0, 1) * m(1, 0);
    const double q = std::sqrt(std::max(disc, 0.0));
    const double qt = q * t;
    const double ch = std::cosh(qt);
    const double sinhc = qt < 1e-8 ? t * (1 + qt * qt / 6) : std::sinh(qt) / q;
    const Eigen::Matrix2d shifted = m - mean * Eigen::Matrix2d::Identity();
    return std::exp(mean * t) * (ch * Eigen::Matrix2d::Identity() + sinhc * shifted);
}

// Two-level population generator of one mode, (p0, p1) with 0 -> 1 at `up`, 1 -> 0 at `down`.
inline Eigen::Matrix2d mode_population_propagator(double up, double down, double t) {
    const double k = up + down;
    if (k == 0.0) return Eigen::Matrix2d::Identity();
    Eigen::Matrix2d stationary;
    stationary << down / k, down / k, up / k, up / k;
    return stationary + std::exp(-k * t) * (Eigen::Matrix2d::Identity() - stationary);
}

// Coherence blocks in the eigenmode basis (interaction picture).
// Mode 2 (oscillating at E2): x = (rho_{00,01}, rho_{10,11}).
inline Eigen::Matrix2d mode2_block(const LindbladRates& r) {
    Eigen::Matrix2d m;
    m << -0.5 * (2 * r.g1_up + r.total2()), r.g1_down, r.g1_up, -0.5 * (2 * r.g1_down + r.total2());
    return m;
}
// Mode 1 (oscillating at E1): x = (rho_{00,10}, rho_{01,11}); the couplings carry the fermionic
// sign from eta2^dag|10> = -|11>.
inline Eigen::Matrix2d mode1_block(const LindbladRates& r) {
    Eigen::Matrix2d m;
    m << -0.5 * (2 * r.g2_up + r.total1()), -r.g2_down, -r.g2_up, -0.5 * (2 * r.g2_down + r.total1());
    return m;
}

// Observable weights on the coherence blocks: <O> = Re[w1 . x1 + w2 . x2] (Schroedinger x).
struct ObservableWeights {
    Eigen::Vector2d mode1;
    Eigen::Vector2d mode2;
};

inline ObservableWeights sx_q_weights(const EigenStructure& eig) {
    const double c = std::cos(eig.theta_sum()), s = std::sin(eig.theta_sum());
    return {Eigen::Vector2d(2 * c, 2 * c), Eigen::Vector2d(2 * s, -2 * s)};
}

inline ObservableWeights sx_p_weights(const EigenStructure& eig) {
    const double s = std::sin(eig.theta_diff()), c = std::cos(eig.theta_diff());
    return {Eigen::Vector2d(-2 * s, 2 * s), Eigen::Vector2d(-2 * c, -2 * c)};
}

} // namespace detail

struct EvolveOptions {
    bool store_states{false};
};

// Closed-form block solution. rho0 may be given in either basis; it is converted to the
// eigenmode frame of `ops`.
inline Trajectory evolve_analytic(const EigenStructure& eig, const OperatorSet& ops,
                                  const LindbladRates& rates, const DensityMatrix4& rho0,
                                  const std::vector<double>& times, EvolveOptions options = {}) {
    detail::check_times(times);
    const Matrix4cd r0 = rho0.in(Basis::Eigenmode, ops).matrix();
    enum : int { k00 = 0, k01 = 1, k10 = 2, k11 = 3 };

    const Eigen::Vector4d pop0 = r0.diagonal().real();
    const Eigen::Vector2cd x1_0(r0(k00, k10), r0(k01, k11));
    const Eigen::Vector2cd x2_0(r0(k00, k01), r0(k10, k11));
    const cplx anti_a0 = r0(k00, k11);
    const cplx anti_b0 = r0(k01, k10);

    const Eigen::Matrix2d m1 = detail::mode1_block(rates);
    const Eigen::Matrix2d m2 = detail::mode2_block(rates);
    const double total = rates.total1() + rates.total2();
    const auto wq = detail::sx_q_weights(eig);
    const auto wp = detail::sx_p_weights(eig);

    Trajectory traj;
    traj.times = times;
    traj.sx_q.reserve(times.size());
    traj.sx_p.reserve(times.size());
    if (options.store_states) traj.states.reserve(times.size());

    for (double t : times) {
        const cplx phase1 = std::polar(1.0, eig.E1 * t);
        const cplx phase2 = std::polar(1.0, eig.E2 * t);
        const Eigen::Vector2cd x1 = phase1 * (detail::expm2(m1, t).cast<cplx>() * x1_0);
        const Eigen::Vector2cd x2 = phase2 * (detail::expm2(m2, t).cast<cplx>() * x2_0);

        traj.sx_q.push_back((wq.mode1.cast<cplx>().cwiseProduct(x1).sum() +
                             wq.mode2.cast<cplx>().cwiseProduct(x2).sum()).real());
        traj.sx_p.push_back((wp.mode1.cast<cplx>().cwiseProduct(x1).sum() +
                             wp.mode2.cast<cplx>().cwiseProduct(x2).sum()).real());

        if (options.store_states) {
            const Eigen::Matrix2d p1 = detail::mode_population_propagator(rates.g1_up, rates.g1_down, t);
            const Eigen::Matrix2d p2 = detail::mode_population_propagator(rates.g2_up, rates.g2_down, t);
            Eigen::Matrix4d kron;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) kron.block<2, 2>(2 * i, 2 * j) = p1(i, j) * p2;
            const Eigen::Vector4d pop = kron * pop0;
            const double anti_decay = std::exp(-0.5 * total * t);

            Matrix4cd r = Matrix4cd::Zero();
            for (int k = 0; k < 4; ++k) r(k, k) = pop(k);
            r(k00, k10) = x1(0);
            r(k01, k11) = x1(1);
            r(k00, k01) = x2(0);
            r(k10, k11) = x2(1);
            r(k00, k11) = anti_a0 * anti_decay * std::polar(1.0, (eig.E1 + eig.E2) * t);
            r(k01, k10) = anti_b0 * anti_decay * std::polar(1.0, (eig.E1 - eig.E2) * t);
            for (int a = 0; a < 4; ++a)
                for (int b = a + 1; b < 4; ++b) r(b, a) = std::conj(r(a, b));
            traj.states.push_back(ops.to_computational(r));
        }
    }
    return traj;
}

enum class JumpSource {
    // eta_i, eta_i^dag from build_operators with the closed-form rates.
    OperatorSet,
    // Convention-free: Bohr-frequency components of sigma_q^x from direct_diagonalize.
    EigenProjection,
};

struct NumericOptions {
    JumpSource jumps{JumpSource::OperatorSet};
    double rate_prefactor{kDefaultRatePrefactor};
    bool store_states{false};
};

struct JumpOperator {
    double rate;
    Matrix4cd op;
};

// Column-stacking convention: vec(A X B) = (B^T kron A) vec(X).
inline Matrix16cd liouvillian(const Matrix4cd& h, const std::vector<JumpOperator>& jumps) {
    auto kron = [](const Matrix4cd& a, const Matrix4cd& b) {
        Matrix16cd out;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) out.block<4, 4>(4 * i, 4 * j) = a(i, j) * b;
        return out;
    };
    const Matrix4cd id = Matrix4cd::Identity();
    const cplx minus_i(0.0, -1.0);
    Matrix16cd l = minus_i * (kron(id, h) - kron(h.transpose(), id));
    for (const auto& [rate, x] : jumps) {
        if (rate == 0.0) continue;
        const Matrix4cd xdx = x.adjoint() * x;
        l += rate * (kron(x.conjugate(), x) - 0.5 * kron(id, xdx) - 0.5 * kron(xdx.transpose(), id));
    }
    return l;
}

inline std::vector<JumpOperator> secular_jumps(const OperatorSet& ops, const LindbladRates& r) {
    return {{r.g1_down, ops.eta1},
            {r.g1_up, ops.eta1.adjoint()},
            {r.g2_down, ops.eta2},
            {r.g2_up, ops.eta2.adjoint()}};
}

// Groups the lowering components Pi(e_a) sigma_q^x Pi(e_b), e_b - e_a = w > 0, by Bohr frequency.
inline std::vector<JumpOperator> eigenprojection_jumps(const QubitPairParams& params,
                                                       const SpectralDensityModel& model,
                                                       double rate_prefactor) {
    const auto spec = direct_diagonalize(params);
    const Matrix4cd sxq = pauli::kron(pauli::x(), pauli::identity());
    constexpr double group_tol = 1e-9;
    std::vector<std::pair<double, Matrix4cd>> components;
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            const double w = spec.eigenvalues(b) - spec.eigenvalues(a);
            if (w <= group_tol) continue;
            const Vector4cd va = spec.eigenvectors.col(a), vb = spec.eigenvectors.col(b);
            const cplx elem = va.adjoint() * sxq * vb;
            if (std::abs(elem) < 1e-14) continue;
            const Matrix4cd piece = elem * va * vb.adjoint();
            auto it = std::find_if(components.begin(), components.end(),
                                   [&](const auto& c) { return std::abs(c.first - w) < group_tol; });
            if (it == components.end()) components.emplace_back(w, piece);
            else it->second += piece;
        }
    }
    std::vector<JumpOperator> jumps;
    for (const auto& [w, a] : components) {
        const double j = evaluate_J(model, w);
        const double n = bose_occupation(w, params.temperature);
        jumps.push_back({rate_prefactor * j * (1 + n), a});
        jumps.push_back({rate_prefactor * j * n, a.adjoint()});
    }
    return jumps;
}

inline Trajectory propagate_liouvillian(const Matrix16cd& l, const DensityMatrix4& rho0_comp,
                                        const std::vector<double>& times, bool store_states) {
    detail::check_times(times);
    if (rho0_comp.basis() != Basis::Computational)
        throw StateValidationError("evolve_numeric expects a computational-basis state");
    const Matrix4cd sxq = pauli::kron(pauli::x(), pauli::identity());
    const Matrix4cd sxp = pauli::kron(pauli::identity(), pauli::x());

    Vector16cd v = Eigen::Map<const Vector16cd>(rho0_comp.matrix().data());
    Trajectory traj;
    traj.times = times;
    traj.sx_q.reserve(times.size());
    traj.sx_p.reserve(times.size());

    double t_prev = 0.0;
    double cached_dt = -1.0;
    Matrix16cd step;
    for (double t : times) {
        const double dt = t - t_prev;
        if (dt > 0.0) {
            if (std::abs(dt - cached_dt) > 1e-12 * std::max(1.0, dt)) {
                step = expm(l * dt);
                cached_dt = dt;
            }
            v = step * v;
        }
        t_prev = t;
        const Eigen::Map<const Matrix4cd> rho(v.data());
        traj.sx_q.push_back((rho * sxq).trace().real());
        traj.sx_p.push_back((rho * sxp).trace().real());
        if (store_states) traj.states.emplace_back(rho);
    }
    return traj;
}

inline Trajectory evolve_numeric(const QubitPairParams& params, const SpectralDensityModel& model,
                                 const DensityMatrix4& rho0_comp, const std::vector<double>& times,
                                 NumericOptions options = {}) {
    const auto eig = diagonalize(params);
    std::vector<JumpOperator> jumps;
    if (options.jumps == JumpSource::OperatorSet) {
        const auto ops = build_operators(params, eig);
        jumps = secular_jumps(ops, lindblad_rates(eig, model, params.temperature, options.rate_prefactor));
    } else {
        jumps = eigenprojection_jumps(params, model, options.rate_prefactor);
    }
    return propagate_liouvillian(liouvillian(system_hamiltonian(params), jumps), rho0_comp, times,
                                 options.store_states);
}

// Late-time two-term form <O(t)> ~ sum_k Re[amplitude_k e^{i f_k t}] e^{-decay_k t}.
struct AsymptoticForm {
    struct Term {
        cplx amplitude;
        double frequency;
        double decay_rate;
        int mode;
    };
    std::vector<Term> terms;

    double operator()(double t) const {
        double sum = 0.0;
        for (const auto& term : terms)
            sum += (term.amplitude * std::polar(1.0, term.frequency * t)).real() *
                   std::exp(-term.decay_rate * t);
        return sum;
    }
};

enum class SyncRegime { InPhase, AntiPhase, NoSync, Indeterminate };

struct AsymptoticPrediction {
    AsymptoticForm sx_q;
    AsymptoticForm sx_p;
    int surviving_mode{0}; // 1 or 2; 0 when no synchronization is expected
    std::optional<double> omega_sync;
    SyncRegime regime{SyncRegime::NoSync};
    bool near_degenerate{false};
};

namespace detail {

struct SlowEigen {
    double rate;             // -eigenvalue, > 0
    Eigen::Vector2d right;   // M v = mu v
    Eigen::Vector2d left;    // w M = mu w, w . v = 1
};

inline SlowEigen slow_eigen(const Eigen::Matrix2d& m) {
    const double mean = 0.5 * (m(0, 0) + m(1, 1));
    const double half_diff = 0.5 * (m(0, 0) - m(1, 1));
    const double q = std::sqrt(std::max(half_diff * half_diff + m(0, 1) * m(1, 0), 0.0));
    const double mu = mean + q;
    Eigen::Vector2d v, w;
    // Pick the better-conditioned null vector of (M - mu) and of its transpose.
    const Eigen::Matrix2d a = m - mu * Eigen::Matrix2d::Identity();
    if (std::abs(a(0, 1)) + std::abs(a(0, 0)) >= std::abs(a(1, 0)) + std::abs(a(1, 1)))
        v << -a(0, 1), a(0, 0);
    else
        v << -a(1, 1), a(1, 0);
    if (std::abs(a(1, 0)) + std::abs(a(0, 0)) >= std::abs(a(0, 1)) + std::abs(a(1, 1)))
        w << -a(1, 0), a(0, 0);
    else
        w << -a(1, 1), a(0, 1);
    if (v.norm() == 0.0) v << 1, 0;
    if (w.norm() == 0.0) w << 1, 0;
    w /= w.dot(v);
    return {-mu, v, w};
}

} // namespace detail

// Slowest eigenvalue of each coherence block, projected on the initial state. At T = 0 the decay
// rates reduce to g1_down/2 and g2_down/2.
inline AsymptoticPrediction asymptotic_form(const EigenStructure& eig, const OperatorSet& ops,
                                            const LindbladRates& rates, const DensityMatrix4& rho0,
                                            double degeneracy_tol = 0.05) {
    const Matrix4cd r0 = rho0.in(Basis::Eigenmode, ops).matrix();
    const Eigen::Vector2cd x1_0(r0(0, 2), r0(1, 3));
    const Eigen::Vector2cd x2_0(r0(0, 1), r0(2, 3));
    const auto s1 = detail::slow_eigen(detail::mode1_block(rates));
    const auto s2 = detail::slow_eigen(detail::mode2_block(rates));
    const cplx proj1 = s1.left.cast<cplx>().cwiseProduct(x1_0).sum();
    const cplx proj2 = s2.left.cast<cplx>().cwiseProduct(x2_0).sum();
    const auto wq = detail::sx_q_weights(eig);
    const auto wp = detail::sx_p_weights(eig);

    AsymptoticPrediction out;
    const double q1 = wq.mode1.dot(s1.right), q2 = wq.mode2.dot(s2.right);
    const double p1 = wp.mode1.dot(s1.right), p2 = wp.mode2.dot(s2.right);
    out.sx_q.terms = {{q1 * proj1, eig.E1, s1.rate, 1}, {q2 * proj2, eig.E2, s2.rate, 2}};
    out.sx_p.terms = {{p1 * proj1, eig.E1, s1.rate, 1}, {p2 * proj2, eig.E2, s2.rate, 2}};

    const double hi = std::max(s1.rate, s2.rate), lo = std::min(s1.rate, s2.rate);
    out.near_degenerate = (hi - lo) <= degeneracy_tol * hi;
    if (out.near_degenerate) {
        out.regime = SyncRegime::NoSync;
        return out;
    }
    out.surviving_mode = s1.rate < s2.rate ? 1 : 2;
    out.omega_sync = out.surviving_mode == 1 ? eig.E1 : eig.E2;
    const double ratio = out.surviving_mode == 1 ? p1 / q1 : p2 / q2;
    out.regime = ratio > 0 ? SyncRegime::InPhase : SyncRegime::AntiPhase;
    return out;
}

// Unique fixed point: zero coherences, independent thermal populations of the two modes.
inline DensityMatrix4 steady_state(const OperatorSet& ops, const LindbladRates& rates) {
    if (!(rates.total1() > 0.0) || !(rates.total2() > 0.0))
        throw NoUniqueSteadyStateError("a mode with zero relaxation rate has no unique steady state");
    const double p1 = rates.g1_up / rates.total1();
    const double p2 = rates.g2_up / rates.total2();
    Matrix4cd r = Matrix4cd::Zero();
    r(0, 0) = (1 - p1) * (1 - p2);
    r(1, 1) = (1 - p1) * p2;
    r(2, 2) = p1 * (1 - p2);
    r(3, 3) = p1 * p2;
    const Matrix4cd comp = ops.to_computational(r);
    return DensityMatrix4(0.5 * (comp + comp.adjoint()), Basis::Computational);
}

} // namespace qsync
