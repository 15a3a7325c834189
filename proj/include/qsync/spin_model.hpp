// spin_model.hpp - qubit/probe Hamiltonian, its fermionic normal modes and the 4x4 operator set
//
// Computational basis index is 2*q + p with |0> the +1 eigenstate of sigma^z.
// Eigenmode basis index is 2*n1 + n2 with
//   |00> = quasiparticle vacuum, |01> = eta2^dag|00>, |10> = eta1^dag|00>, |11> = eta1^dag eta2^dag|00>.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>

#include "qsync/errors.hpp"

namespace qsync {

using cplx = std::complex<double>;
using Matrix2cd = Eigen::Matrix2cd;
using Matrix4cd = Eigen::Matrix4cd;
using Vector4cd = Eigen::Vector4cd;
using Vector4d = Eigen::Vector4d;

// All frequencies in units of omega_q (hbar = k_B = 1).
struct QubitPairParams {
    double omega_q{1.0};
    double omega_p{1.0};
    double lambda{0.0};
    double temperature{0.0};

    void validate() const {
        if (!(omega_q > 0.0) || !std::isfinite(omega_q)) throw DomainError("omega_q must be > 0");
        if (!(omega_p > 0.0) || !std::isfinite(omega_p)) throw DomainError("omega_p must be > 0");
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be >= 0");
        if (!(temperature >= 0.0) || !std::isfinite(temperature))
            throw DomainError("temperature must be >= 0");
    }

    bool operator==(const QubitPairParams&) const = default;
};

struct EigenStructure {
    double E1{0.0};
    double E2{0.0};
    double theta_plus{0.0};
    double theta_minus{0.0};
    double Delta{0.0};
    double delta{0.0};

    double theta_sum() const { return theta_plus + theta_minus; }
    double theta_diff() const { return theta_plus - theta_minus; }

    // Weights of the two modes in sigma_q^x; they multiply the bath rates.
    double weight1() const { return std::pow(std::cos(theta_sum()), 2); }
    double weight2() const { return std::pow(std::sin(theta_sum()), 2); }

    // Spectrum of H_S, ascending, indexed like the eigenmode basis sorted by energy.
    Vector4d spectrum() const {
        Vector4d e;
        e << -(E1 + E2) / 2, -(E1 - E2) / 2, (E1 - E2) / 2, (E1 + E2) / 2;
        return e;
    }
};

namespace pauli {

inline Matrix2cd identity() { return Matrix2cd::Identity(); }
inline Matrix2cd x() { Matrix2cd m; m << 0, 1, 1, 0; return m; }
inline Matrix2cd y() { Matrix2cd m; m << 0, cplx(0, -1), cplx(0, 1), 0; return m; }
inline Matrix2cd z() { Matrix2cd m; m << 1, 0, 0, -1; return m; }
// |0><1|: lowers sigma^z from -1 to +1, i.e. removes the Jordan-Wigner fermion.
inline Matrix2cd annihilator() { Matrix2cd m; m << 0, 1, 0, 0; return m; }

inline Matrix4cd kron(const Matrix2cd& a, const Matrix2cd& b) {
    Matrix4cd out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
}

} // namespace pauli

inline EigenStructure diagonalize(const QubitPairParams& params) {
    params.validate();
    const double wq = params.omega_q;
    const double wp = params.omega_p;
    const double lam = params.lambda;
    const double w_plus = wq + wp;
    const double w_minus = wq - wp;

    EigenStructure eig;
    eig.Delta = std::hypot(2 * lam, w_plus);
    eig.delta = std::hypot(2 * lam, w_minus);
    eig.E1 = (eig.Delta + eig.delta) / 2;
    eig.E2 = (eig.Delta - eig.delta) / 2;
    // sin 2theta = 2 lambda / sqrt(4 lambda^2 + w^2), cos 2theta = w / sqrt(...), w_minus signed.
    if (lam == 0.0) {
        eig.theta_plus = 0.0;
        // Keep eta1 on the higher-energy bare qubit; the lambda -> 0+ limit of the signed branch.
        eig.theta_minus = (w_minus < 0.0) ? std::numbers::pi / 2 : 0.0;
    } else {
        eig.theta_plus = 0.5 * std::atan2(2 * lam, w_plus);
        eig.theta_minus = 0.5 * std::atan2(2 * lam, w_minus);
    }
    return eig;
}

struct OperatorSet {
    Matrix4cd eta1;
    Matrix4cd eta2;
    Matrix4cd parity;
    Matrix4cd sx_q;
    Matrix4cd sx_p;
    Matrix4cd sz_q;
    Matrix4cd sz_p;
    Matrix4cd h_s;
    // Columns are the eigenmode basis states expressed in the computational basis.
    Matrix4cd eigenbasis;

    Matrix4cd eta_tilde1() const { return parity * eta1; }
    Matrix4cd eta_tilde2() const { return parity * eta2; }

    Matrix4cd to_eigen(const Matrix4cd& computational) const {
        return eigenbasis.adjoint() * computational * eigenbasis;
    }
    Matrix4cd to_computational(const Matrix4cd& eigenmode) const {
        return eigenbasis * eigenmode * eigenbasis.adjoint();
    }
};

inline Matrix4cd system_hamiltonian(const QubitPairParams& p) {
    using namespace pauli;
    return 0.5 * p.omega_q * kron(z(), identity()) + 0.5 * p.omega_p * kron(identity(), z()) +
           p.lambda * kron(x(), x());
}

namespace detail {

inline double max_abs(const Matrix4cd& m) { return m.cwiseAbs().maxCoeff(); }

inline Vector4cd quasiparticle_vacuum(const Matrix4cd& eta1, const Matrix4cd& eta2) {
    const Matrix4cd projector = (eta1 * eta1.adjoint()) * (eta2 * eta2.adjoint());
    Eigen::Index best = 0;
    projector.colwise().norm().maxCoeff(&best);
    Vector4cd vac = projector.col(best).normalized();
    Eigen::Index k = 0;
    vac.cwiseAbs().maxCoeff(&k);
    vac *= std::conj(vac(k)) / std::abs(vac(k));
    return vac;
}

} // namespace detail

// Jordan-Wigner fermions c1, c2, the Bogoliubov rotation by theta_plus and the mode rotation by
// theta_minus, composed into eta1, eta2 acting on the computational basis.
inline OperatorSet build_operators(const QubitPairParams& params, const EigenStructure& eig) {
    using namespace pauli;
    OperatorSet ops;
    ops.sx_q = kron(x(), identity());
    ops.sx_p = kron(identity(), x());
    ops.sz_q = kron(z(), identity());
    ops.sz_p = kron(identity(), z());
    ops.h_s = system_hamiltonian(params);

    const Matrix4cd c1 = kron(annihilator(), identity());
    const Matrix4cd c2 = kron(z(), annihilator());

    const double cp = std::cos(eig.theta_plus), sp = std::sin(eig.theta_plus);
    const double cm = std::cos(eig.theta_minus), sm = std::sin(eig.theta_minus);
    const Matrix4cd xi1 = cp * c1 - sp * c2.adjoint();
    const Matrix4cd xi2 = cp * c2 + sp * c1.adjoint();
    ops.eta1 = (cm * xi1 - sm * xi2).adjoint();
    ops.eta2 = (sm * xi1 + cm * xi2).adjoint();

    const Matrix4cd id = Matrix4cd::Identity();
    const Matrix4cd n1 = ops.eta1.adjoint() * ops.eta1;
    const Matrix4cd n2 = ops.eta2.adjoint() * ops.eta2;
    ops.parity = (id - 2 * n1) * (id - 2 * n2);

    const double scale = std::max({1.0, eig.E1, params.lambda});
    const double tol = 1e-12 * scale;
    auto check = [&](double defect, const char* what) {
        if (!(defect < tol)) throw ConventionError(std::string("operator identity failed: ") + what);
    };
    const Matrix4cd& e1 = ops.eta1;
    const Matrix4cd& e2 = ops.eta2;
    check(detail::max_abs(e1 * e1.adjoint() + e1.adjoint() * e1 - id), "{eta1, eta1^dag} = 1");
    check(detail::max_abs(e2 * e2.adjoint() + e2.adjoint() * e2 - id), "{eta2, eta2^dag} = 1");
    check(detail::max_abs(e1 * e2.adjoint() + e2.adjoint() * e1), "{eta1, eta2^dag} = 0");
    check(detail::max_abs(e1 * e2 + e2 * e1), "{eta1, eta2} = 0");
    check(detail::max_abs(ops.h_s - eig.E1 * (n1 - id / 2) - eig.E2 * (n2 - id / 2)),
          "H_S = sum_i E_i (n_i - 1/2)");

    const Vector4cd vac = detail::quasiparticle_vacuum(e1, e2);
    ops.eigenbasis.col(0) = vac;
    ops.eigenbasis.col(1) = e2.adjoint() * vac;
    ops.eigenbasis.col(2) = e1.adjoint() * vac;
    ops.eigenbasis.col(3) = e1.adjoint() * e2.adjoint() * vac;
    check(detail::max_abs(ops.eigenbasis.adjoint() * ops.eigenbasis - id), "eigenbasis unitary");
    return ops;
}

inline OperatorSet build_operators(const QubitPairParams& params) {
    return build_operators(params, diagonalize(params));
}

struct DirectSpectrum {
    Vector4d eigenvalues;  // ascending
    Matrix4cd eigenvectors; // columns
};

inline DirectSpectrum direct_diagonalize(const QubitPairParams& params) {
    params.validate();
    Eigen::SelfAdjointEigenSolver<Matrix4cd> solver(system_hamiltonian(params));
    return {solver.eigenvalues(), solver.eigenvectors()};
}

} // namespace qsync
