// state.hpp - 4x4 density matrices, validation and the named initial-state presets

#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "qsync/errors.hpp"
#include "qsync/spin_model.hpp"

namespace qsync {

enum class Basis { Computational, Eigenmode };

struct StateDefects {
    double hermiticity{0.0};
    double trace{0.0};
    double min_eigenvalue{0.0};

    bool within(double herm_tol, double trace_tol, double positivity_tol) const {
        return hermiticity <= herm_tol && trace <= trace_tol && min_eigenvalue >= -positivity_tol;
    }
};

inline StateDefects state_defects(const Matrix4cd& rho) {
    StateDefects d;
    d.hermiticity = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    d.trace = std::abs(rho.trace() - cplx(1.0, 0.0));
    const Matrix4cd herm = 0.5 * (rho + rho.adjoint());
    d.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Matrix4cd>(herm, Eigen::EigenvaluesOnly)
                           .eigenvalues()
                           .minCoeff();
    return d;
}

class DensityMatrix4 {
public:
    static constexpr double kHermiticityTol = 1e-12;
    static constexpr double kTraceTol = 1e-12;
    static constexpr double kPositivityTol = 1e-10;

    DensityMatrix4() : rho_(Matrix4cd::Identity() / 4.0), basis_(Basis::Computational) {}

    DensityMatrix4(const Matrix4cd& rho, Basis basis) : rho_(rho), basis_(basis) {
        const auto d = state_defects(rho_);
        if (!d.within(kHermiticityTol, kTraceTol, kPositivityTol)) {
            throw StateValidationError(
                "invalid density matrix: hermiticity defect " + std::to_string(d.hermiticity) +
                ", trace defect " + std::to_string(d.trace) + ", min eigenvalue " +
                std::to_string(d.min_eigenvalue));
        }
    }

    static DensityMatrix4 pure(const Vector4cd& psi, Basis basis) {
        if (!(psi.norm() > 0.0)) throw StateValidationError("zero state vector");
        const Vector4cd v = psi.normalized();
        return DensityMatrix4(v * v.adjoint(), basis);
    }

    static DensityMatrix4 maximally_mixed(Basis basis = Basis::Computational) {
        return DensityMatrix4(Matrix4cd::Identity() / 4.0, basis);
    }

    const Matrix4cd& matrix() const { return rho_; }
    Basis basis() const { return basis_; }

    DensityMatrix4 in(Basis target, const OperatorSet& ops) const {
        if (target == basis_) return *this;
        const Matrix4cd m =
            target == Basis::Eigenmode ? ops.to_eigen(rho_) : ops.to_computational(rho_);
        return DensityMatrix4(0.5 * (m + m.adjoint()), target);
    }

    cplx expectation(const Matrix4cd& op_in_same_basis) const { return (rho_ * op_in_same_basis).trace(); }

private:
    Matrix4cd rho_;
    Basis basis_;
};

// (|0> + |1>)(|0> + |1>)/2 in the computational basis.
inline DensityMatrix4 plus_plus_state() {
    return DensityMatrix4::pure(Vector4cd::Constant(cplx(0.5, 0.0)), Basis::Computational);
}

inline double trace_distance(const Matrix4cd& a, const Matrix4cd& b) {
    const Matrix4cd d = 0.5 * ((a - b) + (a - b).adjoint());
    return 0.5 * Eigen::SelfAdjointEigenSolver<Matrix4cd>(d, Eigen::EigenvaluesOnly)
                     .eigenvalues()
                     .cwiseAbs()
                     .sum();
}

} // namespace qsync
