// expm.hpp - dense matrix exponential by scaling and squaring with a [13/13] Pade approximant

#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace qsync {

// Higham's degree-13 scheme at fixed order: scale so that ||A/2^s||_1 <= theta13,
// evaluate the Pade approximant, square back s times.
template <typename Derived>
typename Derived::PlainObject expm(const Eigen::MatrixBase<Derived>& a) {
    using Matrix = typename Derived::PlainObject;
    using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;

    static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                   1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                   670442572800.0,      33522128640.0,       1323241920.0,
                                   40840800.0,          960960.0,            16380.0,
                                   182.0,               1.0};
    constexpr double theta13 = 5.371920351148152;

    const Real norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    }
    const Matrix s = a / std::ldexp(Real(1), squarings);
    const auto n = a.rows();
    const Matrix id = Matrix::Identity(n, n);

    const Matrix s2 = s * s;
    const Matrix s4 = s2 * s2;
    const Matrix s6 = s4 * s2;

    const Matrix u_inner = s6 * (b[13] * s6 + b[11] * s4 + b[9] * s2) + b[7] * s6 + b[5] * s4 +
                           b[3] * s2 + b[1] * id;
    const Matrix u = s * u_inner;
    const Matrix v = s6 * (b[12] * s6 + b[10] * s4 + b[8] * s2) + b[6] * s6 + b[4] * s4 +
                     b[2] * s2 + b[0] * id;

    Matrix r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < squarings; ++k) {
        r = r * r;
    }
    return r;
}

} // namespace qsync
