#ifndef SPINCTL_LINALG_HPP
#define SPINCTL_LINALG_HPP

#include <array>
#include <complex>

#include <Eigen/Core>

namespace spinctl {

using Real = double;
using Complex = std::complex<Real>;

using MatrixXc = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
using VectorXc = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;
using VectorXr = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using Matrix2c = Eigen::Matrix<Complex, 2, 2>;
using Vector2c = Eigen::Matrix<Complex, 2, 1>;
using Matrix4c = Eigen::Matrix<Complex, 4, 4>;

/// Per-site (x, y) field or gradient components, one row per site.
using FieldArray = Eigen::Matrix<Real, Eigen::Dynamic, 2>;

/// Pauli index convention: 0 = identity, 1 = x, 2 = y, 3 = z.
enum class Pauli : int { I = 0, X = 1, Y = 2, Z = 3 };

inline Matrix2c pauli_matrix(int index)
{
    using namespace std::complex_literals;
    Matrix2c m;
    switch (index) {
    case 0: m << 1.0, 0.0, 0.0, 1.0; break;
    case 1: m << 0.0, 1.0, 1.0, 0.0; break;
    case 2: m << 0.0, -1i, 1i, 0.0; break;
    case 3: m << 1.0, 0.0, 0.0, -1.0; break;
    default: m.setZero(); break;
    }
    return m;
}

inline Matrix2c pauli_matrix(Pauli p) { return pauli_matrix(static_cast<int>(p)); }

/// Kronecker product; the first factor is the most significant index.
template <typename DerivedA, typename DerivedB>
MatrixXc kron(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b)
{
    MatrixXc out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = Complex(a(i, j)) * b.template cast<Complex>();
    return out;
}

/// exp(-i t (gx X + gy Y)) in closed form.
inline Matrix2c xy_rotation(Real gx, Real gy, Real t)
{
    using namespace std::complex_literals;
    const Real g = std::hypot(gx, gy);
    Matrix2c u = Matrix2c::Identity();
    if (g == 0.0)
        return u;
    const Real c = std::cos(g * t);
    const Real s = std::sin(g * t);
    const Complex off = Complex(gx, -gy) / g;  // (nx - i ny)
    u(0, 0) = c;
    u(1, 1) = c;
    u(0, 1) = -1i * s * off;
    u(1, 0) = -1i * s * std::conj(off);
    return u;
}

}  // namespace spinctl

#endif  // SPINCTL_LINALG_HPP
