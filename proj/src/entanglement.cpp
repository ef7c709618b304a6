#include "spinctl/entanglement.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace spinctl {

TargetSpec TargetSpec::uniform(int n, int a, int b, Real mu, Real alpha)
{
    TargetSpec t;
    t.a = a;
    t.b = b;
    t.mu = mu;
    t.alpha.assign(static_cast<std::size_t>(n), alpha);
    return t;
}

void TargetSpec::validate(int n) const
{
    if (a == b)
        throw std::invalid_argument("target pair must name two different sites");
    if (a < 0 || b < 0 || a >= n || b >= n)
        throw std::out_of_range("target site outside chain");
    if (alpha.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("penalty vector length differs from chain length");
    if (mu < 0.0)
        throw std::invalid_argument("mu must be non-negative");
    for (Real w : alpha)
        if (w < 0.0)
            throw std::invalid_argument("penalty weights must be non-negative");
}

Real tau(const std::vector<Matrix2c>& site_rdms, const Matrix4c& pair_rdm, const TargetSpec& target)
{
    const int n = static_cast<int>(site_rdms.size());
    Real value = purity_deficit(site_rdms[static_cast<std::size_t>(target.a)]) +
                 purity_deficit(site_rdms[static_cast<std::size_t>(target.b)]);
    if (target.mu != 0.0)
        value -= target.mu * purity_deficit(pair_rdm);
    for (int k = 0; k < n; ++k) {
        const Real w = target.penalty(k);
        if (w != 0.0)
            value -= w * purity_deficit(site_rdms[static_cast<std::size_t>(k)]);
    }
    return value;
}

Real tau(const MpsState& state, const TargetSpec& target)
{
    target.validate(state.size());
    const auto local = local_rdms(state);
    Matrix4c pair = Matrix4c::Zero();
    if (target.mu != 0.0)
        pair = rdm(state, {target.a, target.b}).matrix;
    return tau(local.site, pair, target);
}

Real concurrence(const Matrix4c& rho)
{
    Matrix4c yy;
    yy << 0, 0, 0, -1,
          0, 0, 1, 0,
          0, 1, 0, 0,
          -1, 0, 0, 0;
    const Matrix4c herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix4c> es(herm);
    // Eigenvalues at round-off level are zeroed: their square roots (~1e-8) would otherwise
    // leak into the result for (nearly) pure states.
    const Real floor = 1e-14 * std::max(es.eigenvalues().maxCoeff(), 0.0);
    Eigen::Vector4d w = es.eigenvalues();
    for (int k = 0; k < 4; ++k)
        w(k) = w(k) > floor ? std::sqrt(w(k)) : 0.0;
    const Matrix4c root = es.eigenvectors() * w.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
    // sqrt(rho) rho~ sqrt(rho) = M M^dag, so the square roots of its eigenvalues are the
    // singular values of M (returned in decreasing order).
    const Matrix4c m = root * yy * root.conjugate();
    const Eigen::Vector4d s = Eigen::JacobiSVD<Matrix4c>(m).singularValues();
    return std::clamp(s(0) - s(1) - s(2) - s(3), 0.0, 1.0);
}

Real concurrence(const Rdm& rho)
{
    if (rho.matrix.rows() != 4 || rho.matrix.cols() != 4)
        throw std::invalid_argument("concurrence needs a two-qubit density matrix");
    return concurrence(Matrix4c(rho.matrix));
}

}  // namespace spinctl
