// Shared fixtures: random states built in lockstep on the MPS and the dense oracle.
#ifndef SPINCTL_TESTS_HELPERS_HPP
#define SPINCTL_TESTS_HELPERS_HPP

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/QR>

#include "spinctl/mps.hpp"
#include "spinctl/oracle.hpp"

namespace spinctl::testing {

inline Vector2c random_spinor(Rng& rng)
{
    Vector2c v(Complex(rng.normal(), rng.normal()), Complex(rng.normal(), rng.normal()));
    return v / v.norm();
}

inline Vector2c plus_state()
{
    return Vector2c(1.0, 1.0) / std::sqrt(2.0);
}

inline std::vector<Vector2c> plus_locals(int n) { return std::vector<Vector2c>(static_cast<std::size_t>(n), plus_state()); }

template <int D>
Eigen::Matrix<Complex, D, D> random_unitary(Rng& rng)
{
    Eigen::Matrix<Complex, D, D> m;
    for (int i = 0; i < D; ++i)
        for (int k = 0; k < D; ++k)
            m(i, k) = Complex(rng.normal(), rng.normal());
    Eigen::HouseholderQR<Eigen::Matrix<Complex, D, D>> qr(m);
    return qr.householderQ() * Eigen::Matrix<Complex, D, D>::Identity();
}

struct Pair
{
    MpsState mps;
    oracle::DenseState dense;
};

/// Random product state followed by `layers` brickwork layers of random two-site unitaries.
inline Pair random_pair(int n, Rng& rng, int layers = 3, int d_max = 64)
{
    std::vector<Vector2c> locals;
    for (int k = 0; k < n; ++k)
        locals.push_back(random_spinor(rng));
    Pair p{MpsState::from_product_state(locals, d_max), oracle::DenseState::product(locals)};
    for (int l = 0; l < layers; ++l)
        for (int b = l % 2; b + 1 < n; b += 2) {
            const Matrix4c u = random_unitary<4>(rng);
            p.mps.apply_two_site_gate(b, u);
            oracle::apply_two_site_unitary(p.dense, b, u);
        }
    return p;
}

inline ControlFrame random_frame(int n, Rng& rng, Real scale, Real dt)
{
    ControlFrame f = ControlFrame::zero(n, dt);
    for (int k = 0; k < n; ++k)
        for (int a = 0; a < 2; ++a)
            f.fields(k, a) = scale * (2.0 * rng.uniform() - 1.0);
    return f;
}

/// Frame whose per-site magnitudes all equal beta, at random angles.
inline ControlFrame random_saturated_frame(int n, Rng& rng, Real beta, Real dt)
{
    ControlFrame f = ControlFrame::zero(n, dt);
    for (int k = 0; k < n; ++k) {
        const Real phi = 2.0 * std::numbers::pi * rng.uniform();
        f.fields(k, 0) = beta * std::cos(phi);
        f.fields(k, 1) = beta * std::sin(phi);
    }
    return f;
}

inline Real max_abs(const MatrixXc& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace spinctl::testing

#endif  // SPINCTL_TESTS_HELPERS_HPP
