#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "spinctl/entanglement.hpp"

using namespace spinctl;
using namespace spinctl::testing;

namespace {

Eigen::Vector4cd bell_vector()
{
    return (Eigen::Vector4cd() << 1.0, 0.0, 0.0, 1.0).finished() / std::sqrt(2.0);
}

Matrix4c projector(const Eigen::Vector4cd& v) { return v * v.adjoint(); }

Eigen::Vector4cd random_pure(Rng& rng)
{
    Eigen::Vector4cd v;
    for (int k = 0; k < 4; ++k)
        v(k) = Complex(rng.normal(), rng.normal());
    return v / v.norm();
}

Matrix4c random_mixed(Rng& rng)
{
    Matrix4c a;
    for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 4; ++k)
            a(i, k) = Complex(rng.normal(), rng.normal());
    Matrix4c rho = a * a.adjoint();
    return rho / rho.trace().real();
}

Matrix2c reduce(const Matrix4c& rho, int keep)
{
    Matrix2c out = Matrix2c::Zero();
    for (int s = 0; s < 2; ++s)
        for (int sp = 0; sp < 2; ++sp)
            for (int o = 0; o < 2; ++o)
                out(s, sp) += keep == 0 ? rho(2 * s + o, 2 * sp + o) : rho(2 * o + s, 2 * o + sp);
    return out;
}

}  // namespace

TEST_CASE("purity deficit values")
{
    const Matrix2c plus = (Matrix2c::Identity() + pauli_matrix(Pauli::X)) / 2.0;
    CHECK(purity_deficit(plus) == doctest::Approx(0.0));
    CHECK(purity_deficit(Matrix2c(Matrix2c::Identity() / 2.0)) == doctest::Approx(0.5));
    Matrix2c d = Matrix2c::Zero();
    d(0, 0) = 0.75;
    d(1, 1) = 0.25;
    CHECK(purity_deficit(d) == doctest::Approx(0.375));
}

TEST_CASE("concurrence reference values")
{
    CHECK(concurrence(projector(bell_vector())) == doctest::Approx(1.0).epsilon(1e-12));
    Matrix4c zero = Matrix4c::Zero();
    zero(0, 0) = 1.0;
    CHECK(concurrence(zero) == doctest::Approx(0.0));
    const Matrix4c werner = 0.5 * projector(bell_vector()) + 0.5 * Matrix4c::Identity() / 4.0;
    CHECK(concurrence(werner) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(concurrence(Matrix4c(Matrix4c::Identity() / 4.0)) == doctest::Approx(0.0));
    CHECK_THROWS(concurrence(Rdm{{0}, MatrixXc::Identity(2, 2) / 2.0}));
}

TEST_CASE("tau reference values")
{
    auto plus = MpsState::from_product_state(plus_locals(6), 4);
    for (int j = 1; j < 6; ++j)
        CHECK(std::abs(tau(plus, TargetSpec::uniform(6, 0, j, 0.2))) < 1e-14);

    // GHZ on sites 0..2 of a five-spin chain (others |+>), target (0, 2).
    std::vector<MpsState::SiteTensor> t(5);
    auto diag = [](int dl, int dr, int s) {
        MatrixXc m = MatrixXc::Zero(dl, dr);
        if (dl == 1)
            m(0, s) = 1.0 / std::sqrt(2.0);
        else if (dr == 1)
            m(s, 0) = 1.0;
        else
            m(s, s) = 1.0;
        return m;
    };
    t[0] = {diag(1, 2, 0), diag(1, 2, 1)};
    t[1] = {diag(2, 2, 0), diag(2, 2, 1)};
    t[2] = {diag(2, 1, 0), diag(2, 1, 1)};
    for (int k = 3; k < 5; ++k)
        t[static_cast<std::size_t>(k)] = {MatrixXc::Constant(1, 1, 1.0 / std::sqrt(2.0)),
                                          MatrixXc::Constant(1, 1, 1.0 / std::sqrt(2.0))};
    const auto ghz = MpsState::from_tensors(t, 4);
    CHECK(ghz.norm_squared() == doctest::Approx(1.0));
    CHECK(tau(ghz, TargetSpec::uniform(5, 0, 2)) == doctest::Approx(0.5));

    TargetSpec bad = TargetSpec::uniform(5, 0, 0);
    CHECK_THROWS(bad.validate(5));
    CHECK_THROWS(TargetSpec::uniform(5, 0, 5).validate(5));
    CHECK_THROWS(TargetSpec::uniform(5, 0, 2, -0.1).validate(5));
}

TEST_CASE("tau is invariant under local unitaries")
{
    Rng rng(7);
    auto p = random_pair(6, rng);
    for (const auto& target : {TargetSpec::uniform(6, 0, 3), TargetSpec::uniform(6, 0, 5, 0.2)}) {
        const Real before = tau(p.mps, target);
        auto rotated = p.mps;
        for (int k = 0; k < 6; ++k)
            rotated.apply_site_unitary(k, random_unitary<2>(rng));
        CHECK(std::abs(tau(rotated, target) - before) < 1e-10);
    }
}

TEST_CASE("concurrence is invariant under local unitaries")
{
    Rng rng(8);
    for (int r = 0; r < 20; ++r) {
        const Matrix4c rho = r % 2 ? random_mixed(rng) : projector(random_pure(rng));
        const Matrix4c u = kron(random_unitary<2>(rng), random_unitary<2>(rng));
        CHECK(std::abs(concurrence(Matrix4c(u * rho * u.adjoint())) - concurrence(rho)) < 1e-10);
    }
}

TEST_CASE("pure two-qubit identity S_a + S_b - 2 S_ab = c^2")
{
    Rng rng(9);
    for (int r = 0; r < 50; ++r) {
        const Matrix4c rho = projector(random_pure(rng));
        const Real c = concurrence(rho);
        const Real lhs = purity_deficit(reduce(rho, 0)) + purity_deficit(reduce(rho, 1)) - 2.0 * purity_deficit(rho);
        CHECK(std::abs(lhs - c * c) < 1e-10);
    }
}

TEST_CASE("mixed two-qubit bound and range")
{
    Rng rng(10);
    for (int r = 0; r < 200; ++r) {
        Matrix4c rho = random_mixed(rng);
        // bias toward entangled states so the bound is exercised non-trivially
        rho = 0.5 * rho + 0.5 * projector(random_pure(rng));
        const Real c = concurrence(rho);
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
        const Real lhs = purity_deficit(reduce(rho, 0)) + purity_deficit(reduce(rho, 1)) - 2.0 * purity_deficit(rho);
        CHECK(lhs <= c * c + 1e-9);
    }
}
