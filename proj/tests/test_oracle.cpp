#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "spinctl/controller.hpp"
#include "spinctl/entanglement.hpp"
#include "spinctl/oracle.hpp"

using namespace spinctl;
using namespace spinctl::testing;

TEST_CASE("zero Hamiltonian is the identity")
{
    Rng rng(11);
    auto p = random_pair(5, rng);
    const ChainSpec chain(5, {0.0, 0.0, 0.0, 0.0});
    const auto out = oracle::dense_step(p.dense, chain, ControlFrame::zero(5, 0.3), 0.3);
    CHECK(oracle::fidelity(out.amplitudes, p.dense.amplitudes) > 1.0 - 1e-12);
}

TEST_CASE("two spins from |++> are maximally entangled at t = pi/4")
{
    const auto chain = ChainSpec::uniform(2);
    const auto start = oracle::DenseState::product(plus_locals(2));
    for (Real t : {0.1, 0.4, std::numbers::pi / 4}) {
        const auto s = oracle::dense_step(start, chain, ControlFrame::zero(2, t), t);
        const Matrix4c rho = oracle::partial_trace(s, {0, 1});
        CHECK(concurrence(rho) == doctest::Approx(std::abs(std::sin(2.0 * t))).epsilon(1e-12));
    }
}

TEST_CASE("propagation is unitary and reversible")
{
    Rng rng(3);
    auto p = random_pair(6, rng);
    const auto chain = ChainSpec::uniform(6);
    const auto frame = random_frame(6, rng, 70.0, 1e-3);
    const auto fwd = oracle::propagate(p.dense, chain, frame, 0.05);
    CHECK(fwd.amplitudes.norm() == doctest::Approx(1.0).epsilon(1e-13));
    const auto back = oracle::propagate(fwd, chain, frame, -0.05);
    CHECK(oracle::fidelity(back.amplitudes, p.dense.amplitudes) > 1.0 - 1e-13);
}

TEST_CASE("dense step rejects oversize chains and non-positive steps")
{
    std::vector<Vector2c> big(13, plus_state());
    CHECK_THROWS(oracle::DenseState::product(big));
    const auto s = oracle::DenseState::product(plus_locals(3));
    CHECK_THROWS(oracle::dense_step(s, ChainSpec::uniform(3), ControlFrame::zero(3, 1e-3), 0.0));
}

TEST_CASE("single-spin Rabi rotation matches the closed form")
{
    const ChainSpec chain(2, {0.0});
    std::vector<Vector2c> up(2, Vector2c(1.0, 0.0));
    const auto s0 = oracle::DenseState::product(up);
    ControlFrame f = ControlFrame::zero(2, 0.0);
    f.fields(0, 0) = 3.0;  // rotation about x at rate 2 g
    const Real t = 0.37;
    const auto s = oracle::propagate(s0, chain, f, t);
    const MatrixXc rho = oracle::partial_trace(s, {0});
    const Real z = (rho(0, 0) - rho(1, 1)).real();
    const Real y = 2.0 * rho(1, 0).imag();
    CHECK(z == doctest::Approx(std::cos(6.0 * t)).epsilon(1e-12));
    CHECK(y == doctest::Approx(-std::sin(6.0 * t)).epsilon(1e-12));
}

TEST_CASE("finite-difference curvature converges at second order")
{
    Rng rng(5);
    auto p = random_pair(5, rng);
    const auto chain = ChainSpec::uniform(5);
    const auto target = TargetSpec::uniform(5, 0, 3);
    const auto frame = random_frame(5, rng, 2.0, 1e-3);
    const Real ref = oracle::tau_curvature_fd(p.dense, chain, frame, target, 1e-3 / 8);
    const Real e1 = std::abs(oracle::tau_curvature_fd(p.dense, chain, frame, target, 4e-2) - ref);
    const Real e2 = std::abs(oracle::tau_curvature_fd(p.dense, chain, frame, target, 2e-2) - ref);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("tau first derivative does not depend on the fields")
{
    Rng rng(17);
    auto p = random_pair(5, rng);
    const auto chain = ChainSpec::uniform(5);
    const auto target = TargetSpec::uniform(5, 0, 2);
    const Real dt = 1e-4;
    auto slope = [&](const ControlFrame& f) {
        return (oracle::tau(oracle::propagate(p.dense, chain, f, dt), target) -
                oracle::tau(oracle::propagate(p.dense, chain, f, -dt), target)) /
               (2.0 * dt);
    };
    const Real free = slope(ControlFrame::zero(5, dt));
    for (int r = 0; r < 5; ++r)
        CHECK(slope(random_frame(5, rng, 10.0, dt)) == doctest::Approx(free).epsilon(1e-5));
}

TEST_CASE("curvature with optimal fields beats the free curvature")
{
    Rng rng(23);
    auto p = random_pair(5, rng);
    const auto chain = ChainSpec::uniform(5);
    const auto target = TargetSpec::uniform(5, 0, 2);
    const auto grad = assemble_gradient(p.mps, chain, target, full_mask(5));
    const auto controlled = optimal_fields(grad, 70.0);
    CHECK(oracle::tau_curvature_fd(p.dense, chain, controlled, target) >
          oracle::tau_curvature_fd(p.dense, chain, ControlFrame::zero(5, 1e-3), target));
}

TEST_CASE("product |+> state has vanishing finite-difference gradient")
{
    const auto s = oracle::DenseState::product(plus_locals(4));
    const auto chain = ChainSpec::uniform(4);
    for (int j = 1; j < 4; ++j) {
        const auto g = oracle::gradient_fd(s, chain, TargetSpec::uniform(4, 0, j, 0.2));
        CHECK(g.cwiseAbs().maxCoeff() < 1e-6);
    }
    Rng rng(2);
    const auto target = TargetSpec::uniform(4, 0, 2);
    const Real free = oracle::tau_curvature_fd(s, chain, ControlFrame::zero(4, 1e-3), target);
    for (int r = 0; r < 5; ++r)
        CHECK(oracle::tau_curvature_fd(s, chain, random_saturated_frame(4, rng, 70.0, 1e-3), target) ==
              doctest::Approx(free).epsilon(1e-4).scale(1.0));
}

TEST_CASE("site-0 gradient of the (0,1) pair purity vanishes")
{
    Rng rng(31);
    auto p = random_pair(5, rng);
    const auto chain = ChainSpec::uniform(5);
    // S(rho_01) isolated as (S0 + S1) - (S0 + S1 - S01).
    TargetSpec with_pair{0, 1, 1.0, std::vector<Real>(5, 0.0)};
    TargetSpec singles{0, 1, 0.0, std::vector<Real>(5, 0.0)};
    for (int axis = 0; axis < 2; ++axis) {
        const Real pair_part = oracle::grad_fd(p.dense, chain, singles, 0, axis) -
                               oracle::grad_fd(p.dense, chain, with_pair, 0, axis);
        CHECK(std::abs(pair_part) < 1e-6);
    }
}
