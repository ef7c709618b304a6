#include "spinctl/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace spinctl::oracle {

namespace {

void check_size(int n)
{
    if (n < 2 || n > kMaxSites)
        throw std::invalid_argument("dense oracle supports 2 to " + std::to_string(kMaxSites) + " spins");
}

std::size_t bit_of(int n, int site) { return std::size_t{1} << static_cast<unsigned>(n - 1 - site); }

/// Spectral-norm bound of H: sum of |J_i| and per-site field magnitudes.
Real hamiltonian_bound(const ChainSpec& chain, const ControlFrame& frame)
{
    Real b = 0.0;
    for (Real j : chain.couplings())
        b += std::abs(j);
    for (Eigen::Index k = 0; k < frame.fields.rows(); ++k)
        b += std::hypot(frame.fields(k, 0), frame.fields(k, 1));
    return b;
}

}  // namespace

DenseState DenseState::product(std::span<const Vector2c> locals)
{
    const int n = static_cast<int>(locals.size());
    check_size(n);
    VectorXc psi = VectorXc::Ones(1);
    for (const auto& v : locals) {
        VectorXc next(psi.size() * 2);
        for (Eigen::Index i = 0; i < psi.size(); ++i) {
            next(2 * i) = psi(i) * v(0);
            next(2 * i + 1) = psi(i) * v(1);
        }
        psi = std::move(next);
    }
    return {n, psi / psi.norm()};
}

DenseState DenseState::from_vector(int n, VectorXc amplitudes)
{
    check_size(n);
    if (amplitudes.size() != (Eigen::Index{1} << n))
        throw std::invalid_argument("amplitude vector has the wrong length");
    const Real norm = amplitudes.norm();
    return {n, amplitudes / norm};
}

VectorXc apply_hamiltonian(const ChainSpec& chain, const ControlFrame& frame, const VectorXc& psi)
{
    const int n = chain.size();
    const auto dim = static_cast<std::size_t>(psi.size());
    VectorXc out = VectorXc::Zero(psi.size());
    for (std::size_t idx = 0; idx < dim; ++idx) {
        Real diag = 0.0;
        for (int i = 0; i + 1 < n; ++i) {
            const bool a = idx & bit_of(n, i);
            const bool b = idx & bit_of(n, i + 1);
            diag += (a == b ? 1.0 : -1.0) * chain.bond(i);
        }
        out(static_cast<Eigen::Index>(idx)) += diag * psi(static_cast<Eigen::Index>(idx));
    }
    for (int k = 0; k < n; ++k) {
        const Real gx = frame.fields(k, 0);
        const Real gy = frame.fields(k, 1);
        if (gx == 0.0 && gy == 0.0)
            continue;
        const auto mask = bit_of(n, k);
        for (std::size_t idx = 0; idx < dim; ++idx) {
            const std::size_t flipped = idx ^ mask;
            // <idx| gx X + gy Y |flipped>: Y has <0|Y|1> = -i, <1|Y|0> = +i.
            const bool down = idx & mask;
            const Complex elem(gx, down ? gy : -gy);
            out(static_cast<Eigen::Index>(idx)) += elem * psi(static_cast<Eigen::Index>(flipped));
        }
    }
    return out;
}

DenseState propagate(const DenseState& state, const ChainSpec& chain, const ControlFrame& frame, Real t)
{
    check_size(state.n);
    if (chain.size() != state.n || frame.size() != state.n)
        throw std::invalid_argument("chain, frame and state sizes differ");
    const Real bound = hamiltonian_bound(chain, frame) * std::abs(t);
    const int slices = std::max(1, static_cast<int>(std::ceil(bound / 0.5)));
    const Real h = t / slices;
    VectorXc psi = state.amplitudes;
    for (int s = 0; s < slices; ++s) {
        VectorXc term = psi;
        VectorXc acc = psi;
        for (int k = 1; k < 40; ++k) {
            term = apply_hamiltonian(chain, frame, term) * Complex(0.0, -h / k);
            acc += term;
            if (term.norm() < 1e-18)
                break;
        }
        psi = std::move(acc);
    }
    return {state.n, psi};
}

DenseState dense_step(const DenseState& state, const ChainSpec& chain, const ControlFrame& frame, Real dt)
{
    if (!(dt > 0.0))
        throw std::invalid_argument("time step must be positive");
    return propagate(state, chain, frame, dt);
}

void apply_site_unitary(DenseState& state, int site, const Matrix2c& u)
{
    const auto mask = bit_of(state.n, site);
    for (std::size_t idx = 0; idx < static_cast<std::size_t>(state.amplitudes.size()); ++idx) {
        if (idx & mask)
            continue;
        const auto i0 = static_cast<Eigen::Index>(idx);
        const auto i1 = static_cast<Eigen::Index>(idx | mask);
        const Complex a = state.amplitudes(i0);
        const Complex b = state.amplitudes(i1);
        state.amplitudes(i0) = u(0, 0) * a + u(0, 1) * b;
        state.amplitudes(i1) = u(1, 0) * a + u(1, 1) * b;
    }
}

void apply_two_site_unitary(DenseState& state, int site, const Matrix4c& u)
{
    const auto m1 = bit_of(state.n, site);
    const auto m2 = bit_of(state.n, site + 1);
    for (std::size_t idx = 0; idx < static_cast<std::size_t>(state.amplitudes.size()); ++idx) {
        if (idx & (m1 | m2))
            continue;
        const std::array<std::size_t, 4> ids{idx, idx | m2, idx | m1, idx | m1 | m2};
        Eigen::Matrix<Complex, 4, 1> v;
        for (int q = 0; q < 4; ++q)
            v(q) = state.amplitudes(static_cast<Eigen::Index>(ids[static_cast<std::size_t>(q)]));
        v = u * v;
        for (int q = 0; q < 4; ++q)
            state.amplitudes(static_cast<Eigen::Index>(ids[static_cast<std::size_t>(q)])) = v(q);
    }
}

MatrixXc partial_trace(const DenseState& state, std::vector<int> sites)
{
    std::sort(sites.begin(), sites.end());
    const int n = state.n;
    const int m = static_cast<int>(sites.size());
    const Eigen::Index kept = Eigen::Index{1} << m;
    const Eigen::Index rest = Eigen::Index{1} << (n - m);
    // Reorder amplitudes into a (kept x rest) matrix.
    MatrixXc psi(kept, rest);
    std::vector<int> others;
    for (int k = 0; k < n; ++k)
        if (!std::binary_search(sites.begin(), sites.end(), k))
            others.push_back(k);
    for (std::size_t idx = 0; idx < static_cast<std::size_t>(state.amplitudes.size()); ++idx) {
        Eigen::Index row = 0;
        Eigen::Index col = 0;
        for (int s : sites)
            row = 2 * row + ((idx & bit_of(n, s)) ? 1 : 0);
        for (int s : others)
            col = 2 * col + ((idx & bit_of(n, s)) ? 1 : 0);
        psi(row, col) = state.amplitudes(static_cast<Eigen::Index>(idx));
    }
    MatrixXc rho = psi * psi.adjoint();
    return rho / rho.trace().real();
}

Real tau(const DenseState& state, const TargetSpec& target)
{
    target.validate(state.n);
    Real value = purity_deficit(partial_trace(state, {target.a})) + purity_deficit(partial_trace(state, {target.b}));
    if (target.mu != 0.0)
        value -= target.mu * purity_deficit(partial_trace(state, {target.a, target.b}));
    for (int k = 0; k < state.n; ++k) {
        const Real w = target.penalty(k);
        if (w != 0.0)
            value -= w * purity_deficit(partial_trace(state, {k}));
    }
    return value;
}

Real fidelity(const VectorXc& a, const VectorXc& b)
{
    return std::norm(a.dot(b));
}

namespace {

using Functional = std::function<Real(const DenseState&)>;

Real curvature(const DenseState& state, const ChainSpec& chain, const ControlFrame& frame, const Functional& f,
               Real dt)
{
    const Real plus = f(propagate(state, chain, frame, dt));
    const Real minus = f(propagate(state, chain, frame, -dt));
    return (plus - 2.0 * f(state) + minus) / (dt * dt);
}

Real field_derivative(const DenseState& state, const ChainSpec& chain, const Functional& f, int site, int axis,
                      Real dg, Real dt)
{
    if (site < 0 || site >= state.n || axis < 0 || axis > 1)
        throw std::out_of_range("field component outside chain");
    ControlFrame up = ControlFrame::zero(state.n, dt);
    ControlFrame down = up;
    up.fields(site, axis) = dg;
    down.fields(site, axis) = -dg;
    return (curvature(state, chain, up, f, dt) - curvature(state, chain, down, f, dt)) / (2.0 * dg);
}

FieldArray field_gradient(const DenseState& state, const ChainSpec& chain, const Functional& f, Real dg, Real dt)
{
    FieldArray g(state.n, 2);
    for (int k = 0; k < state.n; ++k)
        for (int axis = 0; axis < 2; ++axis)
            g(k, axis) = field_derivative(state, chain, f, k, axis, dg, dt);
    return g;
}

Functional tau_of(const TargetSpec& target)
{
    return [target](const DenseState& s) { return tau(s, target); };
}

Functional purity_of(const std::vector<int>& sites)
{
    return [sites](const DenseState& s) { return purity_deficit(partial_trace(s, sites)); };
}

}  // namespace

Real tau_curvature_fd(const DenseState& state, const ChainSpec& chain, const ControlFrame& frame,
                      const TargetSpec& target, Real dt)
{
    return curvature(state, chain, frame, tau_of(target), dt);
}

Real grad_fd(const DenseState& state, const ChainSpec& chain, const TargetSpec& target, int site, int axis,
             Real dg, Real dt)
{
    return field_derivative(state, chain, tau_of(target), site, axis, dg, dt);
}

FieldArray gradient_fd(const DenseState& state, const ChainSpec& chain, const TargetSpec& target, Real dg, Real dt)
{
    return field_gradient(state, chain, tau_of(target), dg, dt);
}

Real purity_curvature_fd(const DenseState& state, const ChainSpec& chain, const ControlFrame& frame,
                         const std::vector<int>& sites, Real dt)
{
    return curvature(state, chain, frame, purity_of(sites), dt);
}

FieldArray purity_gradient_fd(const DenseState& state, const ChainSpec& chain, const std::vector<int>& sites,
                              Real dg, Real dt)
{
    return field_gradient(state, chain, purity_of(sites), dg, dt);
}

Real cosine_similarity(const FieldArray& a, const FieldArray& b)
{
    const Real na = a.norm();
    const Real nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        return 0.0;
    return (a.array() * b.array()).sum() / (na * nb);
}

}  // namespace spinctl::oracle
