#ifndef SPINCTL_ORACLE_HPP
#define SPINCTL_ORACLE_HPP

#include <functional>
#include <span>
#include <vector>

#include "spinctl/entanglement.hpp"
#include "spinctl/linalg.hpp"
#include "spinctl/model.hpp"

namespace spinctl::oracle {

inline constexpr int kMaxSites = 12;

/// Full state vector of up to kMaxSites spins; site 0 is the most significant bit.
struct DenseState
{
    int n = 0;
    VectorXc amplitudes;

    static DenseState product(std::span<const Vector2c> locals);
    static DenseState from_vector(int n, VectorXc amplitudes);
};

/// (H_s + H_c) |psi> without forming the matrix.
VectorXc apply_hamiltonian(const ChainSpec& chain, const ControlFrame& frame, const VectorXc& psi);

/// exp(-i H t) |psi> to machine precision (scaled Taylor series); t may be negative.
DenseState propagate(const DenseState& state, const ChainSpec& chain, const ControlFrame& frame, Real t);

DenseState dense_step(const DenseState& state, const ChainSpec& chain, const ControlFrame& frame, Real dt);

/// Applies a 2x2 unitary on `site` or a 4x4 unitary on (site, site + 1).
void apply_site_unitary(DenseState& state, int site, const Matrix2c& u);
void apply_two_site_unitary(DenseState& state, int site, const Matrix4c& u);

/// Partial trace onto sorted sites; first site most significant.
MatrixXc partial_trace(const DenseState& state, std::vector<int> sites);

Real tau(const DenseState& state, const TargetSpec& target);

/// |<a|b>|^2 for normalized vectors.
Real fidelity(const VectorXc& a, const VectorXc& b);

/// [tau(dt) - 2 tau(0) + tau(-dt)] / dt^2 under the constant frame.
Real tau_curvature_fd(const DenseState& state, const ChainSpec& chain, const ControlFrame& frame,
                      const TargetSpec& target, Real dt = 1e-4);

/// Central difference of tau_curvature_fd in one field component around zero fields. The
/// curvature is affine in the fields, so a wide step is exact and keeps round-off small.
Real grad_fd(const DenseState& state, const ChainSpec& chain, const TargetSpec& target, int site, int axis,
             Real dg = 0.1, Real dt = 1e-4);

/// grad_fd for every site and axis.
FieldArray gradient_fd(const DenseState& state, const ChainSpec& chain, const TargetSpec& target,
                       Real dg = 0.1, Real dt = 1e-4);

/// Curvature and field gradient of a single purity deficit S(rho_sites), same stencils.
Real purity_curvature_fd(const DenseState& state, const ChainSpec& chain, const ControlFrame& frame,
                         const std::vector<int>& sites, Real dt = 1e-4);
FieldArray purity_gradient_fd(const DenseState& state, const ChainSpec& chain, const std::vector<int>& sites,
                              Real dg = 0.1, Real dt = 1e-4);

/// Cosine similarity of two gradients flattened to vectors.
Real cosine_similarity(const FieldArray& a, const FieldArray& b);

}  // namespace spinctl::oracle

#endif  // SPINCTL_ORACLE_HPP
