#ifndef SPINCTL_MPS_HPP
#define SPINCTL_MPS_HPP

#include <array>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "spinctl/linalg.hpp"
#include "spinctl/model.hpp"

namespace spinctl {

/// Bond truncation after every two-site gate: keep at most `d_max` singular values and drop
/// those whose relative squared weight falls below `weight_floor`.
struct TruncationPolicy
{
    int d_max = 20;
    Real weight_floor = 1e-12;
};

/// Open-boundary matrix product state of N spin-1/2 sites.
///
/// Each site carries two matrices A[s] (left bond x right bond), one per physical state
/// s in {0 = up, 1 = down}; the amplitude of |s_0 ... s_{N-1}> is A_0[s_0] ... A_{N-1}[s_{N-1}].
/// Boundary bonds have dimension one. When a canonical center c is set, sites left of c are
/// left isometries (sum_s A[s]^dag A[s] = 1) and sites right of c are right isometries.
class MpsState
{
public:
    using SiteTensor = std::array<MatrixXc, 2>;

    MpsState() = default;

    /// Product state from normalized single-spin states.
    static MpsState from_product_state(std::span<const Vector2c> locals, int d_max);
    /// Copies an explicit tensor list; bond compatibility is checked, no canonical form assumed.
    static MpsState from_tensors(std::vector<SiteTensor> tensors, int d_max);

    int size() const { return static_cast<int>(tensors_.size()); }
    int d_max() const { return policy_.d_max; }
    const TruncationPolicy& truncation() const { return policy_; }
    void set_truncation(const TruncationPolicy& policy);

    const SiteTensor& tensor(int site) const { return tensors_[static_cast<std::size_t>(site)]; }
    /// Dimension of the bond between `site` and `site + 1`.
    int bond_dimension(int site) const;
    int max_bond_dimension() const;

    std::optional<int> canonical_center() const { return center_; }
    Real discarded_weight() const { return discarded_weight_; }
    /// Largest |<psi|psi> - 1| observed before a renormalization.
    Real max_norm_drift() const { return max_norm_drift_; }
    Real norm_tolerance() const { return norm_tolerance_; }

    Real norm_squared() const;

    /// Brings the state to mixed-canonical form around `center` using gauge-fixed QR.
    void canonicalize(int center);
    /// Moves an existing canonical center by one site to the right or left.
    void shift_center_right();
    void shift_center_left();
    /// True when the isometry conditions around the canonical center hold to `tol`.
    bool is_canonical(Real tol = 1e-10) const;

    void apply_site_unitary(int site, const Matrix2c& u);
    /// Applies a gate to sites (bond, bond + 1) with truncation; the center ends at bond + 1.
    void apply_two_site_gate(int bond, const Matrix4c& gate);
    /// Applies the diagonal gate exp(-i t J_b Z Z) to every bond in one sweep starting from
    /// whichever chain end holds the canonical center.
    void apply_ising_layer(const ChainSpec& chain, Real t);

    VectorXc to_dense() const;

private:
    enum class Sweep { right, left };
    void apply_bond_update(int bond, const MatrixXc& theta, Sweep direction);
    void ensure_center_at_end();

    std::vector<SiteTensor> tensors_;
    TruncationPolicy policy_;
    std::optional<int> center_;
    Real discarded_weight_ = 0.0;
    Real max_norm_drift_ = 0.0;
    Real norm_tolerance_ = 1e-8;
};

enum class Splitting { second_order = 2, fourth_order = 4 };

/// Advances the state by exp(-i (H_s + H_c) dt) for a constant frame, in place, as
/// `substeps` equal splitting steps.
void advance(MpsState& state, const ChainSpec& chain, const ControlFrame& frame, Real dt,
             Splitting splitting = Splitting::fourth_order, int substeps = 1);

/// Value-returning form of advance().
MpsState step(MpsState state, const ChainSpec& chain, const ControlFrame& frame, Real dt,
              Splitting splitting = Splitting::fourth_order);

/// Reduced density matrix on 1-3 sorted distinct sites. The first listed site is the most
/// significant tensor factor.
struct Rdm
{
    std::vector<int> sites;
    MatrixXc matrix;

    int site_count() const { return static_cast<int>(sites.size()); }
};

Rdm rdm(const MpsState& state, std::vector<int> sites);

/// <prod_k sigma^{a_k}_{s_k}> for (site, pauli index) pairs; identity entries are allowed and at
/// most three entries may be non-identity.
Real pauli_expectation(const MpsState& state, std::span<const std::pair<int, int>> assignment);
Real pauli_expectation(const MpsState& state, std::initializer_list<std::pair<int, int>> assignment);

/// Left and right environments of every site, computed once per state.
/// left(k) contracts sites [0, k); right(k) contracts sites (k, N).
class Environments
{
public:
    explicit Environments(const MpsState& state);

    const MatrixXc& left(int site) const { return left_[static_cast<std::size_t>(site)]; }
    const MatrixXc& right(int site) const { return right_[static_cast<std::size_t>(site)]; }

private:
    std::vector<MatrixXc> left_;
    std::vector<MatrixXc> right_;
};

/// All single-site and nearest-neighbour reduced density matrices from one pass.
struct LocalRdms
{
    std::vector<Matrix2c> site;  // rho_k
    std::vector<Matrix4c> bond;  // rho_{k,k+1}
};

LocalRdms local_rdms(const MpsState& state, const Environments& env);
LocalRdms local_rdms(const MpsState& state);

/// rho_{anchor, j} for every j > anchor (index j - anchor - 1), from a single sweep.
std::vector<Matrix4c> anchored_pair_rdms(const MpsState& state, const Environments& env, int anchor = 0);

}  // namespace spinctl

#endif  // SPINCTL_MPS_HPP
