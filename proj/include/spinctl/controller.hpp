#ifndef SPINCTL_CONTROLLER_HPP
#define SPINCTL_CONTROLLER_HPP

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "spinctl/entanglement.hpp"
#include "spinctl/linalg.hpp"
#include "spinctl/model.hpp"
#include "spinctl/mps.hpp"

namespace spinctl {

/// d tau'' / d g, one (x, y) row per site, in units of J^3.
using FieldGradient = FieldArray;

/// Sites receiving control fields (and, for reduced control, penalty weight).
using SiteMask = std::vector<int>;

SiteMask full_mask(int n);

/// Spin 0 plus the window j-2 .. j+2 around the active partner j, clipped to the chain.
SiteMask reduced_mask(int j, int n);

/// Pauli expectation tables: single-site <sigma^a_k> and nearest-neighbour <sigma^a_k sigma^b_{k+1}>.
struct LocalExpectations
{
    std::vector<std::array<Real, 4>> site;
    std::vector<std::array<std::array<Real, 4>, 4>> bond;

    static LocalExpectations from(const LocalRdms& rdms);

    /// <sigma^a_p sigma^b_q> for neighbouring sites |p - q| = 1.
    Real neighbours(int p, int a, int q, int b) const;
};

/// Three-site table <sigma^a sigma^b sigma^c> over sorted sites.
using PauliCube = std::array<std::array<std::array<Real, 4>, 4>, 4>;
using PauliSquare = std::array<std::array<Real, 4>, 4>;

PauliSquare pauli_table(const Matrix4c& rho);
PauliCube pauli_table3(const MatrixXc& rho8);

/// Expectations used by the pair block for the pair (0, j).
struct PairExpectations
{
    int j = 1;
    PauliSquare pair{};                 // rho_{0,j}
    std::optional<PauliCube> with_1;    // {0, 1, j}, or {0, 1, 2} when j == 1
    std::optional<PauliCube> with_jm1;  // {0, j-1, j}
    std::optional<PauliCube> with_jp1;  // {0, j, j+1}

    static PairExpectations from(const MpsState& state, int j);
};

struct GradientOptions
{
    /// Keep the rho_{1j}^{z,Delta} rho_{12j}^{theta,z,Delta} term of the site-1 group.
    bool site1_delta_term = true;
};

/// d S''(rho_i) / d g for all sites; only sites i-1, i, i+1 are non-zero.
FieldGradient site_purity_curvature_gradient(const LocalExpectations& ex, const ChainSpec& chain, int site);
FieldGradient site_purity_curvature_gradient(const MpsState& state, const ChainSpec& chain, int site);

/// d S''(rho_{0j}) / d g for all sites; the site-0 row vanishes identically for j == 1.
FieldGradient pair_purity_curvature_gradient(const PairExpectations& ex, const ChainSpec& chain,
                                             const GradientOptions& options = {});
FieldGradient pair_purity_curvature_gradient(const MpsState& state, const ChainSpec& chain, int j,
                                             const GradientOptions& options = {});

/// Weighted sum (+1, +1, -mu, -alpha_k) of the blocks for target (0, j); rows outside `mask`
/// are zeroed afterwards. A pair term requires target.a == 0.
FieldGradient assemble_gradient(const LocalExpectations& ex, const std::optional<PairExpectations>& pair,
                                const ChainSpec& chain, const TargetSpec& target, const SiteMask& mask,
                                const GradientOptions& options = {});
FieldGradient assemble_gradient(const MpsState& state, const ChainSpec& chain, const TargetSpec& target,
                                const SiteMask& mask, const GradientOptions& options = {});

/// Per-site rescaling of the gradient to magnitude beta; sites with |grad| <= eps_grad get zero.
ControlFrame optimal_fields(const FieldGradient& grad, Real beta, Real duration = 1e-3, Real eps_grad = 1e-12);

struct SwitchPolicy
{
    Real tau_switch = 0.95;
    int window = 200;
    Real eps_sat = 1e-4;
};

/// Sequencing of the targets tau_{0,1} -> tau_{0,2} -> ... -> tau_{0,N-1}.
struct SchedulerState
{
    int n = 2;
    int target = 1;          // partner site j of the active target (0-based)
    SwitchPolicy policy;
    std::vector<Real> running_best;  // ring buffer of the running maximum, capacity window + 1
    std::size_t head = 0;
    int steps = 0;           // intervals observed for the active target
    Real best = 0.0;
    bool finished = false;
    std::vector<Real> switch_times;

    static SchedulerState start(int n, const SwitchPolicy& policy);
};

struct SchedulerUpdate
{
    SchedulerState state;
    bool switched = false;
};

/// Feeds one interval's tau. The threshold rule applies to every target but the last; the stall
/// rule (no relative gain of the running maximum above eps_sat over `window` intervals) applies
/// to all. Completing the last target is reported as a switch and sets `finished`.
SchedulerUpdate advance_scheduler(SchedulerState sched, Real tau_now, Real t);

struct ControlParameters
{
    Real beta = 70.0;
    Real delta = 1e-3;
    Real eps_grad = 1e-12;
    Splitting splitting = Splitting::fourth_order;
    int substeps = 1;
    GradientOptions gradient;
};

/// Reduced density matrices of one state needed for tau, concurrences and gradients.
struct Snapshot
{
    LocalRdms local;
    LocalExpectations expectations;
    std::vector<Matrix4c> anchored;  // rho_{0,j} at index j - 1

    static Snapshot take(const MpsState& state);

    Real tau(const TargetSpec& target) const;
    /// c_{0,j} for j = 1 .. N-1.
    std::vector<Real> concurrences() const;
};

/// Gradient from a snapshot; triple-site expectations are contracted from `state` when mu != 0.
FieldGradient assemble_gradient(const Snapshot& snap, const MpsState& state, const ChainSpec& chain,
                                const TargetSpec& target, const SiteMask& mask,
                                const GradientOptions& options = {});

/// Number of worker threads for ensemble members (SPINCTL_WORKERS, default hardware concurrency).
int worker_count();

/// One ensemble interval: per-member gradients (computed concurrently), arithmetic mean folded
/// in member order, one shared frame from optimal_fields, applied to every member.
ControlFrame ensemble_control_step(std::vector<MpsState>& states, const std::vector<ChainSpec>& chains,
                                   const TargetSpec& target, const SiteMask& mask,
                                   const ControlParameters& params);

/// As above, reusing snapshots already taken for the current states.
ControlFrame ensemble_control_step(std::vector<MpsState>& states, const std::vector<ChainSpec>& chains,
                                   const std::vector<Snapshot>& snapshots, const TargetSpec& target,
                                   const SiteMask& mask, const ControlParameters& params);

/// Runs fn(i) for i in [0, count) on the worker pool; fn must only touch slot i.
void parallel_for(int count, const std::function<void(int)>& fn);

}  // namespace spinctl

#endif  // SPINCTL_CONTROLLER_HPP
