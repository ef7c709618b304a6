#ifndef SPINCTL_VERIFY_HPP
#define SPINCTL_VERIFY_HPP

#include <cstdint>

#include "spinctl/experiment.hpp"
#include "spinctl/oracle.hpp"

namespace spinctl {

struct StatePair
{
    MpsState mps;
    oracle::DenseState dense;
};

/// Random product state followed by brickwork layers of random two-site unitaries, built
/// identically on the MPS and the dense vector.
StatePair random_state_pair(int n, Rng& rng, int layers = 3, int d_max = 64);

struct OracleReport
{
    int intervals = 0;
    Real min_fidelity = 1.0;
    // Over all 1-, 2- and 3-site subsets at sampled rows: MPS contraction against dense partial
    // traces of the same state, and against the independently evolved dense state.
    Real max_rdm_deviation = 0.0;
    Real max_trajectory_rdm_deviation = 0.0;
    int rdm_rows = 0;
};

/// Runs the configured protocol on the ordered chain at exact bond dimension, then replays the
/// recorded pulse on both the MPS (with `substeps` integrator steps per interval) and the dense
/// oracle, comparing every interval. RDMs are compared every `rdm_every` rows and at the end.
/// Truncation is off: the bond dimension is exact and the weight floor is zero.
OracleReport oracle_crosscheck(RunConfig config, int rdm_every = 250, int substeps = 1);

struct ConvergenceReport
{
    Real max_deviation = 0.0;  // max over common rows and j of |c_low - c_high|
    Real peak_low = 0.0;
    Real peak_high = 0.0;
    std::size_t rows_low = 0;
    std::size_t rows_high = 0;
};

struct BondStudy
{
    ConvergenceReport replay;       // one pulse, propagated at both bond dimensions
    ConvergenceReport closed_loop;  // independent closed-loop runs at each bond dimension
};

/// Closed-loop runs at d_max = low and high, plus an open-loop replay of the high-d_max pulse at
/// both. Closed-loop trajectories separate at the rate beta once any two runs differ, since the
/// field direction jumps where a site gradient passes through zero; the replay isolates the
/// truncation error.
BondStudy bond_convergence(RunConfig config, int low, int high);
ConvergenceReport compare_runs(const RunResult& low, const RunResult& high);

struct GradientReport
{
    int states = 0;
    Real min_cosine = 1.0;
    Real max_scale_error = 0.0;  // |k - 1| for the best fit fd = k * analytic
    int argmax_frames = 0;
    Real worst_argmax_margin = 1e300;  // min over states of tau''(optimal) - tau''(random frame)
};

/// Analytic vs finite-difference gradients on random states of 5 and 6 spins, plus the argmax
/// property against `frames` random beta-magnitude frames per state.
GradientReport gradient_suite(int states, int frames, std::uint64_t seed, Real beta = 70.0);

}  // namespace spinctl

#endif  // SPINCTL_VERIFY_HPP
