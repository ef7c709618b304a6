#ifndef SPINCTL_EXPERIMENT_HPP
#define SPINCTL_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spinctl/controller.hpp"
#include "spinctl/model.hpp"
#include "spinctl/mps.hpp"

namespace spinctl {

/// Everything a run needs. Sites are 1-based in files and on the command line.
struct RunConfig
{
    int n = 10;
    int d_max = 20;
    Real beta = 70.0;
    Real delta = 1e-3;
    Real mu = 0.0;
    Real alpha = 1.0;
    std::string mask = "full";  // full | reduced
    Real coupling = 1.0;
    std::vector<Real> couplings;  // explicit J_i; overrides coupling and disorder when set
    Real disorder_lo = 1.0;
    Real disorder_hi = 1.0;
    int count = 1;
    int test_count = 0;  // train: size of the fresh test ensemble (0 = none)
    std::uint64_t seed = 1;
    Real tau_switch = 0.95;
    int window = 200;
    Real eps_sat = 1e-4;
    Real eps_grad = 1e-12;
    Real t_max = 0.0;  // 0 = 4 N + 10
    Real initial_tilt = 1e-6;
    int splitting = 4;
    int substeps = 1;  // integrator steps per control interval
    Real trunc_floor = 1e-12;
    bool site1_delta_term = true;
    int smooth_window = 5;
    int stride = 1;
    Real min_peak = 0.0;  // threshold on the final-pair peak concurrence
    Real max_time = 0.0;  // threshold on the time of that peak (0 = none)
    std::string out_dir = "out";

    /// Applies one `key = value` assignment; throws on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    /// Reads a file of `key = value` lines (`#` starts a comment).
    void load(const std::filesystem::path& path);
    void validate() const;

    Real time_cap() const { return t_max > 0.0 ? t_max : 4.0 * n + 10.0; }
    ControlParameters control() const;
    SwitchPolicy switch_policy() const;
    TruncationPolicy truncation() const;

    /// Resolved key/value pairs in a fixed order.
    std::vector<std::pair<std::string, std::string>> entries() const;
};

/// Chains for a named sub-ensemble ("train", "test"). Explicit couplings give `count` copies.
std::vector<ChainSpec> make_ensemble(const RunConfig& config, const std::string& label, int count);

/// |+> on every site, each spin tilted by initial_tilt * N(0, 1) in polar and azimuthal angle
/// from a stream of the run seed. A zero tilt gives the exact product |+>^N.
std::vector<Vector2c> initial_locals(int n, Real tilt, std::uint64_t seed);

/// Target (0, j) with the penalty weights implied by the mask policy.
TargetSpec target_for(const RunConfig& config, int j);
SiteMask mask_for(const RunConfig& config, int j);

struct TrajectoryRow
{
    Real t = 0.0;
    int target = 1;  // 0-based partner site
    Real tau = 0.0;
    std::vector<Real> concurrence;  // c_{0,j}, j = 1 .. N-1
    Real discarded = 0.0;
};

struct Peak
{
    Real value = 0.0;
    Real time = 0.0;
};

struct RunResult
{
    std::vector<TrajectoryRow> rows;  // ensemble means
    PulseSchedule pulse;
    std::vector<Peak> peaks;                      // per j of the mean trajectory, index j - 1
    std::vector<std::vector<Peak>> member_peaks;  // [member][j - 1]
    Real discarded = 0.0;                         // largest member total
    Real max_norm_drift = 0.0;
    bool completed = false;  // scheduler finished before the time cap
    std::vector<MpsState> final_states;

    Real final_peak() const { return peaks.back().value; }
    /// Mean over members of each member's own final-pair peak.
    Real mean_member_final_peak() const;
};

/// Observer called once per trajectory row, before the next frame is applied: (row, states).
using IntervalHook = std::function<void(int, const std::vector<MpsState>&)>;

/// Closed-loop control of an ensemble (size one for a single chain) driven by the
/// ensemble-mean tau; every member starts from the same tilted |+> state.
RunResult run_control(const RunConfig& config, const std::vector<ChainSpec>& chains, const IntervalHook& hook = {});

/// Open-loop replay of a stored pulse; rows carry the target implied by the switch times.
RunResult run_replay(const RunConfig& config, const PulseSchedule& pulse, const std::vector<ChainSpec>& chains,
                     const IntervalHook& hook = {});

PulseMetadata metadata_for(const RunConfig& config);

// Files. Every file starts with '#' lines carrying the resolved configuration.

void write_header(std::ostream& out, const RunConfig& config, const std::string& kind);
void write_trajectory(const std::filesystem::path& path, const RunConfig& config, const RunResult& result);
void write_pulse(const std::filesystem::path& path, const RunConfig& config, const PulseSchedule& pulse);
PulseSchedule read_pulse(const std::filesystem::path& path);

struct Thresholds
{
    bool passed = true;
    std::vector<std::string> failures;
};

Thresholds check_thresholds(const RunConfig& config, const RunResult& result);

/// Summary document: peaks, switch times, duration, discarded weight and threshold status.
std::string summary_json(const RunConfig& config, const RunResult& result, const Thresholds& verdict,
                         const std::map<std::string, double>& extra = {});
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace spinctl

#endif  // SPINCTL_EXPERIMENT_HPP
