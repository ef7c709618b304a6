#ifndef SPINCTL_MODEL_HPP
#define SPINCTL_MODEL_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "spinctl/linalg.hpp"

namespace spinctl {

/// Open Ising chain H_s = sum_i J_i Z_i Z_{i+1}. Energies in units of J, hbar = 1.
/// Sites are 0-based in the library; couplings[i] joins sites i and i+1.
class ChainSpec
{
public:
    ChainSpec() = default;
    ChainSpec(int n, std::vector<Real> couplings);

    static ChainSpec uniform(int n, Real coupling = 1.0);

    int size() const { return n_; }
    const std::vector<Real>& couplings() const { return couplings_; }

    /// Coupling of bond (i, i+1); zero outside the chain (J_0 = J_N = 0 in 1-based terms).
    Real bond(int i) const
    {
        return (i >= 0 && i < n_ - 1) ? couplings_[static_cast<std::size_t>(i)] : 0.0;
    }

    ChainSpec scaled(Real s) const;

private:
    int n_ = 0;
    std::vector<Real> couplings_;
};

/// Multiplicative coupling disorder J_i = r_i * base with r_i ~ U[lo, hi].
struct DisorderSpec
{
    Real base = 1.0;
    Real lo = 1.0;
    Real hi = 1.0;
    std::uint64_t seed = 0;
    int count = 1;
};

/// Pinned generator: std::mt19937_64 (its output sequence is fixed by the standard) with a
/// portable 53-bit uniform mapping. Sub-streams are seeded through std::seed_seq, whose
/// mixing algorithm is likewise fixed by the standard.
class Rng
{
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1).
    Real uniform();
    Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller (portable, unlike std::normal_distribution).
    Real normal();

    Rng split(std::uint64_t stream) const { return Rng(seed_, stream_ * 0x9E3779B97F4A7C15ULL + stream + 1); }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
};

/// Seed of a named sub-ensemble ("train", "test", ...) derived from a master seed.
std::uint64_t derive_seed(std::uint64_t master, const std::string& label);

std::vector<ChainSpec> sample_ensemble(int n, const DisorderSpec& spec);

/// Piecewise-constant local fields over one interval; sigma_z components are absent.
struct ControlFrame
{
    FieldArray fields;  // rows: sites, columns: (g_x, g_y)
    Real duration = 1e-3;

    static ControlFrame zero(int n, Real duration)
    {
        return {FieldArray::Zero(n, 2), duration};
    }
    int size() const { return static_cast<int>(fields.rows()); }
};

struct PulseMetadata
{
    Real beta = 70.0;
    Real delta = 1e-3;
    Real mu = 0.0;
    Real alpha = 1.0;
    std::string mask_policy = "full";
    std::uint64_t seed = 0;
    Real initial_tilt = 0.0;
};

/// Ordered control frames; frame k covers [k * delta, (k + 1) * delta).
struct PulseSchedule
{
    int n = 0;
    std::vector<ControlFrame> frames;
    std::vector<Real> switch_times;
    PulseMetadata metadata;

    Real duration() const;
    void validate() const;
};

/// Centered moving average over `window` frames (odd); near the ends the window shrinks
/// symmetrically so it stays centered.
/// The amplitude cap is not re-imposed.
PulseSchedule smooth_pulse(const PulseSchedule& schedule, int window);

}  // namespace spinctl

#endif  // SPINCTL_MODEL_HPP
