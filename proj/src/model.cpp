#include "spinctl/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace spinctl {

ChainSpec::ChainSpec(int n, std::vector<Real> couplings)
    : n_(n), couplings_(std::move(couplings))
{
    if (n_ < 2)
        throw std::invalid_argument("chain needs at least two spins");
    if (couplings_.size() != static_cast<std::size_t>(n_ - 1))
        throw std::invalid_argument("chain of " + std::to_string(n_) + " spins needs " +
                                    std::to_string(n_ - 1) + " couplings");
    for (Real j : couplings_)
        if (!std::isfinite(j))
            throw std::invalid_argument("non-finite coupling");
}

ChainSpec ChainSpec::uniform(int n, Real coupling)
{
    return ChainSpec(n, std::vector<Real>(static_cast<std::size_t>(std::max(n - 1, 0)), coupling));
}

ChainSpec ChainSpec::scaled(Real s) const
{
    auto c = couplings_;
    for (auto& j : c)
        j *= s;
    return ChainSpec(n_, std::move(c));
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
}

Real Rng::uniform()
{
    return static_cast<Real>(engine_() >> 11) * 0x1.0p-53;
}

Real Rng::normal()
{
    Real u1 = uniform();
    while (u1 <= 0.0)
        u1 = uniform();
    const Real u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t master, const std::string& label)
{
    // FNV-1a over the label, folded into the master seed.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return Rng(master, h).next_u64();
}

std::vector<ChainSpec> sample_ensemble(int n, const DisorderSpec& spec)
{
    if (!(spec.lo > 0.0) || spec.lo > spec.hi)
        throw std::invalid_argument("disorder interval must satisfy 0 < lo <= hi");
    if (spec.count < 1)
        throw std::invalid_argument("ensemble count must be positive");
    std::vector<ChainSpec> chains;
    chains.reserve(static_cast<std::size_t>(spec.count));
    const Rng root(spec.seed);
    for (int m = 0; m < spec.count; ++m) {
        Rng r = root.split(static_cast<std::uint64_t>(m));
        std::vector<Real> j(static_cast<std::size_t>(n - 1));
        for (auto& v : j)
            v = spec.base * (spec.lo == spec.hi ? spec.lo : r.uniform(spec.lo, spec.hi));
        chains.emplace_back(n, std::move(j));
    }
    return chains;
}

Real PulseSchedule::duration() const
{
    Real t = 0.0;
    for (const auto& f : frames)
        t += f.duration;
    return t;
}

void PulseSchedule::validate() const
{
    for (const auto& f : frames)
        if (f.size() != n)
            throw std::invalid_argument("pulse frame size does not match chain length");
    for (std::size_t i = 1; i < switch_times.size(); ++i)
        if (!(switch_times[i] > switch_times[i - 1]))
            throw std::invalid_argument("switch times must be strictly increasing");
}

PulseSchedule smooth_pulse(const PulseSchedule& schedule, int window)
{
    if (window < 1 || window % 2 == 0)
        throw std::invalid_argument("smoothing window must be odd and positive");
    PulseSchedule out = schedule;
    const int count = static_cast<int>(schedule.frames.size());
    const int half = window / 2;
    for (int k = 0; k < count; ++k) {
        const int reach = std::min({half, k, count - 1 - k});
        const int lo = k - reach;
        const int hi = k + reach;
        FieldArray acc = FieldArray::Zero(schedule.n, 2);
        for (int q = lo; q <= hi; ++q)
            acc += schedule.frames[static_cast<std::size_t>(q)].fields;
        out.frames[static_cast<std::size_t>(k)].fields = acc / static_cast<Real>(hi - lo + 1);
    }
    return out;
}

}  // namespace spinctl
