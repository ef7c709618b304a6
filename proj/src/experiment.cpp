#include "spinctl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace spinctl {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string format(Real v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Real parse_real(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    Real x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || !std::isfinite(x))
        throw std::invalid_argument("bad number for " + key + ": '" + v + "'");
    return x;
}

long long parse_int(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    long long x = 0;
    try {
        x = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size())
        throw std::invalid_argument("bad integer for " + key + ": '" + v + "'");
    return x;
}

std::vector<Real> parse_list(const std::string& key, const std::string& v)
{
    std::vector<Real> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!trim(item).empty())
            out.push_back(parse_real(key, trim(item)));
    return out;
}

std::string join(const std::vector<Real>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + format(v[i]);
    return s;
}

bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "1" || v == "true" || v == "yes" || v == "on")
        return true;
    if (v == "0" || v == "false" || v == "no" || v == "off")
        return false;
    throw std::invalid_argument("bad boolean for " + key + ": '" + v + "'");
}

}  // namespace

void RunConfig::set(const std::string& raw_key, const std::string& raw_value)
{
    const std::string key = trim(raw_key);
    const std::string v = trim(raw_value);
    auto as_int = [&] { return static_cast<int>(parse_int(key, v)); };
    auto as_real = [&] { return parse_real(key, v); };
    if (key == "n") n = as_int();
    else if (key == "d_max") d_max = as_int();
    else if (key == "beta") beta = as_real();
    else if (key == "delta") delta = as_real();
    else if (key == "mu") mu = as_real();
    else if (key == "alpha") alpha = as_real();
    else if (key == "mask") mask = v;
    else if (key == "coupling") coupling = as_real();
    else if (key == "couplings") couplings = parse_list(key, v);
    else if (key == "disorder_lo") disorder_lo = as_real();
    else if (key == "disorder_hi") disorder_hi = as_real();
    else if (key == "count") count = as_int();
    else if (key == "test_count") test_count = as_int();
    else if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(key, v));
    else if (key == "tau_switch") tau_switch = as_real();
    else if (key == "window") window = as_int();
    else if (key == "eps_sat") eps_sat = as_real();
    else if (key == "eps_grad") eps_grad = as_real();
    else if (key == "t_max") t_max = as_real();
    else if (key == "initial_tilt") initial_tilt = as_real();
    else if (key == "splitting") splitting = as_int();
    else if (key == "substeps") substeps = as_int();
    else if (key == "trunc_floor") trunc_floor = as_real();
    else if (key == "site1_delta_term") site1_delta_term = parse_bool(key, v);
    else if (key == "smooth_window") smooth_window = as_int();
    else if (key == "stride") stride = as_int();
    else if (key == "min_peak") min_peak = as_real();
    else if (key == "max_time") max_time = as_real();
    else if (key == "out_dir") out_dir = v;
    else
        throw std::invalid_argument("unknown configuration key '" + key + "'");
}

void RunConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        set(line.substr(0, eq), line.substr(eq + 1));
    }
}

void RunConfig::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok)
            throw std::invalid_argument(what);
    };
    require(n >= 2, "n must be at least 2");
    require(d_max >= 1, "d_max must be positive");
    require(beta > 0.0, "beta must be positive");
    require(delta > 0.0, "delta must be positive");
    require(mu >= 0.0, "mu must be non-negative");
    require(alpha >= 0.0, "alpha must be non-negative");
    require(mask == "full" || mask == "reduced", "mask must be full or reduced");
    require(coupling > 0.0, "coupling must be positive");
    require(couplings.empty() || couplings.size() == static_cast<std::size_t>(n - 1),
            "couplings needs n - 1 entries");
    require(disorder_lo > 0.0 && disorder_lo <= disorder_hi, "disorder interval must satisfy 0 < lo <= hi");
    require(count >= 1, "count must be positive");
    require(test_count >= 0, "test_count must be non-negative");
    require(tau_switch > 0.0, "tau_switch must be positive");
    require(window >= 1, "window must be positive");
    require(eps_sat > 0.0, "eps_sat must be positive");
    require(eps_grad >= 0.0, "eps_grad must be non-negative");
    require(t_max >= 0.0, "t_max must be non-negative");
    require(initial_tilt >= 0.0, "initial_tilt must be non-negative");
    require(splitting == 2 || splitting == 4, "splitting must be 2 or 4");
    require(substeps >= 1, "substeps must be at least 1");
    require(trunc_floor >= 0.0, "trunc_floor must be non-negative");
    require(smooth_window >= 1 && smooth_window % 2 == 1, "smooth_window must be odd and positive");
    require(stride >= 1, "stride must be positive");
    require(time_cap() >= n * delta, "t_max is too short for one interval per target");
}

ControlParameters RunConfig::control() const
{
    ControlParameters p;
    p.beta = beta;
    p.delta = delta;
    p.eps_grad = eps_grad;
    p.splitting = splitting == 2 ? Splitting::second_order : Splitting::fourth_order;
    p.substeps = substeps;
    p.gradient.site1_delta_term = site1_delta_term;
    return p;
}

SwitchPolicy RunConfig::switch_policy() const { return {tau_switch, window, eps_sat}; }

TruncationPolicy RunConfig::truncation() const { return {d_max, trunc_floor}; }

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const
{
    return {
        {"n", std::to_string(n)},
        {"d_max", std::to_string(d_max)},
        {"beta", format(beta)},
        {"delta", format(delta)},
        {"mu", format(mu)},
        {"alpha", format(alpha)},
        {"mask", mask},
        {"coupling", format(coupling)},
        {"couplings", join(couplings)},
        {"disorder_lo", format(disorder_lo)},
        {"disorder_hi", format(disorder_hi)},
        {"count", std::to_string(count)},
        {"test_count", std::to_string(test_count)},
        {"seed", std::to_string(seed)},
        {"tau_switch", format(tau_switch)},
        {"window", std::to_string(window)},
        {"eps_sat", format(eps_sat)},
        {"eps_grad", format(eps_grad)},
        {"t_max", format(time_cap())},
        {"initial_tilt", format(initial_tilt)},
        {"splitting", std::to_string(splitting)},
        {"substeps", std::to_string(substeps)},
        {"trunc_floor", format(trunc_floor)},
        {"site1_delta_term", site1_delta_term ? "true" : "false"},
        {"smooth_window", std::to_string(smooth_window)},
        {"stride", std::to_string(stride)},
        {"min_peak", format(min_peak)},
        {"max_time", format(max_time)},
        {"out_dir", out_dir},
    };
}

std::vector<ChainSpec> make_ensemble(const RunConfig& config, const std::string& label, int count)
{
    if (!config.couplings.empty())
        return std::vector<ChainSpec>(static_cast<std::size_t>(count), ChainSpec(config.n, config.couplings));
    DisorderSpec spec;
    spec.base = config.coupling;
    spec.lo = config.disorder_lo;
    spec.hi = config.disorder_hi;
    spec.seed = derive_seed(config.seed, label);
    spec.count = count;
    return sample_ensemble(config.n, spec);
}

std::vector<Vector2c> initial_locals(int n, Real tilt, std::uint64_t seed)
{
    Rng rng(derive_seed(seed, "initial"));
    std::vector<Vector2c> locals;
    for (int k = 0; k < n; ++k) {
        Real theta = std::numbers::pi / 2;
        Real phi = 0.0;
        if (tilt > 0.0) {
            theta += tilt * rng.normal();
            phi = tilt * rng.normal();
        }
        locals.emplace_back(std::cos(theta / 2), std::polar(std::sin(theta / 2), phi));
    }
    return locals;
}

SiteMask mask_for(const RunConfig& config, int j)
{
    return config.mask == "reduced" ? reduced_mask(j, config.n) : full_mask(config.n);
}

TargetSpec target_for(const RunConfig& config, int j)
{
    TargetSpec t = TargetSpec::uniform(config.n, 0, j, config.mu, config.alpha);
    if (config.mask == "reduced") {
        const auto m = reduced_mask(j, config.n);
        for (int k = 0; k < config.n; ++k)
            if (std::find(m.begin(), m.end(), k) == m.end())
                t.alpha[static_cast<std::size_t>(k)] = 0.0;
    }
    return t;
}

PulseMetadata metadata_for(const RunConfig& config)
{
    PulseMetadata m;
    m.beta = config.beta;
    m.delta = config.delta;
    m.mu = config.mu;
    m.alpha = config.alpha;
    m.mask_policy = config.mask;
    m.seed = config.seed;
    m.initial_tilt = config.initial_tilt;
    return m;
}

Real RunResult::mean_member_final_peak() const
{
    Real s = 0.0;
    for (const auto& m : member_peaks)
        s += m.back().value;
    return member_peaks.empty() ? 0.0 : s / static_cast<Real>(member_peaks.size());
}

namespace {

/// Shared bookkeeping of the closed- and open-loop runs.
class Recorder
{
public:
    Recorder(int n, int members)
        : peaks_(static_cast<std::size_t>(n - 1)),
          member_peaks_(static_cast<std::size_t>(members), std::vector<Peak>(static_cast<std::size_t>(n - 1)))
    {
    }

    /// Observes the states at time t; returns the ensemble-mean tau of `target`.
    Real observe(Real t, const TargetSpec& target, const std::vector<MpsState>& states,
                 const std::vector<Snapshot>& snaps, std::vector<TrajectoryRow>& rows)
    {
        const auto members = static_cast<Real>(states.size());
        TrajectoryRow row;
        row.t = t;
        row.target = target.b;
        row.concurrence.assign(peaks_.size(), 0.0);
        for (std::size_t m = 0; m < states.size(); ++m) {
            row.tau += snaps[m].tau(target);
            const auto c = snaps[m].concurrences();
            for (std::size_t j = 0; j < c.size(); ++j) {
                row.concurrence[j] += c[j];
                auto& p = member_peaks_[m][j];
                if (c[j] > p.value)
                    p = {c[j], t};
            }
            row.discarded += states[m].discarded_weight();
        }
        row.tau /= members;
        row.discarded /= members;
        for (std::size_t j = 0; j < peaks_.size(); ++j) {
            row.concurrence[j] /= members;
            if (row.concurrence[j] > peaks_[j].value)
                peaks_[j] = {row.concurrence[j], t};
        }
        const Real tau = row.tau;
        rows.push_back(std::move(row));
        return tau;
    }

    void finish(RunResult& r, std::vector<MpsState>& states)
    {
        r.peaks = peaks_;
        r.member_peaks = member_peaks_;
        for (const auto& s : states) {
            r.discarded = std::max(r.discarded, s.discarded_weight());
            r.max_norm_drift = std::max(r.max_norm_drift, s.max_norm_drift());
        }
        r.final_states = std::move(states);
    }

private:
    std::vector<Peak> peaks_;
    std::vector<std::vector<Peak>> member_peaks_;
};

std::vector<MpsState> initial_states(int n, int members, Real tilt, std::uint64_t seed, const TruncationPolicy& trunc)
{
    const auto locals = initial_locals(n, tilt, seed);
    auto s = MpsState::from_product_state(locals, trunc.d_max);
    s.set_truncation(trunc);
    return std::vector<MpsState>(static_cast<std::size_t>(members), s);
}

std::vector<Snapshot> snapshots(const std::vector<MpsState>& states)
{
    std::vector<Snapshot> snaps(states.size());
    parallel_for(static_cast<int>(states.size()),
                 [&](int m) { snaps[static_cast<std::size_t>(m)] = Snapshot::take(states[static_cast<std::size_t>(m)]); });
    return snaps;
}

void check_chains(int n, const std::vector<ChainSpec>& chains)
{
    if (chains.empty())
        throw std::invalid_argument("ensemble is empty");
    for (const auto& c : chains)
        if (c.size() != n)
            throw std::invalid_argument("chain length differs from configured n");
}

}  // namespace

RunResult run_control(const RunConfig& config, const std::vector<ChainSpec>& chains, const IntervalHook& hook)
{
    config.validate();
    check_chains(config.n, chains);
    const auto params = config.control();
    auto states = initial_states(config.n, static_cast<int>(chains.size()), config.initial_tilt, config.seed,
                                 config.truncation());
    Recorder rec(config.n, static_cast<int>(chains.size()));
    RunResult result;
    result.pulse.n = config.n;
    result.pulse.metadata = metadata_for(config);

    auto sched = SchedulerState::start(config.n, config.switch_policy());
    const auto cap = static_cast<long long>(std::ceil(config.time_cap() / config.delta - 1e-9));
    for (long long k = 0;; ++k) {
        const Real t = static_cast<Real>(k) * config.delta;
        const auto snaps = snapshots(states);
        const auto target = target_for(config, sched.target);
        const Real tau = rec.observe(t, target, states, snaps, result.rows);
        if (hook)
            hook(static_cast<int>(k), states);
        sched = advance_scheduler(std::move(sched), tau, t).state;
        if (sched.finished) {
            result.completed = true;
            break;
        }
        if (k >= cap)
            break;
        const auto next = target_for(config, sched.target);
        result.pulse.frames.push_back(
            ensemble_control_step(states, chains, snaps, next, mask_for(config, sched.target), params));
    }
    result.pulse.switch_times = sched.switch_times;
    rec.finish(result, states);
    return result;
}

RunResult run_replay(const RunConfig& config, const PulseSchedule& pulse, const std::vector<ChainSpec>& chains,
                     const IntervalHook& hook)
{
    pulse.validate();
    if (pulse.n != config.n)
        throw std::invalid_argument("pulse has " + std::to_string(pulse.n) + " sites but chain has " +
                                    std::to_string(config.n));
    check_chains(config.n, chains);
    // Targets and the initial state follow the pulse's own metadata.
    RunConfig meta = config;
    meta.mu = pulse.metadata.mu;
    meta.alpha = pulse.metadata.alpha;
    meta.mask = pulse.metadata.mask_policy;
    const Real delta = pulse.metadata.delta;
    const auto splitting = config.splitting == 2 ? Splitting::second_order : Splitting::fourth_order;

    auto states = initial_states(config.n, static_cast<int>(chains.size()), pulse.metadata.initial_tilt,
                                 pulse.metadata.seed, config.truncation());
    Recorder rec(config.n, static_cast<int>(chains.size()));
    RunResult result;
    result.pulse = pulse;
    const auto frames = static_cast<long long>(pulse.frames.size());
    for (long long k = 0; k <= frames; ++k) {
        const Real t = static_cast<Real>(k) * delta;
        const auto passed = std::count_if(pulse.switch_times.begin(), pulse.switch_times.end(),
                                          [&](Real s) { return s < t; });
        const int j = std::min(config.n - 1, 1 + static_cast<int>(passed));
        rec.observe(t, target_for(meta, j), states, snapshots(states), result.rows);
        if (hook)
            hook(static_cast<int>(k), states);
        if (k == frames)
            break;
        const auto& frame = pulse.frames[static_cast<std::size_t>(k)];
        parallel_for(static_cast<int>(states.size()), [&](int m) {
            const auto i = static_cast<std::size_t>(m);
            advance(states[i], chains[i], frame, delta, splitting, config.substeps);
        });
    }
    result.completed = true;
    rec.finish(result, states);
    return result;
}

void write_header(std::ostream& out, const RunConfig& config, const std::string& kind)
{
    out << "# spinctl " << kind << "\n";
    for (const auto& [k, v] : config.entries())
        out << "# " << k << " = " << v << "\n";
}

void write_trajectory(const std::filesystem::path& path, const RunConfig& config, const RunResult& result)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    write_header(out, config, "trajectory");
    out << "t,current_target_j,tau";
    for (int j = 2; j <= config.n; ++j)
        out << ",c_1_" << j;
    out << ",cumulative_discarded_weight\n";
    const auto& rows = result.rows;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i % static_cast<std::size_t>(config.stride) != 0 && i + 1 != rows.size())
            continue;
        const auto& r = rows[i];
        out << format(r.t) << ',' << (r.target + 1) << ',' << format(r.tau);
        for (Real c : r.concurrence)
            out << ',' << format(c);
        out << ',' << format(r.discarded) << '\n';
    }
}

void write_pulse(const std::filesystem::path& path, const RunConfig& config, const PulseSchedule& pulse)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    RunConfig resolved = config;
    resolved.n = pulse.n;
    resolved.beta = pulse.metadata.beta;
    resolved.delta = pulse.metadata.delta;
    resolved.mu = pulse.metadata.mu;
    resolved.alpha = pulse.metadata.alpha;
    resolved.mask = pulse.metadata.mask_policy;
    resolved.seed = pulse.metadata.seed;
    resolved.initial_tilt = pulse.metadata.initial_tilt;
    write_header(out, resolved, "pulse");
    out << "# switch_times = " << join(pulse.switch_times) << "\n";
    out << "# frames = " << pulse.frames.size() << "\n";
    out << "interval_index,t_start,site,g_x,g_y\n";
    for (std::size_t k = 0; k < pulse.frames.size(); ++k) {
        const auto& f = pulse.frames[k].fields;
        const Real t = static_cast<Real>(k) * pulse.metadata.delta;
        for (Eigen::Index s = 0; s < f.rows(); ++s)
            if (f(s, 0) != 0.0 || f(s, 1) != 0.0)
                out << k << ',' << format(t) << ',' << (s + 1) << ',' << format(f(s, 0)) << ',' << format(f(s, 1))
                    << '\n';
    }
}

PulseSchedule read_pulse(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open pulse " + path.string());
    PulseSchedule p;
    long long frames = -1;
    std::string line;
    bool header_row = false;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                continue;
            const std::string key = trim(line.substr(1, eq - 1));
            const std::string v = trim(line.substr(eq + 1));
            if (key == "n") p.n = static_cast<int>(parse_int(key, v));
            else if (key == "beta") p.metadata.beta = parse_real(key, v);
            else if (key == "delta") p.metadata.delta = parse_real(key, v);
            else if (key == "mu") p.metadata.mu = parse_real(key, v);
            else if (key == "alpha") p.metadata.alpha = parse_real(key, v);
            else if (key == "mask") p.metadata.mask_policy = v;
            else if (key == "seed") p.metadata.seed = static_cast<std::uint64_t>(parse_int(key, v));
            else if (key == "initial_tilt") p.metadata.initial_tilt = parse_real(key, v);
            else if (key == "switch_times") p.switch_times = parse_list(key, v);
            else if (key == "frames") frames = parse_int(key, v);
            continue;
        }
        if (!header_row) {
            header_row = true;
            if (trim(line) != "interval_index,t_start,site,g_x,g_y")
                throw std::invalid_argument("unexpected pulse column header: " + line);
            if (p.n < 2 || frames < 0)
                throw std::invalid_argument("pulse header lacks n or frames");
            p.frames.assign(static_cast<std::size_t>(frames), ControlFrame::zero(p.n, p.metadata.delta));
            continue;
        }
        std::stringstream ss(line);
        std::string cell[5];
        for (auto& c : cell)
            if (!std::getline(ss, c, ','))
                throw std::invalid_argument("short pulse row: " + line);
        const long long k = parse_int("interval_index", trim(cell[0]));
        const long long site = parse_int("site", trim(cell[2]));
        if (k < 0 || k >= frames || site < 1 || site > p.n)
            throw std::out_of_range("pulse row outside schedule: " + line);
        auto& f = p.frames[static_cast<std::size_t>(k)].fields;
        f(site - 1, 0) = parse_real("g_x", trim(cell[3]));
        f(site - 1, 1) = parse_real("g_y", trim(cell[4]));
    }
    if (!header_row)
        throw std::invalid_argument("pulse file has no data header");
    p.validate();
    return p;
}

Thresholds check_thresholds(const RunConfig& config, const RunResult& result)
{
    Thresholds v;
    if (!result.completed)
        v.failures.push_back("time cap of " + format(config.time_cap()) + " reached before the last target saturated");
    const auto& last = result.peaks.back();
    if (last.value < config.min_peak)
        v.failures.push_back("peak c_1_" + std::to_string(config.n) + " = " + format(last.value) + " below " +
                             format(config.min_peak));
    if (config.max_time > 0.0 && last.time > config.max_time)
        v.failures.push_back("peak time " + format(last.time) + " exceeds " + format(config.max_time));
    v.passed = v.failures.empty();
    return v;
}

std::string summary_json(const RunConfig& config, const RunResult& result, const Thresholds& verdict,
                         const std::map<std::string, double>& extra)
{
    nlohmann::ordered_json doc;
    nlohmann::ordered_json cfg;
    for (const auto& [k, v] : config.entries())
        cfg[k] = v;
    doc["config"] = cfg;
    auto peaks = nlohmann::ordered_json::array();
    for (std::size_t j = 0; j < result.peaks.size(); ++j)
        peaks.push_back({{"j", j + 2}, {"peak", result.peaks[j].value}, {"time", result.peaks[j].time}});
    doc["peaks"] = peaks;
    doc["switch_times"] = result.pulse.switch_times;
    doc["duration"] = result.rows.empty() ? 0.0 : result.rows.back().t;
    doc["intervals"] = result.pulse.frames.size();
    doc["members"] = result.member_peaks.size();
    doc["mean_member_final_peak"] = result.mean_member_final_peak();
    auto members = nlohmann::ordered_json::array();
    for (const auto& m : result.member_peaks)
        members.push_back(m.back().value);
    doc["member_final_peaks"] = members;
    doc["discarded_weight"] = result.discarded;
    doc["max_norm_drift"] = result.max_norm_drift;
    doc["completed"] = result.completed;
    for (const auto& [k, v] : extra)
        doc[k] = v;
    doc["passed"] = verdict.passed;
    doc["failures"] = verdict.failures;
    return doc.dump(2) + "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << text;
}

}  // namespace spinctl
