// End-to-end acceptance runs. Prints one PASS/FAIL line per criterion; exit status 1 if any fail.
#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "helpers.hpp"
#include "spinctl/controller.hpp"
#include "spinctl/entanglement.hpp"
#include "spinctl/experiment.hpp"
#include "spinctl/oracle.hpp"
#include "spinctl/verify.hpp"

using namespace spinctl;
using namespace spinctl::testing;

namespace {

std::string out_dir;
std::FILE* log_file = nullptr;
int failures = 0;

template <typename... Args>
std::string format(const char* fmt, Args... args)
{
    char buf[1024];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

// Console line, mirrored to acceptance.txt under --out (ctest hides output of passing tests).
void emit(const std::string& line)
{
    for (std::FILE* f : {stdout, log_file})
        if (f) {
            std::fprintf(f, "%s\n", line.c_str());
            std::fflush(f);
        }
}

void report(const std::string& id, bool pass, const std::string& detail, double seconds)
{
    if (!pass)
        ++failures;
    emit(format("criterion %s: %s  %s  [%.0f s]", id.c_str(), pass ? "PASS" : "FAIL", detail.c_str(), seconds));
}

class Timer
{
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

RunConfig base(int n)
{
    RunConfig c;
    c.n = n;
    return c;
}

void save(const std::string& name, const RunConfig& config, const RunResult& result)
{
    if (out_dir.empty())
        return;
    std::string safe = name;
    std::replace_if(safe.begin(), safe.end(), [](char ch) { return !std::isalnum(static_cast<unsigned char>(ch)); }, '_');
    const std::filesystem::path dir = std::filesystem::path(out_dir) / safe;
    std::filesystem::create_directories(dir);
    write_trajectory(dir / "trajectory.csv", config, result);
    write_pulse(dir / "pulse.csv", config, result.pulse);
    write_text(dir / "summary.json", summary_json(config, result, check_thresholds(config, result)));
}

bool peaks_in_order(const RunResult& r)
{
    for (std::size_t j = 1; j < r.peaks.size(); ++j)
        if (!(r.peaks[j].time > r.peaks[j - 1].time))
            return false;
    return true;
}

void single_chain(const std::string& id, RunConfig config, Real min_peak, Real max_time)
{
    Timer timer;
    const auto r = run_control(config, make_ensemble(config, "train", 1));
    save("criterion" + id, config, r);
    const Peak p = r.peaks.back();
    const bool pass = p.value >= min_peak && (max_time <= 0.0 || p.time <= max_time);
    report(id, pass,
           format("N=%d %s: peak c_1N = %.6f at t = %.3f/J (need >= %.2f%s), switches %zu, discarded %.2e",
                  config.n, config.mask.c_str(), p.value, p.time, min_peak,
                  max_time > 0.0 ? format(" within %.0f/J", max_time).c_str() : "", r.pulse.switch_times.size(),
                  r.discarded),
           timer.seconds());
}

void disordered(const std::string& id, Real lo, Real hi, Real min_mean, bool with_test)
{
    Timer timer;
    RunConfig config = base(10);
    config.disorder_lo = lo;
    config.disorder_hi = hi;
    config.count = 50;
    const auto train = run_control(config, make_ensemble(config, "train", config.count));
    save("criterion" + id + "_train", config, train);
    const Real mean = train.final_peak();
    bool pass = mean >= min_mean;
    std::string detail = format("[%.1f, %.1f] x 50: train mean peak %.4f (need >= %.2f), member mean %.4f", lo, hi,
                                mean, min_mean, train.mean_member_final_peak());
    if (with_test) {
        const auto test = run_replay(config, train.pulse, make_ensemble(config, "test", config.count));
        save("criterion" + id + "_test", config, test);
        const Real gap = std::abs(test.final_peak() - mean);
        pass = pass && gap <= 0.02;
        detail += format(", test mean peak %.4f, gap %.4f (need <= 0.02)", test.final_peak(), gap);
    }
    report(id, pass, detail, timer.seconds());
}

void oracle_equivalence()
{
    Timer timer;
    // Production step size for the fidelity bound; eight substeps push the integrator error
    // below the 1e-9 RDM bound against the independently evolved dense state.
    const auto coarse = oracle_crosscheck(base(8), 250, 1);
    const auto fine = oracle_crosscheck(base(8), 250, 8);
    const bool pass = coarse.min_fidelity >= 1.0 - 1e-8 && fine.min_fidelity >= 1.0 - 1e-8 &&
                      std::max(coarse.max_rdm_deviation, fine.max_rdm_deviation) < 1e-9 &&
                      fine.max_trajectory_rdm_deviation < 1e-9;
    report("6", pass,
           format("N=8, %d intervals: min fidelity 1 - %.2e (1 step per interval), 1 - %.2e (8 substeps), need "
                  "<= 1e-8; max 1/2/3-site rdm deviation %.2e vs dense partial traces, %.2e vs the dense "
                  "trajectory at 8 substeps (%.2e at 1), need < 1e-9",
                  fine.intervals, 1.0 - coarse.min_fidelity, 1.0 - fine.min_fidelity,
                  std::max(coarse.max_rdm_deviation, fine.max_rdm_deviation), fine.max_trajectory_rdm_deviation,
                  coarse.max_trajectory_rdm_deviation),
           timer.seconds());
}

void gradients()
{
    Timer timer;
    const auto g = gradient_suite(100, 1000, 1);
    const bool pass = g.states == 100 && g.min_cosine > 0.999 && g.worst_argmax_margin >= -1e-6;
    report("7", pass,
           format("%d states, min cosine %.9f (need > 0.999), |k - 1| <= %.1e, %d frames, worst argmax margin %.3g",
                  g.states, g.min_cosine, g.max_scale_error, g.argmax_frames, g.worst_argmax_margin),
           timer.seconds());
}

Matrix4c projector(const Eigen::Vector4cd& v) { return v * v.adjoint(); }

Matrix2c reduce(const Matrix4c& rho, int keep)
{
    Matrix2c out = Matrix2c::Zero();
    for (int s = 0; s < 2; ++s)
        for (int sp = 0; sp < 2; ++sp)
            for (int o = 0; o < 2; ++o)
                out(s, sp) += keep == 0 ? rho(2 * s + o, 2 * sp + o) : rho(2 * o + s, 2 * o + sp);
    return out;
}

void properties()
{
    Timer timer;
    Rng rng(derive_seed(1, "acceptance-properties"));
    std::vector<std::string> failed;
    auto check = [&](bool ok, const char* name) {
        if (!ok)
            failed.emplace_back(name);
    };

    // tau under local unitaries
    Real invariance = 0.0;
    for (int r = 0; r < 20; ++r) {
        auto p = random_pair(6, rng);
        const auto target = TargetSpec::uniform(6, 0, 1 + r % 5, r % 2 ? 0.2 : 0.0);
        auto rotated = p.mps;
        for (int k = 0; k < 6; ++k)
            rotated.apply_site_unitary(k, random_unitary<2>(rng));
        invariance = std::max(invariance, std::abs(tau(rotated, target) - tau(p.mps, target)));
    }
    check(invariance < 1e-10, "tau invariance");

    // tau'' affine in the fields; Richardson-extrapolated differences, since the O(dt^2) error
    // of a single second difference is not itself affine in the fields
    Real affinity = 0.0;
    for (int r = 0; r < 10; ++r) {
        auto p = random_pair(5, rng);
        const auto chain = ChainSpec::uniform(5);
        const auto target = TargetSpec::uniform(5, 0, 1 + r % 4, 0.2);
        const Real dt = 2e-4;
        auto curvature = [&](const ControlFrame& f) {
            return (4.0 * oracle::tau_curvature_fd(p.dense, chain, f, target, dt / 2) -
                    oracle::tau_curvature_fd(p.dense, chain, f, target, dt)) /
                   3.0;
        };
        const auto g1 = random_frame(5, rng, 10.0, dt);
        const auto g2 = random_frame(5, rng, 10.0, dt);
        ControlFrame both = g1;
        both.fields += g2.fields;
        const Real zero = curvature(ControlFrame::zero(5, dt));
        const Real lhs = curvature(both) - zero;
        const Real rhs = curvature(g1) + curvature(g2) - 2.0 * zero;
        affinity = std::max(affinity, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    check(affinity < 1e-5, "affinity");

    // concurrence reference values
    const Eigen::Vector4cd bell = (Eigen::Vector4cd() << 1.0, 0.0, 0.0, 1.0).finished() / std::sqrt(2.0);
    const Eigen::Vector4cd product = (Eigen::Vector4cd() << 1.0, 1.0, 1.0, 1.0).finished() / 2.0;
    const Matrix4c werner = 0.5 * projector(bell) + 0.125 * Matrix4c::Identity();
    const Real c_bell = concurrence(projector(bell));
    const Real c_product = concurrence(projector(product));
    const Real c_werner = concurrence(werner);
    check(std::abs(c_bell - 1.0) < 1e-12 && std::abs(c_product) < 1e-12 && std::abs(c_werner - 0.25) < 1e-12,
          "concurrence values");

    // pure-state identity
    Real identity = 0.0;
    for (int r = 0; r < 100; ++r) {
        Eigen::Vector4cd v;
        for (int k = 0; k < 4; ++k)
            v(k) = Complex(rng.normal(), rng.normal());
        const Matrix4c rho = projector(v / v.norm());
        const Real c = concurrence(rho);
        identity = std::max(identity, std::abs(purity_deficit(reduce(rho, 0)) + purity_deficit(reduce(rho, 1)) -
                                               2.0 * purity_deficit(rho) - c * c));
    }
    check(identity < 1e-10, "pure-state identity");

    // d S''(rho_12) / d g_1 == 0: exactly in the analytic block, to round-off in finite differences
    Real analytic_row = 0.0, fd_row = 0.0;
    for (int r = 0; r < 10; ++r) {
        auto p = random_pair(5, rng);
        const auto chain = ChainSpec::uniform(5);
        const auto g = pair_purity_curvature_gradient(p.mps, chain, 1);
        analytic_row = std::max({analytic_row, std::abs(g(0, 0)), std::abs(g(0, 1))});
        const auto fd = oracle::purity_gradient_fd(p.dense, chain, {0, 1});
        fd_row = std::max({fd_row, std::abs(fd(0, 0)), std::abs(fd(0, 1))});
    }
    check(analytic_row == 0.0 && fd_row < 1e-6, "pair site-1 derivative");

    // scheduler: N - 1 switches and peaks in increasing j order
    RunConfig config = base(6);
    const auto run = run_control(config, make_ensemble(config, "train", 1));
    const bool switches = run.completed && run.pulse.switch_times.size() == 5;
    check(switches, "N - 1 switches");
    check(peaks_in_order(run), "peak order");

    std::string detail = format("tau invariance %.1e, affinity %.1e, C(Bell/product/Werner) = %.6f/%.6f/%.6f, "
                                "pure identity %.1e, dS''(rho_12)/dg_1 analytic %.1e fd %.1e, N=6 switches %zu",
                                invariance, affinity, c_bell, c_product, c_werner, identity, analytic_row, fd_row,
                                run.pulse.switch_times.size());
    for (const auto& f : failed)
        detail += "; failed: " + f;
    report("8", failed.empty(), detail, timer.seconds());
}

void bond_dimension()
{
    Timer timer;
    const auto b = bond_convergence(base(10), 10, 20);
    report("9", b.replay.max_deviation < 5e-3,
           format("N=10 d_max 10 vs 20 on the d_max=20 pulse: max |dc_1j| = %.2e (need < 5e-3), peaks %.6f / %.6f; "
                  "independent closed-loop runs: max |dc_1j| = %.2e, peaks %.6f / %.6f",
                  b.replay.max_deviation, b.replay.peak_low, b.replay.peak_high, b.closed_loop.max_deviation,
                  b.closed_loop.peak_low, b.closed_loop.peak_high),
           timer.seconds());
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"spinctl acceptance runs"};
    std::vector<int> only;
    bool stretch = false;
    app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
    app.add_flag("--stretch", stretch, "also run the reduced-control N=40 stretch target");
    app.add_option("--out", out_dir, "directory for trajectories, pulses and summaries");
    CLI11_PARSE(app, argc, argv);

    const std::set<int> selected(only.begin(), only.end());
    auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        log_file = std::fopen((std::filesystem::path(out_dir) / "acceptance.txt").string().c_str(), "w");
    }
    emit(format("workers: %d", worker_count()));
    if (wanted(1)) {
        RunConfig c = base(10);
        Timer timer;
        const auto r = run_control(c, make_ensemble(c, "train", 1));
        save("criterion1", c, r);
        const Peak p = r.peaks.back();
        report("1", p.value >= 0.99 && p.time <= 20.0,
               format("N=10: peak c_1,10 = %.6f at t = %.3f/J (need >= 0.99 within 20/J), peaks in j order: %s",
                      p.value, p.time, peaks_in_order(r) ? "yes" : "no"),
               timer.seconds());
    }
    if (wanted(2))
        single_chain("2", base(20), 0.98, 0.0);
    if (wanted(3))
        disordered("3", 0.9, 1.1, 0.93, true);
    if (wanted(4))
        disordered("4", 0.8, 1.2, 0.80, false);
    if (wanted(5)) {
        // Two-body target (mu = 1/5) and switching on saturation only: with the 0.95 threshold the
        // spin next to spin 1 is released in an arbitrary orientation and dephases the pair.
        RunConfig c = base(20);
        c.mask = "reduced";
        c.mu = 0.2;
        c.tau_switch = 1.0;
        single_chain("5", c, 0.96, 0.0);
        if (stretch) {
            c.n = 40;
            single_chain("5 (N=40 stretch)", c, 0.97, 0.0);
        }
    }
    if (wanted(6))
        oracle_equivalence();
    if (wanted(7))
        gradients();
    if (wanted(8))
        properties();
    if (wanted(9))
        bond_dimension();
    emit(format("%s: %d failing", failures ? "FAIL" : "PASS", failures));
    if (log_file)
        std::fclose(log_file);
    return failures ? 1 : 0;
}
