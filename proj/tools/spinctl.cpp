// Command-line front end: run, train, apply, smooth, verify.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spinctl/experiment.hpp"
#include "spinctl/verify.hpp"

namespace fs = std::filesystem;
using namespace spinctl;

namespace {

constexpr int kThresholdFailure = 2;

struct Common
{
    std::string config_file;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* app, Common& c)
{
    app->add_option("-c,--config", c.config_file, "key = value configuration file")->check(CLI::ExistingFile);
    app->add_option("-s,--set", c.overrides, "override a configuration key (key=value), repeatable");
}

RunConfig resolve(const Common& c)
{
    RunConfig cfg;
    if (!c.config_file.empty())
        cfg.load(c.config_file);
    for (const auto& o : c.overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("override '" + o + "' is not key=value");
        cfg.set(o.substr(0, eq), o.substr(eq + 1));
    }
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    return cfg;
}

fs::path out(const RunConfig& cfg, const std::string& name) { return fs::path(cfg.out_dir) / name; }

void report(const std::string& what, const RunConfig& cfg, const RunResult& r, const Thresholds& v)
{
    std::printf("%s: peak c_1_%d = %.6f at t = %.3f (mean of member peaks %.6f), %zu intervals, %s\n", what.c_str(),
                cfg.n, r.peaks.back().value, r.peaks.back().time, r.mean_member_final_peak(), r.pulse.frames.size(),
                v.passed ? "pass" : "FAIL");
    for (const auto& f : v.failures)
        std::printf("  %s\n", f.c_str());
}

int cmd_run(const Common& c)
{
    RunConfig cfg = resolve(c);
    const auto r = run_control(cfg, make_ensemble(cfg, "train", 1));
    const auto v = check_thresholds(cfg, r);
    write_trajectory(out(cfg, "trajectory.csv"), cfg, r);
    write_pulse(out(cfg, "pulse.csv"), cfg, r.pulse);
    write_text(out(cfg, "summary.json"), summary_json(cfg, r, v));
    report("run", cfg, r, v);
    return v.passed ? 0 : kThresholdFailure;
}

int cmd_train(const Common& c)
{
    RunConfig cfg = resolve(c);
    const auto train = run_control(cfg, make_ensemble(cfg, "train", cfg.count));
    auto verdict = check_thresholds(cfg, train);
    write_trajectory(out(cfg, "train_trajectory.csv"), cfg, train);
    write_pulse(out(cfg, "pulse.csv"), cfg, train.pulse);
    write_text(out(cfg, "train_summary.json"), summary_json(cfg, train, verdict));
    report("train", cfg, train, verdict);
    if (cfg.test_count == 0)
        return verdict.passed ? 0 : kThresholdFailure;

    const auto test = run_replay(cfg, train.pulse, make_ensemble(cfg, "test", cfg.test_count));
    const auto tv = check_thresholds(cfg, test);
    const Real gap = test.final_peak() - train.final_peak();
    write_trajectory(out(cfg, "test_trajectory.csv"), cfg, test);
    write_text(out(cfg, "test_summary.json"),
               summary_json(cfg, test, tv, {{"train_final_peak", train.final_peak()}, {"test_minus_train", gap}}));
    report("test", cfg, test, tv);
    std::printf("test - train mean peak: %+.6f\n", gap);
    return verdict.passed && tv.passed ? 0 : kThresholdFailure;
}

int cmd_apply(const Common& c, const std::string& pulse_file, const std::string& label)
{
    RunConfig cfg = resolve(c);
    const auto pulse = read_pulse(pulse_file);
    cfg.n = pulse.n;
    const auto r = run_replay(cfg, pulse, make_ensemble(cfg, label, cfg.count));
    const auto v = check_thresholds(cfg, r);
    write_trajectory(out(cfg, "apply_trajectory.csv"), cfg, r);
    write_text(out(cfg, "apply_summary.json"), summary_json(cfg, r, v));
    report("apply", cfg, r, v);
    return v.passed ? 0 : kThresholdFailure;
}

int cmd_smooth(const Common& c, const std::string& pulse_file, Real max_loss)
{
    RunConfig cfg = resolve(c);
    const auto pulse = read_pulse(pulse_file);
    cfg.n = pulse.n;
    const auto smoothed = smooth_pulse(pulse, cfg.smooth_window);
    write_pulse(out(cfg, "pulse_smoothed.csv"), cfg, smoothed);
    const auto chains = make_ensemble(cfg, "train", cfg.count);
    const auto raw = run_replay(cfg, pulse, chains);
    const auto r = run_replay(cfg, smoothed, chains);
    auto v = check_thresholds(cfg, r);
    const Real loss = raw.final_peak() - r.final_peak();
    if (loss >= max_loss) {
        v.passed = false;
        v.failures.push_back("smoothing lowered the final peak by " + std::to_string(loss));
    }
    write_trajectory(out(cfg, "smoothed_trajectory.csv"), cfg, r);
    write_text(out(cfg, "smooth_summary.json"),
               summary_json(cfg, r, v, {{"unsmoothed_final_peak", raw.final_peak()}, {"peak_loss", loss}}));
    report("smoothed", cfg, r, v);
    std::printf("unsmoothed peak %.6f, loss %.6f\n", raw.final_peak(), loss);
    return v.passed ? 0 : kThresholdFailure;
}

int cmd_verify(const Common& c, int low, int high, int states, int frames, int substeps)
{
    RunConfig cfg = resolve(c);
    std::map<std::string, double> fields;
    bool ok = true;
    if (cfg.n <= 10) {
        const auto o = oracle_crosscheck(cfg, 250, substeps);
        fields["oracle_intervals"] = o.intervals;
        fields["oracle_min_fidelity"] = o.min_fidelity;
        fields["oracle_max_rdm_deviation"] = o.max_rdm_deviation;
        fields["oracle_max_trajectory_rdm_deviation"] = o.max_trajectory_rdm_deviation;
        const bool pass = o.min_fidelity >= 1.0 - 1e-8 && o.max_rdm_deviation < 1e-9 &&
                          o.max_trajectory_rdm_deviation < 1e-9;
        ok = ok && pass;
        std::printf("oracle: %d intervals, min fidelity 1 - %.3g, max rdm deviation %.3g "
                    "(%.3g against the dense trajectory): %s\n",
                    o.intervals, 1.0 - o.min_fidelity, o.max_rdm_deviation, o.max_trajectory_rdm_deviation,
                    pass ? "pass" : "FAIL");
    }
    if (low > 0 && high > 0) {
        const auto b = bond_convergence(cfg, low, high);
        fields["bond_max_deviation"] = b.replay.max_deviation;
        fields["bond_peak_low"] = b.replay.peak_low;
        fields["bond_peak_high"] = b.replay.peak_high;
        fields["bond_closed_loop_max_deviation"] = b.closed_loop.max_deviation;
        fields["bond_closed_loop_peak_low"] = b.closed_loop.peak_low;
        fields["bond_closed_loop_peak_high"] = b.closed_loop.peak_high;
        const bool pass = b.replay.max_deviation < 5e-3;
        ok = ok && pass;
        std::printf("bond dimension %d vs %d: max |dc| = %.3g on a common pulse: %s\n", low, high,
                    b.replay.max_deviation, pass ? "pass" : "FAIL");
        std::printf("  closed loop: max |dc| = %.3g, final peaks %.6f / %.6f\n", b.closed_loop.max_deviation,
                    b.closed_loop.peak_low, b.closed_loop.peak_high);
    }
    if (states > 0) {
        const auto g = gradient_suite(states, frames, cfg.seed, cfg.beta);
        fields["gradient_states"] = g.states;
        fields["gradient_min_cosine"] = g.min_cosine;
        fields["gradient_max_scale_error"] = g.max_scale_error;
        fields["argmax_worst_margin"] = g.worst_argmax_margin;
        const bool pass = g.min_cosine > 0.999 && g.worst_argmax_margin >= -1e-6;
        ok = ok && pass;
        std::printf("gradients: %d states, min cosine %.9f, worst argmax margin %.3g: %s\n", g.states, g.min_cosine,
                    g.worst_argmax_margin, pass ? "pass" : "FAIL");
    }
    nlohmann::ordered_json doc;
    for (const auto& [k, v] : cfg.entries())
        doc["config"][k] = v;
    for (const auto& [k, v] : fields)
        doc[k] = v;
    doc["passed"] = ok;
    write_text(out(cfg, "verify.json"), doc.dump(2) + "\n");
    return ok ? 0 : kThresholdFailure;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Curvature-based entanglement control of Ising spin chains"};
    app.require_subcommand(1);

    Common run_c, train_c, apply_c, smooth_c, verify_c;
    auto* run = app.add_subcommand("run", "closed-loop control of a single chain");
    add_common(run, run_c);

    auto* train = app.add_subcommand("train", "ensemble-averaged control; optional replay on a test ensemble");
    add_common(train, train_c);

    std::string apply_pulse, apply_label = "test";
    auto* apply = app.add_subcommand("apply", "replay a pulse file open-loop on an ensemble");
    add_common(apply, apply_c);
    apply->add_option("-p,--pulse", apply_pulse, "pulse CSV")->required()->check(CLI::ExistingFile);
    apply->add_option("--ensemble", apply_label, "sub-seed label of the ensemble (train or test)");

    std::string smooth_pulse_file;
    Real max_loss = 0.02;
    auto* smooth = app.add_subcommand("smooth", "moving-average a pulse and compare both on the configured chain");
    add_common(smooth, smooth_c);
    smooth->add_option("-p,--pulse", smooth_pulse_file, "pulse CSV")->required()->check(CLI::ExistingFile);
    smooth->add_option("--max-loss", max_loss, "allowed drop of the final peak");

    int low = 0, high = 0, states = 100, frames = 1000, oracle_substeps = 8;
    auto* verify = app.add_subcommand("verify", "oracle cross-check, bond-dimension study, gradient suite");
    add_common(verify, verify_c);
    verify->add_option("--bond-low", low, "bond dimension of the coarse run (0 skips the study)");
    verify->add_option("--bond-high", high, "bond dimension of the fine run");
    verify->add_option("--gradient-states", states, "random states for the gradient suite (0 skips)");
    verify->add_option("--argmax-frames", frames, "random frames per state for the argmax check");
    verify->add_option("--oracle-substeps", oracle_substeps, "integrator steps per interval in the oracle replay");

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed())
            return cmd_run(run_c);
        if (train->parsed())
            return cmd_train(train_c);
        if (apply->parsed())
            return cmd_apply(apply_c, apply_pulse, apply_label);
        if (smooth->parsed())
            return cmd_smooth(smooth_c, smooth_pulse_file, max_loss);
        if (verify->parsed())
            return cmd_verify(verify_c, low, high, states, frames, oracle_substeps);
    } catch (const std::exception& e) {
        std::cerr << "spinctl: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
