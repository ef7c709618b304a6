#include "spinctl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/QR>

namespace spinctl {

namespace {

Matrix4c random_unitary4(Rng& rng)
{
    Matrix4c m;
    for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 4; ++k)
            m(i, k) = Complex(rng.normal(), rng.normal());
    Eigen::HouseholderQR<Matrix4c> qr(m);
    return qr.householderQ() * Matrix4c::Identity();
}

Real rdm_deviation(const MpsState& mps, const oracle::DenseState& dense)
{
    const int n = mps.size();
    Real worst = 0.0;
    auto cmp = [&](std::vector<int> sites) {
        const MatrixXc a = rdm(mps, sites).matrix;
        worst = std::max(worst, (a - oracle::partial_trace(dense, sites)).cwiseAbs().maxCoeff());
    };
    for (int a = 0; a < n; ++a) {
        cmp({a});
        for (int b = a + 1; b < n; ++b) {
            cmp({a, b});
            for (int c = b + 1; c < n; ++c)
                cmp({a, b, c});
        }
    }
    return worst;
}

}  // namespace

StatePair random_state_pair(int n, Rng& rng, int layers, int d_max)
{
    std::vector<Vector2c> locals;
    for (int k = 0; k < n; ++k) {
        Vector2c v(Complex(rng.normal(), rng.normal()), Complex(rng.normal(), rng.normal()));
        locals.push_back(v / v.norm());
    }
    StatePair p{MpsState::from_product_state(locals, d_max), oracle::DenseState::product(locals)};
    for (int l = 0; l < layers; ++l)
        for (int b = l % 2; b + 1 < n; b += 2) {
            const Matrix4c u = random_unitary4(rng);
            p.mps.apply_two_site_gate(b, u);
            oracle::apply_two_site_unitary(p.dense, b, u);
        }
    return p;
}

OracleReport oracle_crosscheck(RunConfig config, int rdm_every, int substeps)
{
    if (config.n > 10)
        throw std::invalid_argument("oracle cross-check is limited to n <= 10");
    // Exact bond dimension and no weight floor: nothing is ever truncated.
    config.d_max = 1 << (config.n / 2);
    config.trunc_floor = 0.0;
    config.couplings.clear();
    config.disorder_lo = config.disorder_hi = 1.0;
    const auto chains = make_ensemble(config, "train", 1);
    const auto run = run_control(config, chains);

    OracleReport report;
    oracle::DenseState dense =
        oracle::DenseState::product(initial_locals(config.n, run.pulse.metadata.initial_tilt, run.pulse.metadata.seed));
    const int last = static_cast<int>(run.pulse.frames.size());
    config.substeps = substeps;
    run_replay(config, run.pulse, chains, [&](int k, const std::vector<MpsState>& states) {
        if (k > 0)
            dense = oracle::dense_step(dense, chains[0], run.pulse.frames[static_cast<std::size_t>(k - 1)],
                                       run.pulse.metadata.delta);
        report.intervals = k;
        report.min_fidelity = std::min(report.min_fidelity, oracle::fidelity(states[0].to_dense(), dense.amplitudes));
        if (k % rdm_every == 0 || k == last) {
            const auto own = oracle::DenseState::from_vector(config.n, states[0].to_dense());
            report.max_rdm_deviation = std::max(report.max_rdm_deviation, rdm_deviation(states[0], own));
            report.max_trajectory_rdm_deviation =
                std::max(report.max_trajectory_rdm_deviation, rdm_deviation(states[0], dense));
            ++report.rdm_rows;
        }
    });
    return report;
}

ConvergenceReport compare_runs(const RunResult& low, const RunResult& high)
{
    ConvergenceReport r;
    r.rows_low = low.rows.size();
    r.rows_high = high.rows.size();
    const std::size_t rows = std::min(r.rows_low, r.rows_high);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < low.rows[i].concurrence.size(); ++j)
            r.max_deviation =
                std::max(r.max_deviation, std::abs(low.rows[i].concurrence[j] - high.rows[i].concurrence[j]));
    r.peak_low = low.final_peak();
    r.peak_high = high.final_peak();
    return r;
}

BondStudy bond_convergence(RunConfig config, int low, int high)
{
    const auto chains = make_ensemble(config, "train", config.count);
    config.d_max = high;
    const auto fine = run_control(config, chains);
    const auto fine_replay = run_replay(config, fine.pulse, chains);
    config.d_max = low;
    const auto coarse = run_control(config, chains);
    const auto coarse_replay = run_replay(config, fine.pulse, chains);
    return {compare_runs(coarse_replay, fine_replay), compare_runs(coarse, fine)};
}

GradientReport gradient_suite(int states, int frames, std::uint64_t seed, Real beta)
{
    GradientReport report;
    Rng rng(derive_seed(seed, "gradient-suite"));
    for (int s = 0; s < states; ++s) {
        const int n = 5 + s % 2;
        auto p = random_state_pair(n, rng);
        std::vector<Real> j(static_cast<std::size_t>(n - 1));
        for (auto& v : j)
            v = rng.uniform(0.8, 1.2);
        const ChainSpec chain(n, j);
        const int partner = 1 + static_cast<int>(rng.uniform() * (n - 1));
        const auto target = TargetSpec::uniform(n, 0, partner, s % 2 ? 0.2 : 0.0);
        const auto analytic = assemble_gradient(p.mps, chain, target, full_mask(n));
        const auto fd = oracle::gradient_fd(p.dense, chain, target);
        const Real k = (analytic.array() * fd.array()).sum() / analytic.squaredNorm();
        report.min_cosine = std::min(report.min_cosine, oracle::cosine_similarity(analytic, fd));
        report.max_scale_error = std::max(report.max_scale_error, std::abs(k - 1.0));

        const auto best = optimal_fields(analytic, beta);
        const Real top = oracle::tau_curvature_fd(p.dense, chain, best, target);
        for (int f = 0; f < frames; ++f) {
            ControlFrame frame = ControlFrame::zero(n, best.duration);
            for (int site = 0; site < n; ++site) {
                const Real phi = 2.0 * std::numbers::pi * rng.uniform();
                frame.fields(site, 0) = beta * std::cos(phi);
                frame.fields(site, 1) = beta * std::sin(phi);
            }
            report.worst_argmax_margin =
                std::min(report.worst_argmax_margin, top - oracle::tau_curvature_fd(p.dense, chain, frame, target));
            ++report.argmax_frames;
        }
        ++report.states;
    }
    return report;
}

}  // namespace spinctl
