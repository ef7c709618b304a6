#include "spinctl/controller.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>

namespace spinctl {

namespace {

constexpr int kZ = 3;

const std::array<Matrix4c, 16>& pauli_strings2()
{
    static const auto table = [] {
        std::array<Matrix4c, 16> t;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                t[static_cast<std::size_t>(4 * a + b)] = kron(pauli_matrix(a), pauli_matrix(b));
        return t;
    }();
    return table;
}

const std::array<MatrixXc, 64>& pauli_strings3()
{
    static const auto table = [] {
        std::array<MatrixXc, 64> t;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int c = 0; c < 4; ++c)
                    t[static_cast<std::size_t>(16 * a + 4 * b + c)] =
                        kron(kron(pauli_matrix(a), pauli_matrix(b)), pauli_matrix(c));
        return t;
    }();
    return table;
}

template <typename A, typename B>
Real trace_product(const A& rho, const B& op)
{
    Complex acc = 0.0;
    for (Eigen::Index i = 0; i < rho.rows(); ++i)
        for (Eigen::Index k = 0; k < rho.cols(); ++k)
            acc += rho(i, k) * op(k, i);
    return acc.real();
}

bool in_mask(const SiteMask& mask, int site)
{
    return std::find(mask.begin(), mask.end(), site) != mask.end();
}

/// Adds weight * dS''(rho_site)/dg into grad.
void accumulate_site_gradient(const LocalExpectations& ex, const ChainSpec& chain, int i, Real weight,
                              FieldGradient& grad)
{
    const int n = chain.size();
    if (i < 0 || i >= n)
        throw std::out_of_range("site outside chain");
    // The printed blocks equal -1/4 of dS''(rho_i)/dg.
    const Real f = -4.0 * weight;
    const Real j_left = chain.bond(i - 1);
    const Real j_right = chain.bond(i);
    const auto& r = ex.site[static_cast<std::size_t>(i)];
    for (int th = 1; th <= 2; ++th) {
        const int ph = 3 - th;
        Real own = 0.0;
        if (i > 0)
            own += j_left * (r[th] * ex.neighbours(i - 1, kZ, i, kZ) - r[kZ] * ex.neighbours(i - 1, kZ, i, th));
        if (i + 1 < n)
            own += j_right * (r[th] * ex.neighbours(i, kZ, i + 1, kZ) - r[kZ] * ex.neighbours(i, th, i + 1, kZ));
        grad(i, th - 1) += f * own;
        if (i + 1 < n)
            grad(i + 1, th - 1) +=
                f * j_right * (r[ph] * ex.neighbours(i, th, i + 1, ph) - r[th] * ex.neighbours(i, ph, i + 1, ph));
        if (i > 0)
            grad(i - 1, th - 1) +=
                f * j_left * (r[ph] * ex.neighbours(i - 1, ph, i, th) - r[th] * ex.neighbours(i - 1, ph, i, ph));
    }
}

void accumulate_pair_gradient(const PairExpectations& ex, const ChainSpec& chain, const GradientOptions& options,
                              Real weight, FieldGradient& grad)
{
    const int n = chain.size();
    const int j = ex.j;
    if (j < 1 || j >= n)
        throw std::out_of_range("pair partner outside chain");
    // The printed pair blocks equal -1/2 of dS''(rho_{0j})/dg.
    const Real f = -2.0 * weight;
    const auto& p = ex.pair;

    if (j == 1) {
        if (!ex.with_1)
            return;  // two-spin chain: rho_{01} is the full state
        const auto& t = *ex.with_1;
        const Real coupling = chain.bond(1);
        for (int th = 1; th <= 2; ++th) {
            const int ph = 3 - th;
            Real g1 = 0.0;
            Real g2 = 0.0;
            for (int d = 0; d < 4; ++d) {
                g1 += p[d][th] * t[d][kZ][kZ] - p[d][kZ] * t[d][th][kZ];
                g2 += p[d][ph] * t[d][th][ph] - p[d][th] * t[d][ph][ph];
            }
            grad(1, th - 1) += f * coupling * g1;
            grad(2, th - 1) += f * coupling * g2;
        }
        return;
    }

    const auto& a = *ex.with_1;
    const auto& b = *ex.with_jm1;
    const Real j01 = chain.bond(0);
    const Real jl = chain.bond(j - 1);
    const Real jr = chain.bond(j);
    for (int th = 1; th <= 2; ++th) {
        const int ph = 3 - th;
        Real g0 = 0.0;
        Real g1 = 0.0;
        Real gl = 0.0;
        Real gj = 0.0;
        Real gr = 0.0;
        for (int d = 0; d < 4; ++d) {
            g0 += p[th][d] * a[kZ][kZ][d];
            if (options.site1_delta_term)
                g0 -= p[kZ][d] * a[th][kZ][d];
            g1 += p[ph][d] * a[th][ph][d] - p[th][d] * a[ph][ph][d];
            gl += p[d][ph] * b[d][ph][th] - p[d][th] * b[d][ph][ph];
            gj += jl * (p[d][th] * b[d][kZ][kZ] - p[d][kZ] * b[d][kZ][th]);
            if (ex.with_jp1) {
                const auto& c = *ex.with_jp1;
                gj += jr * (p[d][th] * c[d][kZ][kZ] - p[d][kZ] * c[d][th][kZ]);
                gr += p[d][ph] * c[d][th][ph] - p[d][th] * c[d][ph][ph];
            }
        }
        grad(0, th - 1) += f * j01 * g0;
        grad(1, th - 1) += f * j01 * g1;
        grad(j - 1, th - 1) += f * jl * gl;
        grad(j, th - 1) += f * gj;
        if (j + 1 < n)
            grad(j + 1, th - 1) += f * jr * gr;
    }
}

}  // namespace

SiteMask full_mask(int n)
{
    SiteMask m(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        m[static_cast<std::size_t>(k)] = k;
    return m;
}

SiteMask reduced_mask(int j, int n)
{
    if (j < 1 || j >= n)
        throw std::out_of_range("target partner outside chain");
    SiteMask m{0};
    for (int k = std::max(1, j - 2); k <= std::min(n - 1, j + 2); ++k)
        m.push_back(k);
    return m;
}

LocalExpectations LocalExpectations::from(const LocalRdms& rdms)
{
    LocalExpectations ex;
    ex.site.resize(rdms.site.size());
    for (std::size_t k = 0; k < rdms.site.size(); ++k)
        for (int a = 0; a < 4; ++a)
            ex.site[k][static_cast<std::size_t>(a)] = trace_product(rdms.site[k], pauli_matrix(a));
    ex.bond.resize(rdms.bond.size());
    for (std::size_t k = 0; k < rdms.bond.size(); ++k)
        ex.bond[k] = pauli_table(rdms.bond[k]);
    return ex;
}

Real LocalExpectations::neighbours(int p, int a, int q, int b) const
{
    if (q == p + 1)
        return bond[static_cast<std::size_t>(p)][static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
    if (p == q + 1)
        return bond[static_cast<std::size_t>(q)][static_cast<std::size_t>(b)][static_cast<std::size_t>(a)];
    throw std::invalid_argument("sites are not neighbours");
}

PauliSquare pauli_table(const Matrix4c& rho)
{
    PauliSquare t{};
    const auto& ops = pauli_strings2();
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            t[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
                trace_product(rho, ops[static_cast<std::size_t>(4 * a + b)]);
    return t;
}

PauliCube pauli_table3(const MatrixXc& rho8)
{
    if (rho8.rows() != 8 || rho8.cols() != 8)
        throw std::invalid_argument("three-site table needs an 8x8 density matrix");
    PauliCube t{};
    const auto& ops = pauli_strings3();
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c)
                t[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)][static_cast<std::size_t>(c)] =
                    trace_product(rho8, ops[static_cast<std::size_t>(16 * a + 4 * b + c)]);
    return t;
}

PairExpectations PairExpectations::from(const MpsState& state, int j)
{
    const int n = state.size();
    if (j < 1 || j >= n)
        throw std::out_of_range("pair partner outside chain");
    PairExpectations ex;
    ex.j = j;
    ex.pair = pauli_table(Matrix4c(rdm(state, {0, j}).matrix));
    if (j == 1) {
        if (n > 2)
            ex.with_1 = pauli_table3(rdm(state, {0, 1, 2}).matrix);
        return ex;
    }
    ex.with_1 = pauli_table3(rdm(state, {0, 1, j}).matrix);
    ex.with_jm1 = j == 2 ? ex.with_1 : pauli_table3(rdm(state, {0, j - 1, j}).matrix);
    if (j + 1 < n)
        ex.with_jp1 = pauli_table3(rdm(state, {0, j, j + 1}).matrix);
    return ex;
}

FieldGradient site_purity_curvature_gradient(const LocalExpectations& ex, const ChainSpec& chain, int site)
{
    FieldGradient g = FieldGradient::Zero(chain.size(), 2);
    accumulate_site_gradient(ex, chain, site, 1.0, g);
    return g;
}

FieldGradient site_purity_curvature_gradient(const MpsState& state, const ChainSpec& chain, int site)
{
    return site_purity_curvature_gradient(LocalExpectations::from(local_rdms(state)), chain, site);
}

FieldGradient pair_purity_curvature_gradient(const PairExpectations& ex, const ChainSpec& chain,
                                             const GradientOptions& options)
{
    FieldGradient g = FieldGradient::Zero(chain.size(), 2);
    accumulate_pair_gradient(ex, chain, options, 1.0, g);
    return g;
}

FieldGradient pair_purity_curvature_gradient(const MpsState& state, const ChainSpec& chain, int j,
                                             const GradientOptions& options)
{
    return pair_purity_curvature_gradient(PairExpectations::from(state, j), chain, options);
}

FieldGradient assemble_gradient(const LocalExpectations& ex, const std::optional<PairExpectations>& pair,
                                const ChainSpec& chain, const TargetSpec& target, const SiteMask& mask,
                                const GradientOptions& options)
{
    const int n = chain.size();
    target.validate(n);
    FieldGradient g = FieldGradient::Zero(n, 2);
    accumulate_site_gradient(ex, chain, target.a, 1.0, g);
    accumulate_site_gradient(ex, chain, target.b, 1.0, g);
    if (target.mu != 0.0) {
        if (target.a != 0)
            throw std::invalid_argument("pair term is defined for targets anchored at site 0");
        if (!pair || pair->j != target.b)
            throw std::invalid_argument("pair expectations missing for mu != 0");
        accumulate_pair_gradient(*pair, chain, options, -target.mu, g);
    }
    for (int k = 0; k < n; ++k) {
        const Real w = target.penalty(k);
        if (w != 0.0)
            accumulate_site_gradient(ex, chain, k, -w, g);
    }
    for (int k = 0; k < n; ++k)
        if (!in_mask(mask, k))
            g.row(k).setZero();
    return g;
}

FieldGradient assemble_gradient(const MpsState& state, const ChainSpec& chain, const TargetSpec& target,
                                const SiteMask& mask, const GradientOptions& options)
{
    std::optional<PairExpectations> pair;
    if (target.mu != 0.0)
        pair = PairExpectations::from(state, target.b);
    return assemble_gradient(LocalExpectations::from(local_rdms(state)), pair, chain, target, mask, options);
}

ControlFrame optimal_fields(const FieldGradient& grad, Real beta, Real duration, Real eps_grad)
{
    if (!(beta > 0.0))
        throw std::invalid_argument("field amplitude beta must be positive");
    ControlFrame frame = ControlFrame::zero(static_cast<int>(grad.rows()), duration);
    for (Eigen::Index k = 0; k < grad.rows(); ++k) {
        const Real norm = std::hypot(grad(k, 0), grad(k, 1));
        if (norm > eps_grad)
            frame.fields.row(k) = grad.row(k) * (beta / norm);
    }
    return frame;
}

SchedulerState SchedulerState::start(int n, const SwitchPolicy& policy)
{
    if (n < 2)
        throw std::invalid_argument("scheduler needs at least two spins");
    if (policy.window < 1)
        throw std::invalid_argument("stall window must be positive");
    SchedulerState s;
    s.n = n;
    s.target = 1;
    s.policy = policy;
    s.running_best.assign(static_cast<std::size_t>(policy.window + 1), 0.0);
    s.best = -std::numeric_limits<Real>::infinity();
    return s;
}

SchedulerUpdate advance_scheduler(SchedulerState sched, Real tau_now, Real t)
{
    if (!std::isfinite(tau_now))
        throw std::invalid_argument("tau must be finite");
    if (sched.finished)
        return {std::move(sched), false};

    const auto cap = sched.running_best.size();
    sched.best = std::max(sched.best, tau_now);
    sched.running_best[sched.head] = sched.best;
    const std::size_t oldest = (sched.head + 1) % cap;  // value `window` intervals ago once full
    sched.head = oldest;
    ++sched.steps;

    const bool last = sched.target == sched.n - 1;
    bool done = !last && tau_now >= sched.policy.tau_switch;
    if (!done && sched.steps > sched.policy.window) {
        const Real gain = sched.best - sched.running_best[oldest];
        done = gain < sched.policy.eps_sat * std::abs(sched.best);
    }
    if (!done)
        return {std::move(sched), false};

    sched.switch_times.push_back(t);
    if (last) {
        sched.finished = true;
    } else {
        ++sched.target;
        sched.steps = 0;
        sched.head = 0;
        sched.best = -std::numeric_limits<Real>::infinity();
    }
    return {std::move(sched), true};
}

Snapshot Snapshot::take(const MpsState& state)
{
    const Environments env(state);
    Snapshot s;
    s.local = local_rdms(state, env);
    s.expectations = LocalExpectations::from(s.local);
    s.anchored = anchored_pair_rdms(state, env, 0);
    return s;
}

Real Snapshot::tau(const TargetSpec& target) const
{
    Matrix4c pair = Matrix4c::Zero();
    if (target.mu != 0.0) {
        if (target.a != 0)
            throw std::invalid_argument("snapshot holds pair matrices anchored at site 0 only");
        pair = anchored[static_cast<std::size_t>(target.b - 1)];
    }
    return spinctl::tau(local.site, pair, target);
}

std::vector<Real> Snapshot::concurrences() const
{
    std::vector<Real> c;
    c.reserve(anchored.size());
    for (const auto& rho : anchored)
        c.push_back(concurrence(rho));
    return c;
}

FieldGradient assemble_gradient(const Snapshot& snap, const MpsState& state, const ChainSpec& chain,
                                const TargetSpec& target, const SiteMask& mask, const GradientOptions& options)
{
    std::optional<PairExpectations> pair;
    if (target.mu != 0.0)
        pair = PairExpectations::from(state, target.b);
    return assemble_gradient(snap.expectations, pair, chain, target, mask, options);
}

int worker_count()
{
    if (const char* env = std::getenv("SPINCTL_WORKERS")) {
        const int w = std::atoi(env);
        if (w > 0)
            return w;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int count, const std::function<void(int)>& fn)
{
    const int workers = std::min(worker_count(), count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < count; i += workers)
                    fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    for (auto& t : pool)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

ControlFrame ensemble_control_step(std::vector<MpsState>& states, const std::vector<ChainSpec>& chains,
                                   const std::vector<Snapshot>& snapshots, const TargetSpec& target,
                                   const SiteMask& mask, const ControlParameters& params)
{
    if (states.size() != chains.size() || states.size() != snapshots.size() || states.empty())
        throw std::invalid_argument("ensemble states, chains and snapshots must pair up");
    const int count = static_cast<int>(states.size());
    std::vector<FieldGradient> grads(states.size());
    parallel_for(count, [&](int m) {
        const auto i = static_cast<std::size_t>(m);
        grads[i] = assemble_gradient(snapshots[i], states[i], chains[i], target, mask, params.gradient);
    });
    FieldGradient mean = FieldGradient::Zero(grads.front().rows(), 2);
    for (const auto& g : grads)
        mean += g;
    mean /= static_cast<Real>(count);

    ControlFrame frame = optimal_fields(mean, params.beta, params.delta, params.eps_grad);
    parallel_for(count, [&](int m) {
        const auto i = static_cast<std::size_t>(m);
        advance(states[i], chains[i], frame, params.delta, params.splitting, params.substeps);
    });
    return frame;
}

ControlFrame ensemble_control_step(std::vector<MpsState>& states, const std::vector<ChainSpec>& chains,
                                   const TargetSpec& target, const SiteMask& mask,
                                   const ControlParameters& params)
{
    std::vector<Snapshot> snaps(states.size());
    parallel_for(static_cast<int>(states.size()),
                 [&](int m) { snaps[static_cast<std::size_t>(m)] = Snapshot::take(states[static_cast<std::size_t>(m)]); });
    return ensemble_control_step(states, chains, snaps, target, mask, params);
}

}  // namespace spinctl
