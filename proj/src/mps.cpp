#include "spinctl/mps.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/QR>
#include <Eigen/Eigenvalues>

namespace spinctl {

namespace {

struct QrFactors
{
    MatrixXc q;
    MatrixXc r;
};

/// Thin QR with the diagonal of R made real and non-negative, so that factoring a matrix
/// with orthonormal columns returns it unchanged.
QrFactors positive_qr(const MatrixXc& m)
{
    const Eigen::Index k = std::min(m.rows(), m.cols());
    Eigen::HouseholderQR<MatrixXc> qr(m);
    QrFactors f;
    f.q = qr.householderQ() * MatrixXc::Identity(m.rows(), k);
    f.r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < k; ++i) {
        const Complex d = f.r(i, i);
        const Real a = std::abs(d);
        const Complex phase = a > 0.0 ? d / a : Complex(1.0);
        f.q.col(i) *= phase;
        f.r.row(i) *= std::conj(phase);
    }
    return f;
}

MatrixXc transfer_left(const MatrixXc& left, const MpsState::SiteTensor& a)
{
    return a[0].adjoint() * left * a[0] + a[1].adjoint() * left * a[1];
}

MatrixXc transfer_right(const MatrixXc& right, const MpsState::SiteTensor& a)
{
    return a[0] * right * a[0].adjoint() + a[1] * right * a[1].adjoint();
}

MatrixXc transfer_left_op(const MatrixXc& left, const MpsState::SiteTensor& a, const Matrix2c& op)
{
    MatrixXc out = MatrixXc::Zero(a[0].cols(), a[0].cols());
    for (int s = 0; s < 2; ++s)
        for (int sp = 0; sp < 2; ++sp)
            if (op(sp, s) != Complex(0.0))
                out += op(sp, s) * (a[sp].adjoint() * left * a[s]);
    return out;
}

MatrixXc left_env_at(const MpsState& state, int site)
{
    const auto center = state.canonical_center();
    int start = 0;
    if (center) {
        if (site <= *center)
            return MatrixXc::Identity(state.tensor(site)[0].rows(), state.tensor(site)[0].rows());
        start = *center;
    }
    MatrixXc l = MatrixXc::Identity(state.tensor(start)[0].rows(), state.tensor(start)[0].rows());
    for (int k = start; k < site; ++k)
        l = transfer_left(l, state.tensor(k));
    return l;
}

MatrixXc right_env_at(const MpsState& state, int site)
{
    const int n = state.size();
    const auto center = state.canonical_center();
    int start = n - 1;
    if (center) {
        if (site >= *center)
            return MatrixXc::Identity(state.tensor(site)[0].cols(), state.tensor(site)[0].cols());
        start = *center;
    }
    MatrixXc r = MatrixXc::Identity(state.tensor(start)[0].cols(), state.tensor(start)[0].cols());
    for (int k = start; k > site; --k)
        r = transfer_right(r, state.tensor(k));
    return r;
}

void check_site(const MpsState& state, int site)
{
    if (site < 0 || site >= state.size())
        throw std::out_of_range("site " + std::to_string(site) + " outside chain of " +
                                std::to_string(state.size()));
}

}  // namespace

MpsState MpsState::from_product_state(std::span<const Vector2c> locals, int d_max)
{
    if (locals.size() < 2)
        throw std::invalid_argument("product state needs at least two sites");
    if (d_max < 1)
        throw std::invalid_argument("bond dimension cap must be positive");
    MpsState s;
    s.policy_.d_max = d_max;
    s.tensors_.reserve(locals.size());
    for (const auto& v : locals) {
        if (std::abs(v.squaredNorm() - 1.0) > 1e-10)
            throw std::invalid_argument("local state is not normalized");
        SiteTensor t{MatrixXc::Constant(1, 1, v(0)), MatrixXc::Constant(1, 1, v(1))};
        s.tensors_.push_back(std::move(t));
    }
    s.center_ = 0;
    return s;
}

MpsState MpsState::from_tensors(std::vector<SiteTensor> tensors, int d_max)
{
    if (tensors.size() < 2)
        throw std::invalid_argument("state needs at least two sites");
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        const auto& t = tensors[k];
        if (t[0].rows() != t[1].rows() || t[0].cols() != t[1].cols())
            throw std::invalid_argument("site tensor halves disagree in shape");
        if (k + 1 < tensors.size() && t[0].cols() != tensors[k + 1][0].rows())
            throw std::invalid_argument("adjacent bond dimensions do not match");
    }
    if (tensors.front()[0].rows() != 1 || tensors.back()[0].cols() != 1)
        throw std::invalid_argument("boundary bonds must have dimension one");
    MpsState s;
    s.policy_.d_max = d_max;
    s.tensors_ = std::move(tensors);
    return s;
}

void MpsState::set_truncation(const TruncationPolicy& policy)
{
    if (policy.d_max < 1)
        throw std::invalid_argument("bond dimension cap must be positive");
    policy_ = policy;
}

int MpsState::bond_dimension(int site) const
{
    return static_cast<int>(tensor(site)[0].cols());
}

int MpsState::max_bond_dimension() const
{
    int d = 1;
    for (int k = 0; k + 1 < size(); ++k)
        d = std::max(d, bond_dimension(k));
    return d;
}

Real MpsState::norm_squared() const
{
    MatrixXc l = MatrixXc::Identity(1, 1);
    for (const auto& t : tensors_)
        l = transfer_left(l, t);
    return l(0, 0).real();
}

void MpsState::shift_center_right()
{
    const int c = *center_;
    auto& a = tensors_[static_cast<std::size_t>(c)];
    auto& b = tensors_[static_cast<std::size_t>(c + 1)];
    const Eigen::Index dl = a[0].rows();
    MatrixXc m(2 * dl, a[0].cols());
    m << a[0], a[1];
    const auto f = positive_qr(m);
    a[0] = f.q.topRows(dl);
    a[1] = f.q.bottomRows(dl);
    b[0] = f.r * b[0];
    b[1] = f.r * b[1];
    center_ = c + 1;
}

void MpsState::shift_center_left()
{
    const int c = *center_;
    auto& a = tensors_[static_cast<std::size_t>(c)];
    auto& b = tensors_[static_cast<std::size_t>(c - 1)];
    const Eigen::Index dr = a[0].cols();
    MatrixXc m(a[0].rows(), 2 * dr);
    m << a[0], a[1];
    const auto f = positive_qr(m.adjoint());
    const MatrixXc qh = f.q.adjoint();
    a[0] = qh.leftCols(dr);
    a[1] = qh.rightCols(dr);
    const MatrixXc rh = f.r.adjoint();
    b[0] = b[0] * rh;
    b[1] = b[1] * rh;
    center_ = c - 1;
}

void MpsState::canonicalize(int center)
{
    check_site(*this, center);
    center_ = 0;
    for (int k = 0; k < center; ++k)
        shift_center_right();
    center_ = size() - 1;
    for (int k = size() - 1; k > center; --k)
        shift_center_left();
    center_ = center;
}

bool MpsState::is_canonical(Real tol) const
{
    if (!center_)
        return false;
    for (int k = 0; k < size(); ++k) {
        const auto& a = tensor(k);
        if (k < *center_) {
            const MatrixXc g = a[0].adjoint() * a[0] + a[1].adjoint() * a[1];
            if ((g - MatrixXc::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() > tol)
                return false;
        } else if (k > *center_) {
            const MatrixXc g = a[0] * a[0].adjoint() + a[1] * a[1].adjoint();
            if ((g - MatrixXc::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() > tol)
                return false;
        }
    }
    return true;
}

void MpsState::apply_site_unitary(int site, const Matrix2c& u)
{
    check_site(*this, site);
    auto& a = tensors_[static_cast<std::size_t>(site)];
    MatrixXc up = u(0, 0) * a[0] + u(0, 1) * a[1];
    MatrixXc dn = u(1, 0) * a[0] + u(1, 1) * a[1];
    a[0] = std::move(up);
    a[1] = std::move(dn);
}

void MpsState::apply_bond_update(int bond, const MatrixXc& theta, Sweep direction)
{
    auto& a = tensors_[static_cast<std::size_t>(bond)];
    auto& b = tensors_[static_cast<std::size_t>(bond + 1)];
    const Eigen::Index dl = a[0].rows();
    const Eigen::Index dr = b[0].cols();

    // Left sweeps factor theta^dag, so both directions produce theta = iso * rest (or its adjoint)
    // with iso column-orthonormal.
    const bool right = direction == Sweep::right;
    const MatrixXc m = right ? theta : MatrixXc(theta.adjoint());

    // Schmidt basis from the Gram matrix of a square core: its eigenvectors are orthonormal to
    // machine precision and the other factor is a plain projection, so nothing is divided by
    // small singular values. A tall block is first reduced by QR, otherwise directions with
    // singular values below sqrt(eps) would mix with the null space of the Gram matrix.
    MatrixXc q;
    MatrixXc core;
    if (m.rows() > m.cols()) {
        Eigen::HouseholderQR<MatrixXc> qr(m);
        q = qr.householderQ() * MatrixXc::Identity(m.rows(), m.cols());
        core = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
    } else {
        core = m;
    }
    const MatrixXc gram = core * core.adjoint();
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(gram);
    const VectorXr& ev = es.eigenvalues();  // ascending
    const Eigen::Index dim = ev.size();
    const Real total = gram.trace().real();
    max_norm_drift_ = std::max(max_norm_drift_, std::abs(total - 1.0));

    // Eigenvalues are only accurate to ~eps * total: with a zero floor every direction up to the
    // cap is kept, and the kept weight is measured on the projection, not read off the spectrum.
    Eigen::Index keep = 0;
    const Eigen::Index cap = std::min<Eigen::Index>(dim, policy_.d_max);
    while (keep < cap &&
           (keep == 0 || policy_.weight_floor <= 0.0 || ev(dim - 1 - keep) >= policy_.weight_floor * total))
        ++keep;
    const MatrixXc w = es.eigenvectors().rightCols(keep).rowwise().reverse();
    const MatrixXc iso = q.size() ? MatrixXc(q * w) : w;
    MatrixXc rest = w.adjoint() * core;
    const Real kept = rest.squaredNorm();
    discarded_weight_ += std::max(0.0, (total - kept) / total);
    rest /= std::sqrt(kept);

    if (right) {
        a[0] = iso.topRows(dl);
        a[1] = iso.bottomRows(dl);
        b[0] = rest.leftCols(dr);
        b[1] = rest.rightCols(dr);
        center_ = bond + 1;
    } else {
        const MatrixXc left = rest.adjoint();
        const MatrixXc vh = iso.adjoint();
        a[0] = left.topRows(dl);
        a[1] = left.bottomRows(dl);
        b[0] = vh.leftCols(dr);
        b[1] = vh.rightCols(dr);
        center_ = bond;
    }
}

namespace {

MatrixXc two_site_theta(const MpsState::SiteTensor& a, const MpsState::SiteTensor& b)
{
    const Eigen::Index dl = a[0].rows();
    const Eigen::Index dr = b[0].cols();
    MatrixXc theta(2 * dl, 2 * dr);
    for (int s1 = 0; s1 < 2; ++s1)
        for (int s2 = 0; s2 < 2; ++s2)
            theta.block(s1 * dl, s2 * dr, dl, dr) = a[s1] * b[s2];
    return theta;
}

}  // namespace

void MpsState::apply_two_site_gate(int bond, const Matrix4c& gate)
{
    if (bond < 0 || bond + 1 >= size())
        throw std::out_of_range("bond outside chain");
    if (!center_)
        canonicalize(bond);
    while (*center_ < bond)
        shift_center_right();
    while (*center_ > bond)
        shift_center_left();

    const auto& a = tensors_[static_cast<std::size_t>(bond)];
    const auto& b = tensors_[static_cast<std::size_t>(bond + 1)];
    const Eigen::Index dl = a[0].rows();
    const Eigen::Index dr = b[0].cols();
    const MatrixXc theta = two_site_theta(a, b);
    MatrixXc out = MatrixXc::Zero(2 * dl, 2 * dr);
    for (int s1 = 0; s1 < 2; ++s1)
        for (int s2 = 0; s2 < 2; ++s2)
            for (int t1 = 0; t1 < 2; ++t1)
                for (int t2 = 0; t2 < 2; ++t2) {
                    const Complex g = gate(2 * s1 + s2, 2 * t1 + t2);
                    if (g != Complex(0.0))
                        out.block(s1 * dl, s2 * dr, dl, dr) += g * theta.block(t1 * dl, t2 * dr, dl, dr);
                }
    apply_bond_update(bond, out, Sweep::right);
}

void MpsState::ensure_center_at_end()
{
    if (!center_) {
        canonicalize(0);
        return;
    }
    if (*center_ == 0 || *center_ == size() - 1)
        return;
    if (*center_ < size() / 2)
        while (*center_ > 0)
            shift_center_left();
    else
        while (*center_ < size() - 1)
            shift_center_right();
}

void MpsState::apply_ising_layer(const ChainSpec& chain, Real t)
{
    if (chain.size() != size())
        throw std::invalid_argument("chain length does not match state");
    ensure_center_at_end();

    auto update = [&](int bond, Sweep dir) {
        const auto& a = tensors_[static_cast<std::size_t>(bond)];
        const auto& b = tensors_[static_cast<std::size_t>(bond + 1)];
        const Eigen::Index dl = a[0].rows();
        const Eigen::Index dr = b[0].cols();
        MatrixXc theta = two_site_theta(a, b);
        const Real phi = chain.bond(bond) * t;
        const Complex same = std::polar(1.0, -phi);
        const Complex diff = std::polar(1.0, phi);
        theta.block(0, 0, dl, dr) *= same;
        theta.block(dl, dr, dl, dr) *= same;
        theta.block(0, dr, dl, dr) *= diff;
        theta.block(dl, 0, dl, dr) *= diff;
        apply_bond_update(bond, theta, dir);
    };

    if (*center_ == 0) {
        for (int bond = 0; bond + 1 < size(); ++bond)
            update(bond, Sweep::right);
    } else {
        for (int bond = size() - 2; bond >= 0; --bond)
            update(bond, Sweep::left);
    }
}

VectorXc MpsState::to_dense() const
{
    MatrixXc p = MatrixXc::Identity(1, 1);
    for (const auto& t : tensors_) {
        MatrixXc next(p.rows() * 2, t[0].cols());
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
            next.row(2 * r) = p.row(r) * t[0];
            next.row(2 * r + 1) = p.row(r) * t[1];
        }
        p = std::move(next);
    }
    return p.col(0);
}

void advance(MpsState& state, const ChainSpec& chain, const ControlFrame& frame, Real dt, Splitting splitting,
             int substeps)
{
    if (!(dt > 0.0))
        throw std::invalid_argument("time step must be positive");
    if (substeps < 1)
        throw std::invalid_argument("substeps must be at least 1");
    if (frame.size() != state.size() || chain.size() != state.size())
        throw std::invalid_argument("frame, chain and state sizes differ");

    auto rotate_all = [&](Real t) {
        if (t == 0.0)
            return;
        for (int k = 0; k < state.size(); ++k) {
            const Real gx = frame.fields(k, 0);
            const Real gy = frame.fields(k, 1);
            if (gx != 0.0 || gy != 0.0)
                state.apply_site_unitary(k, xy_rotation(gx, gy, t));
        }
    };

    // Triple-jump composition of symmetric Strang stages; adjacent half rotations are merged.
    static const Real w1 = 1.0 / (2.0 - std::cbrt(2.0));
    static const Real w0 = 1.0 - 2.0 * w1;
    const std::vector<Real> stages = splitting == Splitting::second_order ? std::vector<Real>{1.0}
                                                                           : std::vector<Real>{w1, w0, w1};
    const Real h = dt / substeps;
    Real pending = 0.0;
    for (int s = 0; s < substeps; ++s) {
        for (Real w : stages) {
            rotate_all(pending + 0.5 * w * h);
            state.apply_ising_layer(chain, w * h);
            pending = 0.5 * w * h;
        }
    }
    rotate_all(pending);
}

MpsState step(MpsState state, const ChainSpec& chain, const ControlFrame& frame, Real dt, Splitting splitting)
{
    advance(state, chain, frame, dt, splitting);
    return state;
}

Rdm rdm(const MpsState& state, std::vector<int> sites)
{
    if (sites.empty() || sites.size() > 3)
        throw std::invalid_argument("reduced density matrices cover one to three sites");
    std::sort(sites.begin(), sites.end());
    if (std::adjacent_find(sites.begin(), sites.end()) != sites.end())
        throw std::invalid_argument("duplicate site in reduced density matrix request");
    for (int s : sites)
        check_site(state, s);

    const int first = sites.front();
    const int last = sites.back();

    // env[ket * dim + bra] holds the (bra bond x ket bond) partial contraction.
    std::vector<MatrixXc> env{left_env_at(state, first)};
    int dim = 1;
    std::size_t next_open = 0;
    for (int k = first; k <= last; ++k) {
        const auto& a = state.tensor(k);
        if (next_open < sites.size() && sites[next_open] == k) {
            const int nd = dim * 2;
            std::vector<MatrixXc> grown(static_cast<std::size_t>(nd * nd));
            for (int ket = 0; ket < dim; ++ket)
                for (int bra = 0; bra < dim; ++bra) {
                    const auto& e = env[static_cast<std::size_t>(ket * dim + bra)];
                    for (int s = 0; s < 2; ++s)
                        for (int sp = 0; sp < 2; ++sp)
                            grown[static_cast<std::size_t>((ket * 2 + s) * nd + bra * 2 + sp)] =
                                a[sp].adjoint() * e * a[s];
                }
            env = std::move(grown);
            dim = nd;
            ++next_open;
        } else {
            for (auto& e : env)
                e = transfer_left(e, a);
        }
    }
    const MatrixXc r = right_env_at(state, last);
    Rdm out;
    out.sites = sites;
    out.matrix.resize(dim, dim);
    for (int ket = 0; ket < dim; ++ket)
        for (int bra = 0; bra < dim; ++bra)
            out.matrix(ket, bra) = (env[static_cast<std::size_t>(ket * dim + bra)] * r).trace();
    out.matrix /= out.matrix.trace().real();
    return out;
}

Real pauli_expectation(const MpsState& state, std::span<const std::pair<int, int>> assignment)
{
    std::vector<std::pair<int, int>> ops;
    for (const auto& [site, index] : assignment) {
        check_site(state, site);
        if (index < 0 || index > 3)
            throw std::invalid_argument("Pauli index must be in 0..3");
        for (const auto& o : ops)
            if (o.first == site)
                throw std::invalid_argument("site listed twice in Pauli string");
        if (index != 0)
            ops.emplace_back(site, index);
    }
    if (ops.size() > 3)
        throw std::invalid_argument("at most three non-identity Pauli factors are supported");
    if (ops.empty())
        return 1.0;
    std::sort(ops.begin(), ops.end());

    const int first = ops.front().first;
    const int last = ops.back().first;
    MatrixXc num = left_env_at(state, first);
    MatrixXc den = num;
    std::size_t next = 0;
    for (int k = first; k <= last; ++k) {
        const auto& a = state.tensor(k);
        if (next < ops.size() && ops[next].first == k) {
            num = transfer_left_op(num, a, pauli_matrix(ops[next].second));
            ++next;
        } else {
            num = transfer_left(num, a);
        }
        den = transfer_left(den, a);
    }
    const MatrixXc r = right_env_at(state, last);
    return ((num * r).trace() / (den * r).trace()).real();
}

Real pauli_expectation(const MpsState& state, std::initializer_list<std::pair<int, int>> assignment)
{
    return pauli_expectation(state, std::span<const std::pair<int, int>>(assignment.begin(), assignment.size()));
}

Environments::Environments(const MpsState& state)
{
    const int n = state.size();
    left_.resize(static_cast<std::size_t>(n));
    right_.resize(static_cast<std::size_t>(n));
    const auto center = state.canonical_center();

    const int lstart = center ? *center : 0;
    for (int k = 0; k <= lstart; ++k) {
        const auto d = state.tensor(k)[0].rows();
        left_[static_cast<std::size_t>(k)] = MatrixXc::Identity(d, d);
    }
    for (int k = lstart + 1; k < n; ++k)
        left_[static_cast<std::size_t>(k)] = transfer_left(left_[static_cast<std::size_t>(k - 1)], state.tensor(k - 1));

    const int rstart = center ? *center : n - 1;
    for (int k = n - 1; k >= rstart; --k) {
        const auto d = state.tensor(k)[0].cols();
        right_[static_cast<std::size_t>(k)] = MatrixXc::Identity(d, d);
    }
    for (int k = rstart - 1; k >= 0; --k)
        right_[static_cast<std::size_t>(k)] = transfer_right(right_[static_cast<std::size_t>(k + 1)], state.tensor(k + 1));
}

LocalRdms local_rdms(const MpsState& state, const Environments& env)
{
    const int n = state.size();
    LocalRdms out;
    out.site.resize(static_cast<std::size_t>(n));
    out.bond.resize(static_cast<std::size_t>(n - 1));
    for (int k = 0; k < n; ++k) {
        const auto& a = state.tensor(k);
        const auto& l = env.left(k);
        const auto& r = env.right(k);
        Matrix2c rho;
        for (int s = 0; s < 2; ++s)
            for (int sp = 0; sp < 2; ++sp)
                rho(s, sp) = (a[sp].adjoint() * l * a[s] * r).trace();
        out.site[static_cast<std::size_t>(k)] = rho / rho.trace().real();
    }
    for (int k = 0; k + 1 < n; ++k) {
        const auto& a = state.tensor(k);
        const auto& b = state.tensor(k + 1);
        const auto& l = env.left(k);
        const auto& r = env.right(k + 1);
        Matrix4c rho;
        for (int s1 = 0; s1 < 2; ++s1)
            for (int s1p = 0; s1p < 2; ++s1p) {
                const MatrixXc e = a[s1p].adjoint() * l * a[s1];
                for (int s2 = 0; s2 < 2; ++s2) {
                    const MatrixXc er = e * b[s2] * r;
                    for (int s2p = 0; s2p < 2; ++s2p)
                        rho(2 * s1 + s2, 2 * s1p + s2p) = (b[s2p].adjoint() * er).trace();
                }
            }
        out.bond[static_cast<std::size_t>(k)] = rho / rho.trace().real();
    }
    return out;
}

LocalRdms local_rdms(const MpsState& state)
{
    return local_rdms(state, Environments(state));
}

std::vector<Matrix4c> anchored_pair_rdms(const MpsState& state, const Environments& env, int anchor)
{
    check_site(state, anchor);
    const int n = state.size();
    std::array<MatrixXc, 4> e;
    const auto& a = state.tensor(anchor);
    for (int s = 0; s < 2; ++s)
        for (int sp = 0; sp < 2; ++sp)
            e[static_cast<std::size_t>(2 * s + sp)] = a[sp].adjoint() * env.left(anchor) * a[s];

    std::vector<Matrix4c> out;
    out.reserve(static_cast<std::size_t>(n - anchor - 1));
    for (int j = anchor + 1; j < n; ++j) {
        const auto& b = state.tensor(j);
        const auto& r = env.right(j);
        Matrix4c rho;
        for (int s1 = 0; s1 < 2; ++s1)
            for (int s1p = 0; s1p < 2; ++s1p) {
                const auto& ee = e[static_cast<std::size_t>(2 * s1 + s1p)];
                for (int s2 = 0; s2 < 2; ++s2) {
                    const MatrixXc er = ee * b[s2] * r;
                    for (int s2p = 0; s2p < 2; ++s2p)
                        rho(2 * s1 + s2, 2 * s1p + s2p) = (b[s2p].adjoint() * er).trace();
                }
            }
        out.push_back(rho / rho.trace().real());
        for (auto& m : e)
            m = transfer_left(m, b);
    }
    return out;
}

}  // namespace spinctl
