#ifndef SPINCTL_ENTANGLEMENT_HPP
#define SPINCTL_ENTANGLEMENT_HPP

#include <vector>

#include "spinctl/linalg.hpp"
#include "spinctl/mps.hpp"

namespace spinctl {

/// Target functional
///   tau = S(rho_a) + S(rho_b) - mu S(rho_ab) - sum_{k != a,b} alpha_k S(rho_k)
/// with S the purity deficit 1 - tr rho^2.
struct TargetSpec
{
    int a = 0;
    int b = 1;
    Real mu = 0.0;
    /// Per-site penalty weights; entries at a and b are ignored (treated as zero).
    std::vector<Real> alpha;

    /// Uniform penalty weight on every site other than the pair.
    static TargetSpec uniform(int n, int a, int b, Real mu = 0.0, Real alpha = 1.0);

    void validate(int n) const;
    Real penalty(int k) const { return (k == a || k == b) ? 0.0 : alpha[static_cast<std::size_t>(k)]; }
};

/// 1 - tr rho^2.
template <typename Derived>
Real purity_deficit(const Eigen::MatrixBase<Derived>& rho)
{
    return 1.0 - (rho * rho).trace().real();
}

inline Real purity_deficit(const Rdm& rho) { return purity_deficit(rho.matrix); }

Real tau(const MpsState& state, const TargetSpec& target);

/// tau from precomputed single-site RDMs and (when mu != 0) the pair RDM.
Real tau(const std::vector<Matrix2c>& site_rdms, const Matrix4c& pair_rdm, const TargetSpec& target);

/// Wootters concurrence of a two-qubit density matrix, evaluated through the Hermitian form
/// sqrt(rho) (Y x Y) rho^* (Y x Y) sqrt(rho), whose eigenvalue roots are taken as the singular
/// values of sqrt(rho) (Y x Y) sqrt(rho)^*.
Real concurrence(const Matrix4c& rho);
Real concurrence(const Rdm& rho);

}  // namespace spinctl

#endif  // SPINCTL_ENTANGLEMENT_HPP
