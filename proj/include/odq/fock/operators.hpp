#pragma once

// Two-mode truncated Fock representation of
//     H = omega n + nu N + chi n (b^dagger + b).
// Joint index j = n * mirror_dim + m (field-major).

#include "odq/errors.hpp"
#include "odq/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>

namespace odq::fock {

inline constexpr std::size_t default_dense_budget = 4096;

/// Mirror block of H in photon sector n: tridiagonal with
///   H_{mm} = omega n + nu m,  H_{m,m+1} = chi n sqrt(m + 1).
struct SectorHamiltonian {
    double shift = 0.0;    // omega n
    double nu = 0.0;
    double coupling = 0.0; // chi n
    std::size_t dim = 0;

    SectorHamiltonian(const SystemParams& p, std::size_t n, std::size_t mirror_dim)
        : shift(p.omega() * static_cast<double>(n)),
          nu(p.nu()),
          coupling(p.chi() * static_cast<double>(n)),
          dim(mirror_dim) {}

    double diag(std::size_t m) const noexcept { return shift + nu * static_cast<double>(m); }
    double offdiag(std::size_t m) const noexcept { return coupling * std::sqrt(static_cast<double>(m + 1)); }
};

struct FockOperators {
    std::size_t field_dim = 0;
    std::size_t mirror_dim = 0;
    Eigen::MatrixXcd n;     // a^dagger a
    Eigen::MatrixXcd N;     // b^dagger b
    Eigen::MatrixXcd b;
    Eigen::MatrixXcd b_dag;
    Eigen::MatrixXcd a;
    Eigen::MatrixXcd a_dag;
    Eigen::MatrixXcd H;

    std::size_t dim() const noexcept { return field_dim * mirror_dim; }
    std::size_t index(std::size_t photon, std::size_t phonon) const noexcept { return photon * mirror_dim + phonon; }
};

inline void check_dense_budget(std::size_t field_dim, std::size_t mirror_dim, std::size_t budget) {
    if (field_dim * mirror_dim > budget)
        throw DimensionBudgetExceeded("dense joint dimension " + std::to_string(field_dim) + " x "
                                      + std::to_string(mirror_dim) + " exceeds the budget " + std::to_string(budget));
}

inline FockOperators build_hamiltonian(const SystemParams& params, const TruncationPolicy& trunc,
                                       std::size_t budget = default_dense_budget) {
    check_dense_budget(trunc.field_dim(), trunc.mirror_dim(), budget);
    FockOperators ops;
    ops.field_dim = trunc.field_dim();
    ops.mirror_dim = trunc.mirror_dim();
    const auto d = static_cast<Eigen::Index>(ops.dim());
    ops.n = Eigen::MatrixXcd::Zero(d, d);
    ops.N = Eigen::MatrixXcd::Zero(d, d);
    ops.b = Eigen::MatrixXcd::Zero(d, d);
    ops.a = Eigen::MatrixXcd::Zero(d, d);

    for (std::size_t p = 0; p < ops.field_dim; ++p) {
        for (std::size_t m = 0; m < ops.mirror_dim; ++m) {
            const auto j = static_cast<Eigen::Index>(ops.index(p, m));
            ops.n(j, j) = static_cast<double>(p);
            ops.N(j, j) = static_cast<double>(m);
            if (m > 0) ops.b(static_cast<Eigen::Index>(ops.index(p, m - 1)), j) = std::sqrt(static_cast<double>(m));
            if (p > 0) ops.a(static_cast<Eigen::Index>(ops.index(p - 1, m)), j) = std::sqrt(static_cast<double>(p));
        }
    }
    ops.b_dag = ops.b.adjoint();
    ops.a_dag = ops.a.adjoint();
    const Eigen::VectorXd photons = ops.n.diagonal().real();
    ops.H = params.omega() * ops.n + params.nu() * ops.N
            + params.chi() * (photons.asDiagonal() * (ops.b_dag + ops.b));
    return ops;
}

} // namespace odq::fock
