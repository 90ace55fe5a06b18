#pragma once

// Short-iterative Lanczos propagation of one photon sector.
//
// A sector state only occupies a window [lo, hi) of the mirror ladder. Each
// application of the tridiagonal sector Hamiltonian widens the support by one
// level per side, so a basis of m Krylov vectors lives exactly on
// [lo - m, hi + m) and the propagation cost follows the real support rather
// than the full mirror cutoff.

#include "odq/errors.hpp"
#include "odq/fock/operators.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

namespace odq::fock {

/// Mirror amplitudes amp[i] for levels lo + i of one photon sector.
struct SectorState {
    std::size_t lo = 0;
    std::vector<cplx> amp;

    std::size_t hi() const noexcept { return lo + amp.size(); }

    double norm_sq() const noexcept {
        double acc = 0.0;
        for (const auto& z : amp) acc += std::norm(z);
        return acc;
    }

    cplx at(std::size_t m) const noexcept { return m >= lo && m < hi() ? amp[m - lo] : cplx{0.0, 0.0}; }
};

struct KrylovOptions {
    std::size_t max_basis = 40;
    double tol = 1e-12;  // accepted a-posteriori error per substep, relative to the norm
    double trim = 1e-15; // edge amplitudes below trim * norm are dropped
    bool reorthogonalize = false;
};

struct KrylovStats {
    std::size_t substeps = 0;
    std::size_t matvecs = 0;
    double error_bound = 0.0;     // accumulated substep error estimates
    double edge_population = 0.0; // largest |amp|^2 seen on the last mirror level

    void merge(const KrylovStats& o) {
        substeps += o.substeps;
        matvecs += o.matvecs;
        error_bound = std::max(error_bound, o.error_bound);
        edge_population = std::max(edge_population, o.edge_population);
    }
};

namespace detail {

// Tridiagonal coefficients of one window: diag[i] = H_{mm} - sigma and
// off[i] = H_{m,m+1} for m = w0 + i.
struct WindowOperator {
    std::vector<double> diag;
    std::vector<double> off;

    WindowOperator(const SectorHamiltonian& h, std::size_t w0, std::size_t len) : diag(len), off(len, 0.0) {
        for (std::size_t i = 0; i < len; ++i) {
            diag[i] = h.diag(w0 + i);
            if (i + 1 < len) off[i] = h.offdiag(w0 + i);
        }
    }

    // y = (H - sigma) x; x is zero outside the window.
    void apply(double sigma, const cplx* x, cplx* y) const {
        const std::size_t len = diag.size();
        if (len == 1) {
            y[0] = (diag[0] - sigma) * x[0];
            return;
        }
        y[0] = (diag[0] - sigma) * x[0] + off[0] * x[1];
        for (std::size_t i = 1; i + 1 < len; ++i) y[i] = (diag[i] - sigma) * x[i] + off[i - 1] * x[i - 1] + off[i] * x[i + 1];
        y[len - 1] = (diag[len - 1] - sigma) * x[len - 1] + off[len - 2] * x[len - 2];
    }
};

inline void trim_state(SectorState& s, double trim) {
    const double cut = trim * trim * s.norm_sq();
    std::size_t first = 0;
    std::size_t last = s.amp.size();
    while (first + 1 < last && std::norm(s.amp[first]) <= cut) ++first;
    while (last > first + 1 && std::norm(s.amp[last - 1]) <= cut) --last;
    if (first == 0 && last == s.amp.size()) return;
    s.amp = std::vector<cplx>(s.amp.begin() + static_cast<std::ptrdiff_t>(first),
                              s.amp.begin() + static_cast<std::ptrdiff_t>(last));
    s.lo += first;
}

} // namespace detail

/// s <- e^{-i H_n tau} s, substepping until each step's error estimate is
/// below opts.tol.
inline void krylov_propagate(const SectorHamiltonian& h, SectorState& s, double tau, const KrylovOptions& opts = {},
                             KrylovStats* stats = nullptr) {
    if (s.amp.empty() || tau == 0.0) return;
    if (s.hi() > h.dim) throw ShapeMismatch("krylov_propagate: state exceeds the mirror cutoff");
    const std::size_t m_max = std::max<std::size_t>(2, opts.max_basis);
    KrylovStats local;
    double remaining = tau;

    while (remaining > 0.0) {
        const double norm = std::sqrt(s.norm_sq());
        if (norm == 0.0) break;

        const std::size_t w0 = s.lo > m_max ? s.lo - m_max : 0;
        const std::size_t w1 = std::min(h.dim, s.hi() + m_max);
        const std::size_t len = w1 - w0;
        const auto ilen = static_cast<Eigen::Index>(len);

        Eigen::MatrixXcd V = Eigen::MatrixXcd::Zero(ilen, static_cast<Eigen::Index>(m_max));
        for (std::size_t i = 0; i < s.amp.size(); ++i) V(static_cast<Eigen::Index>(s.lo - w0 + i), 0) = s.amp[i] / norm;

        // Shift by <H> so the recursion works with small numbers.
        const detail::WindowOperator op(h, w0, len);
        Eigen::VectorXcd w(ilen);
        op.apply(0.0, V.col(0).data(), w.data());
        ++local.matvecs;
        const double sigma = V.col(0).dot(w).real();
        w -= sigma * V.col(0);

        std::vector<double> alpha;
        std::vector<double> beta;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
        double residual = 0.0;

        auto decompose = [&](std::size_t nb) {
            const auto n = static_cast<Eigen::Index>(nb);
            const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(alpha.data(), n);
            const Eigen::VectorXd e = n > 1 ? Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(beta.data(), n - 1))
                                            : Eigen::VectorXd(0);
            eig.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
        };
        auto coefficients = [&](double dt) {
            const auto& lam = eig.eigenvalues();
            const auto& Q = eig.eigenvectors();
            const Eigen::Index nb = lam.size();
            Eigen::VectorXcd y = Eigen::VectorXcd::Zero(nb);
            for (Eigen::Index l = 0; l < nb; ++l) y += (Q(0, l) * std::polar(1.0, -lam(l) * dt)) * Q.col(l);
            return y;
        };
        // Error estimate residual * |[e^{-iT dt} e_1]_last|. The computed entry
        // carries rounding noise of order eps, so it is capped by the Taylor
        // bound (rho dt)^{nb-1} / (nb-1)! e^{rho dt}, rho = max |eigenvalue of T|.
        auto estimate = [&](const Eigen::VectorXcd& y, double dt) {
            if (residual == 0.0) return 0.0;
            const Eigen::Index nb = y.size();
            const double rho = eig.eigenvalues().cwiseAbs().maxCoeff();
            const double k = static_cast<double>(nb - 1);
            const double log_bound = rho * dt > 0.0 ? k * std::log(rho * dt) - std::lgamma(k + 1.0) + rho * dt : -1e300;
            return residual * std::min(std::abs(y(nb - 1)), std::exp(log_bound));
        };

        std::size_t basis = 0;
        bool decomposed = false;
        for (std::size_t j = 0; j < m_max; ++j) {
            if (j > 0) {
                op.apply(sigma, V.col(static_cast<Eigen::Index>(j)).data(), w.data());
                ++local.matvecs;
            }
            const auto vj = V.col(static_cast<Eigen::Index>(j));
            const double a = vj.dot(w).real();
            w -= a * vj;
            if (j > 0) w -= beta[j - 1] * V.col(static_cast<Eigen::Index>(j - 1));
            if (opts.reorthogonalize) {
                for (std::size_t i = 0; i <= j; ++i) {
                    const auto vi = V.col(static_cast<Eigen::Index>(i));
                    w -= vi.dot(w) * vi;
                }
            }
            alpha.push_back(a);
            basis = j + 1;
            const double b = w.norm();
            const double scale = std::abs(a) + (j > 0 ? beta[j - 1] : 0.0) + 1.0;
            if (b <= 1e-14 * scale) { // invariant subspace: the projection is exact
                residual = 0.0;
                break;
            }
            residual = b;
            // Short steps converge with a few vectors; stop once the whole
            // remaining interval already meets the tolerance.
            if (basis >= 8 && basis % 4 == 0 && basis < m_max) {
                decompose(basis);
                if (estimate(coefficients(remaining), remaining) <= opts.tol) {
                    decomposed = true;
                    break;
                }
            }
            if (j + 1 < m_max) {
                beta.push_back(b);
                V.col(static_cast<Eigen::Index>(j + 1)) = w / b;
            }
        }
        if (!decomposed) decompose(basis);
        const auto nb = static_cast<Eigen::Index>(basis);

        double dt = remaining;
        Eigen::VectorXcd y = coefficients(dt);
        double err = estimate(y, dt);
        int halvings = 0;
        while (err > opts.tol) {
            if (++halvings > 60) throw Error("krylov_propagate: step size underflow");
            dt *= 0.5;
            y = coefficients(dt);
            err = estimate(y, dt);
        }

        const Eigen::VectorXcd psi = (norm * std::polar(1.0, -sigma * dt)) * (V.leftCols(nb) * y);
        s.lo = w0;
        s.amp.assign(psi.data(), psi.data() + psi.size());
        detail::trim_state(s, opts.trim);
        if (s.hi() == h.dim) local.edge_population = std::max(local.edge_population, std::norm(s.amp.back()));

        local.error_bound += err;
        ++local.substeps;
        remaining = halvings == 0 ? 0.0 : remaining - dt;
    }
    if (stats) stats->merge(local);
}

} // namespace odq::fock
