#pragma once

// Eigendecomposition of H used to propagate psi_k = e^{-i k H / gamma} psi(0)
// by phase multiplication. H commutes with the photon number, so it is
// diagonalized one photon sector at a time; the eigenvectors of the joint H
// are the block-diagonal assembly.

#include "odq/errors.hpp"
#include "odq/fock/operators.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace odq::fock {

class SpectralPropagator {
public:
    struct Block {
        std::size_t offset = 0;
        std::size_t size = 0;
        Eigen::VectorXd energies;
        Eigen::MatrixXcd vectors; // columns are eigenvectors
    };

    /// Splits H into photon-number blocks when the off-block part vanishes
    /// (to 1e-12); otherwise falls back to one joint block.
    explicit SpectralPropagator(const FockOperators& ops) : dim_(ops.dim()) {
        const auto md = static_cast<Eigen::Index>(ops.mirror_dim);
        const auto d = static_cast<Eigen::Index>(ops.dim());
        bool block_diagonal = true;
        for (Eigen::Index i = 0; i < d && block_diagonal; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                if (i / md != j / md && std::abs(ops.H(i, j)) > 1e-12) {
                    block_diagonal = false;
                    break;
                }
        if (block_diagonal) {
            for (std::size_t p = 0; p < ops.field_dim; ++p)
                add_block(ops.H, p * ops.mirror_dim, ops.mirror_dim);
        } else {
            add_block(ops.H, 0, ops.dim());
        }
    }

    std::size_t dim() const noexcept { return dim_; }
    const std::vector<Block>& blocks() const noexcept { return blocks_; }

    Eigen::VectorXd eigenvalues() const {
        Eigen::VectorXd e(static_cast<Eigen::Index>(dim_));
        for (const auto& b : blocks_) e.segment(static_cast<Eigen::Index>(b.offset), static_cast<Eigen::Index>(b.size)) = b.energies;
        return e;
    }

    Eigen::MatrixXcd eigenvectors() const {
        const auto d = static_cast<Eigen::Index>(dim_);
        Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(d, d);
        for (const auto& b : blocks_) {
            const auto o = static_cast<Eigen::Index>(b.offset);
            const auto s = static_cast<Eigen::Index>(b.size);
            v.block(o, o, s, s) = b.vectors;
        }
        return v;
    }

    /// Coordinates of psi in the eigenbasis, V^dagger psi.
    Eigen::VectorXcd to_eigenbasis(const Eigen::VectorXcd& psi) const {
        check(psi);
        Eigen::VectorXcd c(psi.size());
        for (const auto& b : blocks_) {
            const auto o = static_cast<Eigen::Index>(b.offset);
            const auto s = static_cast<Eigen::Index>(b.size);
            c.segment(o, s).noalias() = b.vectors.adjoint() * psi.segment(o, s);
        }
        return c;
    }

    Eigen::VectorXcd from_eigenbasis(const Eigen::VectorXcd& c) const {
        check(c);
        Eigen::VectorXcd psi(c.size());
        for (const auto& b : blocks_) {
            const auto o = static_cast<Eigen::Index>(b.offset);
            const auto s = static_cast<Eigen::Index>(b.size);
            psi.segment(o, s).noalias() = b.vectors * c.segment(o, s);
        }
        return psi;
    }

    /// e^{-i H tau} psi.
    Eigen::VectorXcd propagate(const Eigen::VectorXcd& psi, double tau) const {
        Eigen::VectorXcd c = to_eigenbasis(psi);
        for (const auto& b : blocks_)
            for (std::size_t i = 0; i < b.size; ++i)
                c(static_cast<Eigen::Index>(b.offset + i)) *= std::polar(1.0, -b.energies(static_cast<Eigen::Index>(i)) * tau);
        return from_eigenbasis(c);
    }

    /// V^dagger rho V for a joint-space operator.
    Eigen::MatrixXcd rotate_to_eigenbasis(const Eigen::MatrixXcd& m) const { return apply_both(m, true); }
    /// V m V^dagger.
    Eigen::MatrixXcd rotate_from_eigenbasis(const Eigen::MatrixXcd& m) const { return apply_both(m, false); }

    /// max |V diag(E) V^dagger - H|.
    double reconstruction_error(const Eigen::MatrixXcd& H) const {
        const Eigen::MatrixXcd v = eigenvectors();
        const Eigen::MatrixXcd rebuilt = v * eigenvalues().cast<std::complex<double>>().asDiagonal() * v.adjoint();
        return (rebuilt - H).cwiseAbs().maxCoeff();
    }

    /// max |V^dagger V - 1|.
    double orthonormality_error() const {
        double worst = 0.0;
        for (const auto& b : blocks_) {
            const auto s = static_cast<Eigen::Index>(b.size);
            const Eigen::MatrixXcd g = b.vectors.adjoint() * b.vectors - Eigen::MatrixXcd::Identity(s, s);
            worst = std::max(worst, g.cwiseAbs().maxCoeff());
        }
        return worst;
    }

private:
    void add_block(const Eigen::MatrixXcd& H, std::size_t offset, std::size_t size) {
        const auto o = static_cast<Eigen::Index>(offset);
        const auto s = static_cast<Eigen::Index>(size);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(H.block(o, o, s, s));
        if (solver.info() != Eigen::Success) throw Error("SpectralPropagator: eigendecomposition failed");
        blocks_.push_back({offset, size, solver.eigenvalues(), solver.eigenvectors()});
    }

    void check(const Eigen::VectorXcd& v) const {
        if (static_cast<std::size_t>(v.size()) != dim_) throw ShapeMismatch("SpectralPropagator: vector dimension mismatch");
    }

    Eigen::MatrixXcd apply_both(const Eigen::MatrixXcd& m, bool inverse) const {
        if (static_cast<std::size_t>(m.rows()) != dim_ || static_cast<std::size_t>(m.cols()) != dim_)
            throw ShapeMismatch("SpectralPropagator: matrix dimension mismatch");
        Eigen::MatrixXcd out(m.rows(), m.cols());
        for (const auto& bi : blocks_) {
            const auto oi = static_cast<Eigen::Index>(bi.offset);
            const auto si = static_cast<Eigen::Index>(bi.size);
            for (const auto& bj : blocks_) {
                const auto oj = static_cast<Eigen::Index>(bj.offset);
                const auto sj = static_cast<Eigen::Index>(bj.size);
                if (inverse)
                    out.block(oi, oj, si, sj).noalias() = bi.vectors.adjoint() * m.block(oi, oj, si, sj) * bj.vectors;
                else
                    out.block(oi, oj, si, sj).noalias() = bi.vectors * m.block(oi, oj, si, sj) * bj.vectors.adjoint();
            }
        }
        return out;
    }

    std::size_t dim_;
    std::vector<Block> blocks_;
};

} // namespace odq::fock
