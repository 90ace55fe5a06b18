#pragma once

// Dense Milburn density matrix
//     rho(t) = e^{-gt} sum_{k <= k_max} (gt)^k / k! |psi_k><psi_k|,
// accumulated in the energy eigenbasis where psi_k differs from psi(0) only by
// the phases e^{-i k E_j / gamma}, then rotated back once.

#include "odq/coherent.hpp"
#include "odq/errors.hpp"
#include "odq/fock/operators.hpp"
#include "odq/fock/spectral.hpp"
#include "odq/model.hpp"

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

namespace odq::fock {

struct DensityMatrix {
    Eigen::MatrixXcd data;
    double trace_deficit = 0.0; // 1 - tr(rho)
    double fock_tail = 0.0;     // coherent mass cut from psi(0) before renormalizing
    double tail_tol = 0.0;
    std::size_t field_dim = 0;
    std::size_t mirror_dim = 0;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(data.rows()); }
};

/// Truncated product coherent vector, renormalized; `removed` receives the
/// probability that fell outside the truncation.
inline Eigen::VectorXcd product_coherent_vector(const CoherentPair& init, std::size_t field_dim,
                                                std::size_t mirror_dim, double* removed = nullptr) {
    const auto f = coherent_amplitudes(init.alpha(), field_dim);
    const auto m = coherent_amplitudes(init.beta(), mirror_dim);
    Eigen::VectorXcd psi(static_cast<Eigen::Index>(field_dim * mirror_dim));
    for (std::size_t i = 0; i < field_dim; ++i)
        for (std::size_t j = 0; j < mirror_dim; ++j) psi(static_cast<Eigen::Index>(i * mirror_dim + j)) = f[i] * m[j];
    const double kept = psi.squaredNorm();
    if (removed) *removed = std::max(0.0, 1.0 - kept);
    psi /= std::sqrt(kept);
    return psi;
}

/// Owns the operators and spectrum for one parameter set and truncation.
class DenseOracle {
public:
    DenseOracle(const SystemParams& params, const CoherentPair& init, const TruncationPolicy& trunc,
                std::size_t budget = default_dense_budget)
        : trunc_(trunc), ops_(build_hamiltonian(params, trunc, budget)), prop_(ops_) {
        psi0_ = product_coherent_vector(init, trunc.field_dim(), trunc.mirror_dim(), &fock_tail_);
        c0_ = prop_.to_eigenbasis(psi0_);
        energies_ = prop_.eigenvalues();
    }

    const FockOperators& ops() const noexcept { return ops_; }
    const SpectralPropagator& propagator() const noexcept { return prop_; }
    const Eigen::VectorXcd& initial_state() const noexcept { return psi0_; }
    double fock_tail() const noexcept { return fock_tail_; }

    Eigen::VectorXcd state(double t) const { return prop_.propagate(psi0_, t); }

    /// rho(t) of the Milburn series, or |psi(t)><psi(t)| in the unitary limit.
    DensityMatrix rho(const DecoherenceParams& deco, double t) const {
        if (!(std::isfinite(t) && t >= 0.0)) throw std::invalid_argument("milburn_rho: t must be finite and >= 0");
        DensityMatrix out;
        out.fock_tail = fock_tail_;
        out.tail_tol = trunc_.tail_tol();
        out.field_dim = trunc_.field_dim();
        out.mirror_dim = trunc_.mirror_dim();
        if (deco.is_unitary()) {
            const Eigen::VectorXcd psi = state(t);
            out.data = psi * psi.adjoint();
        } else {
            const auto d = c0_.size();
            const double g = deco.gamma();
            const auto w = poisson_weights(g * t, trunc_.k_max());
            // Element (i, j) in the eigenbasis: c_i c_j^* sum_k w_k e^{-i k (E_i - E_j)/gamma}.
            Eigen::MatrixXcd eig = Eigen::MatrixXcd::Zero(d, d);
            Eigen::VectorXcd phase = Eigen::VectorXcd::Ones(d);
            Eigen::VectorXcd step(d);
            for (Eigen::Index i = 0; i < d; ++i) step(i) = std::polar(1.0, -energies_(i) / g);
            for (std::size_t k = 0; k <= trunc_.k_max(); ++k) {
                if (k > 0) phase = phase.cwiseProduct(step);
                if (w[k] == 0.0) continue;
                const Eigen::VectorXcd ck = c0_.cwiseProduct(phase);
                eig.selfadjointView<Eigen::Lower>().rankUpdate(ck, w[k]);
            }
            const Eigen::MatrixXcd full = eig.selfadjointView<Eigen::Lower>();
            out.data = prop_.rotate_from_eigenbasis(full);
        }
        out.trace_deficit = 1.0 - out.data.trace().real();
        if (out.trace_deficit > trunc_.tail_tol())
            throw TruncationNotConverged("milburn_rho: trace deficit " + std::to_string(out.trace_deficit)
                                         + " exceeds tail_tol");
        return out;
    }

private:
    TruncationPolicy trunc_;
    FockOperators ops_;
    SpectralPropagator prop_;
    Eigen::VectorXcd psi0_;
    Eigen::VectorXcd c0_;
    Eigen::VectorXd energies_;
    double fock_tail_ = 0.0;
};

inline DensityMatrix milburn_rho(const SystemParams& params, const DecoherenceParams& deco, const CoherentPair& init,
                                 const TruncationPolicy& trunc, double t,
                                 std::size_t budget = default_dense_budget) {
    return DenseOracle(params, init, trunc, budget).rho(deco, t);
}

inline cplx expect(const DensityMatrix& rho, const Eigen::MatrixXcd& op) {
    if (op.rows() != rho.data.rows() || op.cols() != rho.data.cols())
        throw ShapeMismatch("expect: operator and density matrix dimensions differ");
    // tr(rho op) = sum_ij rho_ij op_ji
    return rho.data.cwiseProduct(op.transpose()).sum();
}

/// tr(rho op) for a Hermitian op; an imaginary residue above 1e-10 is an error.
inline double expect_real(const DensityMatrix& rho, const Eigen::MatrixXcd& op) {
    const cplx v = expect(rho, op);
    if (std::abs(v.imag()) > 1e-10)
        throw NonRealResult("expect: imaginary residue " + std::to_string(v.imag()) + " exceeds 1e-10");
    return v.real();
}

inline double purity(const DensityMatrix& rho) { return rho.data.cwiseAbs2().sum(); }

inline double hermiticity_error(const DensityMatrix& rho) {
    return (rho.data - rho.data.adjoint()).cwiseAbs().maxCoeff();
}

inline double min_diagonal(const DensityMatrix& rho) { return rho.data.diagonal().real().minCoeff(); }

/// Coherent vector restricted to the truncation; throws when the retained
/// part misses more than tail_tol of its norm.
inline std::vector<cplx> trusted_coherent(cplx z, std::size_t dim, double tail_tol, const char* mode) {
    const double tail = coherent_tail(z, dim);
    if (tail > tail_tol)
        throw OutOfTrustRegion(std::string("exact_husimi: ") + mode + " label |" + std::to_string(std::abs(z))
                               + "| has coherent tail " + std::to_string(tail) + " beyond the Fock cutoff");
    return coherent_amplitudes(z, dim);
}

/// Q(a, b) = <a, b| rho |a, b> / pi^2.
inline double exact_husimi(const DensityMatrix& rho, cplx a, cplx b) {
    const auto fa = trusted_coherent(a, rho.field_dim, rho.tail_tol, "field");
    const auto mb = trusted_coherent(b, rho.mirror_dim, rho.tail_tol, "mirror");
    Eigen::VectorXcd v(static_cast<Eigen::Index>(rho.dim()));
    for (std::size_t i = 0; i < rho.field_dim; ++i)
        for (std::size_t j = 0; j < rho.mirror_dim; ++j)
            v(static_cast<Eigen::Index>(i * rho.mirror_dim + j)) = fa[i] * mb[j];
    const double q = (v.adjoint() * rho.data * v)(0, 0).real();
    return q / (std::numbers::pi * std::numbers::pi);
}

/// Partial trace over the mirror (field = true) or over the field.
inline Eigen::MatrixXcd reduced(const DensityMatrix& rho, bool field) {
    const auto fd = static_cast<Eigen::Index>(rho.field_dim);
    const auto md = static_cast<Eigen::Index>(rho.mirror_dim);
    if (field) {
        Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(fd, fd);
        for (Eigen::Index i = 0; i < fd; ++i)
            for (Eigen::Index j = 0; j < fd; ++j) r(i, j) = rho.data.block(i * md, j * md, md, md).trace();
        return r;
    }
    Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(md, md);
    for (Eigen::Index i = 0; i < fd; ++i) r += rho.data.block(i * md, i * md, md, md);
    return r;
}

// --------------------------------------------------------------------------
// ODQR1 dump: magic "ODQR1\0\0\0", uint64 field_dim, mirror_dim, n_eigen,
// n_eigen float64 eigenvalues, then dim^2 (re, im) float64 pairs of rho in
// row-major order. Everything little-endian.

inline constexpr std::array<char, 8> odqr1_magic{'O', 'D', 'Q', 'R', '1', '\0', '\0', '\0'};

namespace detail {

template <class T>
void write_le(std::ostream& out, T value) {
    static_assert(std::endian::native == std::endian::little, "ODQR1 writer assumes a little-endian host");
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw Error("ODQR1: truncated record");
    return value;
}

} // namespace detail

inline void write_odqr1(std::ostream& out, const DensityMatrix& rho, const Eigen::VectorXd& eigenvalues) {
    out.write(odqr1_magic.data(), odqr1_magic.size());
    detail::write_le<std::uint64_t>(out, rho.field_dim);
    detail::write_le<std::uint64_t>(out, rho.mirror_dim);
    detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(eigenvalues.size()));
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) detail::write_le(out, eigenvalues(i));
    for (Eigen::Index i = 0; i < rho.data.rows(); ++i)
        for (Eigen::Index j = 0; j < rho.data.cols(); ++j) {
            detail::write_le(out, rho.data(i, j).real());
            detail::write_le(out, rho.data(i, j).imag());
        }
}

struct Odqr1Record {
    std::size_t field_dim = 0;
    std::size_t mirror_dim = 0;
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXcd rho;
};

inline Odqr1Record read_odqr1(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != odqr1_magic) throw Error("ODQR1: bad magic header");
    Odqr1Record rec;
    rec.field_dim = detail::read_le<std::uint64_t>(in);
    rec.mirror_dim = detail::read_le<std::uint64_t>(in);
    const auto n_eigen = detail::read_le<std::uint64_t>(in);
    const auto d = static_cast<Eigen::Index>(rec.field_dim * rec.mirror_dim);
    rec.eigenvalues.resize(static_cast<Eigen::Index>(n_eigen));
    for (Eigen::Index i = 0; i < rec.eigenvalues.size(); ++i) rec.eigenvalues(i) = detail::read_le<double>(in);
    rec.rho.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) {
            const double re = detail::read_le<double>(in);
            const double im = detail::read_le<double>(in);
            rec.rho(i, j) = {re, im};
        }
    return rec;
}

} // namespace odq::fock
