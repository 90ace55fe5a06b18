#pragma once

// Parameter, state and truncation value types shared by every module, plus
// the Poisson-weight utilities behind the decoherence series.

#include "odq/errors.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace odq {

using cplx = std::complex<double>;

namespace detail {

inline bool finite(double x) noexcept { return std::isfinite(x); }
inline bool finite(cplx z) noexcept { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

inline void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

} // namespace detail

/// Frequencies of the field (omega) and mirror (nu) and the radiation-pressure
/// coupling chi. All share one reference-frequency unit.
class SystemParams {
public:
    SystemParams(double omega, double nu, double chi) : omega_(omega), nu_(nu), chi_(chi) {
        detail::require(detail::finite(omega) && detail::finite(nu) && detail::finite(chi),
                        "SystemParams: non-finite field");
        detail::require(nu > 0.0, "SystemParams: nu must be > 0");
        detail::require(chi >= 0.0, "SystemParams: chi must be >= 0");
    }

    double omega() const noexcept { return omega_; }
    double nu() const noexcept { return nu_; }
    double chi() const noexcept { return chi_; }
    /// chi / nu, the per-photon mirror displacement.
    double coupling_ratio() const noexcept { return chi_ / nu_; }

    SystemParams with_nu(double nu) const { return {omega_, nu, chi_}; }
    SystemParams with_chi(double chi) const { return {omega_, nu_, chi}; }

private:
    double omega_;
    double nu_;
    double chi_;
};

/// Intrinsic-decoherence rate. The unitary limit stands for gamma -> infinity.
class DecoherenceParams {
public:
    explicit DecoherenceParams(double gamma) : gamma_(gamma), unitary_(false) {
        detail::require(detail::finite(gamma) && gamma > 0.0, "DecoherenceParams: gamma must be finite and > 0");
    }

    static DecoherenceParams unitary_limit() { return DecoherenceParams{}; }

    bool is_unitary() const noexcept { return unitary_; }
    double gamma() const noexcept { return unitary_ ? std::numeric_limits<double>::infinity() : gamma_; }

private:
    DecoherenceParams() : gamma_(std::numeric_limits<double>::infinity()), unitary_(true) {}

    double gamma_;
    bool unitary_;
};

/// Initial product coherent state |alpha>_field |beta>_mirror.
class CoherentPair {
public:
    static constexpr double default_max_amplitude = 20.0;

    CoherentPair(cplx alpha, cplx beta, double max_amplitude = default_max_amplitude)
        : alpha_(alpha), beta_(beta) {
        detail::require(detail::finite(alpha) && detail::finite(beta), "CoherentPair: non-finite amplitude");
        detail::require(std::abs(alpha) <= max_amplitude, "CoherentPair: |alpha| exceeds the amplitude bound");
        detail::require(std::abs(beta) <= max_amplitude, "CoherentPair: |beta| exceeds the amplitude bound");
    }

    cplx alpha() const noexcept { return alpha_; }
    cplx beta() const noexcept { return beta_; }
    /// Mean photon number |alpha|^2.
    double photon_mean() const noexcept { return std::norm(alpha_); }

private:
    cplx alpha_;
    cplx beta_;
};

/// Fock cutoffs for both modes, the Poisson-series cutoff, and the tolerated
/// probability mass outside the truncated space.
class TruncationPolicy {
public:
    TruncationPolicy(std::size_t field_dim, std::size_t mirror_dim, std::size_t k_max, double tail_tol)
        : field_dim_(field_dim), mirror_dim_(mirror_dim), k_max_(k_max), tail_tol_(tail_tol) {
        detail::require(field_dim >= 1 && mirror_dim >= 1 && k_max >= 1, "TruncationPolicy: dimensions must be >= 1");
        detail::require(detail::finite(tail_tol) && tail_tol >= 0.0 && tail_tol < 1.0,
                        "TruncationPolicy: tail_tol must lie in [0, 1)");
    }

    std::size_t field_dim() const noexcept { return field_dim_; }
    std::size_t mirror_dim() const noexcept { return mirror_dim_; }
    std::size_t k_max() const noexcept { return k_max_; }
    double tail_tol() const noexcept { return tail_tol_; }
    std::size_t joint_dim() const noexcept { return field_dim_ * mirror_dim_; }

    TruncationPolicy doubled() const { return {2 * field_dim_, 2 * mirror_dim_, 2 * k_max_, tail_tol_}; }

private:
    std::size_t field_dim_;
    std::size_t mirror_dim_;
    std::size_t k_max_;
    double tail_tol_;
};

/// Uniform time sampling t_i = t_start + (t_end - t_start) * i / (n - 1).
class TimeGrid {
public:
    TimeGrid(double t_start, double t_end, std::size_t n_points)
        : t_start_(t_start), t_end_(t_end), n_points_(n_points) {
        detail::require(detail::finite(t_start) && detail::finite(t_end), "TimeGrid: non-finite bound");
        detail::require(t_start >= 0.0 && t_start <= t_end, "TimeGrid: need 0 <= t_start <= t_end");
        detail::require(n_points >= 2, "TimeGrid: need at least two points");
    }

    double t_start() const noexcept { return t_start_; }
    double t_end() const noexcept { return t_end_; }
    std::size_t size() const noexcept { return n_points_; }

    double operator[](std::size_t i) const noexcept {
        if (i + 1 == n_points_) return t_end_;
        return t_start_ + (t_end_ - t_start_) * static_cast<double>(i) / static_cast<double>(n_points_ - 1);
    }

    std::vector<double> points() const {
        std::vector<double> out(n_points_);
        for (std::size_t i = 0; i < n_points_; ++i) out[i] = (*this)[i];
        return out;
    }

private:
    double t_start_;
    double t_end_;
    std::size_t n_points_;
};

/// Coefficient of the n^2 energy shift in the displaced-frame Hamiltonian:
/// chi^2/nu (nu1, what the displacement algebra gives) or chi^2/nu^2 (nu2,
/// the form printed for the diagonal Hamiltonian and the Husimi formula).
enum class ExponentVariant { nu1, nu2 };

inline double shift_coefficient(const SystemParams& p, ExponentVariant v) noexcept {
    const double chi2 = p.chi() * p.chi();
    return v == ExponentVariant::nu1 ? chi2 / p.nu() : chi2 / (p.nu() * p.nu());
}

// --------------------------------------------------------------------------
// Poisson utilities

/// Poisson probabilities P(k; mean) for k = 0..k_max, evaluated in log space.
inline std::vector<double> poisson_weights(double mean, std::size_t k_max) {
    detail::require(detail::finite(mean) && mean >= 0.0, "poisson_weights: mean must be finite and >= 0");
    std::vector<double> w(k_max + 1, 0.0);
    if (mean == 0.0) {
        w[0] = 1.0;
        return w;
    }
    const double log_mean = std::log(mean);
    for (std::size_t k = 0; k <= k_max; ++k) {
        const double kd = static_cast<double>(k);
        w[k] = std::exp(kd * log_mean - mean - std::lgamma(kd + 1.0));
    }
    return w;
}

/// Probability mass strictly above k_max, P(X > k_max) for X ~ Poisson(mean).
inline double poisson_tail(double mean, std::size_t k_max) {
    detail::require(detail::finite(mean) && mean >= 0.0, "poisson_tail: mean must be finite and >= 0");
    if (mean == 0.0) return 0.0;
    // P(X > k) equals the regularized lower incomplete gamma P(k + 1, mean).
    return boost::math::gamma_p(static_cast<double>(k_max) + 1.0, mean);
}

/// e^{-gt} sum_k (gt)^k / k! e^{i k theta} = exp(gt (e^{i theta} - 1)).
///
/// The exponent is formed as gt * (-2 sin^2(theta/2) + i sin theta) so small
/// theta (large gamma) does not cancel.
inline cplx poisson_resum(double theta, double gamma, double t) {
    detail::require(gamma > 0.0 && t >= 0.0, "poisson_resum: need gamma > 0 and t >= 0");
    if (t == 0.0) return {1.0, 0.0};
    const double gt = gamma * t;
    const double s = std::sin(0.5 * theta);
    const double re = -2.0 * gt * s * s;
    const double im = gt * std::sin(theta);
    return std::exp(re) * cplx{std::cos(im), std::sin(im)};
}

/// Decimal digits by which the damped series terms fall below the constant
/// ones: gt (1 - cos theta) / ln 10. Past `flag_digits` the oscillating parts
/// are below double resolution relative to the undamped terms.
struct ResummationDiagnostic {
    double digits_lost = 0.0;
    bool flagged = false;
};

inline ResummationDiagnostic diagnose_resummation(double theta, double gamma, double t, double flag_digits = 8.0) {
    detail::require(gamma > 0.0 && t >= 0.0, "diagnose_resummation: need gamma > 0 and t >= 0");
    const double s = std::sin(0.5 * theta);
    const double digits = 2.0 * gamma * t * s * s / std::numbers::ln10;
    return {digits, digits > flag_digits};
}

// --------------------------------------------------------------------------
// Truncation sizing

namespace detail {

// Smallest dimension whose Poisson(mean) tail lies below tol, starting from
// the mean + 8 sigma + 20 floor.
inline std::size_t poisson_sized_dim(double amplitude, double tol) {
    const double floor_dim = amplitude * amplitude + 8.0 * amplitude + 20.0;
    auto dim = static_cast<std::size_t>(std::ceil(floor_dim));
    const double mean = amplitude * amplitude;
    while (mean > 0.0 && dim < (std::size_t{1} << 40) && poisson_tail(mean, dim - 1) >= tol) dim += 1 + dim / 16;
    return dim;
}

} // namespace detail

/// Truncation guaranteed by Poisson / coherent tail bounds to leave less than
/// tail_tol probability outside the retained space over [0, t_max].
inline TruncationPolicy default_truncation(const SystemParams& params, const CoherentPair& init,
                                           const DecoherenceParams& deco, double t_max, double tail_tol,
                                           std::size_t max_joint_dim = 4096) {
    detail::require(detail::finite(t_max) && t_max >= 0.0, "default_truncation: t_max must be finite and >= 0");
    detail::require(detail::finite(tail_tol) && tail_tol > 0.0 && tail_tol < 1.0,
                    "default_truncation: tail_tol must lie in (0, 1)");

    const double abs_alpha = std::abs(init.alpha());
    const double abs_beta = std::abs(init.beta());

    const std::size_t field_dim = detail::poisson_sized_dim(abs_alpha, tail_tol);

    // With alpha == 0 only the vacuum photon sector is populated, so the
    // mirror never leaves |beta|.
    const double displacement = abs_alpha == 0.0
        ? abs_beta
        : std::max(abs_beta, abs_beta + 2.0 * params.coupling_ratio() * static_cast<double>(field_dim));
    const std::size_t mirror_dim = detail::poisson_sized_dim(displacement, tail_tol);

    std::size_t k_max = 25;
    if (!deco.is_unitary()) {
        const double gt = deco.gamma() * t_max;
        k_max = static_cast<std::size_t>(std::ceil(gt + 12.0 * std::sqrt(gt + 1.0) + 25.0));
        while (poisson_tail(gt, k_max) >= tail_tol) k_max += 1 + k_max / 16;
    }

    if (field_dim * mirror_dim > max_joint_dim) {
        std::ostringstream msg;
        msg << "default_truncation: field_dim " << field_dim << " x mirror_dim " << mirror_dim << " = "
            << field_dim * mirror_dim << " exceeds the budget " << max_joint_dim << "; ";
        if (mirror_dim >= field_dim)
            msg << "mirror_dim is driven by |beta| = " << abs_beta << " displaced to " << displacement
                << " by |alpha| = " << abs_alpha;
        else
            msg << "field_dim is driven by |alpha| = " << abs_alpha;
        throw DimensionBudgetExceeded(msg.str());
    }
    return {field_dim, mirror_dim, k_max, tail_tol};
}

} // namespace odq
