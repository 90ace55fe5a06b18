#pragma once

// Analytic observables for the product coherent initial state.
//
// Every per-k expectation value <psi_k|A|psi_k> is a unitary expectation at
// tau = k/gamma. Inside photon sector n the mirror stays coherent with
// amplitude
//
//     phi_n(tau) = beta e^{-i nu tau} - (chi/nu) n (1 - e^{-i nu tau}),
//
// so every moment used here is a Laurent polynomial in u = e^{i nu tau} whose
// coefficients are polynomials in n. Averaging n over Poisson(|alpha|^2) and
// replacing u^m by the Poisson-resummed factor exp(gt (e^{i m nu/gamma} - 1))
// gives the closed forms.

#include "odq/coherent.hpp"
#include "odq/errors.hpp"
#include "odq/model.hpp"

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace odq::closedform {

inline constexpr double real_residue_tol = 1e-10;

namespace detail {

/// E[n^j] for n ~ Poisson(mu), via Touchard polynomials sum_i S(j, i) mu^i.
inline double poisson_raw_moment(int j, double mu) {
    // Stirling numbers of the second kind, row by row.
    std::vector<double> row{1.0};
    for (int r = 1; r <= j; ++r) {
        std::vector<double> next(static_cast<std::size_t>(r) + 1, 0.0);
        for (int i = 1; i <= r; ++i) {
            const double keep = i < r ? row[static_cast<std::size_t>(i)] : 0.0;
            next[static_cast<std::size_t>(i)] = static_cast<double>(i) * keep + row[static_cast<std::size_t>(i) - 1];
        }
        row = std::move(next);
    }
    double acc = 0.0;
    double mu_pow = 1.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
        acc += row[i] * mu_pow;
        mu_pow *= mu;
    }
    return acc;
}

/// sum_m u^m p_m(n) with p_m a polynomial in the photon number n.
class PhotonLaurent {
public:
    using Poly = std::vector<cplx>; // coefficient of n^0, n^1, ...

    void add(int power_u, std::size_t power_n, cplx coeff) {
        auto& p = terms_[power_u];
        if (p.size() <= power_n) p.resize(power_n + 1, cplx{0.0, 0.0});
        p[power_n] += coeff;
    }

    /// |phi_n|^2 = |beta|^2 + s n (beta* (1-u) + beta (1-u*)) + s^2 n^2 (2 - u - u*).
    static PhotonLaurent mirror_population(cplx beta, double s) {
        PhotonLaurent l;
        l.add(0, 0, std::norm(beta));
        l.add(0, 1, s * (beta + std::conj(beta)));
        l.add(0, 2, 2.0 * s * s);
        l.add(1, 1, -s * std::conj(beta));
        l.add(1, 2, -s * s);
        l.add(-1, 1, -s * beta);
        l.add(-1, 2, -s * s);
        return l;
    }

    /// phi_n + phi_n* = beta* u + beta u* - s n (2 - u - u*).
    static PhotonLaurent mirror_quadrature(cplx beta, double s) {
        PhotonLaurent l;
        l.add(0, 1, -2.0 * s);
        l.add(1, 0, std::conj(beta));
        l.add(1, 1, s);
        l.add(-1, 0, beta);
        l.add(-1, 1, s);
        return l;
    }

    PhotonLaurent operator+(const PhotonLaurent& o) const {
        PhotonLaurent r = *this;
        for (const auto& [m, p] : o.terms_)
            for (std::size_t j = 0; j < p.size(); ++j) r.add(m, j, p[j]);
        return r;
    }

    PhotonLaurent operator*(const PhotonLaurent& o) const {
        PhotonLaurent r;
        for (const auto& [m1, p1] : terms_)
            for (const auto& [m2, p2] : o.terms_)
                for (std::size_t i = 0; i < p1.size(); ++i)
                    for (std::size_t j = 0; j < p2.size(); ++j) r.add(m1 + m2, i + j, p1[i] * p2[j]);
        return r;
    }

    PhotonLaurent times_n() const {
        PhotonLaurent r;
        for (const auto& [m, p] : terms_)
            for (std::size_t j = 0; j < p.size(); ++j) r.add(m, j + 1, p[j]);
        return r;
    }

    /// Average over n ~ Poisson(mu): returns the coefficient of each u^m.
    std::map<int, cplx> photon_average(double mu) const {
        std::map<int, cplx> out;
        for (const auto& [m, p] : terms_) {
            cplx acc{0.0, 0.0};
            for (std::size_t j = 0; j < p.size(); ++j) acc += p[j] * poisson_raw_moment(static_cast<int>(j), mu);
            out[m] = acc;
        }
        return out;
    }

    /// Value at a fixed photon number n and phase factor u.
    cplx evaluate(double n, cplx u) const {
        cplx acc{0.0, 0.0};
        for (const auto& [m, p] : terms_) {
            cplx poly{0.0, 0.0};
            for (std::size_t j = p.size(); j-- > 0;) poly = poly * n + p[j];
            acc += poly * std::pow(u, m);
        }
        return acc;
    }

private:
    std::map<int, Poly> terms_;
};

/// Factor that replaces u^m: Poisson-resummed, unitary at time t, or a fixed tau.
using PhaseResum = std::function<cplx(int)>;

inline PhaseResum milburn_resum(const SystemParams& p, const DecoherenceParams& d, double t) {
    if (d.is_unitary()) {
        const double nu = p.nu();
        return [nu, t](int m) { return std::polar(1.0, static_cast<double>(m) * nu * t); };
    }
    const double nu = p.nu();
    const double g = d.gamma();
    return [nu, g, t](int m) { return poisson_resum(static_cast<double>(m) * nu / g, g, t); };
}

inline PhaseResum fixed_tau(const SystemParams& p, double tau) {
    const double nu = p.nu();
    return [nu, tau](int m) { return std::polar(1.0, static_cast<double>(m) * nu * tau); };
}

inline cplx resum(const std::map<int, cplx>& coeffs, const PhaseResum& factor) {
    cplx acc{0.0, 0.0};
    for (const auto& [m, c] : coeffs) acc += m == 0 ? c : c * factor(m);
    return acc;
}

inline double real_part(cplx z, const char* what) {
    if (std::abs(z.imag()) > real_residue_tol)
        throw NonRealResult(std::string(what) + ": imaginary residue " + std::to_string(z.imag()) + " exceeds 1e-10");
    return z.real();
}

inline void require_time(double t) {
    if (!(std::isfinite(t) && t >= 0.0)) throw std::invalid_argument("closedform: t must be finite and >= 0");
}

} // namespace detail

// --------------------------------------------------------------------------
// Unitary (Schroedinger) reference

struct UnitaryMoments {
    double phonons = 0.0;    // <N>
    double quadrature = 0.0; // <b^dagger + b>
    double photons = 0.0;    // <n>
    double neglected_mass = 0.0;
    bool truncation_warning = false;
};

/// Mirror amplitude in photon sector n after unitary evolution for time t.
inline cplx mirror_amplitude(const SystemParams& p, cplx beta, double n, double t) {
    const cplx rot = std::polar(1.0, -p.nu() * t);
    return beta * rot - p.coupling_ratio() * n * (1.0 - rot);
}

/// <N>, <b^dagger + b>, <n> of the unitary solution, summing the coherent
/// expansion over the retained photon numbers.
inline UnitaryMoments schrodinger_state_moments(const SystemParams& params, const CoherentPair& init, double t,
                                                const TruncationPolicy& trunc) {
    detail::require_time(t);
    const double mu = init.photon_mean();
    const auto weights = poisson_weights(mu, trunc.field_dim() - 1);
    UnitaryMoments out;
    for (std::size_t n = 0; n < weights.size(); ++n) {
        const cplx phi = mirror_amplitude(params, init.beta(), static_cast<double>(n), t);
        out.phonons += weights[n] * std::norm(phi);
        out.quadrature += weights[n] * 2.0 * phi.real();
    }
    out.photons = mu;
    out.neglected_mass = poisson_tail(mu, trunc.field_dim() - 1);
    out.truncation_warning = out.neglected_mass > trunc.tail_tol();
    return out;
}

/// Field-major joint Fock amplitudes psi[n * mirror_dim + m] of the unitary
/// solution. Sector n carries c_n e^{i theta_n} |phi_n> with
///   theta_n = -omega n t + n^2 (kappa t - (chi/nu)^2 sin nu t)
///             + (chi/nu) n (Im(beta e^{-i nu t}) - Im beta),
/// kappa the n^2 energy shift selected by `variant`.
inline std::vector<cplx> schrodinger_state(const SystemParams& params, const CoherentPair& init, double t,
                                           const TruncationPolicy& trunc,
                                           ExponentVariant variant = ExponentVariant::nu1,
                                           bool free_field_phase = true) {
    detail::require_time(t);
    const std::size_t fd = trunc.field_dim();
    const std::size_t md = trunc.mirror_dim();
    const double s = params.coupling_ratio();
    const double kappa = shift_coefficient(params, variant);
    const cplx beta = init.beta();
    const double beta_drift = (beta * std::polar(1.0, -params.nu() * t)).imag() - beta.imag();
    const auto field = coherent_amplitudes(init.alpha(), fd);

    std::vector<cplx> psi(fd * md, cplx{0.0, 0.0});
    for (std::size_t n = 0; n < fd; ++n) {
        if (field[n] == cplx{0.0, 0.0}) continue;
        const double nd = static_cast<double>(n);
        double theta = nd * nd * (kappa * t - s * s * std::sin(params.nu() * t)) + s * nd * beta_drift;
        if (free_field_phase) theta -= params.omega() * nd * t;
        const cplx cn = field[n] * std::polar(1.0, theta);
        const auto mirror = coherent_amplitudes(mirror_amplitude(params, beta, nd, t), md);
        for (std::size_t m = 0; m < md; ++m) psi[n * md + m] = cn * mirror[m];
    }
    return psi;
}

/// Analytic unitary moments at time tau in the untruncated space.
struct SectorMoments {
    double phonons = 0.0;
    double quadrature = 0.0;
    double phonons_sq = 0.0;    // <N^2>
    double photon_phonon = 0.0; // <n N>
};

inline SectorMoments unitary_moments(const SystemParams& params, const CoherentPair& init, double tau) {
    using detail::PhotonLaurent;
    const double s = params.coupling_ratio();
    const double mu = init.photon_mean();
    const auto pop = PhotonLaurent::mirror_population(init.beta(), s);
    const auto quad = PhotonLaurent::mirror_quadrature(init.beta(), s);
    const auto factor = detail::fixed_tau(params, tau);
    SectorMoments out;
    out.phonons = detail::resum(pop.photon_average(mu), factor).real();
    out.quadrature = detail::resum(quad.photon_average(mu), factor).real();
    out.phonons_sq = detail::resum((pop * pop + pop).photon_average(mu), factor).real();
    out.photon_phonon = detail::resum(pop.times_n().photon_average(mu), factor).real();
    return out;
}

// --------------------------------------------------------------------------
// Milburn closed forms

/// <N>(t) = |beta|^2 + (chi/nu)|alpha|^2 [beta*(1 - R) + beta(1 - R*)]
///          + (chi/nu)^2 |alpha|^2 (1 + |alpha|^2)(2 - R - R*),
/// R = exp(gt (e^{i nu/gamma} - 1)).
inline double expect_N(const SystemParams& params, const DecoherenceParams& deco, const CoherentPair& init, double t) {
    detail::require_time(t);
    const auto factor = detail::milburn_resum(params, deco, t);
    const cplx r_plus = factor(1);
    const cplx r_minus = factor(-1);
    const double s = params.coupling_ratio();
    const double a2 = init.photon_mean();
    const cplx beta = init.beta();
    const cplx value = std::norm(beta) + s * a2 * std::conj(beta) * (1.0 - r_plus) + s * a2 * beta * (1.0 - r_minus)
        + s * s * a2 * (1.0 + a2) * (2.0 - r_plus - r_minus);
    return detail::real_part(value, "expect_N");
}

/// <b^dagger + b>(t) = beta* R + beta R* - (chi/nu)|alpha|^2 (2 - R - R*).
inline double expect_quadrature(const SystemParams& params, const DecoherenceParams& deco, const CoherentPair& init,
                                double t) {
    detail::require_time(t);
    const auto factor = detail::milburn_resum(params, deco, t);
    const cplx r_plus = factor(1);
    const cplx r_minus = factor(-1);
    const double s = params.coupling_ratio();
    const cplx beta = init.beta();
    const cplx value = std::conj(beta) * r_plus + beta * r_minus - s * init.photon_mean() * (2.0 - r_plus - r_minus);
    return detail::real_part(value, "expect_quadrature");
}

/// Photon number is conserved: <n> = |alpha|^2.
inline double expect_n(const CoherentPair& init) noexcept { return init.photon_mean(); }

struct SecondMoment {
    double exact = 0.0;      // <N^2>, operator ordering included
    double as_printed = 0.0; // Poisson average of the squared per-k <N>
    double difference = 0.0; // exact - as_printed
};

namespace detail {

inline double printed_second_moment(const SystemParams& params, const DecoherenceParams& deco,
                                    const CoherentPair& init, double t, std::size_t k_max) {
    const double g = deco.gamma();
    const auto w = poisson_weights(g * t, k_max);
    double acc = 0.0;
    for (std::size_t k = 0; k <= k_max; ++k) {
        if (w[k] == 0.0) continue;
        const double n_k = unitary_moments(params, init, static_cast<double>(k) / g).phonons;
        acc += w[k] * n_k * n_k;
    }
    return acc;
}

} // namespace detail

/// <N^2> both exactly (resummed <psi_k|N^2|psi_k>) and as the Poisson average
/// of the squared per-k <N>, the latter summed to k_max.
inline SecondMoment expect_N2(const SystemParams& params, const DecoherenceParams& deco, const CoherentPair& init,
                              double t, const TruncationPolicy& trunc) {
    using detail::PhotonLaurent;
    detail::require_time(t);
    const auto pop = PhotonLaurent::mirror_population(init.beta(), params.coupling_ratio());
    const auto factor = detail::milburn_resum(params, deco, t);
    SecondMoment out;
    out.exact = detail::real_part(detail::resum((pop * pop + pop).photon_average(init.photon_mean()), factor),
                                  "expect_N2");
    if (deco.is_unitary()) {
        const double n_t = expect_N(params, deco, init, t);
        out.as_printed = n_t * n_t;
    } else {
        const double base = detail::printed_second_moment(params, deco, init, t, trunc.k_max());
        const double refined = detail::printed_second_moment(params, deco, init, t, 2 * trunc.k_max());
        if (std::abs(refined - base) > trunc.tail_tol() * std::abs(refined))
            throw TruncationNotConverged("expect_N2: doubling k_max moved the printed second moment by "
                                         + std::to_string(std::abs(refined - base)));
        out.as_printed = base;
    }
    out.difference = out.exact - out.as_printed;
    return out;
}

enum class HomVariant { corrected, as_printed };

struct MandelResult {
    double value = 0.0;
    bool super_poissonian = false; // value > 1
};

/// var(N) / <N>, with <N^2> from the exact (corrected) or printed moment.
inline MandelResult hom_parameter_N(const SystemParams& params, const DecoherenceParams& deco,
                                    const CoherentPair& init, double t, const TruncationPolicy& trunc,
                                    HomVariant variant = HomVariant::corrected) {
    const double mean = expect_N(params, deco, init, t);
    if (!(mean > 0.0)) throw DivisionByZero("hom_parameter_N: <N> = 0");
    const auto second = expect_N2(params, deco, init, t, trunc);
    const double m2 = variant == HomVariant::corrected ? second.exact : second.as_printed;
    MandelResult out;
    out.value = (m2 - mean * mean) / mean;
    out.super_poissonian = out.value > 1.0;
    return out;
}

struct Covariance {
    double exact = 0.0;      // third photon moment |a|^6 + 3|a|^4 + |a|^2
    double as_printed = 0.0; // third moment coefficient |a|^2 (1 + 3|a|^2 + |a|^2)
};

/// cov(n, N) = <n N> - <n><N>.
inline Covariance covariance_nN(const SystemParams& params, const DecoherenceParams& deco, const CoherentPair& init,
                                double t) {
    using detail::PhotonLaurent;
    detail::require_time(t);
    const double s = params.coupling_ratio();
    const double a2 = init.photon_mean();
    const cplx beta = init.beta();
    const auto factor = detail::milburn_resum(params, deco, t);
    const auto pop = PhotonLaurent::mirror_population(beta, s);

    const double mean_N = detail::real_part(detail::resum(pop.photon_average(a2), factor), "covariance_nN");
    const double joint = detail::real_part(detail::resum(pop.times_n().photon_average(a2), factor), "covariance_nN");

    const cplx r_plus = factor(1);
    const cplx r_minus = factor(-1);
    const cplx printed = a2 * std::norm(beta)
        + s * a2 * (1.0 + a2) * (std::conj(beta) * (1.0 - r_plus) + beta * (1.0 - r_minus))
        + s * s * a2 * (1.0 + 3.0 * a2 + a2) * (2.0 - r_plus - r_minus);

    Covariance out;
    out.exact = joint - a2 * mean_N;
    out.as_printed = detail::real_part(printed, "covariance_nN") - a2 * mean_N;
    return out;
}

// --------------------------------------------------------------------------
// Series carrier

struct ParameterSet {
    SystemParams params;
    DecoherenceParams deco;
    CoherentPair init;
};

struct ObservableSeries {
    TimeGrid grid;
    std::vector<double> values;
    std::string label;
    ParameterSet meta;
};

/// Samples `f(t)` on every grid point.
template <class F>
ObservableSeries sample(std::string label, const TimeGrid& grid, const ParameterSet& meta, F&& f) {
    ObservableSeries out{grid, {}, std::move(label), meta};
    out.values.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out.values.push_back(f(grid[i]));
    return out;
}

} // namespace odq::closedform
