#pragma once

// The product coherent state evolved sector by sector:
//     psi = sum_n c_n |n> (x) chi_n,
// where c_n are the truncated, renormalized field amplitudes and each chi_n
// is a unit mirror vector propagated with its own tridiagonal Hamiltonian.
// The Milburn series needs psi_k = e^{-i k H / gamma} psi(0) for every k, so
// the ensemble is advanced one step of 1/gamma at a time and observers read
// each psi_k as it is produced.

#include "odq/coherent.hpp"
#include "odq/errors.hpp"
#include "odq/fock/krylov.hpp"
#include "odq/fock/operators.hpp"
#include "odq/model.hpp"
#include "odq/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

namespace odq::fock {

struct EnsembleOptions {
    KrylovOptions krylov;
    std::size_t threads = 1;
    /// Photon sectors with |c_n|^2 below this are left out; their mass is
    /// reported in dropped_mass().
    double sector_cut = 1e-30;
};

/// Moments of a single (normalized) pure state.
struct StateMoments {
    double norm = 0.0;
    double photons = 0.0;       // <n>
    double photons_sq = 0.0;    // <n^2>
    double phonons = 0.0;       // <N>
    double phonons_sq = 0.0;    // <N^2>
    double quadrature = 0.0;    // <b^dagger + b>
    double photon_phonon = 0.0; // <n N>

    StateMoments& add_scaled(const StateMoments& o, double w) {
        norm += w * o.norm;
        photons += w * o.photons;
        photons_sq += w * o.photons_sq;
        phonons += w * o.phonons;
        phonons_sq += w * o.phonons_sq;
        quadrature += w * o.quadrature;
        photon_phonon += w * o.photon_phonon;
        return *this;
    }
};

/// Mirror moments of one sector vector.
struct MirrorMoments {
    double norm = 0.0;
    double phonons = 0.0;
    double phonons_sq = 0.0;
    double quadrature = 0.0;
};

inline MirrorMoments mirror_moments(const SectorState& s) {
    MirrorMoments out;
    for (std::size_t i = 0; i < s.amp.size(); ++i) {
        const double m = static_cast<double>(s.lo + i);
        const double p = std::norm(s.amp[i]);
        out.norm += p;
        out.phonons += m * p;
        out.phonons_sq += m * m * p;
        if (i + 1 < s.amp.size()) out.quadrature += 2.0 * std::sqrt(m + 1.0) * (std::conj(s.amp[i]) * s.amp[i + 1]).real();
    }
    return out;
}

/// <u|v> for two windowed mirror vectors.
inline cplx sector_overlap(const SectorState& u, const SectorState& v) {
    const std::size_t lo = std::max(u.lo, v.lo);
    const std::size_t hi = std::min(u.hi(), v.hi());
    cplx acc{0.0, 0.0};
    for (std::size_t m = lo; m < hi; ++m) acc += std::conj(u.amp[m - u.lo]) * v.amp[m - v.lo];
    return acc;
}

class SectorEnsemble {
public:
    SectorEnsemble(const SystemParams& params, const CoherentPair& init, const TruncationPolicy& trunc,
                   EnsembleOptions opts = {})
        : params_(params), field_dim_(trunc.field_dim()), mirror_dim_(trunc.mirror_dim()), opts_(opts) {
        field_ = coherent_amplitudes(init.alpha(), field_dim_);
        double kept = 0.0;
        for (auto& c : field_) {
            if (std::norm(c) < opts_.sector_cut) {
                dropped_mass_ += std::norm(c);
                c = 0.0;
            }
            kept += std::norm(c);
        }
        field_tail_ = std::max(0.0, 1.0 - kept);
        const double field_scale = 1.0 / std::sqrt(kept);
        for (auto& c : field_) c *= field_scale;

        const auto window = coherent_support(init.beta(), mirror_dim_);
        const auto full = coherent_amplitudes(init.beta(), mirror_dim_);
        SectorState mirror;
        mirror.lo = window.lo;
        mirror.amp.assign(full.begin() + static_cast<std::ptrdiff_t>(window.lo),
                          full.begin() + static_cast<std::ptrdiff_t>(window.hi));
        double mirror_kept = 0.0;
        for (const auto& z : full) mirror_kept += std::norm(z);
        mirror_tail_ = std::max(0.0, 1.0 - mirror_kept);
        const double mirror_scale = 1.0 / std::sqrt(mirror.norm_sq());
        for (auto& z : mirror.amp) z *= mirror_scale;

        sectors_.assign(field_dim_, SectorState{});
        for (std::size_t n = 0; n < field_dim_; ++n) {
            if (field_[n] == cplx{0.0, 0.0}) continue;
            sectors_[n] = mirror;
            active_.push_back(n);
        }
    }

    std::size_t field_dim() const noexcept { return field_dim_; }
    std::size_t mirror_dim() const noexcept { return mirror_dim_; }
    const SystemParams& params() const noexcept { return params_; }
    /// Renormalized field amplitudes c_n; zero for skipped sectors.
    const std::vector<cplx>& field() const noexcept { return field_; }
    const std::vector<SectorState>& sectors() const noexcept { return sectors_; }
    /// Photon numbers of the propagated sectors, ascending.
    const std::vector<std::size_t>& active() const noexcept { return active_; }
    double time() const noexcept { return time_; }
    /// Coherent-state mass beyond field_dim / mirror_dim removed by
    /// renormalizing psi(0), and the mass of skipped sectors.
    double field_tail() const noexcept { return field_tail_; }
    double mirror_tail() const noexcept { return mirror_tail_; }
    double dropped_mass() const noexcept { return dropped_mass_; }
    const KrylovStats& stats() const noexcept { return stats_; }

    /// psi <- e^{-i H tau} psi.
    void advance(double tau) {
        std::vector<KrylovStats> per(active_.size());
        parallel_for(active_.size(), opts_.threads, [&](std::size_t i) {
            const std::size_t n = active_[i];
            const SectorHamiltonian h(params_, n, mirror_dim_);
            krylov_propagate(h, sectors_[n], tau, opts_.krylov, &per[i]);
        });
        for (const auto& s : per) stats_.merge(s);
        time_ += tau;
    }

    StateMoments moments() const {
        StateMoments out;
        for (const std::size_t n : active_) {
            const double w = std::norm(field_[n]);
            const double nd = static_cast<double>(n);
            const auto mm = mirror_moments(sectors_[n]);
            out.norm += w * mm.norm;
            out.photons += w * nd * mm.norm;
            out.photons_sq += w * nd * nd * mm.norm;
            out.phonons += w * mm.phonons;
            out.phonons_sq += w * mm.phonons_sq;
            out.quadrature += w * mm.quadrature;
            out.photon_phonon += w * nd * mm.phonons;
        }
        return out;
    }

    /// Dense field-major amplitudes; only for small truncations.
    std::vector<cplx> joint_vector(std::size_t budget = default_dense_budget) const {
        check_dense_budget(field_dim_, mirror_dim_, budget);
        std::vector<cplx> psi(field_dim_ * mirror_dim_, cplx{0.0, 0.0});
        for (const std::size_t n : active_) {
            const auto& s = sectors_[n];
            for (std::size_t i = 0; i < s.amp.size(); ++i) psi[n * mirror_dim_ + s.lo + i] = field_[n] * s.amp[i];
        }
        return psi;
    }

private:
    SystemParams params_;
    std::size_t field_dim_;
    std::size_t mirror_dim_;
    EnsembleOptions opts_;
    std::vector<cplx> field_;
    std::vector<SectorState> sectors_;
    std::vector<std::size_t> active_;
    double field_tail_ = 0.0;
    double mirror_tail_ = 0.0;
    double dropped_mass_ = 0.0;
    double time_ = 0.0;
    KrylovStats stats_;
};

/// Runs psi_k for k = 0..k_max, calling observe(k, ensemble) on each.
inline void for_each_k(SectorEnsemble& ensemble, const DecoherenceParams& deco, std::size_t k_max,
                       const std::function<void(std::size_t, const SectorEnsemble&)>& observe) {
    if (deco.is_unitary()) throw std::invalid_argument("for_each_k: the unitary limit has no Poisson series");
    const double tau = 1.0 / deco.gamma();
    for (std::size_t k = 0; k <= k_max; ++k) {
        if (k > 0) ensemble.advance(tau);
        observe(k, ensemble);
    }
}

/// Observables of rho(t) = sum_{k <= k_max} P(k; gamma t) |psi_k><psi_k|.
struct OracleMoments {
    StateMoments raw;          // tr(rho A), not renormalized
    double neglected_mass = 0; // Poisson mass beyond k_max

    double trace() const noexcept { return raw.norm; }
    double phonons() const noexcept { return raw.phonons; }
    double photons() const noexcept { return raw.photons; }
    double quadrature() const noexcept { return raw.quadrature; }
    double phonons_sq() const noexcept { return raw.phonons_sq; }
    double variance_N() const noexcept { return raw.phonons_sq - raw.phonons * raw.phonons; }
    double mandel_N() const { return variance_N() / raw.phonons; }
    double covariance_nN() const noexcept { return raw.photon_phonon - raw.photons * raw.phonons; }
};

/// Per-k moment table of the Milburn series, from which rho(t) moments at any
/// t follow by Poisson weighting.
class MilburnSeries {
public:
    MilburnSeries(const SystemParams& params, const DecoherenceParams& deco, const CoherentPair& init,
                  const TruncationPolicy& trunc, EnsembleOptions opts = {})
        : deco_(deco), k_max_(trunc.k_max()) {
        SectorEnsemble ensemble(params, init, trunc, opts);
        per_k_.reserve(k_max_ + 1);
        for_each_k(ensemble, deco, k_max_, [&](std::size_t, const SectorEnsemble& e) { per_k_.push_back(e.moments()); });
        stats_ = ensemble.stats();
        field_tail_ = ensemble.field_tail();
        mirror_tail_ = ensemble.mirror_tail();
    }

    std::size_t k_max() const noexcept { return k_max_; }
    const std::vector<StateMoments>& per_k() const noexcept { return per_k_; }
    const KrylovStats& stats() const noexcept { return stats_; }
    double field_tail() const noexcept { return field_tail_; }
    double mirror_tail() const noexcept { return mirror_tail_; }

    OracleMoments at(double t) const {
        if (!(std::isfinite(t) && t >= 0.0)) throw std::invalid_argument("MilburnSeries::at: t must be finite and >= 0");
        const double mean = deco_.gamma() * t;
        const auto w = poisson_weights(mean, k_max_);
        OracleMoments out;
        for (std::size_t k = 0; k <= k_max_; ++k)
            if (w[k] > 0.0) out.raw.add_scaled(per_k_[k], w[k]);
        out.neglected_mass = poisson_tail(mean, k_max_);
        return out;
    }

private:
    DecoherenceParams deco_;
    std::size_t k_max_;
    std::vector<StateMoments> per_k_;
    KrylovStats stats_;
    double field_tail_ = 0.0;
    double mirror_tail_ = 0.0;
};

/// Unitary evolution psi(t) = e^{-i H t} psi(0) sampled along increasing times.
inline std::vector<StateMoments> unitary_series(const SystemParams& params, const CoherentPair& init,
                                                const TruncationPolicy& trunc, const std::vector<double>& times,
                                                EnsembleOptions opts = {}) {
    SectorEnsemble ensemble(params, init, trunc, opts);
    std::vector<StateMoments> out;
    out.reserve(times.size());
    for (const double t : times) {
        if (t < ensemble.time()) throw std::invalid_argument("unitary_series: times must be nondecreasing");
        ensemble.advance(t - ensemble.time());
        out.push_back(ensemble.moments());
    }
    return out;
}

} // namespace odq::fock
