#pragma once

// Husimi Q over phase-space grids: the closed-form expression for a product
// coherent initial state, and the exact Q of the Milburn mixture read off the
// propagated sector states.

#include "odq/coherent.hpp"
#include "odq/errors.hpp"
#include "odq/fock/ensemble.hpp"
#include "odq/model.hpp"
#include "odq/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace odq::husimi {

enum class Subsystem { field, mirror };
enum class QSource { paper_formula, oracle_exact };

inline const char* to_string(Subsystem s) { return s == Subsystem::field ? "field" : "mirror"; }
inline const char* to_string(QSource s) { return s == QSource::paper_formula ? "paper_formula" : "oracle_exact"; }

/// Uniform n x n lattice over center +- half_width in both the real and the
/// imaginary direction. Points are row-major: the imaginary part is the outer
/// index, the real part the inner one.
class PhaseSpaceGrid {
public:
    PhaseSpaceGrid(cplx center, double half_width, std::size_t n_per_axis)
        : center_(center), half_width_(half_width), n_(n_per_axis) {
        if (!(std::isfinite(center.real()) && std::isfinite(center.imag())))
            throw std::invalid_argument("PhaseSpaceGrid: center must be finite");
        if (!(std::isfinite(half_width) && half_width > 0.0))
            throw std::invalid_argument("PhaseSpaceGrid: half_width must be finite and > 0");
        if (n_per_axis < 2) throw std::invalid_argument("PhaseSpaceGrid: n_per_axis must be >= 2");
    }

    /// Centered on the amplitude, half width 4 + |amplitude|, 201 per axis.
    static PhaseSpaceGrid around(cplx amplitude, std::size_t n_per_axis = 201) {
        return {amplitude, 4.0 + std::abs(amplitude), n_per_axis};
    }

    cplx center() const noexcept { return center_; }
    double half_width() const noexcept { return half_width_; }
    std::size_t n_per_axis() const noexcept { return n_; }
    std::size_t size() const noexcept { return n_ * n_; }
    double spacing() const noexcept { return 2.0 * half_width_ / static_cast<double>(n_ - 1); }
    double cell_area() const noexcept { return spacing() * spacing(); }

    double axis(std::size_t i) const noexcept {
        // Exact endpoints regardless of rounding in the spacing.
        if (i + 1 == n_) return half_width_;
        return -half_width_ + static_cast<double>(i) * spacing();
    }

    cplx point(std::size_t index) const noexcept {
        return center_ + cplx(axis(index % n_), axis(index / n_));
    }

private:
    cplx center_;
    double half_width_;
    std::size_t n_;
};

struct QField {
    PhaseSpaceGrid grid;
    std::vector<double> values;
    QSource source = QSource::oracle_exact;
    Subsystem subsystem = Subsystem::field;
    bool marginal = false;
    cplx fixed{0.0, 0.0}; // complementary label of a slice
    double t = 0.0;
    double neglected_weight = 0.0; // Poisson weight left out of an oracle raster

    /// Riemann sum of the values over the grid.
    double normalization() const {
        double acc = 0.0;
        for (double v : values) acc += v;
        return acc * grid.cell_area();
    }

    std::size_t argmax() const {
        return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
    }
};

// --------------------------------------------------------------------------
// Closed-form Q

/// The real number x with bracket [w f + nu g - c h] = i x, where f, g, h
/// are the differences z - z^* of the printed field and mirror terms.
inline double paper_bracket(const SystemParams& params, const CoherentPair& init, cplx a, cplx b,
                            ExponentVariant variant = ExponentVariant::nu2) {
    const cplx alpha = init.alpha();
    const double s = params.coupling_ratio();
    const cplx f = std::conj(a) * alpha - a * std::conj(alpha);
    const cplx left = b + s * std::norm(a);
    const cplx right = init.beta() + s * std::norm(alpha);
    const cplx g = std::conj(left) * right - left * std::conj(right);
    const cplx h = std::conj(a) * std::conj(a) * alpha * alpha - a * a * std::conj(alpha) * std::conj(alpha);
    const cplx x = params.omega() * f + params.nu() * g - shift_coefficient(params, variant) * h;
    const double scale = params.omega() * std::abs(f) + params.nu() * std::abs(g)
                         + shift_coefficient(params, variant) * std::abs(h);
    if (std::abs(x.real()) > 1e-10 * std::max(1.0, scale))
        throw ComplexResidue("paper_q: bracket has real part " + std::to_string(x.real()));
    return x.imag();
}

/// log of the printed time factor e^{-gt} exp(gt e^{-(i/g)[...]}); the
/// bracket is imaginary, so this is gt (e^{x/g} - 1) and may be positive.
inline double paper_log_time_factor(const DecoherenceParams& deco, double x, double t) {
    if (t == 0.0) return 0.0;
    if (deco.is_unitary()) return x * t;
    const double g = deco.gamma();
    return g * t * std::expm1(x / g);
}

/// The closed-form joint Q(a, b) with its printed 1/pi prefactor. Where the
/// time factor overflows the result is +inf.
inline double paper_q(const SystemParams& params, const DecoherenceParams& deco, const CoherentPair& init, cplx a,
                      cplx b, double t, ExponentVariant variant = ExponentVariant::nu2) {
    if (!(std::isfinite(t) && t >= 0.0)) throw std::invalid_argument("paper_q: t must be finite and >= 0");
    const double s = params.coupling_ratio();
    const double log_field = -std::norm(a - init.alpha());
    const double log_mirror = -std::norm((b - init.beta()) + s * (std::norm(a) - std::norm(init.alpha())));
    double log_time = 0.0;
    if (t > 0.0) log_time = paper_log_time_factor(deco, paper_bracket(params, init, a, b, variant), t);
    const double log_q = log_time + log_field + log_mirror;
    if (std::isnan(log_q)) throw ComplexResidue("paper_q: undefined value");
    return std::exp(log_q) / std::numbers::pi;
}

/// Printed Q on a 2-D slice, the complementary label held at `fixed`.
inline QField paper_slice(Subsystem which, const SystemParams& params, const DecoherenceParams& deco,
                          const CoherentPair& init, const PhaseSpaceGrid& grid, cplx fixed, double t,
                          ExponentVariant variant = ExponentVariant::nu2, std::size_t threads = 1) {
    QField out{grid, std::vector<double>(grid.size()), QSource::paper_formula, which, false, fixed, t, 0.0};
    parallel_for(grid.size(), threads, [&](std::size_t i) {
        const cplx z = grid.point(i);
        out.values[i] = which == Subsystem::field ? paper_q(params, deco, init, z, fixed, t, variant)
                                                  : paper_q(params, deco, init, fixed, z, t, variant);
    });
    return out;
}

/// Printed Q summed over the complementary label on `complement`.
inline QField paper_marginal(Subsystem which, const SystemParams& params, const DecoherenceParams& deco,
                             const CoherentPair& init, const PhaseSpaceGrid& grid, const PhaseSpaceGrid& complement,
                             double t, ExponentVariant variant = ExponentVariant::nu2, std::size_t threads = 1) {
    QField out{grid, std::vector<double>(grid.size()), QSource::paper_formula, which, true, {}, t, 0.0};
    const double area = complement.cell_area();
    parallel_for(grid.size(), threads, [&](std::size_t i) {
        const cplx z = grid.point(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < complement.size(); ++j) {
            const cplx w = complement.point(j);
            acc += which == Subsystem::field ? paper_q(params, deco, init, z, w, t, variant)
                                             : paper_q(params, deco, init, w, z, t, variant);
        }
        out.values[i] = acc * area;
    });
    return out;
}

// --------------------------------------------------------------------------
// Exact Q from the propagated sectors

enum class RasterKind { marginal, slice };
enum class MarginalPath { partial_trace, integrate };

struct RasterRequest {
    Subsystem which = Subsystem::field;
    RasterKind kind = RasterKind::marginal;
    PhaseSpaceGrid grid;
    double t = 0.0;
    cplx fixed{0.0, 0.0};                   // slices only
    MarginalPath path = MarginalPath::partial_trace;
    std::optional<PhaseSpaceGrid> complement; // integration path only
};

struct OracleOptions {
    fock::EnsembleOptions ensemble;
    double weight_cut = 1e-18;  // Poisson weights below this are skipped
    double screen_radius = 7.0; // |b - <b>| beyond this plus four sector widths counts as zero overlap
    std::size_t threads = 1;
};

/// Truncation with field and mirror cutoffs raised until every label of the
/// grids has a coherent tail below trunc.tail_tol().
inline TruncationPolicy cover_grids(const TruncationPolicy& trunc, const std::vector<PhaseSpaceGrid>& field_grids,
                                    const std::vector<PhaseSpaceGrid>& mirror_grids) {
    auto reach = [](const PhaseSpaceGrid& g) {
        return std::abs(g.center()) + std::numbers::sqrt2 * g.half_width();
    };
    auto needed = [&](double r, std::size_t dim) {
        while (coherent_tail(r, dim) > trunc.tail_tol()) dim += 1 + dim / 8;
        return dim;
    };
    std::size_t field = trunc.field_dim();
    std::size_t mirror = trunc.mirror_dim();
    for (const auto& g : field_grids) field = needed(reach(g), field);
    for (const auto& g : mirror_grids) mirror = needed(reach(g), mirror);
    return {field, mirror, trunc.k_max(), trunc.tail_tol()};
}

namespace detail {

// A coherent label with its Fock window, ready for banded overlaps.
struct Label {
    cplx z;
    std::size_t lo = 0;
    std::size_t hi = 0;
};

inline Label mirror_label(cplx b, std::size_t mirror_dim, double tail_tol) {
    if (coherent_tail(b, mirror_dim) > tail_tol)
        throw OutOfTrustRegion("husimi: mirror label |" + std::to_string(std::abs(b))
                               + "| reaches beyond the mirror cutoff");
    const auto w = coherent_support(b, mirror_dim);
    return {b, w.lo, w.hi};
}

inline std::vector<cplx> field_label(cplx a, std::size_t field_dim, double tail_tol) {
    if (coherent_tail(a, field_dim) > tail_tol)
        throw OutOfTrustRegion("husimi: field label |" + std::to_string(std::abs(a))
                               + "| reaches beyond the field cutoff");
    return coherent_amplitudes(a, field_dim);
}

// <b|phi> over the common window, amplitudes of |b> by upward recurrence
// from the first shared level.
inline cplx overlap(const Label& b, const fock::SectorState& s) {
    const std::size_t lo = std::max(b.lo, s.lo);
    const std::size_t hi = std::min(b.hi, s.hi());
    if (lo >= hi) return {0.0, 0.0};
    const double r = std::abs(b.z);
    if (r == 0.0) return lo == 0 ? s.amp[0 - s.lo] : cplx{0.0, 0.0};
    const double lod = static_cast<double>(lo);
    cplx c = std::polar(std::exp(lod * std::log(r) - 0.5 * r * r - 0.5 * std::lgamma(lod + 1.0)), -lod * std::arg(b.z));
    const cplx zc = std::conj(b.z);
    cplx acc{0.0, 0.0};
    for (std::size_t m = lo; m < hi; ++m) {
        acc += c * s.amp[m - s.lo];
        c *= zc / std::sqrt(static_cast<double>(m + 1));
    }
    return acc;
}

struct SectorShape {
    cplx mean;
    double radius_sq;
};

inline SectorShape sector_shape(const fock::SectorState& s, double screen_radius) {
    cplx mean{0.0, 0.0};
    double phonons = 0.0;
    for (std::size_t i = 0; i < s.amp.size(); ++i) {
        const double m = static_cast<double>(s.lo + i);
        phonons += m * std::norm(s.amp[i]);
        if (i + 1 < s.amp.size()) mean += std::sqrt(m + 1.0) * std::conj(s.amp[i]) * s.amp[i + 1];
    }
    const double width = std::sqrt(std::max(0.0, phonons - std::norm(mean)));
    const double r = screen_radius + 4.0 * width;
    return {mean, r * r};
}

} // namespace detail

/// Evaluates every request in one pass over psi_k, k = 0..k_max (or one
/// unitary sweep). Field marginals are (1/pi) <a|rho_f|a>, mirror marginals
/// (1/pi) <b|rho_m|b>, slices (1/pi^2) <a, b|rho|a, b>.
inline std::vector<QField> oracle_rasters(const SystemParams& params, const DecoherenceParams& deco,
                                          const CoherentPair& init, const TruncationPolicy& trunc,
                                          const std::vector<RasterRequest>& requests, const OracleOptions& opts = {}) {
    using detail::Label;
    constexpr double pi = std::numbers::pi;
    for (const auto& r : requests) {
        if (!(std::isfinite(r.t) && r.t >= 0.0)) throw std::invalid_argument("oracle_rasters: t must be finite and >= 0");
        if (r.kind == RasterKind::marginal && r.path == MarginalPath::integrate && !r.complement)
            throw std::invalid_argument("oracle_rasters: the integration path needs a complement grid");
    }
    const std::size_t fd = trunc.field_dim();
    const std::size_t md = trunc.mirror_dim();
    const double tol = trunc.tail_tol();

    fock::SectorEnsemble ensemble(params, init, trunc, opts.ensemble);
    const auto& active = ensemble.active();
    const auto& c = ensemble.field();
    const std::size_t na = active.size();

    // Per-request label tables.
    struct Work {
        std::vector<Label> mirror;              // mirror labels to overlap with
        std::vector<std::vector<cplx>> field;   // conj(<n|a>) c_n over active sectors
        Eigen::MatrixXcd gram;                  // field marginal accumulator
        std::vector<double> acc;
    };
    auto field_row = [&](cplx a) {
        const auto amp = detail::field_label(a, fd, tol);
        std::vector<cplx> row(na);
        for (std::size_t i = 0; i < na; ++i) row[i] = std::conj(amp[active[i]]) * c[active[i]];
        return row;
    };
    std::vector<Work> work(requests.size());
    for (std::size_t r = 0; r < requests.size(); ++r) {
        const auto& q = requests[r];
        auto& w = work[r];
        w.acc.assign(q.grid.size(), 0.0);
        const bool field_target = q.which == Subsystem::field;
        if (q.kind == RasterKind::slice) {
            if (field_target) {
                w.mirror.push_back(detail::mirror_label(q.fixed, md, tol));
                for (std::size_t i = 0; i < q.grid.size(); ++i) w.field.push_back(field_row(q.grid.point(i)));
            } else {
                w.field.push_back(field_row(q.fixed));
                for (std::size_t i = 0; i < q.grid.size(); ++i) w.mirror.push_back(detail::mirror_label(q.grid.point(i), md, tol));
            }
        } else if (q.path == MarginalPath::integrate) {
            const auto& comp = *q.complement;
            const auto& mg = field_target ? comp : q.grid;
            const auto& fg = field_target ? q.grid : comp;
            for (std::size_t i = 0; i < mg.size(); ++i) w.mirror.push_back(detail::mirror_label(mg.point(i), md, tol));
            for (std::size_t i = 0; i < fg.size(); ++i) w.field.push_back(field_row(fg.point(i)));
        } else if (field_target) {
            for (std::size_t i = 0; i < q.grid.size(); ++i) (void)detail::field_label(q.grid.point(i), fd, tol);
            w.gram = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(na), static_cast<Eigen::Index>(na));
        } else {
            for (std::size_t i = 0; i < q.grid.size(); ++i) w.mirror.push_back(detail::mirror_label(q.grid.point(i), md, tol));
        }
    }

    // Adds weight * (contribution of the current psi) to request r.
    auto observe = [&](std::size_t r, double weight) {
        const auto& q = requests[r];
        auto& w = work[r];
        const auto& sectors = ensemble.sectors();
        std::vector<detail::SectorShape> shape(na);
        for (std::size_t i = 0; i < na; ++i) shape[i] = detail::sector_shape(sectors[active[i]], opts.screen_radius);
        // Screened overlaps <b|phi_n> for mirror label j.
        auto overlaps = [&](std::size_t j, std::vector<cplx>& o) {
            o.assign(na, cplx{0.0, 0.0});
            const Label& b = w.mirror[j];
            for (std::size_t i = 0; i < na; ++i)
                if (std::norm(b.z - shape[i].mean) <= shape[i].radius_sq) o[i] = detail::overlap(b, sectors[active[i]]);
        };
        auto amplitude = [&](const std::vector<cplx>& row, const std::vector<cplx>& o) {
            cplx s{0.0, 0.0};
            for (std::size_t i = 0; i < na; ++i) s += row[i] * o[i];
            return std::norm(s);
        };

        if (q.kind == RasterKind::marginal && q.path == MarginalPath::partial_trace && q.which == Subsystem::field) {
            for (std::size_t i = 0; i < na; ++i)
                for (std::size_t j = 0; j <= i; ++j) {
                    const cplx g = fock::sector_overlap(sectors[active[j]], sectors[active[i]]);
                    w.gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += weight * g;
                    if (i != j) w.gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) += weight * std::conj(g);
                }
            return;
        }
        if (q.kind == RasterKind::marginal && q.path == MarginalPath::partial_trace) {
            parallel_for(q.grid.size(), opts.threads, [&](std::size_t p) {
                std::vector<cplx> o;
                overlaps(p, o);
                double s = 0.0;
                for (std::size_t i = 0; i < na; ++i) s += std::norm(c[active[i]]) * std::norm(o[i]);
                w.acc[p] += weight * s / pi;
            });
            return;
        }
        if (q.kind == RasterKind::slice && q.which == Subsystem::field) {
            std::vector<cplx> o;
            overlaps(0, o);
            parallel_for(q.grid.size(), opts.threads,
                         [&](std::size_t p) { w.acc[p] += weight * amplitude(w.field[p], o) / (pi * pi); });
            return;
        }
        if (q.kind == RasterKind::slice) {
            parallel_for(q.grid.size(), opts.threads, [&](std::size_t p) {
                std::vector<cplx> o;
                overlaps(p, o);
                w.acc[p] += weight * amplitude(w.field[0], o) / (pi * pi);
            });
            return;
        }
        // Integration path: joint Q summed over the complement cells.
        const double area = q.complement->cell_area();
        std::vector<std::vector<cplx>> o(w.mirror.size());
        parallel_for(w.mirror.size(), opts.threads, [&](std::size_t j) { overlaps(j, o[j]); });
        if (q.which == Subsystem::field) {
            parallel_for(q.grid.size(), opts.threads, [&](std::size_t p) {
                double s = 0.0;
                for (const auto& oj : o) s += amplitude(w.field[p], oj);
                w.acc[p] += weight * s * area / (pi * pi);
            });
        } else {
            parallel_for(q.grid.size(), opts.threads, [&](std::size_t p) {
                double s = 0.0;
                for (const auto& row : w.field) s += amplitude(row, o[p]);
                w.acc[p] += weight * s * area / (pi * pi);
            });
        }
    };

    std::vector<double> neglected(requests.size(), 0.0);
    if (deco.is_unitary()) {
        std::vector<std::size_t> order(requests.size());
        for (std::size_t r = 0; r < order.size(); ++r) order[r] = r;
        std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return requests[x].t < requests[y].t; });
        for (const std::size_t r : order) {
            ensemble.advance(requests[r].t - ensemble.time());
            observe(r, 1.0);
        }
    } else {
        std::vector<std::vector<double>> weights(requests.size());
        std::size_t last = 0;
        for (std::size_t r = 0; r < requests.size(); ++r) {
            const double mean = deco.gamma() * requests[r].t;
            weights[r] = poisson_weights(mean, trunc.k_max());
            neglected[r] = poisson_tail(mean, trunc.k_max());
            for (std::size_t k = 0; k <= trunc.k_max(); ++k)
                if (weights[r][k] >= opts.weight_cut) last = std::max(last, k);
                else neglected[r] += weights[r][k];
        }
        fock::for_each_k(ensemble, deco, last, [&](std::size_t k, const fock::SectorEnsemble&) {
            for (std::size_t r = 0; r < requests.size(); ++r)
                if (weights[r][k] >= opts.weight_cut) observe(r, weights[r][k]);
        });
    }

    std::vector<QField> out;
    out.reserve(requests.size());
    for (std::size_t r = 0; r < requests.size(); ++r) {
        const auto& q = requests[r];
        auto& w = work[r];
        if (q.kind == RasterKind::marginal && q.path == MarginalPath::partial_trace && q.which == Subsystem::field) {
            // rho_f(n, n') = c_n conj(c_n') <phi_n'|phi_n>, summed over k.
            parallel_for(q.grid.size(), opts.threads, [&](std::size_t p) {
                const auto row = field_row(q.grid.point(p));
                cplx s{0.0, 0.0};
                for (std::size_t i = 0; i < na; ++i)
                    for (std::size_t j = 0; j < na; ++j)
                        s += row[i] * w.gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
                             * std::conj(row[j]);
                w.acc[p] = s.real() / pi;
            });
        }
        out.push_back(QField{q.grid, std::move(w.acc), QSource::oracle_exact, q.which, q.kind == RasterKind::marginal,
                             q.fixed, q.t, neglected[r]});
    }
    return out;
}

struct MarginalOptions {
    TruncationPolicy trunc;
    std::optional<PhaseSpaceGrid> complement; // required for the printed formula
    MarginalPath path = MarginalPath::partial_trace;
    ExponentVariant variant = ExponentVariant::nu2;
    OracleOptions oracle;
};

/// Field or mirror marginal on `grid` at time t from either source.
inline QField marginal_grid(Subsystem which, QSource source, const SystemParams& params, const DecoherenceParams& deco,
                            const CoherentPair& init, const PhaseSpaceGrid& grid, double t,
                            const MarginalOptions& opts) {
    if (source == QSource::paper_formula) {
        if (!opts.complement) throw std::invalid_argument("marginal_grid: the paper formula needs a complement grid");
        return paper_marginal(which, params, deco, init, grid, *opts.complement, t, opts.variant, opts.oracle.threads);
    }
    RasterRequest req{which, RasterKind::marginal, grid, t, {}, opts.path, opts.complement};
    return oracle_rasters(params, deco, init, opts.trunc, {req}, opts.oracle).front();
}

/// Grid enclosing the phase-space region the state can reach: a disc of
/// radius |alpha| for the field, and for the mirror the circles traced by
/// beta e^{-i nu tau} - s n (1 - e^{-i nu tau}) over photon numbers n that
/// carry more than 1e-12 of the field probability. A margin is added and
/// the spacing kept at or below `spacing`.
inline PhaseSpaceGrid support_grid(Subsystem which, const SystemParams& params, const CoherentPair& init,
                                   double margin = 4.0, double spacing = 0.5) {
    if (which == Subsystem::field) {
        const double hw = std::abs(init.alpha()) + margin;
        return {0.0, hw, static_cast<std::size_t>(std::ceil(2.0 * hw / spacing)) + 1};
    }
    const double s = params.coupling_ratio();
    const double mean = init.photon_mean();
    double re_lo = std::numeric_limits<double>::max();
    double re_hi = std::numeric_limits<double>::lowest();
    double im_hi = 0.0;
    double log_p = -mean;
    for (std::size_t n = 0; n < 100000; ++n) {
        const double nd = static_cast<double>(n);
        if (n > 0) log_p += std::log(mean) - std::log(nd);
        if (log_p < std::log(1e-12)) {
            if (nd > mean) break;
            continue;
        }
        const double radius = std::abs(init.beta() + s * nd);
        re_lo = std::min(re_lo, -s * nd - radius);
        re_hi = std::max(re_hi, -s * nd + radius);
        im_hi = std::max(im_hi, radius);
    }
    const cplx center(0.5 * (re_lo + re_hi), 0.0);
    const double hw = std::max(0.5 * (re_hi - re_lo), im_hi) + margin;
    return {center, hw, static_cast<std::size_t>(std::ceil(2.0 * hw / spacing)) + 1};
}

struct Discrepancy {
    double max_abs = 0.0;
    double mean_abs = 0.0;
    double alignment = 1.0;         // factor applied to the printed values
    std::size_t nonfinite = 0;      // printed-formula points that overflowed
    double paper_normalization = 0.0;
    double oracle_normalization = 0.0;
};

/// Paper raster scaled by `alignment` against the oracle raster on the same
/// grid; overflowed printed-formula points are counted and left out.
inline Discrepancy compare(const QField& paper, const QField& oracle, double alignment) {
    if (paper.values.size() != oracle.values.size())
        throw ShapeMismatch("husimi::compare: rasters differ in size");
    Discrepancy d;
    d.alignment = alignment;
    double sum = 0.0;
    std::size_t counted = 0;
    double paper_sum = 0.0;
    for (std::size_t i = 0; i < paper.values.size(); ++i) {
        const double p = paper.values[i] * alignment;
        if (!std::isfinite(p)) {
            ++d.nonfinite;
            continue;
        }
        paper_sum += p;
        const double e = std::abs(p - oracle.values[i]);
        d.max_abs = std::max(d.max_abs, e);
        sum += e;
        ++counted;
    }
    d.mean_abs = counted ? sum / static_cast<double>(counted) : 0.0;
    d.paper_normalization = paper_sum * paper.grid.cell_area();
    d.oracle_normalization = oracle.normalization();
    return d;
}

} // namespace odq::husimi
