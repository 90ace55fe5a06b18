#include <gtest/gtest.h>

#include "odq/fock/density.hpp"
#include "odq/husimi.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

using namespace odq;
using namespace odq::husimi;

namespace {

constexpr double pi = std::numbers::pi;
const CoherentPair canonical({0.0, 2.0}, {1.0, 2.0});
const SystemParams ring_params(1.0, 0.5, 0.9);

const CoherentPair gentle({0.4, 0.5}, {0.5, -0.3});
const SystemParams gentle_params(1.3, 0.9, 0.3);

// log of the printed per-k term summed directly over k, the bracket kept
// complex. Terms are combined relative to the largest one so that sums far
// beyond the double range stay finite.
double log_printed_k_sum(const SystemParams& p, double gamma, const CoherentPair& init, cplx a, cplx b, double t,
                         double c) {
    const cplx al = init.alpha();
    const cplx be = init.beta();
    const double s = p.chi() / p.nu();
    const cplx f = std::conj(a) * al - a * std::conj(al);
    const cplx u = b + s * std::norm(a);
    const cplx v = be + s * std::norm(al);
    const cplx g = std::conj(u) * v - u * std::conj(v);
    const cplx h = std::pow(std::conj(a), 2) * al * al - a * a * std::pow(std::conj(al), 2);
    const cplx bracket = p.omega() * f + p.nu() * g - c * h;
    const double gt = gamma * t;
    std::vector<cplx> logs;
    for (int k = 0; k < 4000; ++k)
        logs.push_back(-gt + k * std::log(gt) - std::lgamma(k + 1.0) + cplx(0.0, -1.0) * static_cast<double>(k) / gamma * bracket);
    double top = -1e300;
    for (const auto& l : logs) top = std::max(top, l.real());
    cplx acc{0.0, 0.0};
    for (const auto& l : logs) acc += std::exp(l - top);
    EXPECT_LT(std::abs(acc.imag()), 1e-10 * std::abs(acc));
    const double gauss = -std::norm(a - al) - std::norm((b - be) + s * (std::norm(a) - std::norm(al)));
    return top + std::log(acc.real()) + gauss - std::log(pi);
}

double rel(double x, double y) { return std::abs(x - y) / std::max(std::abs(y), 1.0); }

} // namespace

TEST(PhaseSpaceGrid, row_major_lattice) {
    const PhaseSpaceGrid g({1.0, -2.0}, 3.0, 7);
    EXPECT_EQ(g.size(), 49u);
    EXPECT_DOUBLE_EQ(g.spacing(), 1.0);
    EXPECT_EQ(g.point(0), cplx(-2.0, -5.0));
    EXPECT_EQ(g.point(6), cplx(4.0, -5.0));
    EXPECT_EQ(g.point(7), cplx(-2.0, -4.0));
    EXPECT_EQ(g.point(48), cplx(4.0, 1.0));
    const auto d = PhaseSpaceGrid::around({0.0, 2.0});
    EXPECT_EQ(d.n_per_axis(), 201u);
    EXPECT_DOUBLE_EQ(d.half_width(), 6.0);
    EXPECT_THROW(PhaseSpaceGrid(0.0, 0.0, 5), std::invalid_argument);
    EXPECT_THROW(PhaseSpaceGrid(0.0, 1.0, 1), std::invalid_argument);
}

TEST(PaperQ, initial_time_factorizes) {
    const DecoherenceParams d(20.0);
    const double s = 0.9 / 0.5;
    const PhaseSpaceGrid g({0.5, 1.0}, 3.0, 13);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (cplx b : {cplx(1.0, 2.0), cplx(-0.5, 0.3), cplx(2.5, 3.0)}) {
            const cplx a = g.point(i);
            const double expected = std::exp(-std::norm(a - cplx(0.0, 2.0)))
                                    * std::exp(-std::norm((b - cplx(1.0, 2.0)) + s * (std::norm(a) - 4.0))) / pi;
            EXPECT_NEAR(paper_q(ring_params, d, canonical, a, b, 0.0), expected, 1e-12);
        }
    EXPECT_NEAR(paper_q(ring_params, d, canonical, {0.0, 2.0}, {1.0, 2.0}, 0.0), 1.0 / pi, 1e-15);
}

TEST(PaperQ, matches_direct_sum_of_printed_terms) {
    const DecoherenceParams d(20.0);
    for (auto variant : {ExponentVariant::nu2, ExponentVariant::nu1}) {
        const double c = shift_coefficient(ring_params, variant);
        for (cplx a : {cplx(0.1, 1.9), cplx(-0.4, 2.3), cplx(0.3, 1.5)})
            for (cplx b : {cplx(1.0, 2.0), cplx(0.6, 2.4)})
                for (double t : {0.5, 2.0}) {
                    const double q = paper_q(ring_params, d, canonical, a, b, t, variant);
                    const double ref = log_printed_k_sum(ring_params, 20.0, canonical, a, b, t, c);
                    if (ref > 700.0) {
                        EXPECT_TRUE(std::isinf(q));
                    } else {
                        EXPECT_NEAR(std::log(q), ref, 1e-10);
                    }
                }
    }
}

TEST(PaperQ, printed_time_factor_can_exceed_one) {
    // The bracket is i times a real number; where that number is positive the
    // printed time factor is above one and Q rises past 1/pi.
    const DecoherenceParams d(20.0);
    double worst = 0.0;
    const PhaseSpaceGrid g({0.0, 2.0}, 1.5, 31);
    for (std::size_t i = 0; i < g.size(); ++i)
        worst = std::max(worst, paper_q(ring_params, d, canonical, g.point(i), {1.0, 2.0}, 4.0));
    EXPECT_GT(worst, 1.0 / pi);
}

TEST(PaperQ, overflow_is_infinite_and_negative_time_rejected) {
    const DecoherenceParams d(20.0);
    bool saw_inf = false;
    const PhaseSpaceGrid g(0.0, 40.0, 41);
    for (std::size_t i = 0; i < g.size() && !saw_inf; ++i)
        saw_inf = std::isinf(paper_q(ring_params, d, canonical, {0.0, 2.0}, g.point(i), 6.0));
    EXPECT_TRUE(saw_inf);
    EXPECT_THROW(paper_q(ring_params, d, canonical, 0.0, 0.0, -1.0), std::invalid_argument);
}

TEST(PaperQ, unitary_limit_is_large_gamma_limit) {
    const cplx a{0.2, 1.8};
    const cplx b{1.1, 2.1};
    const double u = paper_q(ring_params, DecoherenceParams::unitary_limit(), canonical, a, b, 1.0);
    const double big = paper_q(ring_params, DecoherenceParams(1e7), canonical, a, b, 1.0);
    EXPECT_LT(rel(big, u), 1e-5);
}

// ---------------------------------------------------------------------------
// Exact Q against the dense density matrix

namespace {

struct DenseCase {
    PhaseSpaceGrid field_grid = PhaseSpaceGrid(gentle.alpha(), 1.0, 9);
    PhaseSpaceGrid mirror_grid = PhaseSpaceGrid(gentle.beta(), 1.5, 9);
    TruncationPolicy trunc = cover_grids(TruncationPolicy(10, 60, 160, 1e-8), {field_grid}, {mirror_grid});
};

double dense_field_marginal(const fock::DensityMatrix& rho, cplx a) {
    const Eigen::MatrixXcd rf = fock::reduced(rho, true);
    const auto v = coherent_amplitudes(a, rho.field_dim);
    cplx s{0.0, 0.0};
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j)
            s += std::conj(v[i]) * rf(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * v[j];
    return s.real() / pi;
}

double dense_mirror_marginal(const fock::DensityMatrix& rho, cplx b) {
    const Eigen::MatrixXcd rm = fock::reduced(rho, false);
    const auto v = coherent_amplitudes(b, rho.mirror_dim);
    cplx s{0.0, 0.0};
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j)
            s += std::conj(v[i]) * rm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * v[j];
    return s.real() / pi;
}

} // namespace

TEST(OracleQ, rasters_match_dense_density_matrix) {
    const DenseCase dc;
    ASSERT_GT(dc.trunc.field_dim(), 10u);
    const DecoherenceParams deco(3.0);
    const double t = 1.7;
    const cplx fixed_a{0.5, 0.4};
    const cplx fixed_b{0.4, -0.2};
    const std::vector<RasterRequest> req{
        {Subsystem::field, RasterKind::marginal, dc.field_grid, t},
        {Subsystem::mirror, RasterKind::marginal, dc.mirror_grid, t},
        {Subsystem::field, RasterKind::slice, dc.field_grid, t, fixed_b},
        {Subsystem::mirror, RasterKind::slice, dc.mirror_grid, t, fixed_a},
    };
    const auto q = oracle_rasters(gentle_params, deco, gentle, dc.trunc, req);
    const auto rho = fock::milburn_rho(gentle_params, deco, gentle, dc.trunc, t, 1 << 14);
    double worst = 0.0;
    for (std::size_t i = 0; i < dc.field_grid.size(); ++i) {
        const cplx a = dc.field_grid.point(i);
        worst = std::max(worst, std::abs(q[0].values[i] - dense_field_marginal(rho, a)));
        worst = std::max(worst, std::abs(q[2].values[i] - fock::exact_husimi(rho, a, fixed_b)));
    }
    for (std::size_t i = 0; i < dc.mirror_grid.size(); ++i) {
        const cplx b = dc.mirror_grid.point(i);
        worst = std::max(worst, std::abs(q[1].values[i] - dense_mirror_marginal(rho, b)));
        worst = std::max(worst, std::abs(q[3].values[i] - fock::exact_husimi(rho, fixed_a, b)));
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(OracleQ, integration_path_agrees_with_partial_trace) {
    const DecoherenceParams deco(3.0);
    const PhaseSpaceGrid fg(gentle.alpha(), 1.0, 7);
    const PhaseSpaceGrid mg(gentle.beta(), 1.0, 7);
    // Complements wide and fine enough for the trapezoid sum of unit-width
    // Gaussians to be exact far below the tolerance.
    const PhaseSpaceGrid fc(0.0, 6.5, 27);
    const PhaseSpaceGrid mc(0.0, 7.0, 29);
    const auto trunc = cover_grids(TruncationPolicy(10, 60, 160, 1e-8), {fg, fc}, {mg, mc});
    const std::vector<RasterRequest> req{
        {Subsystem::field, RasterKind::marginal, fg, 1.2},
        {Subsystem::field, RasterKind::marginal, fg, 1.2, {}, MarginalPath::integrate, mc},
        {Subsystem::mirror, RasterKind::marginal, mg, 1.2},
        {Subsystem::mirror, RasterKind::marginal, mg, 1.2, {}, MarginalPath::integrate, fc},
    };
    const auto q = oracle_rasters(gentle_params, deco, gentle, trunc, req);
    for (std::size_t i = 0; i < fg.size(); ++i) {
        EXPECT_NEAR(q[1].values[i], q[0].values[i], 1e-6);
        EXPECT_NEAR(q[3].values[i], q[2].values[i], 1e-6);
    }
}

TEST(OracleQ, unitary_slices_match_dense_state) {
    const DenseCase dc;
    const auto u = DecoherenceParams::unitary_limit();
    const std::vector<RasterRequest> req{
        {Subsystem::field, RasterKind::slice, dc.field_grid, 2.5, {0.4, -0.2}},
        {Subsystem::field, RasterKind::slice, dc.field_grid, 0.7, {0.4, -0.2}},
    };
    const auto q = oracle_rasters(gentle_params, u, gentle, dc.trunc, req);
    const fock::DenseOracle dense(gentle_params, gentle, dc.trunc, 1 << 14);
    for (std::size_t r = 0; r < 2; ++r) {
        const auto rho = dense.rho(u, req[r].t);
        for (std::size_t i = 0; i < dc.field_grid.size(); ++i)
            EXPECT_NEAR(q[r].values[i], fock::exact_husimi(rho, dc.field_grid.point(i), {0.4, -0.2}), 1e-9);
    }
}

TEST(OracleQ, initial_field_marginal_is_unit_gaussian) {
    const auto trunc = cover_grids(TruncationPolicy(20, 200, 10, 1e-10), {PhaseSpaceGrid({0.0, 2.0}, 4.0, 2)}, {});
    const PhaseSpaceGrid g({0.0, 2.0}, 4.0, 41);
    const auto q = oracle_rasters(ring_params, DecoherenceParams(20.0), canonical, trunc,
                                  {{Subsystem::field, RasterKind::marginal, g, 0.0}});
    EXPECT_NEAR(q[0].values[g.size() / 2], 1.0 / pi, 1e-6);
    EXPECT_LT(std::abs(g.point(q[0].argmax()) - cplx(0.0, 2.0)), 1e-12);
    EXPECT_NEAR(q[0].normalization(), 1.0, 0.02);
}

TEST(OracleQ, field_ring_keeps_radius_and_normalizes) {
    const DecoherenceParams deco(20.0);
    const auto fg = support_grid(Subsystem::field, ring_params, canonical, 4.0, 0.25);
    const auto base = default_truncation(ring_params, canonical, deco, 6.0, 1e-10, std::size_t{1} << 40);
    const auto trunc = cover_grids(base, {fg}, {});
    std::vector<RasterRequest> req;
    for (double t : {0.0, 2.0, 4.0, 6.0}) req.push_back({Subsystem::field, RasterKind::marginal, fg, t});
    const auto q = oracle_rasters(ring_params, deco, canonical, trunc, req);
    for (const auto& f : q) {
        EXPECT_NEAR(f.normalization(), 1.0, 0.02) << f.t;
        EXPECT_NEAR(std::abs(fg.point(f.argmax())), 2.0, fg.spacing() * std::numbers::sqrt2) << f.t;
        for (double v : f.values) EXPECT_GE(v, -1e-12);
    }
}

TEST(OracleQ, labels_outside_cutoff_throw) {
    const std::vector<RasterRequest> req{{Subsystem::field, RasterKind::marginal, PhaseSpaceGrid(0.0, 6.0, 5), 1.0}};
    EXPECT_THROW(oracle_rasters(gentle_params, DecoherenceParams(3.0), gentle, TruncationPolicy(10, 60, 160, 1e-8), req),
                 OutOfTrustRegion);
    const auto covered = cover_grids(TruncationPolicy(10, 60, 160, 1e-8), {req[0].grid}, {});
    EXPECT_GT(covered.field_dim(), 10u);
    EXPECT_LE(coherent_tail(6.0 * std::numbers::sqrt2, covered.field_dim()), 1e-8);
}

TEST(MarginalGrid, paper_and_oracle_initial_marginals) {
    const DecoherenceParams deco(20.0);
    const PhaseSpaceGrid fg({0.0, 2.0}, 4.0, 33);
    const PhaseSpaceGrid mc({1.0, 2.0}, 6.0, 49);
    MarginalOptions opts{cover_grids(TruncationPolicy(20, 200, 10, 1e-10), {fg}, {}), mc};
    const auto paper = marginal_grid(Subsystem::field, QSource::paper_formula, ring_params, deco, canonical, fg, 0.0, opts);
    const auto oracle = marginal_grid(Subsystem::field, QSource::oracle_exact, ring_params, deco, canonical, fg, 0.0, opts);
    // At t = 0 the printed joint Q is pi times the normalized product Q, and
    // its mirror integral near alpha is pi times the field marginal.
    const std::size_t centre = fg.size() / 2;
    EXPECT_NEAR(paper.values[centre] / pi, oracle.values[centre], 1e-6);
    const auto d = compare(paper, oracle, 1.0 / pi);
    EXPECT_EQ(d.nonfinite, 0u);
    EXPECT_NEAR(d.oracle_normalization, 1.0, 0.02);
}

TEST(SupportGrid, mirror_grid_encloses_orbits) {
    const auto g = support_grid(Subsystem::mirror, ring_params, canonical);
    const double s = 0.9 / 0.5;
    for (int n = 0; n <= 12; ++n)
        for (double th = 0.0; th < 2.0 * pi; th += 0.1) {
            const cplx rot = std::polar(1.0, -th);
            const cplx phi = cplx(1.0, 2.0) * rot - s * n * (1.0 - rot);
            EXPECT_LE(std::abs((phi - g.center()).real()), g.half_width());
            EXPECT_LE(std::abs((phi - g.center()).imag()), g.half_width());
        }
    EXPECT_LE(g.spacing(), 0.5);
}
