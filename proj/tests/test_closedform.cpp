#include <gtest/gtest.h>

#include "odq/closedform.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

using namespace odq;
namespace cf = odq::closedform;

namespace {

const CoherentPair canonical({0.0, 2.0}, {1.0, 2.0});

// Per-k moments summed directly over photon number with the mirror amplitude
// written out, then Poisson-summed over k. Shares no code with the Laurent
// bookkeeping under test.
struct Direct {
    double N = 0.0;
    double q = 0.0;
    double N2 = 0.0;
    double nN = 0.0;
};

Direct direct_sector_sum(const SystemParams& p, cplx beta, double mu, double tau) {
    Direct d;
    double pn = std::exp(-mu);
    for (int n = 0; n < 120; ++n) {
        if (n > 0) pn *= mu / n;
        const cplx rot = std::exp(cplx(0.0, -p.nu() * tau));
        const cplx phi = beta * rot - (p.chi() / p.nu()) * static_cast<double>(n) * (1.0 - rot);
        const double pop = std::norm(phi);
        d.N += pn * pop;
        d.q += pn * 2.0 * phi.real();
        d.N2 += pn * (pop * pop + pop);
        d.nN += pn * n * pop;
    }
    return d;
}

Direct direct_milburn(const SystemParams& p, double gamma, const CoherentPair& init, double t, int k_max = 600) {
    Direct acc;
    double w = std::exp(-gamma * t);
    for (int k = 0; k <= k_max; ++k) {
        if (k > 0) w *= gamma * t / k;
        if (w == 0.0) continue;
        const auto d = direct_sector_sum(p, init.beta(), init.photon_mean(), k / gamma);
        acc.N += w * d.N;
        acc.q += w * d.q;
        acc.N2 += w * d.N2;
        acc.nN += w * d.nN;
    }
    return acc;
}

double rel(double x, double y) { return std::abs(x - y) / std::max(std::abs(y), 1.0); }

TruncationPolicy roomy() { return {60, 60, 200, 1e-10}; }

} // namespace

TEST(Schrodinger, initial_triple) {
    const SystemParams p(1.0, 0.9, 0.5);
    const auto m = cf::schrodinger_state_moments(p, canonical, 0.0, roomy());
    EXPECT_NEAR(m.phonons, 5.0, 1e-10);
    EXPECT_NEAR(m.quadrature, 2.0, 1e-10);
    EXPECT_NEAR(m.photons, 4.0, 1e-10);
    EXPECT_FALSE(m.truncation_warning);
}

TEST(Schrodinger, periodic_in_mirror_period) {
    const SystemParams p(1.0, 0.9, 0.5);
    const double period = 2.0 * std::numbers::pi / 0.9;
    const auto a = cf::schrodinger_state_moments(p, canonical, 0.0, roomy());
    const auto b = cf::schrodinger_state_moments(p, canonical, period, roomy());
    EXPECT_NEAR(a.phonons, b.phonons, 1e-10);
    EXPECT_NEAR(a.quadrature, b.quadrature, 1e-10);
}

TEST(Schrodinger, small_field_cutoff_warns) {
    const SystemParams p(1.0, 0.9, 0.5);
    const auto m = cf::schrodinger_state_moments(p, canonical, 1.0, TruncationPolicy(5, 60, 10, 1e-10));
    EXPECT_TRUE(m.truncation_warning);
    EXPECT_GT(m.neglected_mass, 1e-10);
}

TEST(ExpectN, initial_value_and_decoupled) {
    const SystemParams p(1.0, 0.9, 0.5);
    const DecoherenceParams d(5.0);
    EXPECT_NEAR(cf::expect_N(p, d, canonical, 0.0), 5.0, 1e-12);
    const CoherentPair dark(0.0, {1.0, 2.0});
    for (double t : {0.0, 1.0, 3.0, 9.5}) EXPECT_NEAR(cf::expect_N(p, d, dark, t), 5.0, 1e-12);
    EXPECT_THROW(cf::expect_N(p, d, canonical, -1.0), std::invalid_argument);
}

TEST(ExpectQuadrature, initial_value_and_decoupled_rotation) {
    const SystemParams p(1.0, 0.9, 0.5);
    const DecoherenceParams d(5.0);
    EXPECT_NEAR(cf::expect_quadrature(p, d, canonical, 0.0), 2.0, 1e-12);
    const SystemParams free(1.0, 0.9, 0.0);
    const cplx beta{1.0, 2.0};
    for (double t : {0.5, 2.0, 7.0}) {
        const cplx r = poisson_resum(0.9 / 5.0, 5.0, t);
        const double expected = (std::conj(beta) * r + beta * std::conj(r)).real();
        EXPECT_NEAR(cf::expect_quadrature(free, d, canonical, t), expected, 1e-12);
    }
}

TEST(ExpectSmallN, constant) {
    EXPECT_EQ(cf::expect_n(canonical), 4.0);
    EXPECT_EQ(cf::expect_n(CoherentPair(0.0, 1.0)), 0.0);
}

TEST(MilburnClosedForms, match_direct_k_sums) {
    for (const auto& [nu, chi, gamma] : std::vector<std::array<double, 3>>{{0.9, 0.5, 5.0}, {0.5, 0.9, 5.0},
                                                                          {0.9, 0.5, 1.0}, {0.9, 0.5, 9.0}}) {
        const SystemParams p(1.0, nu, chi);
        const DecoherenceParams d(gamma);
        for (double t : {0.5, 1.0, 2.0, 5.0}) {
            if (gamma * t > 20.0) continue;
            const auto ref = direct_milburn(p, gamma, canonical, t);
            EXPECT_LT(rel(cf::expect_N(p, d, canonical, t), ref.N), 1e-10) << nu << ' ' << chi << ' ' << gamma << ' ' << t;
            EXPECT_LT(rel(cf::expect_quadrature(p, d, canonical, t), ref.q), 1e-10);
            EXPECT_LT(rel(cf::expect_N2(p, d, canonical, t, roomy()).exact, ref.N2), 1e-10);
            EXPECT_LT(rel(cf::covariance_nN(p, d, canonical, t).exact, ref.nN - 4.0 * ref.N), 1e-10);
        }
    }
}

TEST(ExpectN2, coherent_initial_moments) {
    const SystemParams p(1.0, 0.9, 0.5);
    const auto m = cf::expect_N2(p, DecoherenceParams(5.0), canonical, 0.0, roomy());
    EXPECT_NEAR(m.exact, 30.0, 1e-10);
    EXPECT_NEAR(m.as_printed, 25.0, 1e-10);
    EXPECT_NEAR(m.difference, 5.0, 1e-10);
}

TEST(ExpectN2, decoupled_variance_is_mean) {
    const SystemParams p(1.0, 0.9, 0.5);
    const CoherentPair dark(0.0, {1.0, 2.0});
    for (double t : {0.3, 2.0, 8.0}) {
        const auto m = cf::expect_N2(p, DecoherenceParams(3.0), dark, t, roomy());
        const double mean = cf::expect_N(p, DecoherenceParams(3.0), dark, t);
        EXPECT_NEAR(m.exact - mean * mean, 5.0, 1e-10);
    }
}

TEST(ExpectN2, printed_form_needs_enough_k) {
    const SystemParams p(1.0, 0.5, 0.9);
    EXPECT_THROW(cf::expect_N2(p, DecoherenceParams(5.0), canonical, 8.0, TruncationPolicy(60, 60, 20, 1e-10)),
                 TruncationNotConverged);
}

TEST(Mandel, coherent_baselines) {
    const SystemParams p(1.0, 0.5, 0.9);
    const DecoherenceParams d(5.0);
    EXPECT_NEAR(cf::hom_parameter_N(p, d, canonical, 0.0, roomy()).value, 1.0, 1e-10);
    const CoherentPair dark(0.0, {1.0, 2.0});
    for (double t : {0.0, 1.5, 6.0, 10.0}) EXPECT_NEAR(cf::hom_parameter_N(p, d, dark, t, roomy()).value, 1.0, 1e-10);
    EXPECT_THROW(cf::hom_parameter_N(SystemParams(1.0, 0.9, 0.0), d, CoherentPair(0.0, 0.0), 1.0, roomy()),
                 DivisionByZero);
}

TEST(Mandel, corrected_exceeds_printed) {
    const SystemParams p(1.0, 0.5, 0.9);
    const DecoherenceParams d(5.0);
    const auto corrected = cf::hom_parameter_N(p, d, canonical, 2.0, roomy(), cf::HomVariant::corrected);
    const auto printed = cf::hom_parameter_N(p, d, canonical, 2.0, roomy(), cf::HomVariant::as_printed);
    EXPECT_GT(corrected.value, printed.value);
    EXPECT_TRUE(corrected.super_poissonian);
}

TEST(Covariance, zero_at_start_and_without_coupling) {
    const SystemParams p(1.0, 0.9, 0.5);
    const DecoherenceParams d(5.0);
    EXPECT_NEAR(cf::covariance_nN(p, d, canonical, 0.0).exact, 0.0, 1e-12);
    const SystemParams free(1.0, 0.9, 0.0);
    for (double t : {1.0, 4.0}) EXPECT_NEAR(cf::covariance_nN(free, d, canonical, t).exact, 0.0, 1e-12);
}

TEST(Covariance, printed_coefficient_departs_from_third_moment) {
    const SystemParams p(1.0, 0.9, 0.5);
    const auto c = cf::covariance_nN(p, DecoherenceParams(5.0), canonical, 2.0);
    EXPECT_GT(std::abs(c.exact - c.as_printed), 1e-3);
}

TEST(UnitaryLimit, large_gamma_approaches_schrodinger) {
    const SystemParams p(1.0, 0.9, 0.5);
    const DecoherenceParams big(1e6);
    const auto u = DecoherenceParams::unitary_limit();
    for (double t : {0.0, 1.0, 3.3, 7.0, 13.0}) {
        const auto s = cf::schrodinger_state_moments(p, canonical, t, roomy());
        EXPECT_NEAR(cf::expect_N(p, u, canonical, t), s.phonons, 1e-10);
        EXPECT_NEAR(cf::expect_quadrature(p, u, canonical, t), s.quadrature, 1e-10);
        EXPECT_NEAR(cf::expect_N(p, big, canonical, t), s.phonons, 1e-3);
        EXPECT_NEAR(cf::expect_quadrature(p, big, canonical, t), s.quadrature, 1e-3);
    }
}

TEST(Series, sample_fills_every_point) {
    const SystemParams p(1.0, 0.9, 0.5);
    const DecoherenceParams d(5.0);
    const TimeGrid grid(0.0, 10.0, 11);
    const auto s = cf::sample("N", grid, {p, d, canonical}, [&](double t) { return cf::expect_N(p, d, canonical, t); });
    ASSERT_EQ(s.values.size(), 11u);
    EXPECT_NEAR(s.values[0], 5.0, 1e-12);
    for (double v : s.values) EXPECT_GE(v, -1e-9);
}
