#include <gtest/gtest.h>

#include "odq/coherent.hpp"
#include "odq/model.hpp"

#include <cmath>
#include <complex>
#include <limits>

using namespace odq;

namespace {

// Direct partial sum e^{-gt} sum_{k<=k_max} (gt)^k/k! e^{i k theta}, each term
// built by multiplicative recurrence.
cplx direct_series(double theta, double gamma, double t, int k_max) {
    const double gt = gamma * t;
    double term = std::exp(-gt);
    cplx acc{0.0, 0.0};
    for (int k = 0; k <= k_max; ++k) {
        if (k > 0) term *= gt / k;
        acc += term * std::polar(1.0, k * theta);
    }
    return acc;
}

double direct_tail(double mean, int k_max) {
    double term = std::exp(-mean);
    double below = 0.0;
    for (int k = 0; k <= k_max; ++k) {
        if (k > 0) term *= mean / k;
        below += term;
    }
    // Sum the tail itself to avoid 1 - below cancellation.
    double tail = 0.0;
    for (int k = k_max + 1; k < k_max + 2000; ++k) {
        term *= mean / k;
        tail += term;
    }
    return tail;
}

} // namespace

TEST(SystemParams, rejects_invalid_fields) {
    EXPECT_THROW(SystemParams(1.0, 0.0, 0.5), std::invalid_argument);
    EXPECT_THROW(SystemParams(1.0, -1.0, 0.5), std::invalid_argument);
    EXPECT_THROW(SystemParams(1.0, 0.9, -0.1), std::invalid_argument);
    EXPECT_THROW(SystemParams(std::nan(""), 0.9, 0.5), std::invalid_argument);
    EXPECT_NO_THROW(SystemParams(1.0, 0.9, 0.0));
    EXPECT_DOUBLE_EQ(SystemParams(1.0, 0.9, 0.45).coupling_ratio(), 0.5);
}

TEST(DecoherenceParams, gamma_and_unitary_flag) {
    EXPECT_THROW(DecoherenceParams(0.0), std::invalid_argument);
    EXPECT_THROW(DecoherenceParams(-2.0), std::invalid_argument);
    EXPECT_FALSE(DecoherenceParams(5.0).is_unitary());
    const auto u = DecoherenceParams::unitary_limit();
    EXPECT_TRUE(u.is_unitary());
    EXPECT_TRUE(std::isinf(u.gamma()));
}

TEST(CoherentPair, amplitude_bound) {
    EXPECT_NO_THROW(CoherentPair({0.0, 2.0}, {1.0, 2.0}));
    EXPECT_THROW(CoherentPair({21.0, 0.0}, {0.0, 0.0}), std::invalid_argument);
    EXPECT_NO_THROW(CoherentPair({21.0, 0.0}, {0.0, 0.0}, 25.0));
    EXPECT_DOUBLE_EQ(CoherentPair({0.0, 2.0}, {1.0, 2.0}).photon_mean(), 4.0);
}

TEST(TruncationPolicy, invariants) {
    EXPECT_THROW(TruncationPolicy(0, 5, 5, 1e-8), std::invalid_argument);
    EXPECT_THROW(TruncationPolicy(5, 5, 0, 1e-8), std::invalid_argument);
    EXPECT_THROW(TruncationPolicy(5, 5, 5, 1.0), std::invalid_argument);
    const TruncationPolicy p(3, 4, 5, 0.0);
    EXPECT_EQ(p.joint_dim(), 12u);
    EXPECT_EQ(p.doubled().mirror_dim(), 8u);
}

TEST(TimeGrid, uniform_and_exact_endpoints) {
    const TimeGrid g(0.0, 10.0, 50);
    EXPECT_EQ(g.size(), 50u);
    EXPECT_EQ(g[0], 0.0);
    EXPECT_EQ(g[49], 10.0);
    EXPECT_DOUBLE_EQ(g[7], 70.0 / 49.0);
    EXPECT_THROW(TimeGrid(2.0, 1.0, 3), std::invalid_argument);
    EXPECT_THROW(TimeGrid(0.0, 1.0, 1), std::invalid_argument);
}

TEST(PoissonResum, matches_direct_partial_sum) {
    const double nu = 0.9;
    const double gamma = 5.0;
    const cplx r = poisson_resum(nu / gamma, gamma, 2.0);
    const cplx direct = direct_series(0.18, 5.0, 2.0, 200);
    EXPECT_LT(std::abs(r - direct), 1e-12);
}

TEST(PoissonResum, trivial_values_and_symmetry) {
    EXPECT_EQ(poisson_resum(0.0, 3.0, 7.0), cplx(1.0, 0.0));
    EXPECT_EQ(poisson_resum(1.3, 3.0, 0.0), cplx(1.0, 0.0));
    for (double theta : {0.01, 0.3, 1.0, 2.5, -0.7}) {
        for (double t : {0.1, 1.0, 4.0}) {
            const cplx a = poisson_resum(theta, 2.0, t);
            const cplx b = poisson_resum(-theta, 2.0, t);
            EXPECT_LT(std::abs(a - std::conj(b)), 1e-15);
            EXPECT_LT(std::abs(a), 1.0);
        }
    }
}

TEST(PoissonResum, sweep_grid_agreement_up_to_gt_20) {
    double worst = 0.0;
    for (double nu : {0.5, 0.9}) {
        for (double gamma = 1.0; gamma <= 9.0; gamma += 1.0) {
            for (double t = 0.0; t * gamma <= 20.0 && t <= 10.0; t += 0.25) {
                const cplx direct = direct_series(nu / gamma, gamma, t, 400);
                worst = std::max(worst, std::abs(poisson_resum(nu / gamma, gamma, t) - direct));
            }
        }
    }
    EXPECT_LT(worst, 1e-10);
}

TEST(PoissonWeights, sum_and_tail) {
    const auto w = poisson_weights(10.0, 60);
    double total = 0.0;
    for (double x : w) total += x;
    EXPECT_NEAR(total + poisson_tail(10.0, 60), 1.0, 1e-14);
    EXPECT_NEAR(poisson_tail(10.0, 20), direct_tail(10.0, 20), 1e-15);
    EXPECT_NEAR(poisson_tail(50.0, 161) / direct_tail(50.0, 161), 1.0, 1e-10);
    EXPECT_EQ(poisson_weights(0.0, 3)[0], 1.0);
}

TEST(ResummationDiagnostic, flags_large_cancellation) {
    EXPECT_FALSE(diagnose_resummation(0.18, 5.0, 10.0).flagged);
    const auto d = diagnose_resummation(3.0, 1.0, 10.0);
    EXPECT_NEAR(d.digits_lost, 10.0 * (1.0 - std::cos(3.0)) / std::log(10.0), 1e-12);
    EXPECT_TRUE(d.flagged);
}

TEST(DefaultTruncation, canonical_sizing) {
    const SystemParams p(1.0, 0.9, 0.5);
    const CoherentPair init({0.0, 2.0}, {1.0, 2.0});
    const auto tr = default_truncation(p, init, DecoherenceParams(5.0), 10.0, 1e-10, 10'000'000);
    EXPECT_GE(tr.field_dim(), 40u);
    EXPECT_GE(static_cast<double>(tr.k_max()), 50.0 + 12.0 * std::sqrt(51.0) + 25.0);
    EXPECT_LT(direct_tail(50.0, static_cast<int>(tr.k_max())), 1e-10);
    const double displacement = std::abs(init.beta()) + 2.0 * p.coupling_ratio() * tr.field_dim();
    EXPECT_GE(static_cast<double>(tr.mirror_dim()), displacement * displacement);
    EXPECT_LT(coherent_tail(displacement, tr.mirror_dim()), 1e-10);
    EXPECT_LT(coherent_tail(init.alpha(), tr.field_dim()), 1e-10);
}

TEST(DefaultTruncation, vacuum_and_zero_time) {
    const SystemParams p(1.0, 0.9, 0.5);
    const auto tr = default_truncation(p, CoherentPair(0.0, 0.0), DecoherenceParams(5.0), 0.0, 1e-10);
    EXPECT_GE(tr.field_dim(), 20u);
    EXPECT_GE(tr.mirror_dim(), 20u);
    EXPECT_GE(tr.k_max(), 25u);
}

TEST(DefaultTruncation, budget_error_names_amplitude) {
    const SystemParams p(1.0, 0.9, 0.5);
    try {
        default_truncation(p, CoherentPair({0.0, 2.0}, {1.0, 2.0}), DecoherenceParams(5.0), 10.0, 1e-10);
        FAIL() << "expected DimensionBudgetExceeded";
    } catch (const DimensionBudgetExceeded& e) {
        EXPECT_NE(std::string(e.what()).find("|beta|"), std::string::npos);
    }
    EXPECT_THROW(default_truncation(p, CoherentPair(0.0, 0.0), DecoherenceParams(5.0), -1.0, 1e-10),
                 std::invalid_argument);
    EXPECT_THROW(default_truncation(p, CoherentPair(0.0, 0.0), DecoherenceParams(5.0), 1.0, 0.0),
                 std::invalid_argument);
}

TEST(DefaultTruncation, monotone_in_inputs) {
    const SystemParams p(1.0, 0.9, 0.5);
    const std::size_t budget = std::numeric_limits<std::size_t>::max();
    auto tr = [&](double a, double b, double gamma, double t, double tol) {
        return default_truncation(p, CoherentPair(a, b), DecoherenceParams(gamma), t, tol, budget);
    };
    const auto base = tr(1.0, 1.0, 2.0, 3.0, 1e-8);
    for (const auto& bigger : {tr(2.0, 1.0, 2.0, 3.0, 1e-8), tr(1.0, 3.0, 2.0, 3.0, 1e-8),
                               tr(1.0, 1.0, 4.0, 3.0, 1e-8), tr(1.0, 1.0, 2.0, 6.0, 1e-8),
                               tr(1.0, 1.0, 2.0, 3.0, 1e-12)}) {
        EXPECT_GE(bigger.field_dim(), base.field_dim());
        EXPECT_GE(bigger.mirror_dim(), base.mirror_dim());
        EXPECT_GE(bigger.k_max(), base.k_max());
    }
}

TEST(Coherent, amplitudes_against_recurrence) {
    const cplx z{1.0, 2.0};
    const auto c = coherent_amplitudes(z, 40);
    cplx expected = std::exp(-0.5 * std::norm(z));
    for (int n = 0; n < 40; ++n) {
        if (n > 0) expected *= z / std::sqrt(static_cast<double>(n));
        EXPECT_LT(std::abs(c[static_cast<std::size_t>(n)] - expected), 1e-15);
    }
}

TEST(Coherent, second_moment_brute_force) {
    const cplx beta{1.0, 2.0};
    const auto c = coherent_amplitudes(beta, 80);
    double m2 = 0.0;
    for (std::size_t n = 0; n < c.size(); ++n) m2 += static_cast<double>(n * n) * std::norm(c[n]);
    EXPECT_NEAR(m2, 30.0, 1e-12);
}

TEST(Coherent, support_window_covers_mass) {
    const cplx z{0.0, 20.0};
    const auto w = coherent_support(z, 1000);
    const auto c = coherent_amplitudes(z, 1000);
    double inside = 0.0;
    for (std::size_t n = w.lo; n < w.hi; ++n) inside += std::norm(c[n]);
    EXPECT_NEAR(inside, 1.0, 1e-12);
    EXPECT_GT(w.lo, 0u);
}
