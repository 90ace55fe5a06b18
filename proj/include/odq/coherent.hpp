#pragma once

// Truncated coherent-state amplitudes <n|z> = e^{-|z|^2/2} z^n / sqrt(n!).

#include "odq/model.hpp"

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace odq {

/// First `dim` Fock amplitudes of |z>, not renormalized. Magnitudes are built
/// in log space so large |z| neither underflows e^{-|z|^2/2} nor overflows z^n.
inline std::vector<cplx> coherent_amplitudes(cplx z, std::size_t dim) {
    std::vector<cplx> c(dim, cplx{0.0, 0.0});
    if (dim == 0) return c;
    const double r = std::abs(z);
    if (r == 0.0) {
        c[0] = 1.0;
        return c;
    }
    const double log_r = std::log(r);
    const double phase = std::arg(z);
    const double half_norm = 0.5 * r * r;
    for (std::size_t n = 0; n < dim; ++n) {
        const double nd = static_cast<double>(n);
        const double log_mag = nd * log_r - half_norm - 0.5 * std::lgamma(nd + 1.0);
        if (log_mag < -745.0) continue; // below the smallest subnormal
        c[n] = std::polar(std::exp(log_mag), nd * phase);
    }
    return c;
}

/// Probability of |z> outside the first `dim` Fock states.
inline double coherent_tail(cplx z, std::size_t dim) {
    if (dim == 0) return 1.0;
    return poisson_tail(std::norm(z), dim - 1);
}

/// Index range [lo, hi) outside of which every |<n|z>| is below e^{log_cut}.
struct FockWindow {
    std::size_t lo = 0;
    std::size_t hi = 0;
};

inline FockWindow coherent_support(cplx z, std::size_t dim, double log_cut = -80.0) {
    const double r = std::abs(z);
    if (r == 0.0) return {0, std::min<std::size_t>(1, dim)};
    const double log_r = std::log(r);
    const double half_norm = 0.5 * r * r;
    auto log_mag = [&](std::size_t n) {
        const double nd = static_cast<double>(n);
        return nd * log_r - half_norm - 0.5 * std::lgamma(nd + 1.0);
    };
    // log_mag is concave in n with its maximum near n = |z|^2.
    const auto peak = std::min<std::size_t>(dim - 1, static_cast<std::size_t>(r * r));
    std::size_t lo = peak;
    while (lo > 0 && log_mag(lo - 1) > log_cut) --lo;
    std::size_t hi = peak + 1;
    while (hi < dim && log_mag(hi) > log_cut) ++hi;
    return {lo, hi};
}

} // namespace odq
