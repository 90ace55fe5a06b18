// Prints <N>(t) from the closed form and from the Fock-space oracle for the
// canonical initial state, plus the field Husimi marginal peak radius.

#include "odq/odq.hpp"

#include <cstdio>

int main() {
    using namespace odq;
    const SystemParams params(1.0, 0.9, 0.5);
    const DecoherenceParams deco(5.0);
    const CoherentPair init({0.0, 2.0}, {1.0, 2.0});
    const auto trunc = default_truncation(params, init, deco, 4.0, 1e-10, std::size_t{1} << 40);
    const fock::MilburnSeries series(params, deco, init, trunc);

    std::printf("%6s %22s %22s\n", "t", "closed form", "oracle");
    for (const double t : TimeGrid(0.0, 4.0, 9).points())
        std::printf("%6.2f %22.15e %22.15e\n", t, closedform::expect_N(params, deco, init, t), series.at(t).phonons());

    const auto grid = husimi::support_grid(husimi::Subsystem::field, params, init, 3.0, 0.25);
    const auto q = husimi::marginal_grid(husimi::Subsystem::field, husimi::QSource::oracle_exact, params, deco, init, grid,
                                         4.0, {husimi::cover_grids(trunc, {grid}, {})});
    std::printf("field Q at t=4: norm %.6f, peak |a| %.3f\n", q.normalization(), std::abs(grid.point(q.argmax())));
}
