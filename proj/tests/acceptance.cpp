// Runs every acceptance criterion and prints one PASS/FAIL line per check.
// Artifacts (report, Husimi discrepancy archive) go to the directory given as
// the first argument, default ./acceptance_out.

#include "odq/acceptance.hpp"

#include <iostream>

int main(int argc, char** argv) {
    const std::filesystem::path out = argc > 1 ? argv[1] : "acceptance_out";
    odq::acceptance::Spec spec;
    spec.threads = odq::default_threads();
    const auto report = odq::acceptance::run(spec, out, std::cout);
    std::size_t failed = 0;
    for (const auto& r : report.results) failed += r.passed ? 0 : 1;
    std::cout << report.results.size() - failed << "/" << report.results.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
