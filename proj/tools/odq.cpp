// odq: closed-form and oracle runs for the decohering mirror-field model.
//
//   odq expect --config run.json [--out DIR] [--threads N] [--oracle on|off|only]
//   odq stats  --config run.json ...
//   odq husimi --config run.json ... [--exponent-variant nu2|nu1]
//   odq verify --config verify.json ...
//
// Exit codes: 0 success, 1 validation failure, 2 configuration error.

#include "odq/acceptance.hpp"
#include "odq/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

namespace {

struct Flags {
    std::string config;
    std::string out;
    std::size_t threads = odq::default_threads();
    odq::cli::OracleMode oracle = odq::cli::OracleMode::on;
    odq::ExponentVariant variant = odq::ExponentVariant::nu2;
};

void add_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", f.out, "output directory (overrides outputs.dir)");
    sub->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
    const std::map<std::string, odq::cli::OracleMode> modes{
        {"on", odq::cli::OracleMode::on}, {"off", odq::cli::OracleMode::off}, {"only", odq::cli::OracleMode::only}};
    sub->add_option("--oracle", f.oracle, "run the truncated Fock oracle: on, off or only")
        ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case));
    const std::map<std::string, odq::ExponentVariant> variants{{"nu2", odq::ExponentVariant::nu2},
                                                               {"nu1", odq::ExponentVariant::nu1}};
    sub->add_option("--exponent-variant", f.variant, "chi^2 coefficient in the printed Q: nu2 or nu1")
        ->transform(CLI::CheckedTransformer(variants, CLI::ignore_case));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Intrinsic decoherence of a mirror coupled to a cavity field"};
    app.require_subcommand(1);
    Flags flags;
    using Command = int (*)(const odq::cli::RunConfig&, const odq::cli::RunOptions&, std::ostream&);
    const std::pair<const char*, Command> commands[] = {
        {"expect", odq::cli::cmd_expect},
        {"stats", odq::cli::cmd_stats},
        {"husimi", odq::cli::cmd_husimi},
        {"verify", odq::cli::cmd_verify},
    };
    const char* help[] = {"time series of <N>, <b^dagger + b> and <n>", "Mandel parameter and cov(n, N)",
                          "Husimi Q rasters, printed formula against the oracle", "run the acceptance checks"};
    for (std::size_t i = 0; i < std::size(commands); ++i) add_flags(app.add_subcommand(commands[i].first, help[i]), flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const auto cfg = odq::cli::load_config(flags.config);
        odq::cli::RunOptions opts;
        if (!flags.out.empty()) opts.out = flags.out;
        opts.threads = flags.threads;
        opts.oracle = flags.oracle;
        opts.variant = flags.variant;
        for (const auto& [name, run] : commands)
            if (app.got_subcommand(name)) return run(cfg, opts, std::cerr);
    } catch (const odq::ConfigError& e) {
        std::cerr << "odq: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "odq: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
