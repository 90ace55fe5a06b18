#pragma once

// Command implementations behind the `odq` tool: a JSON run configuration,
// sweeps over gamma / chi / nu, and plot-ready CSV + JSON manifests.

#include "odq/closedform.hpp"
#include "odq/errors.hpp"
#include "odq/fock/ensemble.hpp"
#include "odq/husimi.hpp"
#include "odq/io.hpp"
#include "odq/model.hpp"
#include "odq/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace odq::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum class OracleMode { on, off, only };

struct SweepSpec {
    std::string parameter; // gamma, chi or nu
    std::vector<double> values;
};

struct HusimiSpec {
    std::vector<double> times;
    std::optional<husimi::PhaseSpaceGrid> field_grid;
    std::optional<husimi::PhaseSpaceGrid> mirror_grid;
    std::size_t n_per_axis = 201;
    std::optional<cplx> field_label;  // a held fixed on mirror slices
    std::optional<cplx> mirror_label; // b held fixed on field slices
    bool marginals = true;
    double marginal_margin = 4.0;
    double marginal_spacing = 1.0;
};

struct RunConfig {
    SystemParams params{1.0, 0.9, 0.5};
    DecoherenceParams deco{5.0};
    CoherentPair init{{0.0, 2.0}, {1.0, 2.0}};
    TimeGrid grid{0.0, 10.0, 50};
    std::optional<TruncationPolicy> trunc; // empty: "auto"
    double tail_tol = 1e-10;
    std::size_t joint_budget = std::size_t{1} << 40;
    std::optional<SweepSpec> sweep;
    std::vector<std::string> observables{"N", "quadrature", "n"};
    bool schrodinger = false;
    HusimiSpec husimi;
    std::string out_dir = "out";
    json source = json::object(); // the parsed document, echoed into manifests
};

struct RunOptions {
    std::optional<fs::path> out; // overrides the config's output directory
    std::size_t threads = default_threads();
    OracleMode oracle = OracleMode::on;
    ExponentVariant variant = ExponentVariant::nu2;
};

inline const char* to_string(OracleMode m) { return m == OracleMode::on ? "on" : m == OracleMode::off ? "off" : "only"; }

inline const char* to_string(ExponentVariant v) { return v == ExponentVariant::nu1 ? "nu1" : "nu2"; }

// --------------------------------------------------------------------------
// Config parsing

namespace detail {

inline std::string field_error(const std::string& path, const std::string& what) {
    return "config field '" + path + "': " + what;
}

inline const json* find(const json& j, const char* key) {
    if (!j.is_object()) return nullptr;
    const auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

inline double number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(field_error(path, "expected a number"));
    const double x = j.get<double>();
    if (!std::isfinite(x)) throw ConfigError(field_error(path, "must be finite"));
    return x;
}

inline std::size_t count(const json& j, const std::string& path) {
    if (!j.is_number_integer() || j.get<long long>() < 0)
        throw ConfigError(field_error(path, "expected a non-negative integer"));
    return j.get<std::size_t>();
}

/// {"re": x, "im": y}, [x, y] or a bare real number.
inline cplx complex_number(const json& j, const std::string& path) {
    if (j.is_number()) return {number(j, path), 0.0};
    if (j.is_array() && j.size() == 2) return {number(j[0], path + "[0]"), number(j[1], path + "[1]")};
    if (j.is_object()) {
        const json* re = find(j, "re");
        const json* im = find(j, "im");
        return {re ? number(*re, path + ".re") : 0.0, im ? number(*im, path + ".im") : 0.0};
    }
    throw ConfigError(field_error(path, "expected a complex number {\"re\", \"im\"}"));
}

template <class F>
auto checked(const std::string& path, F&& make) {
    try {
        return make();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(field_error(path, e.what()));
    }
}

inline void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> known) {
    if (!j.is_object()) throw ConfigError(field_error(path.empty() ? "<root>" : path, "expected an object"));
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end())
            throw ConfigError(field_error(path.empty() ? key : path + "." + key, "unknown field"));
    }
}

inline husimi::PhaseSpaceGrid grid_spec(const json& j, const std::string& path, std::size_t default_n) {
    reject_unknown(j, path, {"center", "half_width", "n_per_axis"});
    const json* c = find(j, "center");
    const json* hw = find(j, "half_width");
    if (!c || !hw) throw ConfigError(field_error(path, "needs center and half_width"));
    const json* n = find(j, "n_per_axis");
    return checked(path, [&] {
        return husimi::PhaseSpaceGrid(complex_number(*c, path + ".center"), number(*hw, path + ".half_width"),
                                      n ? count(*n, path + ".n_per_axis") : default_n);
    });
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(std::min(byte, text.size())), '\n'));
}

} // namespace detail

/// Parses a run configuration; `origin` names the source in error messages.
inline RunConfig parse_config(const std::string& text, const std::string& origin = "<config>") {
    using namespace detail;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ":" + std::to_string(line_of(text, e.byte)) + ": " + e.what());
    }
    reject_unknown(doc, "", {"params", "gamma", "init", "time", "truncation", "tail_tol", "joint_budget", "sweep",
                             "observables", "schrodinger", "husimi", "outputs", "verify", "name"});
    RunConfig cfg;
    cfg.source = doc;

    if (const json* p = find(doc, "params")) {
        reject_unknown(*p, "params", {"omega", "nu", "chi"});
        const json* om = find(*p, "omega");
        const json* nu = find(*p, "nu");
        const json* chi = find(*p, "chi");
        cfg.params = checked("params", [&] {
            return SystemParams(om ? number(*om, "params.omega") : 1.0, nu ? number(*nu, "params.nu") : cfg.params.nu(),
                                chi ? number(*chi, "params.chi") : cfg.params.chi());
        });
    }
    if (const json* g = find(doc, "gamma")) {
        if (g->is_string() && g->get<std::string>() == "unitary")
            cfg.deco = DecoherenceParams::unitary_limit();
        else
            cfg.deco = checked("gamma", [&] { return DecoherenceParams(number(*g, "gamma")); });
    }
    if (const json* in = find(doc, "init")) {
        reject_unknown(*in, "init", {"alpha", "beta"});
        const json* a = find(*in, "alpha");
        const json* b = find(*in, "beta");
        cfg.init = checked("init", [&] {
            return CoherentPair(a ? complex_number(*a, "init.alpha") : cfg.init.alpha(),
                                b ? complex_number(*b, "init.beta") : cfg.init.beta());
        });
    }
    if (const json* t = find(doc, "time")) {
        reject_unknown(*t, "time", {"start", "stop", "points"});
        const json* a = find(*t, "start");
        const json* b = find(*t, "stop");
        const json* n = find(*t, "points");
        cfg.grid = checked("time", [&] {
            return TimeGrid(a ? number(*a, "time.start") : 0.0, b ? number(*b, "time.stop") : 10.0,
                            n ? count(*n, "time.points") : 50);
        });
    }
    if (const json* tt = find(doc, "tail_tol")) {
        cfg.tail_tol = number(*tt, "tail_tol");
        if (!(cfg.tail_tol > 0.0 && cfg.tail_tol < 1.0)) throw ConfigError(field_error("tail_tol", "must lie in (0, 1)"));
    }
    if (const json* b = find(doc, "joint_budget")) cfg.joint_budget = count(*b, "joint_budget");
    if (const json* tr = find(doc, "truncation")) {
        if (tr->is_string()) {
            if (tr->get<std::string>() != "auto") throw ConfigError(field_error("truncation", "expected \"auto\" or an object"));
        } else {
            reject_unknown(*tr, "truncation", {"field_dim", "mirror_dim", "k_max", "tail_tol"});
            for (const char* key : {"field_dim", "mirror_dim", "k_max"})
                if (!find(*tr, key)) throw ConfigError(field_error(std::string("truncation.") + key, "missing"));
            const json* tol = find(*tr, "tail_tol");
            cfg.trunc = checked("truncation", [&] {
                return TruncationPolicy(count((*tr)["field_dim"], "truncation.field_dim"),
                                        count((*tr)["mirror_dim"], "truncation.mirror_dim"),
                                        count((*tr)["k_max"], "truncation.k_max"),
                                        tol ? number(*tol, "truncation.tail_tol") : cfg.tail_tol);
            });
        }
    }
    if (const json* s = find(doc, "sweep")) {
        reject_unknown(*s, "sweep", {"parameter", "values"});
        const json* name = find(*s, "parameter");
        const json* values = find(*s, "values");
        if (!name || !name->is_string()) throw ConfigError(field_error("sweep.parameter", "expected a string"));
        SweepSpec sweep{name->get<std::string>(), {}};
        if (sweep.parameter != "gamma" && sweep.parameter != "chi" && sweep.parameter != "nu")
            throw ConfigError(field_error("sweep.parameter", "must be one of gamma, chi, nu"));
        if (!values || !values->is_array() || values->empty())
            throw ConfigError(field_error("sweep.values", "expected a non-empty array"));
        for (std::size_t i = 0; i < values->size(); ++i) {
            const std::string path = "sweep.values[" + std::to_string(i) + "]";
            const double v = number((*values)[i], path);
            const bool ok = sweep.parameter == "chi" ? v >= 0.0 : v > 0.0;
            if (!ok) throw ConfigError(field_error(path, "invalid value for " + sweep.parameter));
            sweep.values.push_back(v);
        }
        cfg.sweep = std::move(sweep);
    }
    if (const json* obs = find(doc, "observables")) {
        if (!obs->is_array()) throw ConfigError(field_error("observables", "expected an array"));
        cfg.observables.clear();
        for (std::size_t i = 0; i < obs->size(); ++i) {
            const auto& o = (*obs)[i];
            const std::string path = "observables[" + std::to_string(i) + "]";
            if (!o.is_string()) throw ConfigError(field_error(path, "expected a string"));
            const auto name = o.get<std::string>();
            if (name != "N" && name != "quadrature" && name != "n")
                throw ConfigError(field_error(path, "must be one of N, quadrature, n"));
            cfg.observables.push_back(name);
        }
    }
    if (const json* s = find(doc, "schrodinger")) {
        if (!s->is_boolean()) throw ConfigError(field_error("schrodinger", "expected true or false"));
        cfg.schrodinger = s->get<bool>();
    }
    if (const json* h = find(doc, "husimi")) {
        reject_unknown(*h, "husimi", {"times", "field_grid", "mirror_grid", "n_per_axis", "field_label", "mirror_label",
                                      "marginals", "marginal_margin", "marginal_spacing"});
        auto& hs = cfg.husimi;
        if (const json* n = find(*h, "n_per_axis")) hs.n_per_axis = count(*n, "husimi.n_per_axis");
        if (const json* ts = find(*h, "times")) {
            if (!ts->is_array() || ts->empty()) throw ConfigError(field_error("husimi.times", "expected a non-empty array"));
            for (std::size_t i = 0; i < ts->size(); ++i) {
                const double t = number((*ts)[i], "husimi.times[" + std::to_string(i) + "]");
                if (t < 0.0) throw ConfigError(field_error("husimi.times[" + std::to_string(i) + "]", "must be >= 0"));
                hs.times.push_back(t);
            }
        }
        if (const json* g = find(*h, "field_grid")) hs.field_grid = grid_spec(*g, "husimi.field_grid", hs.n_per_axis);
        if (const json* g = find(*h, "mirror_grid")) hs.mirror_grid = grid_spec(*g, "husimi.mirror_grid", hs.n_per_axis);
        if (const json* a = find(*h, "field_label")) hs.field_label = complex_number(*a, "husimi.field_label");
        if (const json* b = find(*h, "mirror_label")) hs.mirror_label = complex_number(*b, "husimi.mirror_label");
        if (const json* m = find(*h, "marginals")) {
            if (!m->is_boolean()) throw ConfigError(field_error("husimi.marginals", "expected true or false"));
            hs.marginals = m->get<bool>();
        }
        if (const json* m = find(*h, "marginal_margin")) hs.marginal_margin = number(*m, "husimi.marginal_margin");
        if (const json* s = find(*h, "marginal_spacing")) {
            hs.marginal_spacing = number(*s, "husimi.marginal_spacing");
            if (hs.marginal_spacing <= 0.0) throw ConfigError(field_error("husimi.marginal_spacing", "must be > 0"));
        }
    }
    if (const json* o = find(doc, "outputs")) {
        reject_unknown(*o, "outputs", {"dir"});
        if (const json* d = find(*o, "dir")) {
            if (!d->is_string()) throw ConfigError(field_error("outputs.dir", "expected a string"));
            cfg.out_dir = d->get<std::string>();
        }
    }
    return cfg;
}

inline RunConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

// --------------------------------------------------------------------------
// Sweep cells

struct Cell {
    std::optional<double> value; // sweep value, if any
    SystemParams params;
    DecoherenceParams deco;
};

inline std::vector<Cell> cells(const RunConfig& cfg) {
    if (!cfg.sweep) return {Cell{std::nullopt, cfg.params, cfg.deco}};
    std::vector<Cell> out;
    for (const double v : cfg.sweep->values) {
        if (cfg.sweep->parameter == "gamma") out.push_back({v, cfg.params, DecoherenceParams(v)});
        else if (cfg.sweep->parameter == "chi") out.push_back({v, cfg.params.with_chi(v), cfg.deco});
        else out.push_back({v, cfg.params.with_nu(v), cfg.deco});
    }
    return out;
}

/// Shortest round-trip text of a sweep value, for file names.
inline std::string short_number(double x) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return {buf.data(), res.ptr};
}

inline std::string cell_suffix(const RunConfig& cfg, const Cell& c) {
    return c.value ? "_" + cfg.sweep->parameter + "-" + short_number(*c.value) : std::string();
}

inline TruncationPolicy resolve_truncation(const RunConfig& cfg, const Cell& c, double t_max) {
    if (cfg.trunc) return *cfg.trunc;
    return default_truncation(c.params, cfg.init, c.deco, t_max, cfg.tail_tol, cfg.joint_budget);
}

inline double relative_deviation(double x, double ref) { return std::abs(x - ref) / std::max(std::abs(ref), 1.0); }

/// Collects emitted files so the manifest lists each exactly once.
class Artifacts {
public:
    explicit Artifacts(fs::path root) : root_(std::move(root)) {}

    const fs::path& root() const noexcept { return root_; }

    json write(const std::string& name, const std::string& text, json meta = json::object()) {
        io::write_file(root_ / name, text);
        meta["path"] = name;
        files_.push_back(meta);
        return meta;
    }

    json write_json(const std::string& name, const json& j, json meta = json::object()) {
        return write(name, j.dump(2) + "\n", std::move(meta));
    }

    const json& files() const noexcept { return files_; }

private:
    fs::path root_;
    json files_ = json::array();
};

inline json manifest_header(const char* command, const RunConfig& cfg, const RunOptions& opts) {
    return {{"schema", "odq-manifest/1"},
            {"command", command},
            {"config", cfg.source},
            {"oracle", to_string(opts.oracle)},
            {"exponent_variant", to_string(opts.variant)}};
}

inline json cell_header(const RunConfig& cfg, const Cell& c) {
    json j{{"params", io::to_json(c.params)}, {"gamma", io::to_json(c.deco)}, {"init", io::to_json(cfg.init)}};
    if (c.value) j["sweep"] = {{"parameter", cfg.sweep->parameter}, {"value", *c.value}};
    return j;
}

/// Runs one cell; errors are recorded on the cell, never propagated.
inline bool run_cell(json& record, const std::function<void()>& body) {
    try {
        body();
        record["status"] = "ok";
        return true;
    } catch (const std::exception& e) {
        record["status"] = "failed";
        record["error"] = e.what();
        return false;
    }
}

// Oracle moments on the time grid, from the per-k table or a unitary sweep.
struct OracleSeries {
    std::vector<fock::StateMoments> moments;
    std::vector<double> neglected;
    fock::KrylovStats stats;
    double field_tail = 0.0;
    double mirror_tail = 0.0;
};

inline OracleSeries oracle_series(const SystemParams& params, const DecoherenceParams& deco, const CoherentPair& init,
                                  const TruncationPolicy& trunc, const std::vector<double>& times, std::size_t threads) {
    fock::EnsembleOptions eo;
    eo.threads = threads;
    OracleSeries out;
    if (deco.is_unitary()) {
        fock::SectorEnsemble ensemble(params, init, trunc, eo);
        for (const double t : times) {
            ensemble.advance(t - ensemble.time());
            out.moments.push_back(ensemble.moments());
            out.neglected.push_back(0.0);
        }
        out.stats = ensemble.stats();
        out.field_tail = ensemble.field_tail();
        out.mirror_tail = ensemble.mirror_tail();
        return out;
    }
    const fock::MilburnSeries series(params, deco, init, trunc, eo);
    for (const double t : times) {
        const auto m = series.at(t);
        out.moments.push_back(m.raw);
        out.neglected.push_back(m.neglected_mass);
    }
    out.stats = series.stats();
    out.field_tail = series.field_tail();
    out.mirror_tail = series.mirror_tail();
    return out;
}

inline json oracle_diagnostics(const OracleSeries& s) {
    double neglected = 0.0;
    for (double x : s.neglected) neglected = std::max(neglected, x);
    return {{"field_tail", s.field_tail},
            {"mirror_tail", s.mirror_tail},
            {"poisson_tail_max", neglected},
            {"krylov_error_bound", s.stats.error_bound},
            {"mirror_edge_population", s.stats.edge_population},
            {"krylov_substeps", s.stats.substeps}};
}

// --------------------------------------------------------------------------
// Commands

inline int cmd_expect(const RunConfig& cfg, const RunOptions& opts, std::ostream& log = std::cerr) {
    Artifacts art(opts.out.value_or(fs::path(cfg.out_dir)));
    json manifest = manifest_header("expect", cfg, opts);
    manifest["cells"] = json::array();
    const auto times = cfg.grid.points();
    bool all_ok = true;

    for (const auto& c : cells(cfg)) {
        json rec = cell_header(cfg, c);
        all_ok &= run_cell(rec, [&] {
            const auto trunc = resolve_truncation(cfg, c, cfg.grid.t_end());
            rec["truncation"] = io::to_json(trunc);
            rec["truncation_auto"] = !cfg.trunc.has_value();

            const bool closed = opts.oracle != OracleMode::only;
            const bool oracle = opts.oracle != OracleMode::off;
            const bool schrodinger = cfg.schrodinger || c.deco.is_unitary();

            std::optional<OracleSeries> os;
            if (oracle) {
                os = oracle_series(c.params, c.deco, cfg.init, trunc, times, opts.threads);
                rec["diagnostics"] = oracle_diagnostics(*os);
            }
            if (closed && !c.deco.is_unitary()) {
                double lost = 0.0;
                for (const double t : times)
                    lost = std::max(lost, diagnose_resummation(c.params.nu() / c.deco.gamma(), c.deco.gamma(), t).digits_lost);
                rec["resummation_digits_lost"] = lost;
            }
            std::vector<closedform::UnitaryMoments> sm;
            if (schrodinger)
                for (const double t : times) sm.push_back(closedform::schrodinger_state_moments(c.params, cfg.init, t, trunc));

            rec["files"] = json::array();
            rec["max_deviation"] = json::object();
            for (const auto& obs : cfg.observables) {
                auto closed_value = [&](double t) {
                    if (obs == "N") return closedform::expect_N(c.params, c.deco, cfg.init, t);
                    if (obs == "quadrature") return closedform::expect_quadrature(c.params, c.deco, cfg.init, t);
                    return closedform::expect_n(cfg.init);
                };
                auto pick = [&](const auto& m) {
                    if (obs == "N") return m.phonons;
                    if (obs == "quadrature") return m.quadrature;
                    return m.photons;
                };
                io::CsvTable table({"t", "value", "source"});
                std::vector<double> cf;
                if (closed)
                    for (const double t : times) {
                        cf.push_back(closed_value(t));
                        table.row(t, cf.back(), "closedform");
                    }
                if (oracle) {
                    double dev = 0.0;
                    for (std::size_t i = 0; i < times.size(); ++i) {
                        const double v = pick(os->moments[i]);
                        table.row(times[i], v, "oracle");
                        if (closed) dev = std::max(dev, relative_deviation(cf[i], v));
                    }
                    if (closed) rec["max_deviation"][obs] = dev;
                }
                if (schrodinger)
                    for (std::size_t i = 0; i < times.size(); ++i) table.row(times[i], pick(sm[i]), "schrodinger");
                const auto name = "expect_" + obs + cell_suffix(cfg, c) + ".csv";
                rec["files"].push_back(art.write(name, table.str(), {{"observable", obs}, {"rows", table.rows()}}));
            }
        });
        log << "expect" << cell_suffix(cfg, c) << ": " << rec["status"].get<std::string>() << "\n";
        manifest["cells"].push_back(std::move(rec));
    }
    manifest["files"] = art.files();
    io::write_json(art.root() / "manifest.json", manifest);
    return all_ok ? 0 : 1;
}

/// First grid time at which values exceed 1 + 1e-6, or null.
inline json first_crossing(const std::vector<double>& times, const std::vector<double>& values) {
    for (std::size_t i = 0; i < times.size(); ++i)
        if (values[i] > 1.0 + 1e-6) return times[i];
    return nullptr;
}

/// Direction of crossing times ordered by sweep value.
inline std::string trend(const std::vector<json>& crossings) {
    std::vector<double> t;
    for (const auto& c : crossings)
        if (c.is_number()) t.push_back(c.get<double>());
    if (t.size() < 2) return "insufficient";
    bool up = true;
    bool down = true;
    for (std::size_t i = 1; i < t.size(); ++i) {
        up &= t[i] >= t[i - 1];
        down &= t[i] <= t[i - 1];
    }
    if (up && down) return "constant";
    return up ? "nondecreasing" : down ? "nonincreasing" : "mixed";
}

inline int cmd_stats(const RunConfig& cfg, const RunOptions& opts, std::ostream& log = std::cerr) {
    Artifacts art(opts.out.value_or(fs::path(cfg.out_dir)));
    json manifest = manifest_header("stats", cfg, opts);
    manifest["cells"] = json::array();
    const auto times = cfg.grid.points();
    bool all_ok = true;
    std::vector<json> crossings_corrected;
    std::vector<json> crossings_printed;

    for (const auto& c : cells(cfg)) {
        json rec = cell_header(cfg, c);
        json cross_c = nullptr;
        json cross_p = nullptr;
        all_ok &= run_cell(rec, [&] {
            const auto trunc = resolve_truncation(cfg, c, cfg.grid.t_end());
            rec["truncation"] = io::to_json(trunc);
            rec["files"] = json::array();
            const auto suffix = cell_suffix(cfg, c);
            std::vector<double> corrected;
            if (opts.oracle != OracleMode::only) {
                io::CsvTable table({"t", "hom_corrected", "hom_printed", "covariance", "covariance_printed"});
                std::vector<double> printed;
                for (const double t : times) {
                    corrected.push_back(closedform::hom_parameter_N(c.params, c.deco, cfg.init, t, trunc).value);
                    printed.push_back(
                        closedform::hom_parameter_N(c.params, c.deco, cfg.init, t, trunc, closedform::HomVariant::as_printed).value);
                    const auto cov = closedform::covariance_nN(c.params, c.deco, cfg.init, t);
                    table.row(t, corrected.back(), printed.back(), cov.exact, cov.as_printed);
                }
                cross_c = first_crossing(times, corrected);
                cross_p = first_crossing(times, printed);
                rec["crossing"] = {{"corrected", cross_c}, {"as_printed", cross_p}};
                rec["files"].push_back(art.write("stats" + suffix + ".csv", table.str(), {{"rows", table.rows()}}));
            }
            if (opts.oracle != OracleMode::off) {
                const auto os = oracle_series(c.params, c.deco, cfg.init, trunc, times, opts.threads);
                rec["diagnostics"] = oracle_diagnostics(os);
                io::CsvTable table({"t", "hom", "covariance"});
                std::vector<double> hom;
                double dev = 0.0;
                for (std::size_t i = 0; i < times.size(); ++i) {
                    const auto& m = os.moments[i];
                    hom.push_back((m.phonons_sq - m.phonons * m.phonons) / m.phonons);
                    table.row(times[i], hom.back(), m.photon_phonon - m.photons * m.phonons);
                    if (!corrected.empty()) dev = std::max(dev, relative_deviation(corrected[i], hom.back()));
                }
                if (!corrected.empty()) rec["max_deviation"] = {{"hom_corrected", dev}};
                rec["crossing_oracle"] = first_crossing(times, hom);
                rec["files"].push_back(art.write("stats_oracle" + suffix + ".csv", table.str(), {{"rows", table.rows()}}));
            }
        });
        crossings_corrected.push_back(cross_c);
        crossings_printed.push_back(cross_p);
        log << "stats" << cell_suffix(cfg, c) << ": " << rec["status"].get<std::string>() << "\n";
        manifest["cells"].push_back(std::move(rec));
    }
    if (cfg.sweep)
        manifest["crossing_trend"] = {{"parameter", cfg.sweep->parameter},
                                      {"corrected", trend(crossings_corrected)},
                                      {"as_printed", trend(crossings_printed)}};
    manifest["files"] = art.files();
    io::write_json(art.root() / "manifest.json", manifest);
    return all_ok ? 0 : 1;
}

struct HusimiGrids {
    husimi::PhaseSpaceGrid field;
    husimi::PhaseSpaceGrid mirror;
    husimi::PhaseSpaceGrid field_support;
    husimi::PhaseSpaceGrid mirror_support;
};

inline HusimiGrids husimi_grids(const RunConfig& cfg, const SystemParams& params) {
    const auto& hs = cfg.husimi;
    return {hs.field_grid.value_or(husimi::PhaseSpaceGrid::around(cfg.init.alpha(), hs.n_per_axis)),
            hs.mirror_grid.value_or(husimi::PhaseSpaceGrid::around(cfg.init.beta(), hs.n_per_axis)),
            husimi::support_grid(husimi::Subsystem::field, params, cfg.init, hs.marginal_margin, hs.marginal_spacing),
            husimi::support_grid(husimi::Subsystem::mirror, params, cfg.init, hs.marginal_margin, hs.marginal_spacing)};
}

inline json discrepancy_json(const husimi::Discrepancy& d) {
    return {{"max_abs", d.max_abs},
            {"mean_abs", d.mean_abs},
            {"alignment", d.alignment},
            {"nonfinite_points", d.nonfinite},
            {"paper_normalization", io::number(d.paper_normalization)},
            {"oracle_normalization", d.oracle_normalization}};
}

inline int cmd_husimi(const RunConfig& cfg, const RunOptions& opts, std::ostream& log = std::cerr) {
    using namespace husimi;
    Artifacts art(opts.out.value_or(fs::path(cfg.out_dir)));
    json manifest = manifest_header("husimi", cfg, opts);
    manifest["cells"] = json::array();
    const auto& hs = cfg.husimi;
    const std::vector<double> times = hs.times.empty() ? std::vector<double>{0.0} : hs.times;
    const double t_max = *std::max_element(times.begin(), times.end());
    bool all_ok = true;

    for (const auto& c : cells(cfg)) {
        json rec = cell_header(cfg, c);
        all_ok &= run_cell(rec, [&] {
            const auto grids = husimi_grids(cfg, c.params);
            const cplx a_fixed = hs.field_label.value_or(cfg.init.alpha());
            const cplx b_fixed = hs.mirror_label.value_or(cfg.init.beta());
            const auto suffix = cell_suffix(cfg, c);
            rec["files"] = json::array();
            rec["summary"] = json::array();

            auto emit = [&](const QField& q, const std::string& stem) {
                const auto base = stem + suffix + "_t-" + short_number(q.t);
                rec["files"].push_back(art.write(base + ".csv", io::raster_csv(q)));
                rec["files"].push_back(art.write_json(base + ".json", io::raster_sidecar(q)));
            };

            std::vector<QField> paper;
            if (opts.oracle != OracleMode::only)
                for (const double t : times) {
                    paper.push_back(paper_slice(Subsystem::field, c.params, c.deco, cfg.init, grids.field, b_fixed, t,
                                                opts.variant, opts.threads));
                    paper.push_back(paper_slice(Subsystem::mirror, c.params, c.deco, cfg.init, grids.mirror, a_fixed, t,
                                                opts.variant, opts.threads));
                }
            std::vector<QField> oracle;
            if (opts.oracle != OracleMode::off) {
                std::vector<RasterRequest> req;
                for (const double t : times) {
                    req.push_back({Subsystem::field, RasterKind::slice, grids.field, t, b_fixed});
                    req.push_back({Subsystem::mirror, RasterKind::slice, grids.mirror, t, a_fixed});
                    if (hs.marginals) {
                        req.push_back({Subsystem::field, RasterKind::marginal, grids.field_support, t});
                        req.push_back({Subsystem::mirror, RasterKind::marginal, grids.mirror_support, t});
                    }
                }
                const auto base = resolve_truncation(cfg, c, t_max);
                const auto trunc = cover_grids(base, {grids.field, grids.field_support}, {grids.mirror, grids.mirror_support});
                rec["truncation"] = io::to_json(trunc);
                OracleOptions oo;
                oo.threads = opts.threads;
                oo.ensemble.threads = opts.threads;
                oracle = oracle_rasters(c.params, c.deco, cfg.init, trunc, req, oo);
            }

            const std::size_t per_t_oracle = hs.marginals ? 4 : 2;
            for (std::size_t i = 0; i < times.size(); ++i) {
                json entry{{"t", times[i]}};
                for (std::size_t s = 0; s < 2; ++s) {
                    const char* sub = s == 0 ? "field" : "mirror";
                    json part = json::object();
                    if (!paper.empty()) {
                        const auto& p = paper[2 * i + s];
                        emit(p, std::string("husimi_") + sub + "_paper");
                        part["paper_max"] = io::number(*std::max_element(p.values.begin(), p.values.end()));
                        part["paper_points_above_bound"] = static_cast<std::size_t>(std::count_if(
                            p.values.begin(), p.values.end(), [](double v) { return !(v <= 1.0 / std::numbers::pi + 1e-12); }));
                    }
                    if (!oracle.empty()) {
                        const auto& o = oracle[per_t_oracle * i + s];
                        emit(o, std::string("husimi_") + sub + "_oracle");
                        if (!paper.empty())
                            part["discrepancy"] = discrepancy_json(compare(paper[2 * i + s], o, 1.0 / std::numbers::pi));
                        if (hs.marginals) {
                            const auto& m = oracle[per_t_oracle * i + 2 + s];
                            emit(m, std::string("husimi_") + sub + "_marginal_oracle");
                            part["oracle_marginal_normalization"] = m.normalization();
                        }
                    }
                    entry[sub] = part;
                }
                rec["summary"].push_back(entry);
            }
        });
        log << "husimi" << cell_suffix(cfg, c) << ": " << rec["status"].get<std::string>() << "\n";
        manifest["cells"].push_back(std::move(rec));
    }
    json summary{{"schema", "odq-husimi-summary/1"}, {"cells", json::array()}};
    for (const auto& rec : manifest["cells"])
        summary["cells"].push_back({{"status", rec["status"]}, {"summary", rec.value("summary", json::array())}});
    art.write_json("husimi_summary.json", summary, {{"kind", "summary"}});
    manifest["files"] = art.files();
    io::write_json(art.root() / "manifest.json", manifest);
    return all_ok ? 0 : 1;
}

} // namespace odq::cli
