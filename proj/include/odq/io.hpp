#pragma once

// Plain-text artifacts: locale-free float formatting, CSV tables, raster
// files with JSON sidecars.

#include "odq/errors.hpp"
#include "odq/husimi.hpp"
#include "odq/model.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace odq::io {

using json = nlohmann::json;

/// Scientific notation, 17 significant digits, '.' as decimal point.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::scientific, 16);
    return {buf.data(), res.ptr};
}

inline json to_json(cplx z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

/// JSON number for finite values, the formatted string otherwise (JSON has
/// no inf or nan).
inline json number(double x) { return std::isfinite(x) ? json(x) : json(format_double(x)); }

inline json to_json(const SystemParams& p) { return {{"omega", p.omega()}, {"nu", p.nu()}, {"chi", p.chi()}}; }

inline json to_json(const DecoherenceParams& d) { return d.is_unitary() ? json("unitary") : json(d.gamma()); }

inline json to_json(const CoherentPair& c) { return {{"alpha", to_json(c.alpha())}, {"beta", to_json(c.beta())}}; }

inline json to_json(const TruncationPolicy& t) {
    return {{"field_dim", t.field_dim()}, {"mirror_dim", t.mirror_dim()}, {"k_max", t.k_max()}, {"tail_tol", t.tail_tol()}};
}

inline json to_json(const husimi::PhaseSpaceGrid& g) {
    return {{"center", to_json(g.center())}, {"half_width", g.half_width()}, {"n_per_axis", g.n_per_axis()}};
}

/// Writes bytes exactly as given (binary mode, no newline translation).
inline void write_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("write to " + path.string() + " failed");
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : columns_(header.size()) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) text_ += ',';
            text_ += header[i];
        }
        text_ += '\n';
    }

    /// One row; doubles are formatted, strings copied.
    template <class... Cells>
    void row(const Cells&... cells) {
        static_assert(sizeof...(Cells) > 0);
        if (sizeof...(Cells) != columns_) throw ShapeMismatch("CsvTable: row width differs from the header");
        bool first = true;
        ((append(cells, first)), ...);
        text_ += '\n';
        ++rows_;
    }

    const std::string& str() const noexcept { return text_; }
    std::size_t rows() const noexcept { return rows_; }

private:
    void append(double x, bool& first) { sep(first), text_ += format_double(x); }
    void append(std::string_view s, bool& first) { sep(first), text_ += s; }
    void append(const char* s, bool& first) { append(std::string_view(s), first); }
    void sep(bool& first) {
        if (!first) text_ += ',';
        first = false;
    }

    std::size_t columns_;
    std::size_t rows_ = 0;
    std::string text_;
};

/// Raster CSV `re,im,q` in grid order.
inline std::string raster_csv(const husimi::QField& q) {
    CsvTable t({"re", "im", "q"});
    for (std::size_t i = 0; i < q.values.size(); ++i) {
        const cplx z = q.grid.point(i);
        t.row(z.real(), z.imag(), q.values[i]);
    }
    return t.str();
}

inline json raster_sidecar(const husimi::QField& q) {
    json j{{"grid", to_json(q.grid)},
           {"source", husimi::to_string(q.source)},
           {"subsystem", husimi::to_string(q.subsystem)},
           {"kind", q.marginal ? "marginal" : "slice"},
           {"t", q.t},
           {"normalization", number(q.normalization())}};
    if (!q.marginal) j["fixed"] = to_json(q.fixed);
    if (q.source == husimi::QSource::oracle_exact) j["neglected_weight"] = q.neglected_weight;
    return j;
}

} // namespace odq::io
