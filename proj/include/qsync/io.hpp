// io.hpp - JSON schemas for models, configs and results; fixed-format CSV emission

#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "qsync/bath.hpp"
#include "qsync/dynamics.hpp"
#include "qsync/errors.hpp"
#include "qsync/probe.hpp"
#include "qsync/signal.hpp"
#include "qsync/spin_model.hpp"
#include "qsync/state.hpp"

namespace qsync::io {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------------------------
// CSV

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

class CsvWriter {
public:
    CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os), width_(header.size()) { row(header); }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != width_) throw Error("csv row width mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os_ << ',';
            os_ << quote(cells[i]);
        }
        os_ << '\n';
    }

private:
    static std::string quote(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        return out + "\"";
    }
    std::ostream& os_;
    std::size_t width_;
};

// ---------------------------------------------------------------------------------------------
// Reading helpers with field-level diagnostics

class Obj {
public:
    Obj(const json& j, std::string path, std::initializer_list<const char*> allowed) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError(path_, "expected an object");
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& [k, v] : j.items())
            if (!ok.count(k)) throw ConfigError(sub(k.c_str()), "unknown field");
    }

    bool has(const char* k) const { return j_.contains(k) && !j_.at(k).is_null(); }
    const json& at(const char* k) const {
        if (!j_.contains(k)) throw ConfigError(sub(k), "missing required field");
        return j_.at(k);
    }
    std::string sub(const char* k) const { return path_.empty() ? std::string(k) : path_ + "." + k; }

    double number(const char* k) const {
        const auto& v = at(k);
        if (!v.is_number()) throw ConfigError(sub(k), "expected a number");
        return v.get<double>();
    }
    double number(const char* k, double def) const { return j_.contains(k) ? number(k) : def; }
    std::optional<double> optional_number(const char* k, std::optional<double> def) const {
        if (!j_.contains(k)) return def;
        if (j_.at(k).is_null()) return std::nullopt;
        return number(k);
    }
    std::size_t count(const char* k, std::size_t def) const {
        if (!j_.contains(k)) return def;
        const auto& v = at(k);
        if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(sub(k), "expected a non-negative integer");
        return v.get<std::size_t>();
    }
    std::string string(const char* k, const std::string& def) const {
        if (!j_.contains(k)) return def;
        const auto& v = at(k);
        if (!v.is_string()) throw ConfigError(sub(k), "expected a string");
        return v.get<std::string>();
    }
    std::vector<double> numbers(const char* k, const std::vector<double>& def) const {
        if (!j_.contains(k)) return def;
        const auto& v = at(k);
        if (!v.is_array()) throw ConfigError(sub(k), "expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigError(sub(k), "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }
    std::pair<double, double> range(const char* k, std::pair<double, double> def) const {
        if (!j_.contains(k)) return def;
        const auto v = numbers(k, {});
        if (v.size() != 2) throw ConfigError(sub(k), "expected [start, end]");
        return {v[0], v[1]};
    }

private:
    const json& j_;
    std::string path_;
};

inline json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

template <typename F>
auto rethrow_as_config(const std::string& field, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(field, e.what());
    }
}

// ---------------------------------------------------------------------------------------------
// Model schemas

inline json encode(const QubitPairParams& p) {
    return {{"omega_q", p.omega_q}, {"omega_p", p.omega_p}, {"lambda", p.lambda}, {"temperature", p.temperature}};
}

inline QubitPairParams decode_params(const json& j, const std::string& path = "params") {
    Obj o(j, path, {"omega_q", "omega_p", "lambda", "temperature"});
    QubitPairParams p;
    p.omega_q = o.number("omega_q", p.omega_q);
    p.omega_p = o.number("omega_p", p.omega_p);
    p.lambda = o.number("lambda", p.lambda);
    p.temperature = o.number("temperature", p.temperature);
    if (!(p.omega_q > 0.0)) throw ConfigError(o.sub("omega_q"), "must be > 0");
    if (!(p.omega_p > 0.0)) throw ConfigError(o.sub("omega_p"), "must be > 0");
    if (!(p.lambda >= 0.0)) throw ConfigError(o.sub("lambda"), "must be >= 0");
    if (!(p.temperature >= 0.0)) throw ConfigError(o.sub("temperature"), "must be >= 0");
    return p;
}

inline json encode(const SpectralDensityModel& m) {
    if (const auto* pl = std::get_if<PowerLawCutoff>(&m))
        return {{"kind", "power_law"}, {"gamma0", pl->gamma0}, {"s", pl->s}, {"omega_c", opt(pl->omega_c)}};
    const auto& tab = std::get<Tabulated>(m);
    json pts = json::array();
    for (const auto& [w, jv] : tab.points) pts.push_back({w, jv});
    return {{"kind", "tabulated"}, {"points", pts}};
}

inline SpectralDensityModel decode_bath(const json& j, const std::string& path = "bath") {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    const std::string kind = j.value("kind", std::string("power_law"));
    if (kind == "power_law") {
        Obj o(j, path, {"kind", "gamma0", "s", "omega_c"});
        PowerLawCutoff pl;
        pl.gamma0 = o.number("gamma0", pl.gamma0);
        pl.s = o.number("s", pl.s);
        pl.omega_c = o.optional_number("omega_c", pl.omega_c);
        if (!(pl.gamma0 >= 0.0)) throw ConfigError(o.sub("gamma0"), "must be >= 0");
        if (!(pl.s > 0.0)) throw ConfigError(o.sub("s"), "must be > 0");
        if (pl.omega_c && !(*pl.omega_c > 0.0)) throw ConfigError(o.sub("omega_c"), "must be > 0 or null");
        return pl;
    }
    if (kind == "tabulated") {
        Obj o(j, path, {"kind", "points"});
        const auto& pts = o.at("points");
        if (!pts.is_array()) throw ConfigError(o.sub("points"), "expected [[omega, J], ...]");
        Tabulated t;
        for (const auto& e : pts) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                throw ConfigError(o.sub("points"), "expected [[omega, J], ...]");
            t.points.emplace_back(e[0].get<double>(), e[1].get<double>());
        }
        rethrow_as_config(o.sub("points"), [&] {
            t.validate();
            return 0;
        });
        return t;
    }
    throw ConfigError(path + ".kind", "must be \"power_law\" or \"tabulated\"");
}

// ---------------------------------------------------------------------------------------------
// Analysis options

inline json encode(const SpectrumOptions& s) {
    return {{"pad_factor", s.pad_factor},
            {"max_frequency", opt(s.max_frequency)},
            {"median_factor", s.median_factor},
            {"relative_floor", s.relative_floor}};
}

inline SpectrumOptions decode_spectrum_options(const json& j, const std::string& path) {
    Obj o(j, path, {"pad_factor", "max_frequency", "median_factor", "relative_floor"});
    SpectrumOptions s;
    s.pad_factor = static_cast<int>(o.count("pad_factor", static_cast<std::size_t>(s.pad_factor)));
    s.max_frequency = o.optional_number("max_frequency", s.max_frequency);
    s.median_factor = o.number("median_factor", s.median_factor);
    s.relative_floor = o.number("relative_floor", s.relative_floor);
    if (s.pad_factor < 1) throw ConfigError(o.sub("pad_factor"), "must be >= 1");
    if (s.max_frequency && !(*s.max_frequency > 0.0)) throw ConfigError(o.sub("max_frequency"), "must be > 0");
    return s;
}

inline json encode(const SyncConfig& c) {
    return {{"window", c.window},
            {"step", opt(c.step)},
            {"sync_threshold", c.sync_threshold},
            {"nosync_threshold", c.nosync_threshold},
            {"late_window", {c.late_start, c.late_end}},
            {"amplitude_floor", c.amplitude_floor},
            {"spectrum", encode(c.spectrum)}};
}

inline SyncConfig decode_analysis(const json& j, const std::string& path = "analysis") {
    Obj o(j, path, {"window", "step", "sync_threshold", "nosync_threshold", "late_window", "amplitude_floor", "spectrum"});
    SyncConfig c;
    c.window = o.number("window", c.window);
    c.step = o.optional_number("step", c.step);
    c.sync_threshold = o.number("sync_threshold", c.sync_threshold);
    c.nosync_threshold = o.number("nosync_threshold", c.nosync_threshold);
    std::tie(c.late_start, c.late_end) = o.range("late_window", {c.late_start, c.late_end});
    c.amplitude_floor = o.number("amplitude_floor", c.amplitude_floor);
    if (o.has("spectrum")) c.spectrum = decode_spectrum_options(o.at("spectrum"), o.sub("spectrum"));
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------------------------
// Initial state

struct InitialStateSpec {
    std::string preset{"plus_plus"};  // plus_plus | ground | maximally_mixed; empty when explicit
    std::vector<cplx> vector;         // 4 amplitudes (normalized on use)
    std::vector<cplx> matrix;         // 16 entries, row-major

    bool operator==(const InitialStateSpec&) const = default;

    DensityMatrix4 resolve(const QubitPairParams& p) const {
        if (!vector.empty()) {
            Vector4cd v;
            for (int k = 0; k < 4; ++k) v(k) = vector[k];
            if (v.norm() == 0.0) throw ConfigError("initial_state.vector", "must be nonzero");
            return DensityMatrix4::pure(v, Basis::Computational);
        }
        if (!matrix.empty()) {
            Matrix4cd m;
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c) m(r, c) = matrix[4 * r + c];
            return rethrow_as_config("initial_state.matrix", [&] { return DensityMatrix4(m, Basis::Computational); });
        }
        if (preset == "plus_plus") return plus_plus_state();
        if (preset == "maximally_mixed") return DensityMatrix4::maximally_mixed();
        if (preset == "ground") {
            const auto ops = build_operators(p);
            const Vector4cd g = ops.eigenbasis.col(0);
            return DensityMatrix4::pure(g, Basis::Computational);
        }
        throw ConfigError("initial_state.preset", "unknown preset \"" + preset + "\"");
    }
};

inline json encode_complex(cplx z) { return json::array({z.real(), z.imag()}); }

inline cplx decode_complex(const json& j, const std::string& path) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    throw ConfigError(path, "expected a number or [re, im]");
}

inline json encode(const InitialStateSpec& s) {
    if (!s.vector.empty()) {
        json v = json::array();
        for (auto z : s.vector) v.push_back(encode_complex(z));
        return {{"vector", v}};
    }
    if (!s.matrix.empty()) {
        json m = json::array();
        for (int r = 0; r < 4; ++r) {
            json row = json::array();
            for (int c = 0; c < 4; ++c) row.push_back(encode_complex(s.matrix[4 * r + c]));
            m.push_back(row);
        }
        return {{"matrix", m}};
    }
    return {{"preset", s.preset}};
}

inline InitialStateSpec decode_initial_state(const json& j, const std::string& path = "initial_state") {
    Obj o(j, path, {"preset", "vector", "matrix"});
    InitialStateSpec s;
    const int given = o.has("preset") + o.has("vector") + o.has("matrix");
    if (given > 1) throw ConfigError(path, "give exactly one of preset, vector, matrix");
    if (o.has("vector")) {
        const auto& v = o.at("vector");
        if (!v.is_array() || v.size() != 4) throw ConfigError(o.sub("vector"), "expected 4 amplitudes");
        s.preset.clear();
        for (const auto& e : v) s.vector.push_back(decode_complex(e, o.sub("vector")));
    } else if (o.has("matrix")) {
        const auto& m = o.at("matrix");
        if (!m.is_array() || m.size() != 4) throw ConfigError(o.sub("matrix"), "expected a 4x4 array");
        s.preset.clear();
        for (const auto& row : m) {
            if (!row.is_array() || row.size() != 4) throw ConfigError(o.sub("matrix"), "expected a 4x4 array");
            for (const auto& e : row) s.matrix.push_back(decode_complex(e, o.sub("matrix")));
        }
    } else {
        s.preset = o.string("preset", s.preset);
        if (s.preset != "plus_plus" && s.preset != "ground" && s.preset != "maximally_mixed")
            throw ConfigError(o.sub("preset"), "unknown preset \"" + s.preset + "\"");
    }
    return s;
}

// ---------------------------------------------------------------------------------------------
// Run configuration

struct TimeGrid {
    double dt{0.05};
    double t_end{400.0};
    bool operator==(const TimeGrid&) const = default;
    std::vector<double> times() const { return uniform_times(dt, t_end); }
};

struct SweepAxis {
    std::string name;           // omega_p | lambda | s | T
    std::vector<double> values; // explicit grid
    bool operator==(const SweepAxis&) const = default;
};

struct SweepSpec {
    std::vector<SweepAxis> axes;
    std::vector<std::string> record{"c", "omega_sync", "regime"};
    bool operator==(const SweepSpec&) const = default;
};

struct SpectrumJob {
    std::vector<std::pair<double, double>> windows{{0.0, 110.0}, {100.0, 210.0}, {200.0, 310.0}};
    std::vector<double> omega_p_values; // empty: params.omega_p only
    bool fit_linewidths{true};
    bool operator==(const SpectrumJob&) const = default;
};

struct LinewidthProbe {
    double omega_p{1.2};
    double lambda{0.2};
    double window_start{200.0};
    double window_end{310.0};
    bool operator==(const LinewidthProbe&) const = default;
};

struct ProtocolConfig {
    std::string mode{"simulation"}; // simulation | constraints
    std::vector<double> lambdas{0.1, 0.15, 0.2, 0.25, 0.3};
    ConstraintSource source{ConstraintSource::Analytic};
    double omega_p_lo{0.6};
    double omega_p_hi{1.6};
    std::size_t grid_steps{41};
    FitFamily family{FitFamily::PowerLaw};
    std::optional<double> fit_omega_c;
    std::size_t n_nodes{6};
    double smoothness{1e-2};
    std::optional<LinewidthProbe> linewidth;
    std::string constraints_file;
    bool operator==(const ProtocolConfig&) const = default;
};

struct RunConfig {
    QubitPairParams params{1.0, 1.2, 0.2, 0.0};
    SpectralDensityModel bath{PowerLawCutoff{}};
    InitialStateSpec initial_state{};
    TimeGrid time{};
    SyncConfig analysis{};
    double rate_prefactor{kDefaultRatePrefactor};
    std::string solver{"analytic"}; // analytic | numeric
    SpectrumJob spectrum{};
    std::optional<SweepSpec> sweep;
    std::optional<ProtocolConfig> protocol;
    bool operator==(const RunConfig&) const = default;
};

inline const std::set<std::string>& sweep_quantities() {
    static const std::set<std::string> q{"c", "omega_sync", "regime", "mi", "correlator"};
    return q;
}

inline json encode(const SweepSpec& s) {
    json axes = json::array();
    for (const auto& a : s.axes) axes.push_back({{"name", a.name}, {"values", a.values}});
    return {{"axes", axes}, {"record", s.record}};
}

inline SweepSpec decode_sweep(const json& j, const SpectralDensityModel& bath, const std::string& path = "sweep") {
    Obj o(j, path, {"axes", "record"});
    SweepSpec s;
    const auto& axes = o.at("axes");
    if (!axes.is_array() || axes.empty() || axes.size() > 2) throw ConfigError(o.sub("axes"), "expected 1 or 2 axes");
    for (std::size_t i = 0; i < axes.size(); ++i) {
        const std::string ap = o.sub("axes") + "[" + std::to_string(i) + "]";
        Obj a(axes[i], ap, {"name", "range", "steps", "values"});
        SweepAxis ax;
        ax.name = a.string("name", "");
        if (ax.name != "omega_p" && ax.name != "lambda" && ax.name != "s" && ax.name != "T")
            throw ConfigError(a.sub("name"), "must be one of omega_p, lambda, s, T");
        if (a.has("values")) {
            if (a.has("range") || a.has("steps")) throw ConfigError(ap, "give either values or range+steps");
            ax.values = a.numbers("values", {});
        } else {
            const auto [lo, hi] = a.range("range", {0.0, 0.0});
            if (!a.has("range")) throw ConfigError(a.sub("range"), "missing required field");
            const std::size_t steps = a.count("steps", 0);
            if (steps < 2) throw ConfigError(a.sub("steps"), "must be >= 2");
            if (!(hi > lo)) throw ConfigError(a.sub("range"), "needs start < end");
            ax.values = linear_grid(lo, hi, steps);
        }
        if (ax.values.size() < 2) throw ConfigError(ap, "needs at least 2 grid values");
        for (double v : ax.values) {
            const bool ok = (ax.name == "omega_p" || ax.name == "s") ? v > 0.0 : v >= 0.0;
            if (!ok || !std::isfinite(v)) throw ConfigError(ap, "value " + fmt(v) + " outside the valid range");
        }
        if (ax.name == "s" && !std::holds_alternative<PowerLawCutoff>(bath))
            throw ConfigError(a.sub("name"), "an s axis requires a power_law bath");
        for (const auto& prev : s.axes)
            if (prev.name == ax.name) throw ConfigError(a.sub("name"), "duplicate axis");
        s.axes.push_back(ax);
    }
    if (o.has("record")) {
        const auto& r = o.at("record");
        if (!r.is_array() || r.empty()) throw ConfigError(o.sub("record"), "expected a non-empty list");
        s.record.clear();
        for (const auto& e : r) {
            if (!e.is_string() || !sweep_quantities().count(e.get<std::string>()))
                throw ConfigError(o.sub("record"), "quantities are c, omega_sync, regime, mi, correlator");
            s.record.push_back(e.get<std::string>());
        }
    }
    return s;
}

inline json encode(const SpectrumJob& s) {
    json w = json::array();
    for (const auto& [a, b] : s.windows) w.push_back({a, b});
    return {{"windows", w}, {"omega_p_values", s.omega_p_values}, {"fit_linewidths", s.fit_linewidths}};
}

inline SpectrumJob decode_spectrum_job(const json& j, const std::string& path = "spectrum") {
    Obj o(j, path, {"windows", "omega_p_values", "fit_linewidths"});
    SpectrumJob s;
    if (o.has("windows")) {
        const auto& w = o.at("windows");
        if (!w.is_array() || w.empty()) throw ConfigError(o.sub("windows"), "expected [[start, end], ...]");
        s.windows.clear();
        for (const auto& e : w) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                throw ConfigError(o.sub("windows"), "expected [[start, end], ...]");
            const double a = e[0].get<double>(), b = e[1].get<double>();
            if (!(b > a) || a < 0.0) throw ConfigError(o.sub("windows"), "each window needs 0 <= start < end");
            s.windows.emplace_back(a, b);
        }
    }
    s.omega_p_values = o.numbers("omega_p_values", {});
    for (double v : s.omega_p_values)
        if (!(v > 0.0)) throw ConfigError(o.sub("omega_p_values"), "must be > 0");
    if (j.contains("fit_linewidths")) {
        if (!j.at("fit_linewidths").is_boolean()) throw ConfigError(o.sub("fit_linewidths"), "expected a boolean");
        s.fit_linewidths = j.at("fit_linewidths").get<bool>();
    }
    return s;
}

inline json encode(const ProtocolConfig& p) {
    json lw = nullptr;
    if (p.linewidth)
        lw = {{"omega_p", p.linewidth->omega_p},
              {"lambda", p.linewidth->lambda},
              {"window", {p.linewidth->window_start, p.linewidth->window_end}}};
    return {{"mode", p.mode},
            {"lambdas", p.lambdas},
            {"source", p.source == ConstraintSource::Analytic ? "analytic" : "signal"},
            {"omega_p_range", {p.omega_p_lo, p.omega_p_hi}},
            {"grid_steps", p.grid_steps},
            {"family", to_string(p.family)},
            {"fit_omega_c", opt(p.fit_omega_c)},
            {"n_nodes", p.n_nodes},
            {"smoothness", p.smoothness},
            {"linewidth", lw},
            {"constraints_file", p.constraints_file}};
}

inline ProtocolConfig decode_protocol(const json& j, const std::string& path = "protocol") {
    Obj o(j, path, {"mode", "lambdas", "source", "omega_p_range", "grid_steps", "family", "fit_omega_c", "n_nodes",
                    "smoothness", "linewidth", "constraints_file"});
    ProtocolConfig p;
    p.mode = o.string("mode", p.mode);
    if (p.mode != "simulation" && p.mode != "constraints")
        throw ConfigError(o.sub("mode"), "must be \"simulation\" or \"constraints\"");
    p.lambdas = o.numbers("lambdas", p.lambdas);
    const std::string src = o.string("source", "analytic");
    if (src != "analytic" && src != "signal") throw ConfigError(o.sub("source"), "must be \"analytic\" or \"signal\"");
    p.source = src == "analytic" ? ConstraintSource::Analytic : ConstraintSource::Signal;
    std::tie(p.omega_p_lo, p.omega_p_hi) = o.range("omega_p_range", {p.omega_p_lo, p.omega_p_hi});
    if (!(p.omega_p_lo > 0.0 && p.omega_p_hi > p.omega_p_lo))
        throw ConfigError(o.sub("omega_p_range"), "needs 0 < start < end");
    p.grid_steps = o.count("grid_steps", p.grid_steps);
    if (p.grid_steps < 3) throw ConfigError(o.sub("grid_steps"), "must be >= 3");
    const std::string fam = o.string("family", "power-law");
    if (fam != "power-law" && fam != "tabulated") throw ConfigError(o.sub("family"), "must be \"power-law\" or \"tabulated\"");
    p.family = fam == "power-law" ? FitFamily::PowerLaw : FitFamily::Tabulated;
    p.fit_omega_c = o.optional_number("fit_omega_c", p.fit_omega_c);
    if (p.fit_omega_c && !(*p.fit_omega_c > 0.0)) throw ConfigError(o.sub("fit_omega_c"), "must be > 0 or null");
    p.n_nodes = o.count("n_nodes", p.n_nodes);
    p.smoothness = o.number("smoothness", p.smoothness);
    if (!(p.smoothness >= 0.0)) throw ConfigError(o.sub("smoothness"), "must be >= 0");
    if (o.has("linewidth")) {
        Obj l(o.at("linewidth"), o.sub("linewidth"), {"omega_p", "lambda", "window"});
        LinewidthProbe lp;
        lp.omega_p = l.number("omega_p", lp.omega_p);
        lp.lambda = l.number("lambda", lp.lambda);
        std::tie(lp.window_start, lp.window_end) = l.range("window", {lp.window_start, lp.window_end});
        if (!(lp.omega_p > 0.0)) throw ConfigError(l.sub("omega_p"), "must be > 0");
        if (!(lp.lambda >= 0.0)) throw ConfigError(l.sub("lambda"), "must be >= 0");
        if (!(lp.window_end > lp.window_start)) throw ConfigError(l.sub("window"), "needs start < end");
        p.linewidth = lp;
    }
    p.constraints_file = o.string("constraints_file", p.constraints_file);
    if (p.mode == "constraints" && p.constraints_file.empty())
        throw ConfigError(o.sub("constraints_file"), "required in constraints mode");
    if (p.mode == "simulation" && p.lambdas.empty()) throw ConfigError(o.sub("lambdas"), "must not be empty");
    for (double l : p.lambdas)
        if (!(l >= 0.0)) throw ConfigError(o.sub("lambdas"), "must be >= 0");
    return p;
}

inline json encode(const RunConfig& c) {
    json out = {{"params", encode(c.params)},
                {"bath", encode(c.bath)},
                {"initial_state", encode(c.initial_state)},
                {"time", {{"dt", c.time.dt}, {"t_end", c.time.t_end}}},
                {"analysis", encode(c.analysis)},
                {"rate_prefactor", c.rate_prefactor},
                {"solver", c.solver},
                {"spectrum", encode(c.spectrum)}};
    out["sweep"] = c.sweep ? encode(*c.sweep) : json(nullptr);
    out["protocol"] = c.protocol ? encode(*c.protocol) : json(nullptr);
    return out;
}

inline RunConfig decode_config(const json& j) {
    Obj o(j, "", {"params", "bath", "initial_state", "time", "analysis", "rate_prefactor", "solver", "spectrum", "sweep",
                  "protocol", "description"});
    RunConfig c;
    if (o.has("params")) c.params = decode_params(o.at("params"));
    if (o.has("bath")) c.bath = decode_bath(o.at("bath"));
    if (o.has("initial_state")) c.initial_state = decode_initial_state(o.at("initial_state"));
    if (o.has("time")) {
        Obj t(o.at("time"), "time", {"dt", "t_end"});
        c.time.dt = t.number("dt", c.time.dt);
        c.time.t_end = t.number("t_end", c.time.t_end);
        if (!(c.time.dt > 0.0)) throw ConfigError("time.dt", "must be > 0");
        if (!(c.time.t_end > c.time.dt)) throw ConfigError("time.t_end", "must exceed dt");
    }
    if (o.has("analysis")) c.analysis = decode_analysis(o.at("analysis"));
    c.rate_prefactor = o.number("rate_prefactor", c.rate_prefactor);
    if (!(c.rate_prefactor > 0.0)) throw ConfigError("rate_prefactor", "must be > 0");
    c.solver = o.string("solver", c.solver);
    if (c.solver != "analytic" && c.solver != "numeric") throw ConfigError("solver", "must be \"analytic\" or \"numeric\"");
    if (o.has("spectrum")) c.spectrum = decode_spectrum_job(o.at("spectrum"));
    if (o.has("sweep")) c.sweep = decode_sweep(o.at("sweep"), c.bath);
    if (o.has("protocol")) c.protocol = decode_protocol(o.at("protocol"));
    if (o.has("description") && !o.at("description").is_string()) throw ConfigError("description", "expected a string");
    return c;
}

inline json parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin, std::string("invalid JSON: ") + e.what());
    }
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_json_text(ss.str(), path);
}

// ---------------------------------------------------------------------------------------------
// Result schemas

inline json encode(const SyncMetrics& m) {
    json c = json::array();
    for (std::size_t i = 0; i < m.c_times.size(); ++i) c.push_back({m.c_times[i], opt(m.c_of_t[i])});
    return {{"window", m.window},
            {"regime", to_string(m.regime)},
            {"reason", to_string(m.reason)},
            {"final_c", opt(m.final_c)},
            {"omega_sync", opt(m.omega_sync)},
            {"late_amplitude", m.late_amplitude},
            {"c_of_t", c}};
}

inline SyncRegime decode_regime(const std::string& s) {
    if (s == "InPhase") return SyncRegime::InPhase;
    if (s == "AntiPhase") return SyncRegime::AntiPhase;
    if (s == "Indeterminate") return SyncRegime::Indeterminate;
    if (s == "NoSync") return SyncRegime::NoSync;
    throw ConfigError("regime", "unknown value \"" + s + "\"");
}

inline SyncMetrics decode_sync_metrics(const json& j) {
    Obj o(j, "sync", {"window", "regime", "reason", "final_c", "omega_sync", "late_amplitude", "c_of_t"});
    SyncMetrics m;
    m.window = o.number("window");
    m.regime = decode_regime(o.string("regime", "NoSync"));
    const std::string reason = o.string("reason", "None");
    m.reason = reason == "DecayedBelowFloor"      ? SyncReason::DecayedBelowFloor
               : reason == "UndefinedCorrelation" ? SyncReason::UndefinedCorrelation
                                                  : SyncReason::None;
    m.final_c = o.optional_number("final_c", std::nullopt);
    m.omega_sync = o.optional_number("omega_sync", std::nullopt);
    m.late_amplitude = o.number("late_amplitude");
    for (const auto& e : o.at("c_of_t")) {
        m.c_times.push_back(e.at(0).get<double>());
        m.c_of_t.push_back(e.at(1).is_null() ? std::nullopt : std::optional<double>(e.at(1).get<double>()));
    }
    return m;
}

inline json encode(const SpectralPeak& p) {
    return {{"frequency", p.frequency}, {"height", p.height}, {"fwhm", opt(p.fwhm)}};
}

inline json encode(const TransitionPoint& t) {
    return {{"lambda", t.lambda},
            {"omega_p_bar", t.omega_p_bar},
            {"E1", t.E1},
            {"E2", t.E2},
            {"ratio", t.ratio},
            {"uncertainty", t.uncertainty},
            {"temperature", t.temperature},
            {"omega_sync_below", opt(t.omega_sync_below)},
            {"omega_sync_above", opt(t.omega_sync_above)}};
}

inline TransitionPoint decode_transition(const json& j, const std::string& path) {
    Obj o(j, path, {"lambda", "omega_p_bar", "E1", "E2", "ratio", "uncertainty", "temperature", "omega_sync_below",
                    "omega_sync_above"});
    TransitionPoint t;
    t.lambda = o.number("lambda");
    t.omega_p_bar = o.number("omega_p_bar");
    t.E1 = o.number("E1");
    t.E2 = o.number("E2");
    t.ratio = o.number("ratio");
    t.uncertainty = o.number("uncertainty", 0.0);
    t.temperature = o.number("temperature", 0.0);
    t.omega_sync_below = o.optional_number("omega_sync_below", std::nullopt);
    t.omega_sync_above = o.optional_number("omega_sync_above", std::nullopt);
    if (!(t.ratio > 0.0)) throw ConfigError(o.sub("ratio"), "must be > 0");
    if (!(t.E1 >= t.E2 && t.E2 > 0.0)) throw ConfigError(o.sub("E2"), "needs E1 >= E2 > 0");
    return t;
}

inline json encode(const ConstraintSet& s) {
    json pts = json::array(), fails = json::array();
    for (const auto& p : s.points) pts.push_back(encode(p));
    for (const auto& f : s.failures) fails.push_back({{"lambda", f.lambda}, {"error", f.message}});
    return {{"constraints", pts}, {"failures", fails}};
}

inline ConstraintSet decode_constraints(const json& j) {
    Obj o(j, "constraints_file", {"constraints", "failures"});
    ConstraintSet s;
    const auto& pts = o.at("constraints");
    if (!pts.is_array()) throw ConfigError(o.sub("constraints"), "expected an array");
    for (std::size_t i = 0; i < pts.size(); ++i)
        s.points.push_back(decode_transition(pts[i], o.sub("constraints") + "[" + std::to_string(i) + "]"));
    if (o.has("failures"))
        for (const auto& f : o.at("failures"))
            s.failures.push_back({f.at("lambda").get<double>(), f.at("error").get<std::string>()});
    return s;
}

inline json encode(const ReconstructionResult& r) {
    json model = r.power_law ? encode(SpectralDensityModel{*r.power_law}) : encode(SpectralDensityModel{*r.tabulated});
    return {{"family", to_string(r.family)},
            {"model", model},
            {"amplitude_identified", r.amplitude_identified},
            {"residuals", r.residuals},
            {"diagnostics",
             {{"rms_residual", r.diagnostics.rms_residual},
              {"iterations", r.diagnostics.iterations},
              {"converged", r.diagnostics.converged},
              {"n_constraints", r.diagnostics.n_constraints},
              {"surviving_mode", r.diagnostics.surviving_mode}}}};
}

inline ReconstructionResult decode_reconstruction(const json& j) {
    Obj o(j, "reconstruction", {"family", "model", "amplitude_identified", "residuals", "diagnostics"});
    ReconstructionResult r;
    r.family = o.string("family", "power-law") == "tabulated" ? FitFamily::Tabulated : FitFamily::PowerLaw;
    const auto model = decode_bath(o.at("model"), o.sub("model"));
    if (const auto* pl = std::get_if<PowerLawCutoff>(&model)) r.power_law = *pl;
    else r.tabulated = std::get<Tabulated>(model);
    r.amplitude_identified = o.at("amplitude_identified").get<bool>();
    r.residuals = o.numbers("residuals", {});
    Obj d(o.at("diagnostics"), o.sub("diagnostics"),
          {"rms_residual", "iterations", "converged", "n_constraints", "surviving_mode"});
    r.diagnostics.rms_residual = d.number("rms_residual");
    r.diagnostics.iterations = d.at("iterations").get<int>();
    r.diagnostics.converged = d.at("converged").get<bool>();
    r.diagnostics.n_constraints = d.count("n_constraints", 0);
    r.diagnostics.surviving_mode = d.at("surviving_mode").get<int>();
    return r;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& t) {
    CsvWriter w(os, {"t", "sx_q", "sx_p"});
    for (std::size_t k = 0; k < t.size(); ++k) w.row({fmt(t.times[k]), fmt(t.sx_q[k]), fmt(t.sx_p[k])});
}

inline void write_spectrum_csv(std::ostream& os, const SpectrumEstimate& s) {
    CsvWriter w(os, {"freq", "magnitude"});
    for (std::size_t k = 0; k < s.freqs.size(); ++k) w.row({fmt(s.freqs[k]), fmt(s.magnitude[k])});
}

inline void write_constraints_csv(std::ostream& os, const ConstraintSet& s) {
    CsvWriter w(os, {"lambda", "omega_p_bar", "E1", "E2", "ratio", "uncertainty", "temperature", "error"});
    for (const auto& p : s.points)
        w.row({fmt(p.lambda), fmt(p.omega_p_bar), fmt(p.E1), fmt(p.E2), fmt(p.ratio), fmt(p.uncertainty),
               fmt(p.temperature), ""});
    for (const auto& f : s.failures) w.row({fmt(f.lambda), "", "", "", "", "", "", f.message});
}

} // namespace qsync::io
