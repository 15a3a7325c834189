// workflow.hpp - end-to-end jobs behind the CLI subcommands, producing in-memory artifacts

#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qsync/io.hpp"
#include "qsync/parallel.hpp"

namespace qsync::workflow {

enum class Status { Ok = 0, Partial = 1 };

struct Artifacts {
    std::map<std::string, std::string> files; // file name -> contents
    Status status{Status::Ok};
    std::vector<std::string> messages;
};

struct Workers {
    std::size_t count{0};
};

struct Simulation {
    QubitPairParams params;
    EigenStructure eig;
    OperatorSet ops;
    LindbladRates rates;
    Trajectory traj;
};

inline Simulation simulate(const io::RunConfig& cfg, const QubitPairParams& p, const SpectralDensityModel& bath,
                           bool store_states = false) {
    p.validate();
    validate(bath);
    Simulation s;
    s.params = p;
    s.eig = diagonalize(p);
    s.ops = build_operators(p, s.eig);
    s.rates = lindblad_rates(s.eig, bath, p.temperature, cfg.rate_prefactor);
    const auto rho0 = cfg.initial_state.resolve(p);
    const auto times = cfg.time.times();
    if (cfg.solver == "numeric") {
        NumericOptions no;
        no.rate_prefactor = cfg.rate_prefactor;
        no.store_states = store_states;
        s.traj = evolve_numeric(p, bath, rho0, times, no);
    } else {
        s.traj = evolve_analytic(s.eig, s.ops, s.rates, rho0, times, EvolveOptions{store_states});
    }
    return s;
}

inline void require_late_window(const io::RunConfig& cfg) {
    if (cfg.time.t_end < cfg.analysis.late_end)
        throw ConfigError("time.t_end", "must reach analysis.late_window end (" + io::fmt(cfg.analysis.late_end) + ")");
}

// ---------------------------------------------------------------------------------------------
// evolve

inline Artifacts evolve(const io::RunConfig& cfg) {
    require_late_window(cfg);
    const auto sim = simulate(cfg, cfg.params, cfg.bath);
    Artifacts a;
    std::ostringstream csv;
    io::write_trajectory_csv(csv, sim.traj);
    a.files["trajectory.csv"] = csv.str();
    const auto metrics = detect_sync(sim.traj, cfg.analysis);
    io::json out = {{"params", io::encode(cfg.params)}, {"bath", io::encode(cfg.bath)}, {"sync", io::encode(metrics)}};
    a.files["sync.json"] = io::dump(out);
    return a;
}

// ---------------------------------------------------------------------------------------------
// sweep

struct SweepRow {
    std::vector<double> coords;
    std::optional<SyncMetrics> metrics;
    std::optional<double> mi;
    std::optional<double> correlator;
    std::string error;
};

inline void apply_axis(const std::string& name, double v, QubitPairParams& p, SpectralDensityModel& bath) {
    if (name == "omega_p") p.omega_p = v;
    else if (name == "lambda") p.lambda = v;
    else if (name == "T") p.temperature = v;
    else if (name == "s") std::get<PowerLawCutoff>(bath).s = v;
}

inline SweepRow sweep_point(const io::RunConfig& cfg, const io::SweepSpec& spec, const std::vector<double>& coords) {
    SweepRow row;
    row.coords = coords;
    QubitPairParams p = cfg.params;
    SpectralDensityModel bath = cfg.bath;
    for (std::size_t k = 0; k < coords.size(); ++k) apply_axis(spec.axes[k].name, coords[k], p, bath);
    const auto wants = [&](const char* q) {
        return std::find(spec.record.begin(), spec.record.end(), q) != spec.record.end();
    };
    const bool need_state = wants("mi") || wants("correlator");
    try {
        auto sim = simulate(cfg, p, bath, need_state);
        row.metrics = detect_sync(sim.traj, cfg.analysis);
        if (need_state) {
            const DensityMatrix4 last(sim.traj.states.back(), Basis::Computational);
            row.mi = mutual_information(last);
            row.correlator = std::abs(spin_correlator(last));
        }
    } catch (const Error& e) {
        row.error = e.what();
    }
    return row;
}

inline Artifacts sweep(const io::RunConfig& cfg, Workers w = {}) {
    if (!cfg.sweep) throw ConfigError("sweep", "missing required section");
    require_late_window(cfg);
    const auto& spec = *cfg.sweep;
    std::vector<std::vector<double>> grid;
    for (double a : spec.axes[0].values) {
        if (spec.axes.size() == 1) grid.push_back({a});
        else
            for (double b : spec.axes[1].values) grid.push_back({a, b});
    }
    const auto rows = parallel_map(grid.size(), [&](std::size_t i) { return sweep_point(cfg, spec, grid[i]); }, w.count);

    std::vector<std::string> header;
    for (const auto& ax : spec.axes) header.push_back(ax.name);
    for (const auto& q : spec.record) header.push_back(q);
    header.push_back("error");
    std::ostringstream csv;
    io::CsvWriter out(csv, header);
    Artifacts a;
    std::size_t failures = 0;
    for (const auto& r : rows) {
        std::vector<std::string> cells;
        for (double c : r.coords) cells.push_back(io::fmt(c));
        for (const auto& q : spec.record) {
            if (!r.metrics) cells.emplace_back();
            else if (q == "c") cells.push_back(io::fmt(r.metrics->final_c));
            else if (q == "omega_sync") cells.push_back(io::fmt(r.metrics->omega_sync));
            else if (q == "regime") cells.push_back(to_string(r.metrics->regime));
            else if (q == "mi") cells.push_back(io::fmt(r.mi));
            else if (q == "correlator") cells.push_back(io::fmt(r.correlator));
        }
        cells.push_back(r.error);
        if (!r.error.empty()) ++failures;
        out.row(cells);
    }
    a.files["sweep.csv"] = csv.str();
    if (failures) {
        a.status = Status::Partial;
        a.messages.push_back(std::to_string(failures) + " of " + std::to_string(rows.size()) + " sweep points failed");
    }
    return a;
}

// ---------------------------------------------------------------------------------------------
// spectrum

inline std::vector<double> probe_values(const io::RunConfig& cfg) {
    return cfg.spectrum.omega_p_values.empty() ? std::vector<double>{cfg.params.omega_p} : cfg.spectrum.omega_p_values;
}

inline void check_spectrum_job(const io::RunConfig& cfg) {
    for (std::size_t k = 0; k < cfg.spectrum.windows.size(); ++k) {
        const auto [t0, t1] = cfg.spectrum.windows[k];
        if (t1 > cfg.time.t_end)
            throw ConfigError("spectrum.windows[" + std::to_string(k) + "]",
                              "ends at " + io::fmt(t1) + ", beyond time.t_end = " + io::fmt(cfg.time.t_end));
        if (t1 - t0 < 64 * cfg.time.dt)
            throw ConfigError("spectrum.windows[" + std::to_string(k) + "]", "needs at least 64 samples");
    }
}

inline Artifacts spectrum(const io::RunConfig& cfg, Workers w = {}) {
    check_spectrum_job(cfg);
    const auto wps = probe_values(cfg);
    struct Panel {
        std::vector<SpectrumEstimate> spectra;
        io::json report;
    };
    const auto panels = parallel_map(wps.size(), [&](std::size_t i) {
        QubitPairParams p = cfg.params;
        p.omega_p = wps[i];
        const auto sim = simulate(cfg, p, cfg.bath);
        Panel panel;
        io::json windows = io::json::array();
        for (const auto& [t0, t1] : cfg.spectrum.windows) {
            auto s = windowed_fft(sim.traj.sx_p, sim.traj.times, t0, t1, cfg.analysis.spectrum);
            io::json peaks = io::json::array();
            for (std::size_t k = 0; k < s.peaks.size(); ++k) {
                io::json pk = io::encode(s.peaks[k]);
                if (cfg.spectrum.fit_linewidths) {
                    try {
                        const auto fit = peak_linewidth(s, k);
                        pk["linewidth"] = {{"fwhm", fit.fwhm}, {"center", fit.center},
                                           {"relative_residual", fit.relative_residual}};
                    } catch (const Error& e) {
                        pk["linewidth"] = {{"error", e.what()}};
                    }
                }
                peaks.push_back(pk);
            }
            windows.push_back({{"window", {t0, t1}}, {"bin_width", s.bin_width()}, {"peaks", peaks}});
            panel.spectra.push_back(std::move(s));
        }
        io::json inference = nullptr;
        try {
            const auto est = infer_system_params(panel.spectra.front(), p.omega_p);
            inference = {{"omega_q", est.omega_q}, {"lambda", est.lambda}, {"E1", est.E1}, {"E2", est.E2}};
        } catch (const Error& e) {
            inference = {{"error", e.what()}};
        }
        panel.report = {{"omega_p", p.omega_p},
                        {"E1", sim.eig.E1},
                        {"E2", sim.eig.E2},
                        {"rates", {{"total1", sim.rates.total1()}, {"total2", sim.rates.total2()}}},
                        {"windows", windows},
                        {"inference", inference}};
        return panel;
    }, w.count);

    Artifacts a;
    io::json report = {{"signal", "sx_p"}, {"panels", io::json::array()}};
    std::vector<ProbeMeasurement> measurements;
    for (std::size_t i = 0; i < panels.size(); ++i) {
        for (std::size_t k = 0; k < panels[i].spectra.size(); ++k) {
            std::ostringstream csv;
            io::write_spectrum_csv(csv, panels[i].spectra[k]);
            a.files["spectrum_" + std::to_string(i) + "_" + std::to_string(k) + ".csv"] = csv.str();
        }
        report["panels"].push_back(panels[i].report);
        try {
            measurements.push_back(peaks_of(panels[i].spectra.front(), wps[i]));
        } catch (const Error&) {
        }
    }
    if (measurements.size() >= 2) {
        try {
            const auto est = infer_system_params(measurements);
            report["joint_inference"] = {{"omega_q", est.omega_q}, {"lambda", est.lambda},
                                         {"consistency", est.consistency}};
        } catch (const Error& e) {
            report["joint_inference"] = {{"error", e.what()}};
        }
    }
    a.files["spectrum.json"] = io::dump(report);
    return a;
}

// ---------------------------------------------------------------------------------------------
// scan-transition and reconstruct

inline CollectConfig collect_config(const io::RunConfig& cfg, const io::ProtocolConfig& pc, Workers w) {
    CollectConfig cc;
    cc.source = pc.source;
    cc.omega_p_lo = pc.omega_p_lo;
    cc.omega_p_hi = pc.omega_p_hi;
    cc.grid_steps = pc.grid_steps;
    cc.predict.rate_prefactor = cfg.rate_prefactor;
    cc.scan.dt = cfg.time.dt;
    cc.scan.late_start = cfg.analysis.late_start;
    cc.scan.late_end = cfg.analysis.late_end;
    cc.scan.rate_prefactor = cfg.rate_prefactor;
    cc.scan.spectrum = cfg.analysis.spectrum;
    cc.scan.initial = cfg.initial_state.resolve(cfg.params);
    cc.scan.workers = w.count;
    cc.workers = w.count;
    return cc;
}

inline Artifacts scan_transition(const io::RunConfig& cfg, Workers w = {}) {
    const io::ProtocolConfig pc = cfg.protocol.value_or(io::ProtocolConfig{});
    validate(cfg.bath);
    const auto cc = collect_config(cfg, pc, w);
    io::json out = {{"params", io::encode(cfg.params)}, {"bath", io::encode(cfg.bath)}};
    Artifacts a;
    try {
        PredictOptions po = cc.predict;
        const double wbar = predict_transition(cfg.bath, cfg.params, pc.omega_p_lo, pc.omega_p_hi, po);
        out["predicted"] = io::encode(make_transition_point(cfg.params, wbar, 0.5 * po.tolerance));
    } catch (const Error& e) {
        out["predicted"] = {{"error", e.what()}};
        a.status = Status::Partial;
        a.messages.push_back(std::string("predicted transition: ") + e.what());
    }
    try {
        const auto grid = linear_grid(pc.omega_p_lo, pc.omega_p_hi, pc.grid_steps);
        out["scanned"] = io::encode(qsync::scan_transition(cfg.bath, cfg.params, grid, cc.scan));
    } catch (const ResolutionError& e) {
        out["scanned"] = {{"error", e.what()}, {"suggested_step", e.suggested_step}};
        a.status = Status::Partial;
        a.messages.push_back(std::string("scanned transition: ") + e.what());
    } catch (const Error& e) {
        out["scanned"] = {{"error", e.what()}};
        a.status = Status::Partial;
        a.messages.push_back(std::string("scanned transition: ") + e.what());
    }
    a.files["transition.json"] = io::dump(out);
    return a;
}

// Late-window FWHM of the surviving peak of sx_p, simulated with the ground-truth bath.
inline LinewidthDatum measure_linewidth(const io::RunConfig& cfg, const io::LinewidthProbe& lp) {
    QubitPairParams p = cfg.params;
    p.omega_p = lp.omega_p;
    p.lambda = lp.lambda;
    io::RunConfig run = cfg;
    run.time.t_end = std::max(cfg.time.t_end, lp.window_end);
    const auto sim = simulate(run, p, cfg.bath);
    const auto s = windowed_fft(sim.traj.sx_p, sim.traj.times, lp.window_start, lp.window_end, cfg.analysis.spectrum);
    if (s.peaks.empty()) throw InsufficientSpectrumError("no peak in the linewidth window");
    return {p, peak_linewidth(s, 0).fwhm, cfg.rate_prefactor};
}

inline Artifacts reconstruct(const io::RunConfig& cfg, Workers w = {}) {
    if (!cfg.protocol) throw ConfigError("protocol", "missing required section");
    const auto& pc = *cfg.protocol;
    Artifacts a;
    ConstraintSet cs;
    io::json out;
    const bool simulation = pc.mode == "simulation";
    if (simulation) {
        validate(cfg.bath);
        cs = collect_constraints(cfg.bath, cfg.params, pc.lambdas, collect_config(cfg, pc, w));
    } else {
        cs = io::decode_constraints(io::read_json_file(pc.constraints_file));
    }
    std::ostringstream csv;
    io::write_constraints_csv(csv, cs);
    a.files["constraints.csv"] = csv.str();
    a.files["constraints.json"] = io::dump(io::encode(cs));
    for (const auto& f : cs.failures) a.messages.push_back("lambda " + io::fmt(f.lambda) + ": " + f.message);
    if (!cs.failures.empty()) a.status = Status::Partial;

    out["mode"] = pc.mode;
    out["source"] = pc.source == ConstraintSource::Analytic ? "analytic" : "signal";
    std::optional<LinewidthDatum> datum;
    if (simulation && pc.linewidth) {
        try {
            datum = measure_linewidth(cfg, *pc.linewidth);
            out["linewidth"] = {{"params", io::encode(datum->params)}, {"fwhm", datum->fwhm}};
        } catch (const Error& e) {
            out["linewidth"] = {{"error", e.what()}};
            a.status = Status::Partial;
            a.messages.push_back(std::string("linewidth: ") + e.what());
        }
    }
    FitOptions fo;
    fo.omega_c = pc.fit_omega_c;
    fo.n_nodes = pc.n_nodes;
    fo.smoothness = pc.smoothness;
    try {
        const auto r = fit_spectral_density(cs.points, pc.family, datum, fo);
        out["result"] = io::encode(r);
        if (simulation) {
            out["ground_truth"] = io::encode(cfg.bath);
            const auto* truth = std::get_if<PowerLawCutoff>(&cfg.bath);
            if (truth && r.power_law) {
                io::json cmp = {{"s_error", r.power_law->s - truth->s}};
                if (r.amplitude_identified && truth->gamma0 > 0.0)
                    cmp["gamma0_relative_error"] = r.power_law->gamma0 / truth->gamma0 - 1.0;
                out["comparison"] = cmp;
            }
        }
    } catch (const RankDeficiencyError& e) {
        std::vector<std::size_t> nodes = e.unconstrained_nodes;
        out["result"] = {{"error", e.what()}, {"unconstrained_nodes", nodes}};
        a.status = Status::Partial;
        a.messages.push_back(std::string("fit: ") + e.what());
    } catch (const Error& e) {
        out["result"] = {{"error", e.what()}};
        a.status = Status::Partial;
        a.messages.push_back(std::string("fit: ") + e.what());
    }
    a.files["reconstruction.json"] = io::dump(out);
    return a;
}

} // namespace qsync::workflow
