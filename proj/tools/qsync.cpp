// qsync.cpp - command-line front end: evolve, sweep, spectrum, scan-transition, reconstruct

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "qsync.hpp"
#include "qsync/workflow.hpp"

#ifndef QSYNC_PRESET_DIR
#define QSYNC_PRESET_DIR "presets"
#endif

namespace {

namespace fs = std::filesystem;
using namespace qsync;

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitInvalid = 2;

struct Options {
    std::string config;
    std::string preset;
    std::string out{"."};
    std::size_t workers{0};
    std::uint64_t seed{0}; // reserved; every job is deterministic
};

fs::path preset_dir() {
    if (const char* env = std::getenv("QSYNC_PRESET_DIR")) return env;
    return QSYNC_PRESET_DIR;
}

io::RunConfig load_config(const Options& o) {
    if (o.config.empty() == o.preset.empty()) throw ConfigError("--config/--preset", "give exactly one");
    if (!o.preset.empty()) {
        const fs::path p = preset_dir() / (o.preset + ".json");
        if (!fs::exists(p)) throw ConfigError("--preset", "no preset named \"" + o.preset + "\" in " + preset_dir().string());
        return io::decode_config(io::read_json_file(p.string()));
    }
    return io::decode_config(io::read_json_file(o.config));
}

void write_artifacts(const workflow::Artifacts& a, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& [name, text] : a.files) io::write_text((dir / name).string(), text);
}

template <typename Job>
int run(const Options& o, Job&& job) {
    io::RunConfig cfg;
    try {
        cfg = load_config(o);
    } catch (const Error& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitInvalid;
    }
    try {
        const auto a = job(cfg, workflow::Workers{o.workers});
        write_artifacts(a, o.out);
        for (const auto& m : a.messages) std::cerr << "warning: " << m << "\n";
        return a.status == workflow::Status::Ok ? kExitOk : kExitPartial;
    } catch (const ConfigError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const DomainError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPartial;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spontaneous synchronization of a qubit-probe pair and bath spectral-density probing"};
    app.require_subcommand(1);
    Options o;
    int code = kExitOk;

    const auto add = [&](const char* name, const char* help, auto job) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", o.config, "JSON run configuration");
        sub->add_option("--preset", o.preset, "named preset from the preset directory");
        sub->add_option("--out", o.out, "output directory")->capture_default_str();
        sub->add_option("--workers", o.workers, "worker threads (0 = available parallelism)")->capture_default_str();
        sub->add_option("--seed", o.seed, "reserved for noise injection")->capture_default_str();
        sub->callback([&, job] { code = run(o, job); });
    };
    add("evolve", "simulate one trajectory; writes trajectory.csv and sync.json",
        [](const io::RunConfig& c, workflow::Workers) { return workflow::evolve(c); });
    add("sweep", "grid sweep over omega_p, lambda, s or T; writes sweep.csv",
        [](const io::RunConfig& c, workflow::Workers w) { return workflow::sweep(c, w); });
    add("spectrum", "windowed spectra of sx_p; writes spectrum_<i>_<k>.csv and spectrum.json",
        [](const io::RunConfig& c, workflow::Workers w) { return workflow::spectrum(c, w); });
    add("scan-transition", "predicted and signal-scanned transition frequency; writes transition.json",
        [](const io::RunConfig& c, workflow::Workers w) { return workflow::scan_transition(c, w); });
    add("reconstruct", "collect transition constraints and fit J(omega); writes reconstruction.json",
        [](const io::RunConfig& c, workflow::Workers w) { return workflow::reconstruct(c, w); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitInvalid;
    }
    return code;
}
