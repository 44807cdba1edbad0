// qmem — command-line front end: run experiments, validate configurations.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qmem/config.hpp"

namespace fs = std::filesystem;
using namespace qmem;

namespace {

struct Flags {
    std::string config;
    std::string manifest;
    std::string experiment;
    std::string sweep;
    std::string out;
    std::string mode;
    std::string model;
    std::string input;
    int jobs = 0;
    long long seed = -1;
    double dt_ns = 0.0;
    int shots = -1;
};

Sweep default_sweep(const RunConfig& c) {
    if (c.experiment == "memory-protocol") return {"prep_angle_rad", 0.0, 2.0 * std::numbers::pi, 9};
    if (c.experiment == "fock-decay") return {"delay_us", 2.0, 30.0, 15};
    if (c.experiment == "memory-ramsey") return {"delay_us", 0.0, 20.0, 41};
    if (c.experiment == "zfidelity-sweep") return {"t_p_us", 0.3, 0.6, 4};
    if (c.experiment == "bsb-check") return {"omega_drv_GHz", 0.1, 0.3, 5};
    return {};
}

void require_sweep_variable(const RunConfig& c, std::initializer_list<const char*> allowed) {
    if (!c.sweep) return;
    std::string list;
    for (const char* a : allowed) {
        if (c.sweep->variable == a) return;
        list += std::string(list.empty() ? "" : ", ") + a;
    }
    throw Error(ErrorKind::usage, c.experiment + " cannot sweep '" + c.sweep->variable + "'" +
                                      (list.empty() ? std::string(" (no sweep supported)") : " (allowed: " + list + ")"));
}

std::pair<std::vector<double>, std::vector<double>> read_xy(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::usage, "cannot read input file '" + path + "'");
    std::vector<double> xs, ys;
    int line_no = 0;
    for (std::string line; std::getline(f, line);) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) continue;
        try {
            xs.push_back(std::stod(a));
            ys.push_back(std::stod(b));
        } catch (const std::exception&) {
            if (line_no == 1) continue;  // header
            throw Error(ErrorKind::usage, path + ":" + std::to_string(line_no) + ": expected x,y");
        }
    }
    return {xs, ys};
}

ExperimentRecord run_fit(const RunConfig& c) {
    if (c.input.empty()) throw Error(ErrorKind::usage, "fit needs --input FILE");
    const auto [xs, ys] = read_xy(c.input);
    ExperimentRecord r;
    r.kind = "fit";
    r.sweep_variable = "x";
    r.observable = "y";
    for (std::size_t i = 0; i < xs.size(); ++i) r.data.push_back({xs[i], ys[i], 0.0});
    FitResult fit;
    if (c.fit_model == "exponential") fit = fit_exponential(xs, ys);
    else if (c.fit_model == "decaying-cosine") fit = fit_decaying_cosine(xs, ys);
    else if (c.fit_model == "lorentzian") fit = fit_lorentzian(xs, ys);
    else if (c.fit_model == "leakage") fit = fit_leakage(xs, ys);
    else if (c.fit_model == "angle-cosine") fit = fit_angle_cosine(xs, ys);
    else {
        throw Error(ErrorKind::usage, "unknown fit model '" + c.fit_model +
                                          "' (exponential | decaying-cosine | lorentzian | leakage | angle-cosine)");
    }
    r.fits[c.fit_model] = fit;
    r.meta = {{"input", c.input}};
    return r;
}

ExperimentRecord run_experiment(const RunConfig& c) {
    const DeviceParams& p = c.device;
    ProtocolOptions o = c.protocol_options();
    const std::vector<double> xs = c.sweep ? c.sweep->values() : std::vector<double>{};
    const auto& e = c.experiment;
    if (e == "memory-protocol") {
        require_sweep_variable(c, {"prep_angle_rad"});
        return prep_angle_experiment(p, xs, c.storage_delay, o);
    }
    if (e == "fock-decay") {
        require_sweep_variable(c, {"delay_us"});
        return fock_decay_experiment(p, xs, o);
    }
    if (e == "memory-ramsey") {
        require_sweep_variable(c, {"delay_us"});
        return memory_ramsey_experiment(p, xs, units::to_MHz(c.ramsey_detuning), o);
    }
    if (e == "ringdown") {
        require_sweep_variable(c, {});
        RingdownOptions ro;
        ro.sim = c.sim;
        return mode_ringdown_experiment(p, c.mode, ro);
    }
    if (e == "zfidelity-sweep") {
        require_sweep_variable(c, {"t_p_us", "bsb_amplitude_GHz"});
        std::vector<WorkingPoint> wps;
        if (c.sweep->variable == "bsb_amplitude_GHz") {
            for (double a : xs) wps.push_back({units::GHz(a), c.multiplier});
        } else {
            CalibrationResult cal;
            cal.qubit = calibrate_pi_pulse(p, c.sim.dims, PiTarget::qubit, c.qubit_amplitude, calibration_options(o));
            o.calibration = cal;
            for (double t : xs) wps.push_back(find_working_point(p, t, c.multiplier, o));
        }
        return z_fidelity_sweep(p, wps, o);
    }
    if (e == "bsb-check") {
        require_sweep_variable(c, {"omega_drv_GHz", "g_MHz"});
        return bsb_check_experiment(p, c.sweep->variable, xs, units::GHz(0.2), BsbCheckOptions{}, c.jobs);
    }
    if (e == "qpt") {
        require_sweep_variable(c, {});
        std::optional<ShotSampling> sampling;
        if (c.shots > 0) sampling = ShotSampling{c.shots, c.seed};
        return qpt_experiment(p, c.target_protocol_length, o, sampling);
    }
    if (e == "fit") {
        require_sweep_variable(c, {});
        return run_fit(c);
    }
    throw Error(ErrorKind::usage, "unknown experiment '" + e + "'");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::usage, "cannot write " + path.string());
    f << text;
}

RunConfig resolve(const Flags& fl) {
    RunConfig c;
    if (!fl.manifest.empty()) {
        std::ifstream f(fl.manifest);
        if (!f) throw Error(ErrorKind::usage, "cannot read manifest '" + fl.manifest + "'");
        nlohmann::json j;
        try {
            f >> j;
        } catch (const nlohmann::json::exception& ex) {
            throw Error(ErrorKind::usage, std::string("manifest is not JSON: ") + ex.what());
        }
        c = from_manifest(j);
    } else {
        c = load_config(fl.config);
    }
    if (!fl.experiment.empty()) c.experiment = fl.experiment;
    if (!fl.sweep.empty()) c.sweep = parse_sweep(fl.sweep);
    if (!fl.out.empty()) c.out = fl.out;
    if (!fl.mode.empty()) c.mode = mode_from_string(fl.mode);
    if (!fl.model.empty()) c.fit_model = fl.model;
    if (!fl.input.empty()) c.input = fl.input;
    if (fl.jobs > 0) c.jobs = fl.jobs;
    if (fl.seed >= 0) c.seed = static_cast<std::uint64_t>(fl.seed);
    if (fl.dt_ns > 0.0) c.sim.dt = units::ns(fl.dt_ns);
    if (fl.shots >= 0) c.shots = fl.shots;
    const auto& known = experiment_names();
    if (std::find(known.begin(), known.end(), c.experiment) == known.end()) {
        throw Error(ErrorKind::usage, "unknown experiment '" + c.experiment + "'");
    }
    if (!c.sweep) {
        const Sweep s = default_sweep(c);
        if (!s.variable.empty()) c.sweep = s;
    }
    return c;
}

int cmd_run(const Flags& fl) {
    RunConfig c;
    try {
        c = resolve(fl);
        const auto v = config_violations(c);
        if (!v.empty()) {
            for (const auto& s : v) std::cerr << "invalid configuration: " << s << '\n';
            return 2;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == ErrorKind::usage || e.kind() == ErrorKind::config ? 2 : 1;
    }

    ExperimentRecord rec;
    try {
        rec = run_experiment(c);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == ErrorKind::usage ? 2 : 1;
    }

    std::ostringstream csv;
    write_csv(csv, rec);
    nlohmann::json fits = fits_json(rec);
    fits["meta"] = rec.meta;
    try {
        fs::create_directories(c.out);
        write_text(fs::path(c.out) / "results.csv", csv.str());
        write_text(fs::path(c.out) / "fits.json", fits.dump(2) + "\n");
        write_text(fs::path(c.out) / "manifest.json", to_manifest(c).dump(2) + "\n");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    std::cout << rec.kind << ": wrote " << c.out << "/{results.csv,fits.json,manifest.json}\n";
    for (const auto& [k, v] : rec.summary) std::cout << "  " << k << " = " << v << '\n';
    return 0;
}

int cmd_validate(const Flags& fl) {
    RunConfig c;
    try {
        c = load_config(fl.config);
        if (!fl.experiment.empty()) c.experiment = fl.experiment;
        if (fl.dt_ns > 0.0) c.sim.dt = units::ns(fl.dt_ns);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    std::cout << describe(c);
    const auto v = config_violations(c);
    if (v.empty()) {
        std::cout << "valid\n";
        return 0;
    }
    for (const auto& s : v) std::cout << "breach: " << s << '\n';
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pulse-level simulator for a 3D-cavity quantum memory"};
    app.require_subcommand(1);
    Flags fl;

    auto* run = app.add_subcommand("run", "run an experiment and write results.csv, fits.json, manifest.json");
    auto* cfg = run->add_option("--config", fl.config, "device/run configuration file");
    auto* man = run->add_option("--manifest", fl.manifest, "rerun from a manifest.json");
    cfg->excludes(man);
    run->add_option("--experiment", fl.experiment,
                    "memory-protocol | fock-decay | memory-ramsey | ringdown | zfidelity-sweep | bsb-check | qpt | fit");
    run->add_option("--sweep", fl.sweep, "VAR=start:stop:steps");
    run->add_option("--out", fl.out, "output directory");
    run->add_option("--jobs", fl.jobs, "maximum parallel workers")->check(CLI::PositiveNumber);
    run->add_option("--seed", fl.seed, "seed for sampled noise")->check(CLI::NonNegativeNumber);
    run->add_option("--dt", fl.dt_ns, "integrator step in ns")->check(CLI::PositiveNumber);
    run->add_option("--shots", fl.shots, "shots per tomography expectation (0: exact)")->check(CLI::NonNegativeNumber);
    run->add_option("--mode", fl.mode, "ringdown mode: storage | readout");
    run->add_option("--model", fl.model, "fit model for the fit experiment");
    run->add_option("--input", fl.input, "x,y data file for the fit experiment");

    auto* val = app.add_subcommand("validate", "check a configuration and echo it in linear and angular units");
    val->add_option("--config", fl.config, "configuration file")->required();
    val->add_option("--experiment", fl.experiment, "experiment to check the step size for");
    val->add_option("--dt", fl.dt_ns, "integrator step in ns")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    if (run->parsed()) {
        if (fl.config.empty() && fl.manifest.empty()) {
            std::cerr << "error: run needs --config or --manifest\n";
            return 2;
        }
        return cmd_run(fl);
    }
    return cmd_validate(fl);
}
