// config.hpp — run configuration: key = value files with mandatory units and
// the JSON manifest that reproduces a run.
//
// Frequencies take GHz, MHz or kHz (linear), times take us or ns. A bare
// number for either is rejected. Lines starting with '#' are comments.

#pragma once

#include <json.hpp>

#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qmem/device.hpp"
#include "qmem/error.hpp"
#include "qmem/protocol.hpp"
#include "qmem/units.hpp"

namespace qmem {

inline constexpr const char* code_version = "1.0.0";

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"memory-protocol", "fock-decay", "memory-ramsey", "ringdown",
                                                   "zfidelity-sweep", "bsb-check",  "qpt",           "fit"};
    return names;
}

struct Sweep {
    std::string variable;
    double start = 0.0;
    double stop = 0.0;
    int steps = 0;

    std::vector<double> values() const { return linspace(start, stop, steps); }
};

// "VAR=start:stop:steps"
inline Sweep parse_sweep(const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::usage, "sweep must look like VAR=start:stop:steps");
    Sweep w;
    w.variable = s.substr(0, eq);
    std::vector<std::string> parts;
    std::stringstream ss(s.substr(eq + 1));
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    if (parts.size() != 3) throw Error(ErrorKind::usage, "sweep must look like VAR=start:stop:steps");
    try {
        std::size_t used = 0;
        w.start = std::stod(parts[0], &used);
        if (used != parts[0].size()) throw std::invalid_argument("start");
        w.stop = std::stod(parts[1], &used);
        if (used != parts[1].size()) throw std::invalid_argument("stop");
        w.steps = std::stoi(parts[2], &used);
        if (used != parts[2].size()) throw std::invalid_argument("steps");
    } catch (const std::exception&) {
        throw Error(ErrorKind::usage, "malformed sweep '" + s + "'");
    }
    if (w.steps < 1) throw Error(ErrorKind::usage, "sweep needs >= 1 step");
    if (w.steps > 1 && !(w.stop > w.start)) throw Error(ErrorKind::usage, "sweep stop must exceed start");
    return w;
}

struct RunConfig {
    std::string device_source;  // config path the device was read from
    DeviceParams device;
    std::string experiment = "memory-protocol";
    std::optional<Sweep> sweep;
    SimulationSettings sim;
    double qubit_amplitude = units::MHz(20.0);
    double bsb_amplitude = units::GHz(1.0);
    DriveChannel bsb_route = DriveChannel::qubit;
    int multiplier = 1;
    double storage_delay = 0.0;
    double prep_angle = 0.0;
    double ramsey_detuning = units::MHz(0.2);
    double target_protocol_length = 0.37;
    Mode mode = Mode::readout;
    std::string fit_model = "exponential";
    std::string input;  // data file for the fit experiment
    std::string out = "out";
    int jobs = 1;
    std::uint64_t seed = 0;
    int shots = 0;

    ProtocolOptions protocol_options() const {
        ProtocolOptions o;
        o.sim = sim;
        o.qubit_amplitude = qubit_amplitude;
        o.bsb_amplitude = bsb_amplitude;
        o.bsb_route = bsb_route;
        o.multiplier = multiplier;
        o.jobs = jobs;
        return o;
    }
};

namespace detail {

enum class ValueKind { frequency, time, number, integer, word, boolean };

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline const std::map<std::string, ValueKind>& config_keys() {
    using K = ValueKind;
    static const std::map<std::string, ValueKind> keys = {
        {"omega_ro", K::frequency},        {"omega_s", K::frequency},
        {"omega_q", K::frequency},         {"alpha", K::frequency},
        {"g", K::frequency},               {"g_102", K::frequency},
        {"chi_ro", K::frequency},          {"chi_s", K::frequency},
        {"kappa_ro", K::frequency},        {"kappa_s", K::frequency},
        {"t1_q", K::time},                 {"t2_q", K::time},
        {"q0_ro", K::number},              {"q0_s", K::number},
        {"n_ro", K::number},               {"p_thermal", K::number},
        {"experiment", K::word},           {"transmon_levels", K::integer},
        {"storage_levels", K::integer},    {"readout_levels", K::integer},
        {"dt", K::time},                   {"frame", K::word},
        {"decoherence", K::word},          {"storage_dephasing_time", K::time},
        {"drive_rwa", K::boolean},         {"qubit_amplitude", K::frequency},
        {"bsb_amplitude", K::frequency},   {"bsb_route", K::word},
        {"multiplier", K::integer},        {"storage_delay", K::time},
        {"prep_angle", K::number},         {"ramsey_detuning", K::frequency},
        {"target_protocol_length", K::time}, {"mode", K::word},
        {"fit_model", K::word},            {"seed", K::integer},
        {"shots", K::integer},             {"jobs", K::integer},
    };
    return keys;
}

inline double parse_number(const std::string& s, const std::string& key) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw Error(ErrorKind::config, key + ": not a number: '" + s + "'");
    return v;
}

inline std::pair<double, std::string> split_unit(const std::string& value, const std::string& key) {
    std::size_t i = value.size();
    while (i > 0 && std::isalpha(static_cast<unsigned char>(value[i - 1]))) --i;
    const std::string unit = value.substr(i);
    const std::string num = trim(value.substr(0, i));
    if (unit.empty()) throw Error(ErrorKind::config, key + ": missing unit in '" + value + "'");
    return {parse_number(num, key), unit};
}

inline double parse_frequency(const std::string& value, const std::string& key) {
    const auto [v, unit] = split_unit(value, key);
    if (unit == "GHz") return units::GHz(v);
    if (unit == "MHz") return units::MHz(v);
    if (unit == "kHz") return units::kHz(v);
    throw Error(ErrorKind::config, key + ": frequency needs GHz, MHz or kHz, got '" + unit + "'");
}

inline double parse_time(const std::string& value, const std::string& key) {
    const auto [v, unit] = split_unit(value, key);
    if (unit == "us") return units::us(v);
    if (unit == "ns") return units::ns(v);
    throw Error(ErrorKind::config, key + ": time needs us or ns, got '" + unit + "'");
}

inline int parse_integer(const std::string& value, const std::string& key) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) throw Error(ErrorKind::config, key + ": not an integer: '" + value + "'");
    return static_cast<int>(v);
}

inline Decoherence decoherence_from_string(const std::string& s) {
    if (s == "all") return Decoherence::all();
    if (s == "none") return Decoherence::none();
    if (s == "storage_only") return Decoherence::storage_only();
    throw Error(ErrorKind::config, "decoherence: expected all | none | storage_only, got '" + s + "'");
}

inline std::string decoherence_name(const Decoherence& d) {
    const Decoherence n = Decoherence::none(), s = Decoherence::storage_only();
    auto same = [&](const Decoherence& a) {
        return a.qubit_relaxation == d.qubit_relaxation && a.qubit_dephasing == d.qubit_dephasing &&
               a.thermal == d.thermal && a.storage_decay == d.storage_decay && a.readout_decay == d.readout_decay;
    };
    if (same(n)) return "none";
    if (same(s)) return "storage_only";
    return "all";
}

inline DriveChannel route_from_string(const std::string& s) {
    if (s == "qubit") return DriveChannel::qubit;
    if (s == "storage") return DriveChannel::storage;
    throw Error(ErrorKind::config, "bsb_route: expected qubit | storage, got '" + s + "'");
}

}  // namespace detail

// Parses key = value text; unknown keys, duplicates and unit-less
// frequencies or times are errors.
inline RunConfig parse_config(const std::string& text, const std::string& source = "<string>") {
    using detail::ValueKind;
    RunConfig c;
    c.device_source = source;
    std::map<std::string, int> seen;
    std::istringstream in(text);
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = source + ":" + std::to_string(line_no) + ": ";
        if (eq == std::string::npos) throw Error(ErrorKind::config, where + "expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const auto kind = detail::config_keys().find(key);
        if (kind == detail::config_keys().end()) throw Error(ErrorKind::config, where + "unknown key '" + key + "'");
        if (seen.count(key)) {
            throw Error(ErrorKind::config, where + "duplicate key '" + key + "' (first on line " + std::to_string(seen[key]) + ")");
        }
        seen[key] = line_no;
        if (value.empty()) throw Error(ErrorKind::config, where + key + ": empty value");
        try {
            double num = 0.0;
            switch (kind->second) {
                case ValueKind::frequency: num = detail::parse_frequency(value, key); break;
                case ValueKind::time: num = detail::parse_time(value, key); break;
                case ValueKind::number: num = detail::parse_number(value, key); break;
                case ValueKind::integer: num = detail::parse_integer(value, key); break;
                case ValueKind::word:
                case ValueKind::boolean: break;
            }
            auto& d = c.device;
            if (key == "omega_ro") d.omega_ro = num;
            else if (key == "omega_s") d.omega_s = num;
            else if (key == "omega_q") d.omega_q = num;
            else if (key == "alpha") d.alpha = num;
            else if (key == "g") d.g = num;
            else if (key == "g_102") d.g_102 = num;
            else if (key == "chi_ro") d.chi_ro = num;
            else if (key == "chi_s") d.chi_s = num;
            else if (key == "kappa_ro") d.kappa_ro = num;
            else if (key == "kappa_s") d.kappa_s = num;
            else if (key == "t1_q") d.t1_q = num;
            else if (key == "t2_q") d.t2_q = num;
            else if (key == "q0_ro") d.q0_ro = num;
            else if (key == "q0_s") d.q0_s = num;
            else if (key == "n_ro") d.n_ro = num;
            else if (key == "p_thermal") d.p_thermal = num;
            else if (key == "experiment") c.experiment = value;
            else if (key == "transmon_levels") c.sim.dims.n_transmon_levels = static_cast<int>(num);
            else if (key == "storage_levels") c.sim.dims.n_storage_photons = static_cast<int>(num);
            else if (key == "readout_levels") c.sim.dims.n_readout_photons = static_cast<int>(num);
            else if (key == "dt") c.sim.dt = num;
            else if (key == "frame") c.sim.frame = frame_from_string(value);
            else if (key == "decoherence") {
                const auto extra = c.sim.decoherence.storage_dephasing_time;
                c.sim.decoherence = detail::decoherence_from_string(value);
                c.sim.decoherence.storage_dephasing_time = extra;
            } else if (key == "storage_dephasing_time") c.sim.decoherence.storage_dephasing_time = num;
            else if (key == "drive_rwa") {
                if (value != "true" && value != "false") throw Error(ErrorKind::config, key + ": expected true or false");
                c.sim.drive_rwa = value == "true";
            } else if (key == "qubit_amplitude") c.qubit_amplitude = num;
            else if (key == "bsb_amplitude") c.bsb_amplitude = num;
            else if (key == "bsb_route") c.bsb_route = detail::route_from_string(value);
            else if (key == "multiplier") c.multiplier = static_cast<int>(num);
            else if (key == "storage_delay") c.storage_delay = num;
            else if (key == "prep_angle") c.prep_angle = num;
            else if (key == "ramsey_detuning") c.ramsey_detuning = num;
            else if (key == "target_protocol_length") c.target_protocol_length = num;
            else if (key == "mode") c.mode = mode_from_string(value);
            else if (key == "fit_model") c.fit_model = value;
            else if (key == "seed") c.seed = static_cast<std::uint64_t>(num);
            else if (key == "shots") c.shots = static_cast<int>(num);
            else if (key == "jobs") c.jobs = static_cast<int>(num);
        } catch (const Error& e) {
            throw Error(ErrorKind::config, where + e.what());
        }
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::usage, "cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path);
}

// Every invariant breach, empty when the configuration is usable.
inline std::vector<std::string> config_violations(const RunConfig& c) {
    std::vector<std::string> v = c.device.violations();
    const auto& known = experiment_names();
    if (std::find(known.begin(), known.end(), c.experiment) == known.end()) v.push_back("unknown experiment '" + c.experiment + "'");
    try {
        c.sim.dims.validate();
    } catch (const Error& e) {
        v.push_back(e.what());
    }
    if (c.multiplier < 1 || c.multiplier % 2 == 0) v.push_back("multiplier must be an odd integer >= 1");
    if (c.jobs < 1) v.push_back("jobs must be >= 1");
    if (c.shots < 0) v.push_back("shots must be >= 0");
    if (!(c.bsb_amplitude > 0.0) || !(c.qubit_amplitude > 0.0)) v.push_back("drive amplitudes must be > 0");
    if (v.empty()) {
        // Step check against the fastest tones of the protocol.
        try {
            PulseSequence seq;
            PulseSegment q;
            q.target = DriveChannel::qubit;
            q.carrier = c.device.omega_q;
            q.amplitude = c.qubit_amplitude;
            seq.add(q);
            PulseSegment b;
            b.target = c.bsb_route;
            b.carrier = 0.5 * bsb_frequency(c.device);
            b.amplitude = c.bsb_amplitude;
            b.start = q.end();
            seq.add(b);
            make_model(c.device, c.sim, seq).check_step(c.sim.dt);
        } catch (const Error& e) {
            v.push_back(e.what());
        }
    }
    return v;
}

// Manifest: full configuration in internal units (rad/us, us) plus the code
// version. Doubles are written in round-trip form.
inline nlohmann::json to_manifest(const RunConfig& c) {
    const auto& d = c.device;
    nlohmann::json j;
    j["code_version"] = code_version;
    j["units"] = {{"frequency", "rad/us"}, {"time", "us"}};
    j["device_source"] = c.device_source;
    j["device"] = {{"omega_ro", d.omega_ro}, {"omega_s", d.omega_s}, {"omega_q", d.omega_q}, {"alpha", d.alpha},
                   {"g", d.g},               {"g_102", d.g_102},     {"chi_ro", d.chi_ro},   {"chi_s", d.chi_s},
                   {"kappa_ro", d.kappa_ro}, {"kappa_s", d.kappa_s}, {"t1_q", d.t1_q},       {"t2_q", d.t2_q},
                   {"q0_ro", d.q0_ro},       {"q0_s", d.q0_s},       {"n_ro", d.n_ro},       {"p_thermal", d.p_thermal}};
    j["experiment"] = c.experiment;
    if (c.sweep) {
        j["sweep"] = {{"variable", c.sweep->variable}, {"start", c.sweep->start}, {"stop", c.sweep->stop}, {"steps", c.sweep->steps}};
    } else {
        j["sweep"] = nullptr;
    }
    const auto& dc = c.sim.decoherence;
    j["integrator"] = {{"method", "rk4"},
                       {"dt", c.sim.dt},
                       {"frame", to_string(c.sim.frame)},
                       {"drive_rwa", c.sim.drive_rwa},
                       {"decoherence", detail::decoherence_name(dc)},
                       {"storage_dephasing_time", dc.storage_dephasing_time ? nlohmann::json(*dc.storage_dephasing_time) : nlohmann::json(nullptr)}};
    j["truncation"] = {{"transmon_levels", c.sim.dims.n_transmon_levels},
                       {"storage_levels", c.sim.dims.n_storage_photons},
                       {"readout_levels", c.sim.dims.n_readout_photons}};
    j["protocol"] = {{"qubit_amplitude", c.qubit_amplitude}, {"bsb_amplitude", c.bsb_amplitude},
                     {"bsb_route", to_string(c.bsb_route)},  {"multiplier", c.multiplier},
                     {"storage_delay", c.storage_delay},     {"prep_angle", c.prep_angle},
                     {"ramsey_detuning", c.ramsey_detuning}, {"target_protocol_length", c.target_protocol_length},
                     {"mode", to_string(c.mode)},            {"fit_model", c.fit_model},
                     {"input", c.input}};
    j["output"] = c.out;
    j["jobs"] = c.jobs;
    j["seed"] = c.seed;
    j["shots"] = c.shots;
    return j;
}

inline RunConfig from_manifest(const nlohmann::json& j) {
    try {
        RunConfig c;
        const auto& d = j.at("device");
        auto& p = c.device;
        p.omega_ro = d.at("omega_ro");
        p.omega_s = d.at("omega_s");
        p.omega_q = d.at("omega_q");
        p.alpha = d.at("alpha");
        p.g = d.at("g");
        p.g_102 = d.at("g_102");
        p.chi_ro = d.at("chi_ro");
        p.chi_s = d.at("chi_s");
        p.kappa_ro = d.at("kappa_ro");
        p.kappa_s = d.at("kappa_s");
        p.t1_q = d.at("t1_q");
        p.t2_q = d.at("t2_q");
        p.q0_ro = d.at("q0_ro");
        p.q0_s = d.at("q0_s");
        p.n_ro = d.at("n_ro");
        p.p_thermal = d.at("p_thermal");
        c.device_source = j.at("device_source");
        c.experiment = j.at("experiment");
        if (!j.at("sweep").is_null()) {
            const auto& s = j["sweep"];
            c.sweep = Sweep{s.at("variable"), s.at("start"), s.at("stop"), s.at("steps")};
        }
        const auto& in = j.at("integrator");
        c.sim.dt = in.at("dt");
        c.sim.frame = frame_from_string(in.at("frame"));
        c.sim.drive_rwa = in.at("drive_rwa");
        c.sim.decoherence = detail::decoherence_from_string(in.at("decoherence"));
        if (!in.at("storage_dephasing_time").is_null()) c.sim.decoherence.storage_dephasing_time = in["storage_dephasing_time"].get<double>();
        const auto& t = j.at("truncation");
        c.sim.dims = {t.at("transmon_levels"), t.at("storage_levels"), t.at("readout_levels")};
        const auto& pr = j.at("protocol");
        c.qubit_amplitude = pr.at("qubit_amplitude");
        c.bsb_amplitude = pr.at("bsb_amplitude");
        c.bsb_route = detail::route_from_string(pr.at("bsb_route"));
        c.multiplier = pr.at("multiplier");
        c.storage_delay = pr.at("storage_delay");
        c.prep_angle = pr.at("prep_angle");
        c.ramsey_detuning = pr.at("ramsey_detuning");
        c.target_protocol_length = pr.at("target_protocol_length");
        c.mode = mode_from_string(pr.at("mode"));
        c.fit_model = pr.at("fit_model");
        c.input = pr.at("input");
        c.out = j.at("output");
        c.jobs = j.at("jobs");
        c.seed = j.at("seed");
        c.shots = j.at("shots");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::config, std::string("malformed manifest: ") + e.what());
    }
}

// Parameter echo in linear and angular units.
inline std::string describe(const RunConfig& c) {
    std::ostringstream os;
    os.precision(10);
    auto freq = [&](const char* name, double w) {
        os << name << " = " << units::to_GHz(w) << " GHz  (" << w << " rad/us)\n";
    };
    auto rate = [&](const char* name, double w) {
        os << name << " = " << units::to_MHz(w) << " MHz  (" << w << " rad/us)\n";
    };
    const auto& d = c.device;
    freq("omega_ro/2pi", d.omega_ro);
    freq("omega_s/2pi", d.omega_s);
    freq("omega_q/2pi", d.omega_q);
    rate("alpha/2pi", d.alpha);
    rate("g/2pi", d.g);
    rate("g_102/2pi", d.g_102);
    rate("chi_ro/2pi", d.chi_ro);
    rate("chi_s/2pi", d.chi_s);
    rate("kappa_ro/2pi", d.kappa_ro);
    os << "kappa_s/2pi = " << units::to_kHz(d.kappa_s) << " kHz  (" << d.kappa_s << " rad/us)\n";
    os << "t1_q = " << d.t1_q << " us\n";
    os << "t2_q = " << d.t2_q << " us\n";
    os << "q0_ro = " << d.q0_ro << "\nq0_s = " << d.q0_s << "\nn_ro = " << d.n_ro << "\np_thermal = " << d.p_thermal << "\n";
    os << "experiment = " << c.experiment << "\n";
    os << "truncation = " << c.sim.dims.n_transmon_levels << " x " << c.sim.dims.n_storage_photons << " x "
       << c.sim.dims.n_readout_photons << "\n";
    os << "dt = " << units::to_ns(c.sim.dt) << " ns\nframe = " << to_string(c.sim.frame) << "\n";
    os << "drive_rwa = " << (c.sim.drive_rwa ? "true" : "false") << "\n";
    os << "decoherence = " << detail::decoherence_name(c.sim.decoherence) << "\n";
    rate("qubit_amplitude/2pi", c.qubit_amplitude);
    rate("bsb_amplitude/2pi", c.bsb_amplitude);
    os << "bsb_route = " << to_string(c.bsb_route) << "\n";
    return os.str();
}

}  // namespace qmem
