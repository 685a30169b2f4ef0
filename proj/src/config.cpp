#include "icqed/config.hpp"

#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "icqed/errors.hpp"
#include "icqed/units.hpp"

namespace icqed::cfg {

namespace {

using units::Dimension;

struct Entry {
    std::string value;
    int line;
};

using Section = std::map<std::string, Entry>;

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::map<std::string, Section> parse_sections(std::istream& is) {
    std::map<std::string, Section> sections;
    std::string line, current;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t.front() == '#' || t.front() == ';')
            continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw DataError("unterminated section header", lineno, 1);
            current = trim(t.substr(1, t.size() - 2));
            if (current.empty())
                throw DataError("empty section name", lineno, 1);
            sections[current];
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw DataError("expected 'key = value'", lineno, 1);
        if (current.empty())
            throw DataError("key outside any section", lineno, 1);
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw DataError("empty key", lineno, 1);
        if (sections[current].count(key))
            throw DataError("duplicate key '" + key + "'", lineno, 1);
        sections[current][key] = {value, lineno};
    }
    return sections;
}

// pulls typed values out of one section while tracking which keys were used
class SectionReader {
  public:
    SectionReader(const Section& section, std::string name, bool angular)
        : section_(section), name_(std::move(name)), angular_(angular) {}

    std::optional<double> get(const std::string& key, Dimension dim) {
        auto it = section_.find(key);
        if (it == section_.end())
            return std::nullopt;
        used_.insert(key);
        try {
            return units::parse_quantity(it->second.value, dim, angular_);
        } catch (const DataError& e) {
            throw DataError(std::string(e.what()) + " (key '" + key + "' in [" + name_ + "])",
                            it->second.line, 1);
        }
    }

    double require(const std::string& key, Dimension dim) {
        auto v = get(key, dim);
        if (!v)
            throw DataError("missing key '" + key + "' in section [" + name_ + "]");
        return *v;
    }

    std::optional<std::uint64_t> get_integer(const std::string& key) {
        auto it = section_.find(key);
        if (it == section_.end())
            return std::nullopt;
        used_.insert(key);
        try {
            return std::stoull(it->second.value);
        } catch (const std::exception&) {
            throw DataError("expected an integer for key '" + key + "'", it->second.line, 1);
        }
    }

    void finish() const {
        for (const auto& [key, entry] : section_)
            if (!used_.count(key))
                throw DataError("unknown key '" + key + "' in section [" + name_ + "]",
                                entry.line, 1);
    }

  private:
    const Section& section_;
    std::string name_;
    bool angular_;
    std::set<std::string> used_;
};

}  // namespace

const CavityParams& RunConfig::require_cavity() const {
    if (!cavity)
        throw DataError("configuration is missing the [cavity] section");
    return *cavity;
}

const TransitionParams& RunConfig::require_transition() const {
    if (!transition)
        throw DataError("configuration is missing the [transition] section");
    return *transition;
}

const crystal::CrystalSpec& RunConfig::require_crystal() const {
    if (!crystal_spec)
        throw DataError("configuration is missing the [crystal] section");
    return *crystal_spec;
}

const motion::ThermalConfig& RunConfig::require_thermal() const {
    if (!thermal)
        throw DataError("configuration is missing the [thermal] section");
    return *thermal;
}

const larmor::FieldConfig& RunConfig::require_larmor() const {
    if (!larmor_field)
        throw DataError("configuration is missing the [larmor] section");
    return *larmor_field;
}

RunConfig parse_config(std::istream& is, bool angular_input) {
    auto sections = parse_sections(is);
    RunConfig config;

    static const std::set<std::string> known = {"cavity",  "transition", "crystal", "trap",
                                                "thermal", "larmor",     "noise",   "scan",
                                                "timing"};
    for (const auto& [name, _] : sections)
        if (!known.count(name))
            throw DataError("unknown section [" + name + "]");

    if (auto it = sections.find("cavity"); it != sections.end()) {
        SectionReader r(it->second, "cavity", angular_input);
        CavityParams p;
        p.length_l = r.require("length", Dimension::length);
        p.t1 = r.require("t1", Dimension::dimensionless);
        p.t2 = r.require("t2", Dimension::dimensionless);
        p.losses_L = r.require("loss", Dimension::dimensionless);
        p.waist_w0 = r.require("waist", Dimension::length);
        p.wavelength = r.require("wavelength", Dimension::length);
        r.finish();
        p.validate();
        config.cavity = p;
    }

    if (auto it = sections.find("transition"); it != sections.end()) {
        SectionReader r(it->second, "transition", angular_input);
        TransitionParams t;
        t.gamma = r.require("gamma", Dimension::frequency);
        t.wavelength = r.require("wavelength", Dimension::length);
        if (auto d = r.get("dipole", Dimension::dimensionless))
            t.dipole_moment = *d;  // C m, entered as a bare number
        r.finish();
        config.transition = t;
    }

    if (auto it = sections.find("trap"); it != sections.end()) {
        SectionReader r(it->second, "trap", angular_input);
        crystal::TrapParams t;
        t.r0 = r.require("r0", Dimension::length);
        t.omega_rf = r.require("omega_rf", Dimension::frequency);
        t.u_rf = r.require("u_rf", Dimension::voltage);
        t.ion_mass = r.require("mass", Dimension::mass);
        if (auto coeff = r.get("density_coefficient", Dimension::dimensionless))
            t.density_coefficient = *coeff;  // cm^-3 V^-2
        r.finish();
        config.trap = t;
    }

    if (auto it = sections.find("crystal"); it != sections.end()) {
        SectionReader r(it->second, "crystal", angular_input);
        crystal::CrystalSpec cspec;
        cspec.half_length_L = r.require("half_length", Dimension::length);
        cspec.radius_R = r.require("radius", Dimension::length);
        if (auto rho = r.get("density", Dimension::density)) {
            cspec.density_rho = *rho;
        } else if (config.trap) {
            cspec.density_rho = crystal::ion_density(*config.trap);
        } else {
            throw DataError("crystal density missing and no [trap] section to derive it from");
        }
        cspec.pump_efficiency_eta = r.get("pump_efficiency", Dimension::dimensionless).value_or(1.0);
        cspec.offset_x0 = r.get("offset_x", Dimension::length).value_or(0.0);
        cspec.offset_y0 = r.get("offset_y", Dimension::length).value_or(0.0);
        r.finish();
        cspec.validate();
        config.crystal_spec = cspec;
    }

    if (auto it = sections.find("thermal"); it != sections.end()) {
        SectionReader r(it->second, "thermal", angular_input);
        motion::ThermalConfig th;
        th.temperature = r.require("temperature", Dimension::temperature);
        th.ion_mass = r.require("mass", Dimension::mass);
        double wavelength = r.get("wavelength", Dimension::length)
                                .value_or(config.transition ? config.transition->wavelength
                                                            : config.cavity ? config.cavity->wavelength : 0.0);
        if (!(wavelength > 0))
            throw DataError("thermal section needs a wavelength (or a [transition] section)");
        th.wavenumber = constants::two_pi / wavelength;
        r.finish();
        config.thermal = th;
    }

    if (auto it = sections.find("larmor"); it != sections.end()) {
        SectionReader r(it->second, "larmor", angular_input);
        config.larmor_g_factor =
            r.get("g_factor", Dimension::dimensionless).value_or(constants::ca40::d32_lande_g);
        larmor::FieldConfig f;
        auto bx = r.get("bx", Dimension::magnetic_field);
        auto bz = r.get("bz", Dimension::magnetic_field);
        auto wx = r.get("omega_x", Dimension::frequency);
        auto wz = r.get("omega_z", Dimension::frequency);
        if ((bx || bz) && (wx || wz))
            throw DataError("[larmor] accepts either fields (bx/bz) or rates (omega_x/omega_z)");
        if (wx || wz) {
            f.omega_x = wx.value_or(0.0);
            f.omega_z = wz.value_or(0.0);
        } else {
            f = larmor::FieldConfig::from_fields(bx.value_or(0.0), bz.value_or(0.0),
                                                 config.larmor_g_factor);
        }
        r.finish();
        config.larmor_field = f;
    }

    if (auto it = sections.find("noise"); it != sections.end()) {
        SectionReader r(it->second, "noise", angular_input);
        auto& n = config.noise;
        if (auto v = r.get("photon_rate", Dimension::rate)) n.mean_photon_rate = *v;
        if (auto v = r.get("efficiency", Dimension::dimensionless)) n.detection_efficiency = *v;
        if (auto v = r.get("drift", Dimension::frequency)) n.drift_step = *v;
        if (auto v = r.get("threshold", Dimension::dimensionless)) n.reference_threshold = *v;
        if (auto v = r.get("reference_noise", Dimension::dimensionless)) n.reference_noise_rel = *v;
        if (auto v = r.get_integer("seed")) {
            n.rng_seed = *v;
            config.seed = *v;
        }
        r.finish();
        n.validate();
    }

    if (auto it = sections.find("scan"); it != sections.end()) {
        SectionReader r(it->second, "scan", angular_input);
        auto& s = config.scan;
        if (auto v = r.get("span", Dimension::frequency))
            s.span_hz = *v / constants::two_pi;  // stored as ordinary Hz
        if (auto v = r.get("rate", Dimension::rate)) s.rate_hz = *v;
        if (auto v = r.get_integer("averages")) s.n_average = static_cast<int>(*v);
        if (auto v = r.get_integer("samples")) s.samples_per_scan = static_cast<int>(*v);
        r.finish();
        s.validate();
    }

    if (auto it = sections.find("timing"); it != sections.end()) {
        SectionReader r(it->second, "timing", angular_input);
        auto& t = config.timing;
        if (auto v = r.get("cool", Dimension::time)) t.cool = *v;
        if (auto v = r.get("pump", Dimension::time)) t.pump = *v;
        if (auto v = r.get("probe", Dimension::time)) t.probe = *v;
        if (auto v = r.get("apd_delay", Dimension::time)) t.apd_delay = *v;
        if (auto v = r.get("total", Dimension::time)) t.total = *v;
        r.finish();
        t.validate();
    }

    return config;
}

RunConfig parse_config_file(const std::string& path, bool angular_input) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open configuration file: " + path);
    return parse_config(in, angular_input);
}

}  // namespace icqed::cfg
