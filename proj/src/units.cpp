#include "icqed/units.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>

#include "icqed/constants.hpp"
#include "icqed/errors.hpp"

namespace icqed::units {

namespace c = constants;

namespace {

struct UnitEntry {
    Dimension dim;
    double scale;
};

const std::map<std::string, UnitEntry, std::less<>>& unit_table() {
    static const std::map<std::string, UnitEntry, std::less<>> table = {
        {"m", {Dimension::length, 1.0}},
        {"cm", {Dimension::length, 1e-2}},
        {"mm", {Dimension::length, 1e-3}},
        {"um", {Dimension::length, 1e-6}},
        {"nm", {Dimension::length, 1e-9}},
        {"s", {Dimension::time, 1.0}},
        {"ms", {Dimension::time, 1e-3}},
        {"us", {Dimension::time, 1e-6}},
        {"ns", {Dimension::time, 1e-9}},
        {"Hz", {Dimension::frequency, 1.0}},
        {"kHz", {Dimension::frequency, 1e3}},
        {"MHz", {Dimension::frequency, 1e6}},
        {"GHz", {Dimension::frequency, 1e9}},
        {"K", {Dimension::temperature, 1.0}},
        {"mK", {Dimension::temperature, 1e-3}},
        {"uK", {Dimension::temperature, 1e-6}},
        {"T", {Dimension::magnetic_field, 1.0}},
        {"mT", {Dimension::magnetic_field, 1e-3}},
        {"uT", {Dimension::magnetic_field, 1e-6}},
        {"G", {Dimension::magnetic_field, 1e-4}},
        {"mG", {Dimension::magnetic_field, 1e-7}},
        {"V", {Dimension::voltage, 1.0}},
        {"kV", {Dimension::voltage, 1e3}},
        {"mV", {Dimension::voltage, 1e-3}},
        {"kg", {Dimension::mass, 1.0}},
        {"g", {Dimension::mass, 1e-3}},
        {"amu", {Dimension::mass, c::atomic_mass_unit}},
        {"u", {Dimension::mass, c::atomic_mass_unit}},
        {"A", {Dimension::current, 1.0}},
        {"mA", {Dimension::current, 1e-3}},
        {"uA", {Dimension::current, 1e-6}},
        {"m^-3", {Dimension::density, 1.0}},
        {"cm^-3", {Dimension::density, 1e6}},
        {"1/s", {Dimension::rate, 1.0}},
        {"/s", {Dimension::rate, 1.0}},
        {"cps", {Dimension::rate, 1.0}},
        {"ppm", {Dimension::dimensionless, 1e-6}},
        {"%", {Dimension::dimensionless, 1e-2}},
    };
    return table;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

}  // namespace

std::string dimension_name(Dimension dim) {
    switch (dim) {
        case Dimension::length: return "length";
        case Dimension::time: return "time";
        case Dimension::frequency: return "frequency";
        case Dimension::temperature: return "temperature";
        case Dimension::magnetic_field: return "magnetic field";
        case Dimension::voltage: return "voltage";
        case Dimension::mass: return "mass";
        case Dimension::current: return "current";
        case Dimension::density: return "density";
        case Dimension::rate: return "rate";
        case Dimension::dimensionless: return "dimensionless";
    }
    return "unknown";
}

double parse_quantity(std::string_view text, Dimension dim, bool angular_input) {
    std::string_view s = trim(text);
    if (s.empty())
        throw DataError("empty value where a " + dimension_name(dim) + " was expected");

    std::string num(s);
    std::size_t pos = 0;
    double value = 0;
    try {
        value = std::stod(num, &pos);
    } catch (const std::exception&) {
        throw DataError("cannot parse number in '" + std::string(text) + "'");
    }
    std::string_view unit = trim(s.substr(pos));

    if (unit.empty()) {
        if (dim == Dimension::dimensionless)
            return value;
        throw DataError("missing unit on '" + std::string(text) + "' (expected a " +
                        dimension_name(dim) + " unit)");
    }

    auto it = unit_table().find(unit);
    if (it == unit_table().end())
        throw DataError("unknown unit '" + std::string(unit) + "' in '" + std::string(text) + "'");
    if (it->second.dim != dim)
        throw DataError("unit '" + std::string(unit) + "' is a " +
                        dimension_name(it->second.dim) + ", expected a " + dimension_name(dim));

    double scaled = value * it->second.scale;
    if (dim == Dimension::frequency && !angular_input)
        scaled *= c::two_pi;
    return scaled;
}

double to_mhz(double angular) {
    return angular / (c::two_pi * 1e6);
}

double from_mhz(double mhz) {
    return mhz * c::two_pi * 1e6;
}

}  // namespace icqed::units
