#pragma once

#include <string>
#include <string_view>

// Explicit unit handling. Dimensioned config and flag values carry a unit
// suffix ("11.8 mm", "2.1 MHz", "0.15 G"). Frequencies follow the
// "2pi x MHz" convention by default: "2.1 MHz" parses to 2*pi*2.1e6 rad/s.
// With angular_input set, the numeric value is taken as an angular frequency
// in the scaled unit (no extra 2*pi).

namespace icqed::units {

enum class Dimension {
    length,        // -> m
    time,          // -> s
    frequency,     // -> rad/s (2pi convention unless angular)
    temperature,   // -> K
    magnetic_field,// -> T
    voltage,       // -> V
    mass,          // -> kg
    current,       // -> A
    density,       // -> m^-3
    rate,          // -> 1/s (plain, never 2pi-scaled)
    dimensionless, // ppm, %, bare number
};

// Throws DataError on malformed text, unknown units, or a missing suffix on
// a dimensioned value.
double parse_quantity(std::string_view text, Dimension dim, bool angular_input = false);

// rad/s -> "x.xxx" in 2pi*MHz
double to_mhz(double angular);
double from_mhz(double mhz);

std::string dimension_name(Dimension dim);

}  // namespace icqed::units
