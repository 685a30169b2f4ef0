#include <doctest.h>

#include <cmath>
#include <sstream>

#include "icqed/config.hpp"
#include "icqed/constants.hpp"
#include "icqed/errors.hpp"
#include "icqed/trace.hpp"
#include "icqed/units.hpp"

using namespace icqed;
namespace c = constants;
using units::Dimension;

TEST_CASE("unit parsing") {
    CHECK(units::parse_quantity("11.8 mm", Dimension::length) == doctest::Approx(11.8e-3));
    CHECK(units::parse_quantity("37um", Dimension::length) == doctest::Approx(37e-6));
    CHECK(units::parse_quantity("1500 ppm", Dimension::dimensionless) ==
          doctest::Approx(1500e-6));
    CHECK(units::parse_quantity("0.97", Dimension::dimensionless) == doctest::Approx(0.97));
    CHECK(units::parse_quantity("24 mK", Dimension::temperature) == doctest::Approx(0.024));
    CHECK(units::parse_quantity("0.15 G", Dimension::magnetic_field) ==
          doctest::Approx(0.15e-4));
    CHECK(units::parse_quantity("39.9626 amu", Dimension::mass) ==
          doctest::Approx(39.9626 * c::atomic_mass_unit));

    SUBCASE("frequencies follow the 2pi convention by default") {
        CHECK(units::parse_quantity("2.1 MHz", Dimension::frequency) ==
              doctest::Approx(c::two_pi * 2.1e6));
        CHECK(units::parse_quantity("2.1 MHz", Dimension::frequency, true) ==
              doctest::Approx(2.1e6));
    }
    SUBCASE("missing unit on a dimensioned value") {
        CHECK_THROWS_AS(units::parse_quantity("11.8", Dimension::length), DataError);
    }
    SUBCASE("wrong dimension") {
        CHECK_THROWS_AS(units::parse_quantity("11.8 MHz", Dimension::length), DataError);
    }
    SUBCASE("unknown unit") {
        CHECK_THROWS_AS(units::parse_quantity("11.8 parsec", Dimension::length), DataError);
    }
    SUBCASE("garbage number") {
        CHECK_THROWS_AS(units::parse_quantity("eleven mm", Dimension::length), DataError);
    }
}

namespace {

const char* kFullConfig = R"(# paper-style configuration
[cavity]
length = 11.8 mm
t1 = 1500 ppm
t2 = 5 ppm
loss = 650 ppm
waist = 37 um
wavelength = 866 nm

[transition]
gamma = 11.2 MHz
wavelength = 866 nm

[crystal]
half_length = 511 um
radius = 75 um
density = 5.4e8 cm^-3
pump_efficiency = 0.97
offset_x = 3.9 um
offset_y = 15.7 um

[thermal]
temperature = 24 mK
mass = 39.9626 amu

[larmor]
bx = 0.15 G
bz = 0.15 G
g_factor = 0.8

[noise]
photon_rate = 1e8 cps
efficiency = 0.16
seed = 7

[scan]
span = 160 MHz
samples = 321
averages = 100
)";

}  // namespace

TEST_CASE("configuration parsing") {
    std::istringstream in(kFullConfig);
    auto cfg = cfg::parse_config(in);

    CHECK(cfg.require_cavity().length_l == doctest::Approx(11.8e-3));
    CHECK(cfg.require_cavity().t1 == doctest::Approx(1500e-6));
    CHECK(cfg.require_transition().gamma == doctest::Approx(c::two_pi * 11.2e6));
    CHECK(cfg.require_crystal().density_rho == doctest::Approx(5.4e14));
    CHECK(cfg.require_crystal().offset_y0 == doctest::Approx(15.7e-6));
    CHECK(cfg.require_thermal().temperature == doctest::Approx(0.024));
    CHECK(cfg.require_thermal().wavenumber == doctest::Approx(c::two_pi / 866e-9));
    CHECK(cfg.require_larmor().omega_z ==
          doctest::Approx(larmor::gyromagnetic_ratio(0.8) * 0.15e-4));
    CHECK(cfg.noise.mean_photon_rate == doctest::Approx(1e8));
    CHECK(cfg.noise.rng_seed == 7);
    CHECK(cfg.seed == 7);
    CHECK(cfg.scan.span_hz == doctest::Approx(160e6));
    CHECK(cfg.scan.samples_per_scan == 321);

    SUBCASE("density can come from the trap section") {
        std::istringstream in2(R"([trap]
r0 = 2.35 mm
omega_rf = 4 MHz
u_rf = 300 V
mass = 39.9626 amu
density_coefficient = 6.01e3

[crystal]
half_length = 511 um
radius = 75 um
pump_efficiency = 0.97
)");
        auto cfg2 = cfg::parse_config(in2);
        CHECK(cfg2.require_crystal().density_rho == doctest::Approx(5.409e14).epsilon(1e-6));
    }
}

TEST_CASE("configuration rejects malformed input") {
    SUBCASE("unknown key carries its line number") {
        std::istringstream in("[cavity]\nlength = 11.8 mm\nt1 = 1500 ppm\nt2 = 5 ppm\n"
                              "loss = 650 ppm\nwaist = 37 um\nwavelength = 866 nm\n"
                              "mirror_brand = acme\n");
        try {
            cfg::parse_config(in);
            FAIL("expected a DataError");
        } catch (const DataError& e) {
            CHECK(e.line == 8);
            CHECK(std::string(e.what()).find("mirror_brand") != std::string::npos);
        }
    }
    SUBCASE("unknown section") {
        std::istringstream in("[telescope]\nfocal = 1 m\n");
        CHECK_THROWS_AS(cfg::parse_config(in), DataError);
    }
    SUBCASE("duplicate key") {
        std::istringstream in("[cavity]\nlength = 11.8 mm\nlength = 12 mm\n");
        CHECK_THROWS_AS(cfg::parse_config(in), DataError);
    }
    SUBCASE("key outside a section") {
        std::istringstream in("length = 11.8 mm\n");
        CHECK_THROWS_AS(cfg::parse_config(in), DataError);
    }
    SUBCASE("missing unit") {
        std::istringstream in("[cavity]\nlength = 11.8\n");
        CHECK_THROWS_AS(cfg::parse_config(in), DataError);
    }
    SUBCASE("fields and rates are mutually exclusive in [larmor]") {
        std::istringstream in("[larmor]\nbx = 0.15 G\nomega_x = 100 kHz\n");
        CHECK_THROWS_AS(cfg::parse_config(in), DataError);
    }
}

TEST_CASE("CSV round trip and diagnostics") {
    SUBCASE("write then read") {
        ScanTrace trace;
        trace.kind = TraceKind::normalized;
        trace.x = {1.0, 2.5, 3.75};
        trace.y = {0.25, 0.5, 0.125};
        std::ostringstream out;
        write_csv(out, trace, "detuning_mhz", "reflectivity");
        std::istringstream in(out.str());
        auto table = read_csv(in);
        REQUIRE(table.header.size() == 2);
        CHECK(table.column("detuning_mhz")[1] == 2.5);
        CHECK(table.column("reflectivity")[2] == 0.125);
    }
    SUBCASE("byte-identical serialization") {
        ScanTrace trace;
        trace.x = {0.1, 0.2, 0.30000000001};
        trace.y = {1.0 / 3.0, 2.0 / 7.0, 1e-17};
        std::ostringstream a, b;
        write_csv(a, trace, "x", "y");
        write_csv(b, trace, "x", "y");
        CHECK(a.str() == b.str());
    }
    SUBCASE("bad cell reports line and column") {
        std::istringstream in("x,y\n1.0,2.0\n3.0,oops\n");
        try {
            read_csv(in);
            FAIL("expected a DataError");
        } catch (const DataError& e) {
            CHECK(e.line == 3);
            CHECK(e.column == 2);
        }
    }
    SUBCASE("ragged row rejected") {
        std::istringstream in("x,y\n1.0\n");
        CHECK_THROWS_AS(read_csv(in), DataError);
    }
    SUBCASE("trace validation") {
        ScanTrace bad;
        bad.x = {1.0, 1.0};
        bad.y = {0.0, 0.0};
        CHECK_THROWS_AS(bad.validate(), DataError);
        ScanTrace negative;
        negative.kind = TraceKind::counts;
        negative.x = {1.0, 2.0};
        negative.y = {4.0, -1.0};
        CHECK_THROWS_AS(negative.validate(), DataError);
    }
}
