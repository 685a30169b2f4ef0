#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>

#include "icqed/cqed.hpp"
#include "icqed/crystal.hpp"
#include "icqed/expsim.hpp"
#include "icqed/larmor.hpp"
#include "icqed/motion.hpp"

// Flat sectioned key-value run configuration. Dimensioned values carry unit
// suffixes; unknown sections or keys are rejected with line diagnostics.
//
//   [cavity]
//   length = 11.8 mm
//   t1 = 1500 ppm
//   ...

namespace icqed::cfg {

struct RunConfig {
    std::optional<CavityParams> cavity;
    std::optional<TransitionParams> transition;
    std::optional<crystal::CrystalSpec> crystal_spec;
    std::optional<crystal::TrapParams> trap;
    std::optional<motion::ThermalConfig> thermal;
    std::optional<larmor::FieldConfig> larmor_field;
    double larmor_g_factor = constants::ca40::d32_lande_g;
    sim::NoiseModel noise;
    sim::ScanConfig scan;
    sim::SequenceTiming timing;
    std::uint64_t seed = 1;

    // accessors that throw DataError when the section is missing
    const CavityParams& require_cavity() const;
    const TransitionParams& require_transition() const;
    const crystal::CrystalSpec& require_crystal() const;
    const motion::ThermalConfig& require_thermal() const;
    const larmor::FieldConfig& require_larmor() const;
};

RunConfig parse_config(std::istream& is, bool angular_input = false);
RunConfig parse_config_file(const std::string& path, bool angular_input = false);

}  // namespace icqed::cfg
