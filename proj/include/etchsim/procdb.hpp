#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "etchsim/rules.hpp"

namespace etchsim {

// One measured process condition: etch rates per plane at a fixed bath
// composition and temperature, with optional relative rate spreads for
// tolerance studies.
struct RateRecord {
    std::string etchant;
    double concentration_wt_pct = 0.0;
    double temperature_C = 0.0;
    RateSet rates_um_per_min;
    std::map<PlaneClass, double> tolerance_rel;
};

struct ProcessDb {
    std::vector<RateRecord> records;
};

// Parses {"records": [...]}. Records must carry rates for the 100, 110 and
// 111 planes; duplicate (etchant, concentration, temperature) keys are
// rejected.
ProcessDb parse_db(const std::string& json_text);
ProcessDb load_db(const std::string& path);
std::string db_to_json(const ProcessDb& db);

// Exact-match lookup, or Arrhenius interpolation (log-linear in 1/T_kelvin)
// between the two bracketing temperatures of the same etchant and
// concentration. Never extrapolates and never interpolates across
// concentrations.
RateRecord lookup(const ProcessDb& db, const std::string& etchant,
                  double concentration_wt_pct, double temperature_C);

// One stage of a wet-etch recipe: which bath, for how long.
struct ProcessStepDef {
    std::string etchant;
    double concentration_wt_pct = 0.0;
    double temperature_C = 0.0;
    double duration_min = 0.0;
};

struct ResolvedStep {
    RateRecord record;
    std::map<PlaneClass, double> probabilities;
    double step_duration_min = 0.0;
    std::int64_t step_count = 0;
    double duration_min = 0.0;
};

// Looks up every stage and converts rates into per-step removal
// probabilities plus automaton step counts (durations round up, with an
// epsilon guard against float noise at exact multiples).
std::vector<ResolvedStep> resolve_recipe(const ProcessDb& db,
                                         const std::vector<ProcessStepDef>& steps,
                                         double lattice_constant_um, double kappa);

}  // namespace etchsim
