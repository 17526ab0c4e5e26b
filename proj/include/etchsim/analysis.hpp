#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "etchsim/rules.hpp"

namespace etchsim {

// What a Monte Carlo tolerance study perturbs. Spreads are half-widths of
// uniform distributions by default (a spread of 0.05 samples multipliers
// in [0.95, 1.05]); with `normal` set they become one standard deviation.
struct ToleranceSpec {
    std::map<PlaneClass, double> rate_spread_rel;  // per-plane relative rate spread
    double duration_spread_rel = 0.0;              // process time spread
    double rotation_spread_deg = 0.0;              // mask alignment spread
    bool normal = false;
    // The automaton seed stays fixed by default so the report isolates
    // process variation from stochastic surface noise.
    bool perturb_ca_seed = false;
};

// One sampled process condition, derived deterministically from
// (seed, sample index).
struct SampleParams {
    std::map<PlaneClass, double> rate_multiplier;  // keys of rate_spread_rel
    double duration_multiplier = 1.0;
    double rotation_offset_deg = 0.0;
    std::uint64_t ca_seed = 0;
};

SampleParams sample_params(const ToleranceSpec& spec, std::uint64_t seed, std::int64_t index,
                           std::uint64_t base_ca_seed);

struct Stats {
    std::int64_t count = 0;
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation
    double min = 0.0;
    double max = 0.0;
    double p05 = 0.0;
    double p25 = 0.0;
    double p50 = 0.0;
    double p75 = 0.0;
    double p95 = 0.0;
};

Stats stats_from(const std::vector<double>& samples);

// Runs one simulation per sampled condition and returns named scalar
// metrics; the tolerance driver aggregates them.
using SampleFn = std::function<std::map<std::string, double>(const SampleParams&)>;

struct ToleranceReport {
    std::int64_t sample_count = 0;
    std::map<std::string, Stats> metrics;
    std::map<std::string, std::vector<double>> samples;  // raw values in draw order
};

ToleranceReport tolerance_run(const ToleranceSpec& spec, int sample_count, std::uint64_t seed,
                              std::uint64_t base_ca_seed, const SampleFn& run_sample);

std::string report_to_json(const ToleranceReport& report);
std::string report_to_csv(const ToleranceReport& report);

}  // namespace etchsim
