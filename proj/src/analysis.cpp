#include "etchsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "etchsim/error.hpp"
#include "etchsim/rng.hpp"
#include "json.hpp"

namespace etchsim {

namespace {

// Sub-keys for the per-sample parameter draws. Plane multipliers use the
// position of the plane in the (ordered) spread map.
constexpr std::uint64_t kDurationKey = 1u << 16;
constexpr std::uint64_t kRotationKey = kDurationKey + 1;

double signed_unit(const ToleranceSpec& spec, std::uint64_t seed, std::int64_t index,
                   std::uint64_t which) {
    const std::uint64_t idx = static_cast<std::uint64_t>(index);
    const double u = rng::draw(seed, rng::role::kTolParam, idx, which);
    if (!spec.normal) return 2.0 * u - 1.0;  // uniform over [-1, 1]
    // Box-Muller; the pair index keeps the second uniform independent.
    const double u2 = rng::draw(seed, rng::role::kTolParam, idx, which + (1ull << 32));
    const double r = std::sqrt(-2.0 * std::log(std::max(u, 1e-300)));
    return r * std::cos(2.0 * std::acos(-1.0) * u2);
}

}  // namespace

SampleParams sample_params(const ToleranceSpec& spec, std::uint64_t seed, std::int64_t index,
                           std::uint64_t base_ca_seed) {
    for (const auto& [plane, spread] : spec.rate_spread_rel)
        if (!(spread >= 0.0) || !std::isfinite(spread))
            throw ConfigError("tolerance: rate spread for '" + plane.name() +
                              "' must be finite and non-negative");
    if (!(spec.duration_spread_rel >= 0.0) || !(spec.rotation_spread_deg >= 0.0))
        throw ConfigError("tolerance: spreads must be non-negative");

    SampleParams out;
    std::uint64_t which = 0;
    for (const auto& [plane, spread] : spec.rate_spread_rel) {
        // Multipliers clamp at zero: a rate cannot run backwards.
        const double m = 1.0 + spread * signed_unit(spec, seed, index, which++);
        out.rate_multiplier[plane] = std::max(0.0, m);
    }
    out.duration_multiplier =
        std::max(0.0, 1.0 + spec.duration_spread_rel * signed_unit(spec, seed, index,
                                                                   kDurationKey));
    out.rotation_offset_deg =
        spec.rotation_spread_deg * signed_unit(spec, seed, index, kRotationKey);
    out.ca_seed = spec.perturb_ca_seed
                      ? rng::hash3(seed, rng::role::kTolSeed, static_cast<std::uint64_t>(index))
                      : base_ca_seed;
    return out;
}

Stats stats_from(const std::vector<double>& samples) {
    if (samples.empty()) throw ConfigError("stats: need at least one sample");
    Stats s;
    s.count = static_cast<std::int64_t>(samples.size());

    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    s.min = sorted.front();
    s.max = sorted.back();

    // Welford's running moments: numerically stable, and a constant input
    // yields an exact zero variance instead of accumulated rounding dust.
    double mean = 0.0, m2 = 0.0;
    std::int64_t n = 0;
    for (double v : sorted) {
        ++n;
        const double d = v - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (v - mean);
    }
    s.mean = mean;
    s.stddev = std::sqrt(std::max(0.0, m2 / static_cast<double>(s.count)));

    auto percentile = [&](double q) {
        const double pos = q * static_cast<double>(s.count - 1);
        const size_t lo = static_cast<size_t>(pos);
        const size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
    };
    s.p05 = percentile(0.05);
    s.p25 = percentile(0.25);
    s.p50 = percentile(0.50);
    s.p75 = percentile(0.75);
    s.p95 = percentile(0.95);
    return s;
}

ToleranceReport tolerance_run(const ToleranceSpec& spec, int sample_count, std::uint64_t seed,
                              std::uint64_t base_ca_seed, const SampleFn& run_sample) {
    if (sample_count < 1) throw ConfigError("tolerance: sample_count must be at least 1");
    if (!run_sample) throw ConfigError("tolerance: a sample callback is required");

    ToleranceReport report;
    report.sample_count = sample_count;
    for (std::int64_t i = 0; i < sample_count; ++i) {
        const SampleParams params = sample_params(spec, seed, i, base_ca_seed);
        for (const auto& [name, value] : run_sample(params)) {
            auto& column = report.samples[name];
            if (static_cast<std::int64_t>(column.size()) != i)
                throw RuntimeError("tolerance: metric '" + name +
                                   "' missing from an earlier sample");
            column.push_back(value);
        }
    }
    for (const auto& [name, column] : report.samples) {
        if (static_cast<std::int64_t>(column.size()) != sample_count)
            throw RuntimeError("tolerance: metric '" + name + "' missing from a later sample");
        report.metrics[name] = stats_from(column);
    }
    return report;
}

std::string report_to_json(const ToleranceReport& report) {
    nlohmann::ordered_json doc;
    doc["sample_count"] = report.sample_count;
    nlohmann::ordered_json metrics;
    for (const auto& [name, s] : report.metrics) {
        nlohmann::ordered_json m;
        m["count"] = s.count;
        m["mean"] = s.mean;
        m["stddev"] = s.stddev;
        m["min"] = s.min;
        m["max"] = s.max;
        m["p05"] = s.p05;
        m["p25"] = s.p25;
        m["p50"] = s.p50;
        m["p75"] = s.p75;
        m["p95"] = s.p95;
        metrics[name] = std::move(m);
    }
    doc["metrics"] = std::move(metrics);
    nlohmann::ordered_json samples;
    for (const auto& [name, column] : report.samples) samples[name] = column;
    doc["samples"] = std::move(samples);
    return doc.dump(2) + "\n";
}

std::string report_to_csv(const ToleranceReport& report) {
    std::ostringstream out;
    out << "sample";
    for (const auto& [name, column] : report.samples) {
        (void)column;
        out << "," << name;
    }
    out << "\n";
    out.precision(12);
    for (std::int64_t i = 0; i < report.sample_count; ++i) {
        out << i;
        for (const auto& [name, column] : report.samples) {
            (void)name;
            out << "," << column[static_cast<size_t>(i)];
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace etchsim
