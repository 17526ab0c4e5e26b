#include "etchsim/procdb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "etchsim/error.hpp"
#include "json.hpp"

namespace etchsim {

namespace {

constexpr double kZeroC = 273.15;

bool same_condition(const RateRecord& r, const std::string& etchant, double conc) {
    return r.etchant == etchant && std::abs(r.concentration_wt_pct - conc) < 1e-9;
}

std::map<PlaneClass, double> parse_plane_map(const nlohmann::json& jm, const char* field) {
    if (!jm.is_object())
        throw ConfigError(std::string("process db: '") + field + "' must be an object");
    std::map<PlaneClass, double> out;
    for (const auto& [key, value] : jm.items()) {
        if (!value.is_number())
            throw ConfigError(std::string("process db: '") + field + "." + key +
                              "' must be a number");
        const double v = value.get<double>();
        if (!(v >= 0.0) || !std::isfinite(v))
            throw ConfigError(std::string("process db: '") + field + "." + key +
                              "' must be finite and non-negative");
        out[plane_class_from_name(key)] = v;
    }
    return out;
}

}  // namespace

ProcessDb parse_db(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("process db: invalid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("records") || !doc["records"].is_array())
        throw ConfigError("process db: top-level field 'records' must be an array");

    ProcessDb db;
    for (const auto& jr : doc["records"]) {
        if (!jr.is_object()) throw ConfigError("process db: each record must be an object");
        RateRecord rec;
        if (!jr.contains("etchant") || !jr["etchant"].is_string())
            throw ConfigError("process db: field 'etchant' must be a string");
        rec.etchant = jr["etchant"].get<std::string>();
        if (!jr.contains("concentration_wt_pct") || !jr["concentration_wt_pct"].is_number())
            throw ConfigError("process db: field 'concentration_wt_pct' must be a number");
        rec.concentration_wt_pct = jr["concentration_wt_pct"].get<double>();
        if (!jr.contains("temperature_C") || !jr["temperature_C"].is_number())
            throw ConfigError("process db: field 'temperature_C' must be a number");
        rec.temperature_C = jr["temperature_C"].get<double>();
        if (rec.temperature_C <= -kZeroC)
            throw ConfigError("process db: temperature_C below absolute zero");
        if (!jr.contains("rates_um_per_min"))
            throw ConfigError("process db: field 'rates_um_per_min' is required");
        rec.rates_um_per_min = parse_plane_map(jr["rates_um_per_min"], "rates_um_per_min");
        for (const PlaneClass& required : {kP100, kP110, kP111})
            if (!rec.rates_um_per_min.count(required))
                throw ConfigError("process db: rates_um_per_min needs plane '" +
                                  required.name() + "'");
        if (jr.contains("tolerance_rel"))
            rec.tolerance_rel = parse_plane_map(jr["tolerance_rel"], "tolerance_rel");

        for (const RateRecord& prev : db.records)
            if (same_condition(prev, rec.etchant, rec.concentration_wt_pct) &&
                std::abs(prev.temperature_C - rec.temperature_C) < 1e-9)
                throw ConfigError("process db: duplicate record for " + rec.etchant + " " +
                                  std::to_string(rec.concentration_wt_pct) + " wt% at " +
                                  std::to_string(rec.temperature_C) + " C");
        db.records.push_back(std::move(rec));
    }
    return db;
}

ProcessDb load_db(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("process db: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_db(buf.str());
}

std::string db_to_json(const ProcessDb& db) {
    nlohmann::ordered_json doc;
    doc["records"] = nlohmann::ordered_json::array();
    for (const RateRecord& rec : db.records) {
        nlohmann::ordered_json jr;
        jr["etchant"] = rec.etchant;
        jr["concentration_wt_pct"] = rec.concentration_wt_pct;
        jr["temperature_C"] = rec.temperature_C;
        nlohmann::ordered_json rates;
        for (const auto& [plane, rate] : rec.rates_um_per_min) rates[plane.name()] = rate;
        jr["rates_um_per_min"] = std::move(rates);
        if (!rec.tolerance_rel.empty()) {
            nlohmann::ordered_json tol;
            for (const auto& [plane, v] : rec.tolerance_rel) tol[plane.name()] = v;
            jr["tolerance_rel"] = std::move(tol);
        }
        doc["records"].push_back(std::move(jr));
    }
    return doc.dump(2) + "\n";
}

RateRecord lookup(const ProcessDb& db, const std::string& etchant, double concentration_wt_pct,
                  double temperature_C) {
    std::vector<const RateRecord*> family;
    for (const RateRecord& rec : db.records)
        if (same_condition(rec, etchant, concentration_wt_pct)) family.push_back(&rec);
    if (family.empty())
        throw ConfigError("process db: no records for " + etchant + " at " +
                          std::to_string(concentration_wt_pct) + " wt%");

    for (const RateRecord* rec : family)
        if (std::abs(rec->temperature_C - temperature_C) < 1e-9) return *rec;

    // Bracketing records for Arrhenius interpolation.
    const RateRecord* below = nullptr;
    const RateRecord* above = nullptr;
    for (const RateRecord* rec : family) {
        if (rec->temperature_C < temperature_C &&
            (!below || rec->temperature_C > below->temperature_C))
            below = rec;
        if (rec->temperature_C > temperature_C &&
            (!above || rec->temperature_C < above->temperature_C))
            above = rec;
    }
    if (!below || !above) {
        double lo = family.front()->temperature_C, hi = lo;
        for (const RateRecord* rec : family) {
            lo = std::min(lo, rec->temperature_C);
            hi = std::max(hi, rec->temperature_C);
        }
        throw ConfigError("process db: " + std::to_string(temperature_C) + " C outside the [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + "] C range of " +
                          etchant + " " + std::to_string(concentration_wt_pct) +
                          " wt%; refusing to extrapolate");
    }

    // ln R is linear in 1/T between the brackets (Arrhenius behaviour).
    const double inv_lo = 1.0 / (below->temperature_C + kZeroC);
    const double inv_hi = 1.0 / (above->temperature_C + kZeroC);
    const double inv_t = 1.0 / (temperature_C + kZeroC);
    const double w = (inv_t - inv_lo) / (inv_hi - inv_lo);

    RateRecord out;
    out.etchant = etchant;
    out.concentration_wt_pct = concentration_wt_pct;
    out.temperature_C = temperature_C;
    for (const auto& [plane, r_lo] : below->rates_um_per_min) {
        const auto it = above->rates_um_per_min.find(plane);
        if (it == above->rates_um_per_min.end())
            throw ConfigError("process db: bracketing records disagree on plane '" +
                              plane.name() + "'");
        const double r_hi = it->second;
        if (r_lo == 0.0 && r_hi == 0.0) {
            out.rates_um_per_min[plane] = 0.0;
        } else if (r_lo > 0.0 && r_hi > 0.0) {
            out.rates_um_per_min[plane] = std::exp(std::log(r_lo) * (1.0 - w) +
                                                   std::log(r_hi) * w);
        } else {
            throw ConfigError("process db: cannot interpolate plane '" + plane.name() +
                              "' between a zero and a nonzero rate");
        }
    }
    // Spreads interpolate linearly over the union of the two key sets.
    auto tol_at = [](const RateRecord* rec, const PlaneClass& plane) {
        const auto it = rec->tolerance_rel.find(plane);
        return it == rec->tolerance_rel.end() ? 0.0 : it->second;
    };
    std::map<PlaneClass, double> tol_keys = below->tolerance_rel;
    tol_keys.insert(above->tolerance_rel.begin(), above->tolerance_rel.end());
    for (const auto& [plane, unused] : tol_keys) {
        (void)unused;
        out.tolerance_rel[plane] =
            tol_at(below, plane) * (1.0 - w) + tol_at(above, plane) * w;
    }
    return out;
}

std::vector<ResolvedStep> resolve_recipe(const ProcessDb& db,
                                         const std::vector<ProcessStepDef>& steps,
                                         double lattice_constant_um, double kappa) {
    if (steps.empty()) throw ConfigError("recipe: needs at least one process step");
    std::vector<ResolvedStep> out;
    out.reserve(steps.size());
    for (size_t i = 0; i < steps.size(); ++i) {
        const ProcessStepDef& def = steps[i];
        if (!(def.duration_min > 0.0))
            throw ConfigError("recipe: step " + std::to_string(i) +
                              ": duration_min must be positive");
        ResolvedStep rs;
        rs.record = lookup(db, def.etchant, def.concentration_wt_pct, def.temperature_C);
        const auto res =
            rates_to_probabilities(rs.record.rates_um_per_min, lattice_constant_um, kappa);
        rs.probabilities = res.probabilities;
        rs.step_duration_min = res.step_duration_min;
        rs.duration_min = def.duration_min;
        // Round up, forgiving float noise at exact multiples.
        rs.step_count = static_cast<std::int64_t>(
            std::ceil(def.duration_min / res.step_duration_min - 1e-9));
        rs.step_count = std::max<std::int64_t>(rs.step_count, 1);
        out.push_back(std::move(rs));
    }
    return out;
}

}  // namespace etchsim
