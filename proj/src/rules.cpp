#include "etchsim/rules.hpp"

#include <algorithm>
#include <cmath>

#include "etchsim/error.hpp"
#include "json.hpp"

namespace etchsim {

std::string PlaneClass::name() const {
    switch (kind_) {
        case Kind::P100: return "100";
        case Kind::P110: return "110";
        case Kind::P111: return "111";
        case Kind::Bulk: return "bulk";
        case Kind::Fallback110: return "fallback_110";
        case Kind::Custom: return label_;
    }
    return "?";
}

PlaneClass plane_class_from_name(const std::string& name) {
    if (name == "100") return kP100;
    if (name == "110") return kP110;
    if (name == "111") return kP111;
    if (name == "bulk") return kBulk;
    if (name == "fallback_110") return kFallback110;
    return PlaneClass::custom(name);
}

RuleTable RuleTable::builtin() {
    RuleTable t;
    // First-order count 2: a full (100) surface bond configuration.
    t.rules_.push_back({{2, 2}, {0, 12}, {0, 12}, kP100});
    // Three first-order bonds split between (110) and (111) by the
    // second-order count, with the third-order count deciding n2 == 9.
    t.rules_.push_back({{3, 3}, {0, 8}, {0, 12}, kP110});
    t.rules_.push_back({{3, 3}, {9, 9}, {0, 2}, kP110});
    t.rules_.push_back({{3, 3}, {10, 12}, {0, 12}, kP111});
    t.rules_.push_back({{3, 3}, {9, 9}, {9, 12}, kP111});
    // All four first-order bonds intact: interior atom, never removed.
    t.rules_.push_back({{4, 4}, {0, 12}, {0, 12}, kBulk});
    t.fallback_ = kFallback110;
    t.builtin_only_ = true;
    return t;
}

PlaneClass RuleTable::classify(const NeighborCounts& counts) const {
    for (const Rule& r : rules_) {
        ++predicate_evals_;
        if (r.matches(counts)) return r.plane;
    }
    return fallback_;
}

double RuleTable::probability(const PlaneClass& c) const {
    auto it = probabilities_.find(c);
    if (it != probabilities_.end()) return it->second;
    if (c.kind() == PlaneClass::Kind::Fallback110) {
        auto p110 = probabilities_.find(kP110);
        if (p110 != probabilities_.end()) return p110->second;
    }
    return 0.0;
}

void RuleTable::set_probability(const PlaneClass& c, double p) {
    if (!(p >= 0.0 && p <= 1.0))
        throw ConfigError("rule probability for class '" + c.name() + "' outside [0, 1]");
    probabilities_[c] = p;
}

ProbabilityResolution rates_to_probabilities(const RateSet& rates, double lattice_constant_um,
                                             double kappa) {
    if (!(lattice_constant_um > 0.0))
        throw ConfigError("rates_to_probabilities: lattice constant must be positive");
    if (!(kappa > 0.0)) throw ConfigError("rates_to_probabilities: kappa must be positive");
    if (rates.empty()) throw ConfigError("rates_to_probabilities: empty rate set");

    double max_rate = 0.0;
    for (const auto& [plane, rate] : rates) {
        if (!(rate >= 0.0) || !std::isfinite(rate))
            throw ConfigError("rate for plane '" + plane.name() + "' must be finite and >= 0");
        max_rate = std::max(max_rate, rate);
    }
    if (max_rate <= 0.0) throw ConfigError("rates_to_probabilities: all rates are zero");

    ProbabilityResolution out;
    for (const auto& [plane, rate] : rates) out.probabilities[plane] = rate / max_rate;
    // The unclassified gap etches like (110); interior atoms never etch.
    auto p110 = out.probabilities.find(kP110);
    if (p110 != out.probabilities.end()) out.probabilities[kFallback110] = p110->second;
    out.probabilities[kBulk] = 0.0;

    // One step removes one a/4 layer from the fastest plane on average.
    out.step_duration_min = kappa * (lattice_constant_um / 4.0) / max_rate;
    return out;
}

namespace {

CountRange parse_range(const nlohmann::json& j, const char* field, int max_value) {
    if (!j.contains(field) || !j[field].is_array() || j[field].size() != 2 ||
        !j[field][0].is_number_integer() || !j[field][1].is_number_integer())
        throw ConfigError(std::string("custom rule field '") + field +
                          "' must be an integer pair [lo, hi]");
    CountRange r{j[field][0].get<int>(), j[field][1].get<int>()};
    if (r.lo > r.hi)
        throw ConfigError(std::string("custom rule field '") + field + "': lo exceeds hi");
    if (r.lo < 0 || r.hi > max_value)
        throw ConfigError(std::string("custom rule field '") + field + "': range outside [0, " +
                          std::to_string(max_value) + "]");
    return r;
}

}  // namespace

RuleTable load_custom_rules(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("custom rules: invalid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("rules") || !doc["rules"].is_array())
        throw ConfigError("custom rules: top-level field 'rules' must be an array");

    struct Parsed {
        Rule rule;
        double p;
    };
    std::vector<Parsed> parsed;
    for (const auto& jr : doc["rules"]) {
        if (!jr.is_object()) throw ConfigError("custom rules: each rule must be an object");
        Parsed pr;
        pr.rule.n1 = parse_range(jr, "n1", kShell1Size);
        pr.rule.n2 = parse_range(jr, "n2", kShell2Size);
        pr.rule.n3 = parse_range(jr, "n3", kShell3Size);
        if (!jr.contains("class") || !jr["class"].is_string())
            throw ConfigError("custom rules: field 'class' must be a string");
        pr.rule.plane = plane_class_from_name(jr["class"].get<std::string>());
        if (!jr.contains("p") || !jr["p"].is_number())
            throw ConfigError("custom rules: field 'p' must be a number");
        pr.p = jr["p"].get<double>();
        if (!(pr.p >= 0.0 && pr.p <= 1.0))
            throw ConfigError("custom rules: field 'p' outside [0, 1]");
        parsed.push_back(std::move(pr));
    }

    // Two custom rules that can match the same count triple must agree on
    // both the class and the probability, otherwise the outcome would be
    // order-dependent in a way the author almost certainly did not intend.
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        for (std::size_t j = i + 1; j < parsed.size(); ++j) {
            const Rule& a = parsed[i].rule;
            const Rule& b = parsed[j].rule;
            bool overlap = a.n1.overlaps(b.n1) && a.n2.overlaps(b.n2) && a.n3.overlaps(b.n3);
            if (overlap &&
                (a.plane != b.plane || parsed[i].p != parsed[j].p))
                throw ConfigError("custom rules: rules " + std::to_string(i) + " and " +
                                  std::to_string(j) + " overlap with contradictory outcomes");
        }
    }
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        for (std::size_t j = i + 1; j < parsed.size(); ++j) {
            if (parsed[i].rule.plane == parsed[j].rule.plane && parsed[i].p != parsed[j].p)
                throw ConfigError("custom rules: class '" + parsed[i].rule.plane.name() +
                                  "' assigned two different probabilities");
        }
    }

    RuleTable table = RuleTable::builtin();
    std::vector<Rule> combined;
    combined.reserve(parsed.size() + table.rules_.size());
    for (const auto& pr : parsed) combined.push_back(pr.rule);
    combined.insert(combined.end(), table.rules_.begin(), table.rules_.end());
    table.rules_ = std::move(combined);
    table.builtin_only_ = parsed.empty();
    for (const auto& pr : parsed) table.set_probability(pr.rule.plane, pr.p);
    return table;
}

}  // namespace etchsim
