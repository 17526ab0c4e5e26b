#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "etchsim/lattice.hpp"

namespace etchsim {

// Crystal-plane classes assigned from neighbor counts. Fallback110 covers
// the count triples the three built-in rules leave unclassified, most
// prominently (n1=3, n2=9, 3 <= n3 <= 8); it always etches at the (110)
// probability. See the classification tests for the full table.
class PlaneClass {
public:
    enum class Kind : std::uint8_t { P100, P110, P111, Bulk, Fallback110, Custom };

    PlaneClass() : kind_(Kind::Bulk) {}
    PlaneClass(Kind k) : kind_(k) {}
    static PlaneClass custom(std::string label) {
        PlaneClass c(Kind::Custom);
        c.label_ = std::move(label);
        return c;
    }

    Kind kind() const { return kind_; }
    const std::string& label() const { return label_; }
    std::string name() const;

    bool operator==(const PlaneClass& o) const {
        return kind_ == o.kind_ && (kind_ != Kind::Custom || label_ == o.label_);
    }
    bool operator!=(const PlaneClass& o) const { return !(*this == o); }
    bool operator<(const PlaneClass& o) const {
        if (kind_ != o.kind_) return kind_ < o.kind_;
        return kind_ == Kind::Custom && label_ < o.label_;
    }

private:
    Kind kind_;
    std::string label_;
};

inline const PlaneClass kP100{PlaneClass::Kind::P100};
inline const PlaneClass kP110{PlaneClass::Kind::P110};
inline const PlaneClass kP111{PlaneClass::Kind::P111};
inline const PlaneClass kBulk{PlaneClass::Kind::Bulk};
inline const PlaneClass kFallback110{PlaneClass::Kind::Fallback110};

// Parses "100" / "110" / "111" / "bulk" / "fallback_110"; anything else is
// a custom label.
PlaneClass plane_class_from_name(const std::string& name);

// Etch rates per plane class in um/min.
using RateSet = std::map<PlaneClass, double>;

struct CountRange {
    int lo = 0;
    int hi = 0;  // inclusive
    bool contains(int v) const { return v >= lo && v <= hi; }
    bool overlaps(const CountRange& o) const { return lo <= o.hi && o.lo <= hi; }
};

struct Rule {
    CountRange n1, n2, n3;
    PlaneClass plane;

    bool matches(const NeighborCounts& c) const {
        return n1.contains(c.n1) && n2.contains(c.n2) && n3.contains(c.n3);
    }
};

// Ordered rule list plus per-class removal probabilities. Custom rules are
// evaluated before the built-ins; the first match wins; unmatched counts
// take the fallback class. Immutable once built.
class RuleTable {
public:
    // The three-plane table transcribed from the first/second/third-order
    // neighbor conditions, with Fallback110 as the gap class.
    static RuleTable builtin();

    const std::vector<Rule>& rules() const { return rules_; }
    const PlaneClass& fallback() const { return fallback_; }

    PlaneClass classify(const NeighborCounts& counts) const;

    double probability(const PlaneClass& c) const;
    void set_probability(const PlaneClass& c, double p);
    const std::map<PlaneClass, double>& probabilities() const { return probabilities_; }

    // True when only the built-in rules are present; enables the staged
    // shell evaluation in the engine (n2/n3 computed only when needed).
    bool builtin_only() const { return builtin_only_; }

    // Number of predicate evaluations performed so far; deterministic cost
    // proxy used by the rule-count performance property.
    std::uint64_t predicate_evaluations() const { return predicate_evals_; }

    friend RuleTable load_custom_rules(const std::string& json_text);

private:
    std::vector<Rule> rules_;
    PlaneClass fallback_ = kFallback110;
    std::map<PlaneClass, double> probabilities_;
    bool builtin_only_ = true;
    mutable std::uint64_t predicate_evals_ = 0;
};

struct ProbabilityResolution {
    std::map<PlaneClass, double> probabilities;
    double step_duration_min = 0.0;
};

// Probability mapping p = R / R_max, so the fastest plane etches with
// probability one per step. One step advances the fastest front by one
// atomic layer pitch (a/4 along <100>), scaled by the calibration factor
// kappa. Throws when every rate is zero.
ProbabilityResolution rates_to_probabilities(const RateSet& rates, double lattice_constant_um,
                                             double kappa = 1.0);

// Step-time calibration: blanket (100) fronts advance slightly faster than
// p(100) layers per step because partially uncovered sites fall through to
// the faster ledge classes. Measured once on open-surface etches with a
// 1 : 2 : 1/200 rate anisotropy and held fixed thereafter.
inline constexpr double kCalibratedKappa = 1.8772;

// Parses a custom-rule JSON document ({"rules":[{"n1":[lo,hi],...}]}) and
// returns the built-in table extended with those rules (evaluated first).
// Contradictory overlapping rules and out-of-range probabilities are
// rejected.
RuleTable load_custom_rules(const std::string& json_text);

}  // namespace etchsim
