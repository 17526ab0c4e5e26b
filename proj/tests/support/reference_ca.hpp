#pragma once

#include <cstdint>
#include <vector>

#include "etchsim/engine.hpp"
#include "etchsim/lattice.hpp"
#include "etchsim/layout.hpp"
#include "etchsim/rng.hpp"
#include "etchsim/rules.hpp"

namespace etchsim::testing {

// Reference automaton: rescans the whole grid every step straight through
// the public predicates — no neighbor tables, no incremental surface set,
// no staged shell evaluation. It shares the classification table and the
// draw keying with the engine, so any state divergence points at the
// engine's bookkeeping rather than at the stochastic law.
inline std::int64_t naive_step(LatticeGrid& grid, const MaskBitmap& top, const MaskBitmap& bottom,
                               const RuleTable& rules, std::uint64_t seed,
                               std::int64_t step_index) {
    auto open_fn = [&](Face f, int x, int y) {
        if (f == Face::ZMax) return top.open(x, y);
        if (f == Face::ZMin) return bottom.open(x, y);
        return true;
    };
    // Shield check, spelled out through resolve(): a site under a protected
    // pixel of an exposed face is skipped unless some first/second-shell
    // position past it (below for the top mask, above for the bottom one)
    // is already removed or reaches etchant through the opposite open face.
    auto reached_past = [&](const SiteCoord& c, int z_sign) {
        const int sub = sublattice_of(c);
        auto probe = [&](const SiteCoord& off) -> bool {
            if (off.z * z_sign <= 0) return false;
            const ResolvedNeighbor r = grid.resolve({c.x + off.x, c.y + off.y, c.z + off.z});
            if (r.kind == NeighborKind::InDomain)
                return grid.state(r.index) == SiteState::Removed;
            if (r.kind != NeighborKind::Absent) return false;
            if (r.crossed_lateral_exposed) return true;
            if (r.crossed_z_min && open_fn(Face::ZMin, r.folded.x, r.folded.y)) return true;
            if (r.crossed_z_max && open_fn(Face::ZMax, r.folded.x, r.folded.y)) return true;
            return false;
        };
        for (const auto& off : first_shell_offsets(sub))
            if (probe(off)) return true;
        for (const auto& off : second_shell_offsets())
            if (probe(off)) return true;
        return false;
    };
    const BoundaryPolicy& bp = grid.boundary();
    auto shielded = [&](const SiteCoord& c) {
        if (bp.z_max == FacePolicy::Exposed && !top.empty() && top.is_protected(c.x, c.y) &&
            !reached_past(c, -1))
            return true;
        if (bp.z_min == FacePolicy::Exposed && !bottom.empty() && bottom.is_protected(c.x, c.y) &&
            !reached_past(c, +1))
            return true;
        return false;
    };

    std::vector<std::int64_t> removals;
    for (std::int64_t i = 0; i < grid.site_count(); ++i) {
        const SiteCoord c = grid.coord_of(i);
        if (!is_surface_when(grid, c, open_fn)) continue;
        if (shielded(c)) continue;
        const NeighborCounts counts = neighbor_counts(grid, c);
        const double p = rules.probability(rules.classify(counts));
        if (p > 0.0 && rng::draw(seed, rng::role::kEtch, static_cast<std::uint64_t>(step_index),
                                 static_cast<std::uint64_t>(i)) < p)
            removals.push_back(i);
    }
    for (std::int64_t i : removals) grid.set_state(i, SiteState::Removed);
    return static_cast<std::int64_t>(removals.size());
}

// Probability table for a rate triple, step duration discarded.
inline RuleTable make_rule_table(double r100, double r110, double r111,
                                 double lattice_constant_um = 0.5431) {
    RateSet rates;
    rates[kP100] = r100;
    rates[kP110] = r110;
    rates[kP111] = r111;
    RuleTable table = RuleTable::builtin();
    const auto res = rates_to_probabilities(rates, lattice_constant_um);
    for (const auto& [plane, p] : res.probabilities) table.set_probability(plane, p);
    return table;
}

}  // namespace etchsim::testing
