#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "etchsim/lattice.hpp"
#include "etchsim/layout.hpp"
#include "etchsim/rules.hpp"

namespace etchsim {

// Everything that defines the simulated die before any etching happens.
// Masks gate etchant access through the exposed z faces only; they are
// sampled at the column pitch a/4 and must measure 4*nx by 4*ny when
// present (the default-constructed bitmap means "no mask").
struct SimDomain {
    int nx = 32;
    int ny = 32;
    int nz = 32;
    double lattice_constant_um = 0.5431;
    BoundaryPolicy boundary = BoundaryPolicy::standard();
    MaskBitmap top_mask;
    MaskBitmap bottom_mask;
    std::vector<EtchStopBox> etch_stops;
};

// Per-run stepping parameters. The seed keys every removal draw together
// with the step index and the site index, so results do not depend on the
// thread count or on traversal order.
struct EngineConfig {
    RuleTable rules = RuleTable::builtin();
    std::uint64_t seed = 1;
    int threads = 1;
    double step_duration_min = 0.0;  // physical time per step, bookkeeping
};

struct StepResult {
    std::int64_t removed = 0;
    bool fixed_point = false;  // no surface site can etch, now or ever
};

struct RunResult {
    std::int64_t steps = 0;
    std::int64_t removed = 0;
    bool fixed_point = false;
    double elapsed_min = 0.0;
};

struct Metrics {
    std::int64_t step_count = 0;
    std::int64_t removed_sites = 0;
    std::int64_t surface_sites = 0;
    std::int64_t etch_stop_sites = 0;
    double removed_volume_um3 = 0.0;
    // Removed volume spread over the full die footprint, in um and in a/4
    // layers; equals the blanket etch depth on unmasked wafers.
    double mean_depth_um = 0.0;
    double mean_depth_quarters = 0.0;
    // Deepest removal measured from the original top face.
    int max_depth_quarters = 0;
    double max_depth_um = 0.0;
    // Lateral etch penetration beneath the protected part of the top mask:
    // columns owe their distance to the nearest open column (grid metric,
    // periodic on mirrored axes).
    std::int64_t undercut_columns = 0;
    int max_undercut_quarters = 0;
    double max_undercut_um = 0.0;
};

// Stochastic cellular automaton on the diamond lattice with synchronous
// two-phase stepping and an incrementally maintained surface set.
class Simulation {
public:
    explicit Simulation(const SimDomain& domain);

    const LatticeGrid& grid() const { return grid_; }
    LatticeGrid& grid() { return grid_; }
    const SimDomain& domain() const { return domain_; }

    std::int64_t step_index() const { return step_index_; }
    std::int64_t removed_count() const { return removed_count_; }
    double elapsed_min() const { return elapsed_min_; }
    // Total surface sites visited by step() so far; the throughput unit.
    std::int64_t site_updates() const { return site_updates_; }

    // Indices of the current surface sites (unspecified order).
    const std::vector<std::int64_t>& surface() const { return surface_; }
    std::vector<std::int64_t> surface_sorted() const;

    // Recomputes the surface set from scratch; the incremental bookkeeping
    // must always agree with this (the tests cross-check it).
    std::vector<std::int64_t> rescan_surface() const;

    StepResult step(const EngineConfig& config);

    // Steps until `max_steps` or a fixed point. `on_snapshot`, when given,
    // fires after every `snapshot_stride` steps and once more at the end.
    RunResult run(const EngineConfig& config, std::int64_t max_steps,
                  std::int64_t snapshot_stride = 0,
                  const std::function<void(const Simulation&)>& on_snapshot = {});

    Metrics metrics() const;

private:
    bool mask_open(Face face, int x, int y) const;
    void seed_surface();

    SimDomain domain_;
    LatticeGrid grid_;
    NeighborTable table_;
    std::vector<std::int64_t> surface_;
    std::vector<std::uint8_t> on_surface_;  // 1 bit per site, dedupes additions
    std::int64_t step_index_ = 0;
    std::int64_t removed_count_ = 0;
    std::int64_t etch_stop_count_ = 0;
    std::int64_t site_updates_ = 0;
    double elapsed_min_ = 0.0;
};

}  // namespace etchsim
