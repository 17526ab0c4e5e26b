#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "etchsim/layout.hpp"
#include "etchsim/mesh.hpp"

namespace etchsim {

// Genetic search over mask bitmaps. Every random decision is a keyed hash
// of (seed, role, generation, ...), so a run is a pure function of its
// configuration: restartable, thread-independent, bit-reproducible.
struct GaConfig {
    int population = 24;
    int generations = 60;
    int tournament = 3;     // entrants per parent selection
    int elites = 2;         // copied unchanged into the next generation
    double crossover_rate = 0.9;
    double mutation_rate = 0.01;  // per-pixel flip probability
    double stop_at = 1.0;         // early exit once best fitness reaches this
    std::uint64_t seed = 1;
};

struct GaResult {
    MaskBitmap best;
    double best_fitness = 0.0;
    int generations_run = 0;
    std::int64_t evaluations = 0;      // distinct simulations (cache misses)
    std::vector<double> history;       // best-so-far fitness per generation
};

// Produces the etched volume for a candidate mask. The optimizer treats it
// as a black box, which keeps unit tests cheap and lets the CLI plug in the
// full automaton.
using SimulateFn = std::function<VoxelVolume(const MaskBitmap&)>;

// Fraction of (weighted) voxels whose solid/empty state matches the
// target, in [0, 1]. Empty weights mean uniform; otherwise one weight per
// voxel in the target's x-fastest order.
double weighted_match(const VoxelVolume& candidate, const VoxelVolume& target,
                      const std::vector<double>& weights);

GaResult optimize_mask(int width, int height, const SimulateFn& simulate,
                       const VoxelVolume& target, const std::vector<double>& weights,
                       const GaConfig& config);

}  // namespace etchsim
