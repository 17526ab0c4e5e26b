#include "etchsim/optimizer.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "etchsim/error.hpp"
#include "etchsim/rng.hpp"

namespace etchsim {

double weighted_match(const VoxelVolume& candidate, const VoxelVolume& target,
                      const std::vector<double>& weights) {
    if (candidate.nx != target.nx || candidate.ny != target.ny || candidate.nz != target.nz)
        throw ConfigError("fitness: candidate and target volume dimensions differ");
    if (!weights.empty() && weights.size() != target.occ.size())
        throw ConfigError("fitness: weight count does not match the target volume");

    double matched = 0.0, total = 0.0;
    for (size_t i = 0; i < target.occ.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        total += w;
        if ((candidate.occ[i] != 0) == (target.occ[i] != 0)) matched += w;
    }
    if (total <= 0.0) throw ConfigError("fitness: total weight must be positive");
    return matched / total;
}

namespace {

// Per-pixel draw keys share a generation, so fold the individual index and
// the pixel into one 64-bit tag. Control draws (gates, tournament picks)
// use tags beyond any pixel index.
std::uint64_t tag(int individual, std::uint64_t sub) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(individual)) << 32) | sub;
}

constexpr std::uint64_t kGateTag = 0xffffffffull;

}  // namespace

GaResult optimize_mask(int width, int height, const SimulateFn& simulate,
                       const VoxelVolume& target, const std::vector<double>& weights,
                       const GaConfig& config) {
    if (width <= 0 || height <= 0)
        throw ConfigError("optimizer: mask dimensions must be positive");
    if (config.population < 2) throw ConfigError("optimizer: population must be at least 2");
    if (config.generations < 1) throw ConfigError("optimizer: generations must be at least 1");
    if (config.tournament < 1 || config.tournament > 16)
        throw ConfigError("optimizer: tournament size must be in [1, 16]");
    if (config.elites < 0 || config.elites >= config.population)
        throw ConfigError("optimizer: elites must be in [0, population)");
    if (!(config.crossover_rate >= 0.0 && config.crossover_rate <= 1.0))
        throw ConfigError("optimizer: crossover_rate outside [0, 1]");
    if (!(config.mutation_rate >= 0.0 && config.mutation_rate <= 1.0))
        throw ConfigError("optimizer: mutation_rate outside [0, 1]");
    if (!simulate) throw ConfigError("optimizer: a simulate callback is required");

    const std::uint64_t npix = static_cast<std::uint64_t>(width) * height;
    if (npix >= kGateTag) throw ConfigError("optimizer: mask is too large");

    // Simulation results keyed by genome bytes; identical masks etch
    // identically, so clones and elites cost nothing to re-score.
    std::map<std::vector<std::uint8_t>, double> cache;
    GaResult result;

    auto evaluate = [&](const MaskBitmap& genome) {
        const auto [it, inserted] = cache.try_emplace(genome.bytes(), 0.0);
        if (inserted) {
            it->second = weighted_match(simulate(genome), target, weights);
            ++result.evaluations;
        }
        return it->second;
    };

    std::vector<MaskBitmap> pop(static_cast<size_t>(config.population));
    for (int i = 0; i < config.population; ++i) {
        MaskBitmap g(width, height);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const std::uint64_t p = static_cast<std::uint64_t>(y) * width + x;
                if (rng::draw(config.seed, rng::role::kGaInit, static_cast<std::uint64_t>(i),
                              p) < 0.5)
                    g.set_protected(x, y, true);
            }
        pop[static_cast<size_t>(i)] = std::move(g);
    }

    std::vector<double> fitness(pop.size());
    std::vector<int> order(pop.size());
    result.best = pop[0];
    result.best_fitness = -1.0;

    for (int gen = 0; gen < config.generations; ++gen) {
        for (size_t i = 0; i < pop.size(); ++i) fitness[i] = evaluate(pop[i]);

        // Rank best-first; ties keep the lower index so runs are stable.
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return fitness[static_cast<size_t>(a)] >
                                                    fitness[static_cast<size_t>(b)]; });
        const int top = order[0];
        if (fitness[static_cast<size_t>(top)] > result.best_fitness) {
            result.best_fitness = fitness[static_cast<size_t>(top)];
            result.best = pop[static_cast<size_t>(top)];
        }
        result.history.push_back(result.best_fitness);
        result.generations_run = gen + 1;
        if (result.best_fitness >= config.stop_at) break;
        if (gen + 1 == config.generations) break;

        const std::uint64_t g64 = static_cast<std::uint64_t>(gen);
        auto pick_parent = [&](int child, int which) -> const MaskBitmap& {
            int winner = -1;
            for (int k = 0; k < config.tournament; ++k) {
                const std::uint64_t sub = kGateTag + 1 +
                                          static_cast<std::uint64_t>(which * config.tournament + k);
                const double u = rng::draw(config.seed, rng::role::kGaTourney, g64,
                                           tag(child, sub));
                int idx = static_cast<int>(u * config.population);
                idx = std::min(idx, config.population - 1);
                if (winner < 0 ||
                    fitness[static_cast<size_t>(idx)] > fitness[static_cast<size_t>(winner)] ||
                    (fitness[static_cast<size_t>(idx)] == fitness[static_cast<size_t>(winner)] &&
                     idx < winner))
                    winner = idx;
            }
            return pop[static_cast<size_t>(winner)];
        };

        std::vector<MaskBitmap> next;
        next.reserve(pop.size());
        for (int e = 0; e < config.elites; ++e)
            next.push_back(pop[static_cast<size_t>(order[static_cast<size_t>(e)])]);

        for (int child = config.elites; child < config.population; ++child) {
            const MaskBitmap& a = pick_parent(child, 0);
            const MaskBitmap& b = pick_parent(child, 1);
            MaskBitmap kid(width, height);
            const bool cross = rng::draw(config.seed, rng::role::kGaCross, g64,
                                         tag(child, kGateTag)) < config.crossover_rate;
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x) {
                    const std::uint64_t p = static_cast<std::uint64_t>(y) * width + x;
                    const MaskBitmap& src =
                        cross && rng::draw(config.seed, rng::role::kGaCross, g64,
                                           tag(child, p)) < 0.5
                            ? b
                            : a;
                    bool bit = src.is_protected(x, y);
                    if (rng::draw(config.seed, rng::role::kGaMutate, g64, tag(child, p)) <
                        config.mutation_rate)
                        bit = !bit;
                    kid.set_protected(x, y, bit);
                }
            next.push_back(std::move(kid));
        }
        pop = std::move(next);
    }
    return result;
}

}  // namespace etchsim
