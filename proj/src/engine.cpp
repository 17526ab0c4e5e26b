#include "etchsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <thread>

#include "etchsim/rng.hpp"

namespace etchsim {

namespace {

void validate_mask(const MaskBitmap& mask, const char* which, int nx, int ny) {
    if (mask.empty()) return;
    if (mask.width() != 4 * nx || mask.height() != 4 * ny)
        throw ConfigError(std::string(which) + ": mask must be " + std::to_string(4 * nx) + "x" +
                          std::to_string(4 * ny) + " pixels, got " +
                          std::to_string(mask.width()) + "x" + std::to_string(mask.height()));
}

}  // namespace

Simulation::Simulation(const SimDomain& domain)
    : domain_(domain),
      grid_(domain.nx, domain.ny, domain.nz, domain.lattice_constant_um, domain.boundary),
      table_(domain.nx, domain.ny, domain.nz),
      on_surface_(static_cast<size_t>(grid_.site_count()), 0) {
    validate_mask(domain_.top_mask, "top_mask", domain_.nx, domain_.ny);
    validate_mask(domain_.bottom_mask, "bottom_mask", domain_.nx, domain_.ny);

    // Etch stops first: they participate in the initial surface scan as
    // unremovable material.
    const double q = grid_.lattice_constant() / 4.0;
    for (const EtchStopBox& box : domain_.etch_stops) {
        const int x0 = std::max(0, static_cast<int>(std::ceil(box.min.x / q)));
        const int y0 = std::max(0, static_cast<int>(std::ceil(box.min.y / q)));
        const int z0 = std::max(0, static_cast<int>(std::ceil(box.min.z / q)));
        const int x1 = std::min(grid_.extent_x() - 1, static_cast<int>(std::floor(box.max.x / q)));
        const int y1 = std::min(grid_.extent_y() - 1, static_cast<int>(std::floor(box.max.y / q)));
        const int z1 = std::min(grid_.extent_z() - 1, static_cast<int>(std::floor(box.max.z / q)));
        for (int z = z0; z <= z1; ++z)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const SiteCoord c{x, y, z};
                    if (!is_valid_site(c)) continue;
                    const std::int64_t i = grid_.index_of(c);
                    if (grid_.state(i) == SiteState::Solid) {
                        grid_.set_state(i, SiteState::EtchStop);
                        ++etch_stop_count_;
                    }
                }
    }

    seed_surface();
}

bool Simulation::mask_open(Face face, int x, int y) const {
    if (face == Face::ZMax) return domain_.top_mask.open(x, y);
    if (face == Face::ZMin) return domain_.bottom_mask.open(x, y);
    return true;
}

void Simulation::seed_surface() {
    // Only sites within reach of an exposed face (shells extend 2 quarter
    // units, cells are 4 deep) can start on the surface, so scanning the
    // boundary cell slabs of the exposed faces finds them all.
    const BoundaryPolicy& bp = grid_.boundary();
    auto open_fn = [this](Face f, int x, int y) { return mask_open(f, x, y); };

    const int nx = grid_.nx(), ny = grid_.ny(), nz = grid_.nz();
    for (int cz = 0; cz < nz; ++cz) {
        const bool z_slab = (cz == 0 && bp.z_min == FacePolicy::Exposed) ||
                            (cz == nz - 1 && bp.z_max == FacePolicy::Exposed);
        for (int cy = 0; cy < ny; ++cy) {
            const bool y_slab = (cy == 0 && bp.y_min == FacePolicy::Exposed) ||
                                (cy == ny - 1 && bp.y_max == FacePolicy::Exposed);
            for (int cx = 0; cx < nx; ++cx) {
                const bool x_slab = (cx == 0 && bp.x_min == FacePolicy::Exposed) ||
                                    (cx == nx - 1 && bp.x_max == FacePolicy::Exposed);
                if (!(z_slab || y_slab || x_slab)) continue;
                const std::int64_t cell =
                    (static_cast<std::int64_t>(cz) * ny + cy) * nx + cx;
                for (int lid = 0; lid < 8; ++lid) {
                    const std::int64_t i = cell * 8 + lid;
                    if (grid_.state(i) != SiteState::Solid) continue;
                    if (is_surface_when(grid_, grid_.coord_of(i), open_fn)) {
                        on_surface_[static_cast<size_t>(i)] = 1;
                        surface_.push_back(i);
                    }
                }
            }
        }
    }
}

std::vector<std::int64_t> Simulation::rescan_surface() const {
    auto open_fn = [this](Face f, int x, int y) { return mask_open(f, x, y); };
    std::vector<std::int64_t> out;
    for (std::int64_t i = 0; i < grid_.site_count(); ++i)
        if (is_surface_when(grid_, grid_.coord_of(i), open_fn)) out.push_back(i);
    return out;
}

std::vector<std::int64_t> Simulation::surface_sorted() const {
    std::vector<std::int64_t> out = surface_;
    std::sort(out.begin(), out.end());
    return out;
}

StepResult Simulation::step(const EngineConfig& config) {
    if (config.threads < 1) throw ConfigError("threads: must be at least 1");

    const RuleTable& rules = config.rules;
    const bool staged = rules.builtin_only();
    const double p100 = rules.probability(kP100);
    const double p110 = rules.probability(kP110);
    const double p111 = rules.probability(kP111);
    const double p_fall = rules.probability(kFallback110);
    const double p_bulk = rules.probability(kBulk);

    const auto step_key = static_cast<std::uint64_t>(step_index_);
    const std::uint64_t seed = config.seed;
    const int nx = grid_.nx(), ny = grid_.ny(), nz = grid_.nz();
    const SiteState* states = grid_.states().data();

    const BoundaryPolicy& bp = grid_.boundary();
    const bool top_shield = bp.z_max == FacePolicy::Exposed && !domain_.top_mask.empty();
    const bool bottom_shield = bp.z_min == FacePolicy::Exposed && !domain_.bottom_mask.empty();

    // Phase 1: every current surface site decides independently. The draw
    // is keyed by (seed, step, site), so the decision set is identical for
    // any chunking.
    auto decide_range = [&](size_t begin, size_t end, std::vector<std::int64_t>& removals,
                            bool& any_positive) {
        for (size_t k = begin; k < end; ++k) {
            const std::int64_t si = surface_[k];
            if (states[si] != SiteState::Solid) continue;
            const SiteCoord c = grid_.coord_of(si);
            const int cx = c.x >> 2, cy = c.y >> 2, cz = c.z >> 2;
            const bool interior = cx > 0 && cx < nx - 1 && cy > 0 && cy < ny - 1 && cz > 0 &&
                                  cz < nz - 1;
            const auto& entries = table_.entries(static_cast<int>(si & 7));

            // Face-mask shielding: a protected pixel blocks attack through
            // its face, and creep along the covered surface layer does not
            // defeat it -- sites under a protected pixel stay intact until
            // the etch front has opened material past them (a removed
            // first/second-shell neighbor beyond the site, or reach through
            // the opposite open face). Mask edges therefore stay pinned
            // while protected structures can still be undercut and released
            // from below.
            if (top_shield || bottom_shield) {
                auto reached_past = [&](bool from_below) -> bool {
                    for (int k_entry = 0; k_entry < kShell1Size + kShell2Size; ++k_entry) {
                        const NeighborTable::Entry& e = entries[static_cast<size_t>(k_entry)];
                        if (from_below ? e.offset.z >= 0 : e.offset.z <= 0) continue;
                        if (interior) {
                            if (states[si + e.flat_delta] == SiteState::Removed) return true;
                            continue;
                        }
                        const ResolvedNeighbor r = grid_.resolve(
                            {c.x + e.offset.x, c.y + e.offset.y, c.z + e.offset.z});
                        if (r.kind == NeighborKind::InDomain) {
                            if (states[r.index] == SiteState::Removed) return true;
                        } else if (r.kind == NeighborKind::Absent) {
                            if (r.crossed_lateral_exposed) return true;
                            if (from_below && r.crossed_z_min &&
                                mask_open(Face::ZMin, r.folded.x, r.folded.y))
                                return true;
                            if (!from_below && r.crossed_z_max &&
                                mask_open(Face::ZMax, r.folded.x, r.folded.y))
                                return true;
                        }
                    }
                    return false;
                };
                if (top_shield && domain_.top_mask.is_protected(c.x, c.y) &&
                    !reached_past(/*from_below=*/true))
                    continue;
                if (bottom_shield && domain_.bottom_mask.is_protected(c.x, c.y) &&
                    !reached_past(/*from_below=*/false))
                    continue;
            }

            auto material = [&](int k_entry) -> bool {
                const NeighborTable::Entry& e = entries[static_cast<size_t>(k_entry)];
                if (interior) return states[si + e.flat_delta] != SiteState::Removed;
                const SiteCoord n{c.x + e.offset.x, c.y + e.offset.y, c.z + e.offset.z};
                return grid_.neighbor_is_material(n);
            };
            auto count_shell = [&](int from, int to) {
                int n = 0;
                for (int k_entry = from; k_entry < to; ++k_entry) n += material(k_entry);
                return n;
            };

            double p;
            if (staged) {
                const int n1 = count_shell(0, 4);
                if (n1 == 4) {
                    p = p_bulk;
                } else if (n1 == 2) {
                    p = p100;
                } else if (n1 < 2) {
                    p = p_fall;
                } else {  // n1 == 3
                    const int n2 = count_shell(4, 16);
                    if (n2 < 9) {
                        p = p110;
                    } else if (n2 >= 10) {
                        p = p111;
                    } else {
                        const int n3 = count_shell(16, 28);
                        p = n3 < 3 ? p110 : (n3 >= 9 ? p111 : p_fall);
                    }
                }
            } else {
                const NeighborCounts counts{count_shell(0, 4), count_shell(4, 16),
                                            count_shell(16, 28)};
                p = rules.probability(rules.classify(counts));
            }

            if (p > 0.0) {
                any_positive = true;
                if (rng::draw(seed, rng::role::kEtch, step_key, static_cast<std::uint64_t>(si)) <
                    p)
                    removals.push_back(si);
            }
        }
    };

    const size_t n_surface = surface_.size();
    const int threads = static_cast<int>(std::min<std::int64_t>(
        config.threads, std::max<std::int64_t>(static_cast<std::int64_t>(n_surface), 1)));
    std::vector<std::vector<std::int64_t>> removal_chunks(static_cast<size_t>(threads));
    std::vector<std::uint8_t> positive_flags(static_cast<size_t>(threads), 0);

    if (threads == 1) {
        bool any = false;
        decide_range(0, n_surface, removal_chunks[0], any);
        positive_flags[0] = any;
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(threads));
        for (int t = 0; t < threads; ++t) {
            const size_t begin = n_surface * static_cast<size_t>(t) / threads;
            const size_t end = n_surface * (static_cast<size_t>(t) + 1) / threads;
            pool.emplace_back([&, t, begin, end] {
                bool any = false;
                decide_range(begin, end, removal_chunks[static_cast<size_t>(t)], any);
                positive_flags[static_cast<size_t>(t)] = any;
            });
        }
        for (auto& th : pool) th.join();
    }

    bool any_positive = false;
    for (std::uint8_t f : positive_flags) any_positive |= (f != 0);

    // Phase 2: apply all removals, then grow the surface set with their
    // still-solid first/second-shell neighbors. Chunks concatenate in
    // order, so the apply sequence matches the single-threaded one.
    std::int64_t removed_now = 0;
    std::vector<std::int64_t> additions;
    for (const auto& chunk : removal_chunks) {
        for (std::int64_t si : chunk) {
            grid_.set_state(si, SiteState::Removed);
            on_surface_[static_cast<size_t>(si)] = 0;
            ++removed_now;
        }
    }
    for (const auto& chunk : removal_chunks) {
        for (std::int64_t si : chunk) {
            const SiteCoord c = grid_.coord_of(si);
            const int cx = c.x >> 2, cy = c.y >> 2, cz = c.z >> 2;
            const bool interior = cx > 0 && cx < nx - 1 && cy > 0 && cy < ny - 1 && cz > 0 &&
                                  cz < nz - 1;
            const auto& entries = table_.entries(static_cast<int>(si & 7));
            for (int k_entry = 0; k_entry < kShell1Size + kShell2Size; ++k_entry) {
                const NeighborTable::Entry& e = entries[static_cast<size_t>(k_entry)];
                std::int64_t ni = -1;
                if (interior) {
                    ni = si + e.flat_delta;
                } else {
                    const ResolvedNeighbor r =
                        grid_.resolve({c.x + e.offset.x, c.y + e.offset.y, c.z + e.offset.z});
                    if (r.kind != NeighborKind::InDomain) continue;
                    ni = r.index;
                }
                if (grid_.state(ni) == SiteState::Solid && !on_surface_[static_cast<size_t>(ni)]) {
                    on_surface_[static_cast<size_t>(ni)] = 1;
                    additions.push_back(ni);
                }
            }
        }
    }

    if (removed_now > 0) {
        std::vector<std::int64_t> next;
        next.reserve(surface_.size() - static_cast<size_t>(removed_now) + additions.size());
        for (std::int64_t si : surface_)
            if (on_surface_[static_cast<size_t>(si)]) next.push_back(si);
        next.insert(next.end(), additions.begin(), additions.end());
        surface_ = std::move(next);
    }

    removed_count_ += removed_now;
    site_updates_ += static_cast<std::int64_t>(n_surface);
    ++step_index_;
    elapsed_min_ += config.step_duration_min;

    return {removed_now, !any_positive};
}

RunResult Simulation::run(const EngineConfig& config, std::int64_t max_steps,
                          std::int64_t snapshot_stride,
                          const std::function<void(const Simulation&)>& on_snapshot) {
    if (max_steps < 0) throw ConfigError("max_steps: must be non-negative");
    RunResult res;
    for (std::int64_t s = 0; s < max_steps; ++s) {
        const StepResult sr = step(config);
        res.steps += 1;
        res.removed += sr.removed;
        if (on_snapshot && snapshot_stride > 0 && step_index_ % snapshot_stride == 0)
            on_snapshot(*this);
        if (sr.fixed_point) {
            res.fixed_point = true;
            break;
        }
    }
    res.elapsed_min = elapsed_min_;
    if (on_snapshot) on_snapshot(*this);
    return res;
}

Metrics Simulation::metrics() const {
    Metrics m;
    m.step_count = step_index_;
    m.removed_sites = removed_count_;
    m.surface_sites = static_cast<std::int64_t>(surface_.size());
    m.etch_stop_sites = etch_stop_count_;

    const double a = grid_.lattice_constant();
    const double q = a / 4.0;
    // 8 atoms per cubic cell of volume a^3.
    m.removed_volume_um3 = static_cast<double>(removed_count_) * a * a * a / 8.0;

    const int ex = grid_.extent_x(), ey = grid_.extent_y(), ez = grid_.extent_z();
    // One atom per 8 quarter-unit cubes: depth = 8 * removed / footprint.
    m.mean_depth_quarters =
        8.0 * static_cast<double>(removed_count_) / (static_cast<double>(ex) * ey);
    m.mean_depth_um = m.mean_depth_quarters * q;

    std::vector<std::uint8_t> column_removed(static_cast<size_t>(ex) * ey, 0);
    int min_removed_z = ez;
    for (std::int64_t i = 0; i < grid_.site_count(); ++i) {
        if (grid_.state(i) != SiteState::Removed) continue;
        const SiteCoord c = grid_.coord_of(i);
        min_removed_z = std::min(min_removed_z, c.z);
        column_removed[static_cast<size_t>(c.y) * ex + c.x] = 1;
    }
    m.max_depth_quarters = removed_count_ > 0 ? ez - min_removed_z : 0;
    m.max_depth_um = m.max_depth_quarters * q;

    const MaskBitmap& top = domain_.top_mask;
    if (!top.empty() && removed_count_ > 0) {
        // Multi-source BFS from the open columns; grid metric, periodic
        // along mirrored axes. Distance to etchant access for every column.
        const BoundaryPolicy& bp = grid_.boundary();
        const bool wrap_x =
            bp.x_min == FacePolicy::Mirrored && bp.x_max == FacePolicy::Mirrored;
        const bool wrap_y =
            bp.y_min == FacePolicy::Mirrored && bp.y_max == FacePolicy::Mirrored;
        std::vector<int> dist(static_cast<size_t>(ex) * ey, -1);
        std::deque<std::pair<int, int>> queue;
        for (int y = 0; y < ey; ++y)
            for (int x = 0; x < ex; ++x)
                if (top.open(x, y)) {
                    dist[static_cast<size_t>(y) * ex + x] = 0;
                    queue.emplace_back(x, y);
                }
        while (!queue.empty()) {
            const auto [x, y] = queue.front();
            queue.pop_front();
            const int d = dist[static_cast<size_t>(y) * ex + x];
            const int cand[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
            for (const auto& c : cand) {
                int nx2 = c[0], ny2 = c[1];
                if (nx2 < 0) {
                    if (!wrap_x) continue;
                    nx2 += ex;
                } else if (nx2 >= ex) {
                    if (!wrap_x) continue;
                    nx2 -= ex;
                }
                if (ny2 < 0) {
                    if (!wrap_y) continue;
                    ny2 += ey;
                } else if (ny2 >= ey) {
                    if (!wrap_y) continue;
                    ny2 -= ey;
                }
                int& dn = dist[static_cast<size_t>(ny2) * ex + nx2];
                if (dn < 0) {
                    dn = d + 1;
                    queue.emplace_back(nx2, ny2);
                }
            }
        }
        for (int y = 0; y < ey; ++y)
            for (int x = 0; x < ex; ++x) {
                if (!column_removed[static_cast<size_t>(y) * ex + x]) continue;
                if (!top.is_protected(x, y)) continue;
                ++m.undercut_columns;
                m.max_undercut_quarters =
                    std::max(m.max_undercut_quarters,
                             std::max(0, dist[static_cast<size_t>(y) * ex + x]));
            }
        m.max_undercut_um = m.max_undercut_quarters * q;
    }
    return m;
}

}  // namespace etchsim
