#include "etchsim/lattice.hpp"

#include <string>

namespace etchsim {

namespace {

int mod4(int v) { return ((v % 4) + 4) % 4; }

// Local atom positions inside one conventional cell, a/4 units. Ids 0..3
// are the even (FCC) sublattice, 4..7 the displaced basis atoms.
constexpr std::array<SiteCoord, 8> kLocalAtoms = {{
    {0, 0, 0},
    {0, 2, 2},
    {2, 0, 2},
    {2, 2, 0},
    {1, 1, 1},
    {1, 3, 3},
    {3, 1, 3},
    {3, 3, 1},
}};

constexpr std::array<SiteCoord, kShell1Size> kShell1Even = {{
    {1, 1, 1},
    {1, -1, -1},
    {-1, 1, -1},
    {-1, -1, 1},
}};

constexpr std::array<SiteCoord, kShell1Size> kShell1Odd = {{
    {-1, -1, -1},
    {-1, 1, 1},
    {1, -1, 1},
    {1, 1, -1},
}};

constexpr std::array<SiteCoord, kShell2Size> kShell2 = {{
    {2, 2, 0},
    {2, -2, 0},
    {-2, 2, 0},
    {-2, -2, 0},
    {2, 0, 2},
    {2, 0, -2},
    {-2, 0, 2},
    {-2, 0, -2},
    {0, 2, 2},
    {0, 2, -2},
    {0, -2, 2},
    {0, -2, -2},
}};

// Squared distance 11 offsets valid from the even sublattice
// (component sum = 3 mod 4).
constexpr std::array<SiteCoord, kShell3Size> kShell3Even = {{
    {3, 1, -1},
    {3, -1, 1},
    {1, 3, -1},
    {-1, 3, 1},
    {1, -1, 3},
    {-1, 1, 3},
    {-3, 1, 1},
    {1, -3, 1},
    {1, 1, -3},
    {-3, -1, -1},
    {-1, -3, -1},
    {-1, -1, -3},
}};

constexpr std::array<SiteCoord, kShell3Size> kShell3Odd = {{
    {-3, -1, 1},
    {-3, 1, -1},
    {-1, -3, 1},
    {1, -3, -1},
    {-1, 1, -3},
    {1, -1, -3},
    {3, -1, -1},
    {-1, 3, -1},
    {-1, -1, 3},
    {3, 1, 1},
    {1, 3, 1},
    {1, 1, 3},
}};

int local_id_table[64];

struct LocalIdInit {
    LocalIdInit() {
        for (int i = 0; i < 64; ++i) local_id_table[i] = -1;
        for (int id = 0; id < 8; ++id) {
            const SiteCoord& a = kLocalAtoms[static_cast<size_t>(id)];
            local_id_table[(a.x << 4) | (a.y << 2) | a.z] = id;
        }
    }
} local_id_init;

std::string coord_str(const SiteCoord& c) {
    return "(" + std::to_string(c.x) + ", " + std::to_string(c.y) + ", " + std::to_string(c.z) +
           ")";
}

}  // namespace

bool is_valid_site(const SiteCoord& c) {
    const int px = c.x & 1, py = c.y & 1, pz = c.z & 1;
    if (px != py || py != pz) return false;
    const int s = mod4(c.x + c.y + c.z);
    return px == 0 ? s == 0 : s == 3;
}

Point3 site_position(const SiteCoord& c, double lattice_constant_um) {
    if (!is_valid_site(c))
        throw ConfigError("site_position: " + coord_str(c) + " is not a diamond-lattice site");
    const double q = lattice_constant_um / 4.0;
    return {c.x * q, c.y * q, c.z * q};
}

const std::array<SiteCoord, kShell1Size>& first_shell_offsets(int sublattice) {
    return sublattice == 0 ? kShell1Even : kShell1Odd;
}

const std::array<SiteCoord, kShell2Size>& second_shell_offsets() { return kShell2; }

const std::array<SiteCoord, kShell3Size>& third_shell_offsets(int sublattice) {
    return sublattice == 0 ? kShell3Even : kShell3Odd;
}

std::vector<SiteCoord> neighbor_offsets(int order, int sublattice) {
    switch (order) {
        case 1: {
            const auto& s = first_shell_offsets(sublattice);
            return {s.begin(), s.end()};
        }
        case 2: {
            const auto& s = second_shell_offsets();
            return {s.begin(), s.end()};
        }
        case 3: {
            const auto& s = third_shell_offsets(sublattice);
            return {s.begin(), s.end()};
        }
        default:
            throw ConfigError("neighbor_offsets: order must be 1, 2 or 3, got " +
                              std::to_string(order));
    }
}

int local_atom_id(int x_mod4, int y_mod4, int z_mod4) {
    return local_id_table[(x_mod4 << 4) | (y_mod4 << 2) | z_mod4];
}

const std::array<SiteCoord, 8>& local_atom_offsets() { return kLocalAtoms; }

LatticeGrid::LatticeGrid(int nx, int ny, int nz, double lattice_constant_um,
                         BoundaryPolicy boundary)
    : nx_(nx), ny_(ny), nz_(nz), lattice_constant_um_(lattice_constant_um), boundary_(boundary) {
    if (nx <= 0 || ny <= 0 || nz <= 0)
        throw ConfigError("LatticeGrid: cell counts must be positive");
    if (!(lattice_constant_um > 0.0))
        throw ConfigError("LatticeGrid: lattice constant must be positive");
    states_.assign(static_cast<size_t>(8) * nx * ny * nz, SiteState::Solid);
}

std::int64_t LatticeGrid::index_of(const SiteCoord& c) const {
    if (!is_valid_site(c))
        throw ConfigError("index_of: " + coord_str(c) + " is not a diamond-lattice site");
    if (!in_domain(c)) throw ConfigError("index_of: " + coord_str(c) + " outside domain");
    const int lid = local_atom_id(c.x & 3, c.y & 3, c.z & 3);
    const std::int64_t cell =
        (static_cast<std::int64_t>(c.z >> 2) * ny_ + (c.y >> 2)) * nx_ + (c.x >> 2);
    return cell * 8 + lid;
}

SiteCoord LatticeGrid::coord_of(std::int64_t index) const {
    const int lid = static_cast<int>(index & 7);
    std::int64_t cell = index >> 3;
    const int cx = static_cast<int>(cell % nx_);
    cell /= nx_;
    const int cy = static_cast<int>(cell % ny_);
    const int cz = static_cast<int>(cell / ny_);
    const SiteCoord& a = kLocalAtoms[static_cast<size_t>(lid)];
    return {4 * cx + a.x, 4 * cy + a.y, 4 * cz + a.z};
}

ResolvedNeighbor LatticeGrid::resolve(const SiteCoord& neighbor) const {
    ResolvedNeighbor r;
    r.folded = neighbor;
    bool solid_crossing = false;

    auto fold_axis = [&](int& v, int extent, FacePolicy lo, FacePolicy hi, bool lateral,
                         bool& crossed_lo, bool& crossed_hi) {
        if (v < 0) {
            switch (lo) {
                case FacePolicy::Mirrored: v += extent; break;
                case FacePolicy::Solid: solid_crossing = true; break;
                case FacePolicy::Exposed:
                    if (lateral)
                        r.crossed_lateral_exposed = true;
                    else
                        crossed_lo = true;
                    break;
            }
        } else if (v >= extent) {
            switch (hi) {
                case FacePolicy::Mirrored: v -= extent; break;
                case FacePolicy::Solid: solid_crossing = true; break;
                case FacePolicy::Exposed:
                    if (lateral)
                        r.crossed_lateral_exposed = true;
                    else
                        crossed_hi = true;
                    break;
            }
        }
    };

    bool dummy_lo = false, dummy_hi = false;
    fold_axis(r.folded.x, extent_x(), boundary_.x_min, boundary_.x_max, true, dummy_lo, dummy_hi);
    fold_axis(r.folded.y, extent_y(), boundary_.y_min, boundary_.y_max, true, dummy_lo, dummy_hi);
    fold_axis(r.folded.z, extent_z(), boundary_.z_min, boundary_.z_max, false, r.crossed_z_min,
              r.crossed_z_max);

    if (in_domain(r.folded)) {
        r.kind = NeighborKind::InDomain;
        r.index = index_of(r.folded);
        return r;
    }
    // Solid continuation dominates mixed corner crossings.
    r.kind = solid_crossing ? NeighborKind::Present : NeighborKind::Absent;
    return r;
}

bool LatticeGrid::neighbor_is_material(const SiteCoord& neighbor) const {
    const ResolvedNeighbor r = resolve(neighbor);
    switch (r.kind) {
        case NeighborKind::InDomain: return state(r.index) != SiteState::Removed;
        case NeighborKind::Present: return true;
        case NeighborKind::Absent: return false;
    }
    return false;
}

NeighborCounts neighbor_counts(const LatticeGrid& grid, const SiteCoord& c) {
    if (!grid.in_domain(c)) throw ConfigError("neighbor_counts: coordinate outside domain");
    const int sub = sublattice_of(c);
    NeighborCounts counts;
    for (const auto& off : first_shell_offsets(sub))
        counts.n1 += grid.neighbor_is_material({c.x + off.x, c.y + off.y, c.z + off.z});
    for (const auto& off : second_shell_offsets())
        counts.n2 += grid.neighbor_is_material({c.x + off.x, c.y + off.y, c.z + off.z});
    for (const auto& off : third_shell_offsets(sub))
        counts.n3 += grid.neighbor_is_material({c.x + off.x, c.y + off.y, c.z + off.z});
    return counts;
}

NeighborTable::NeighborTable(int nx, int ny, int nz) {
    (void)nz;
    for (int lid = 0; lid < 8; ++lid) {
        const SiteCoord& a = kLocalAtoms[static_cast<size_t>(lid)];
        const int sub = lid < 4 ? 0 : 1;
        std::array<Entry, kShellTotal>& out = entries_[static_cast<size_t>(lid)];
        int k = 0;
        auto add = [&](const SiteCoord& off) {
            const SiteCoord n{a.x + off.x, a.y + off.y, a.z + off.z};
            Entry e;
            e.offset = off;
            e.dcx = static_cast<std::int8_t>(n.x >= 4 ? 1 : (n.x < 0 ? -1 : 0));
            e.dcy = static_cast<std::int8_t>(n.y >= 4 ? 1 : (n.y < 0 ? -1 : 0));
            e.dcz = static_cast<std::int8_t>(n.z >= 4 ? 1 : (n.z < 0 ? -1 : 0));
            const int nlid = local_atom_id(mod4(n.x), mod4(n.y), mod4(n.z));
            e.nlid = static_cast<std::uint8_t>(nlid);
            const std::int64_t cell_delta =
                (static_cast<std::int64_t>(e.dcz) * ny + e.dcy) * nx + e.dcx;
            e.flat_delta = cell_delta * 8 + (nlid - lid);
            out[static_cast<size_t>(k++)] = e;
        };
        for (const auto& off : first_shell_offsets(sub)) add(off);
        for (const auto& off : second_shell_offsets()) add(off);
        for (const auto& off : third_shell_offsets(sub)) add(off);
    }
}

}  // namespace etchsim
