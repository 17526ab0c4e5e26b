#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "etchsim/error.hpp"

namespace etchsim {

// Site state on the diamond-cubic lattice. EtchStop never becomes Removed;
// Removed never becomes Solid again.
enum class SiteState : std::uint8_t { Solid = 0, Removed = 1, EtchStop = 2 };

// Integer lattice coordinates in units of a/4 (a quarter of the lattice
// constant). A coordinate triple is a lattice site iff all components share
// parity and, all even: (x+y+z) mod 4 == 0, all odd: (x+y+z) mod 4 == 3.
// Those two conditions generate the FCC lattice plus the basis atom
// displaced by (a/4, a/4, a/4), i.e. the diamond structure.
struct SiteCoord {
    int x = 0;
    int y = 0;
    int z = 0;

    friend bool operator==(const SiteCoord&, const SiteCoord&) = default;
};

bool is_valid_site(const SiteCoord& c);

// 0 = even sublattice (conventional FCC sites), 1 = odd sublattice (basis
// atoms). Bonds always connect opposite sublattices.
inline int sublattice_of(const SiteCoord& c) { return (c.x & 1); }

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

// Physical embedding: coordinates scale by lattice_constant / 4.
Point3 site_position(const SiteCoord& c, double lattice_constant_um);

// Counts of non-removed neighbors in the first/second/third coordination
// shells (squared distances 3 / 8 / 11 in a/4 units; shell sizes 4/12/12).
struct NeighborCounts {
    int n1 = 0;
    int n2 = 0;
    int n3 = 0;

    friend bool operator==(const NeighborCounts&, const NeighborCounts&) = default;
};

inline constexpr int kShell1Size = 4;
inline constexpr int kShell2Size = 12;
inline constexpr int kShell3Size = 12;
inline constexpr int kShellTotal = kShell1Size + kShell2Size + kShell3Size;

// Offsets of one coordination shell for the given sublattice. The second
// shell is sublattice-independent; the first and third flip sign.
const std::array<SiteCoord, kShell1Size>& first_shell_offsets(int sublattice);
const std::array<SiteCoord, kShell2Size>& second_shell_offsets();
const std::array<SiteCoord, kShell3Size>& third_shell_offsets(int sublattice);

// Spec-facing helper: offsets for order 1, 2 or 3; rejects anything else.
std::vector<SiteCoord> neighbor_offsets(int order, int sublattice = 0);

enum class Face : std::uint8_t { XMin = 0, XMax, YMin, YMax, ZMin, ZMax };

enum class FacePolicy : std::uint8_t {
    Exposed,   // etchant beyond the face; out-of-domain neighbors absent
    Mirrored,  // periodic continuation of the die (see module docs)
    Solid      // material continues; out-of-domain neighbors present
};

struct BoundaryPolicy {
    FacePolicy x_min = FacePolicy::Mirrored;
    FacePolicy x_max = FacePolicy::Mirrored;
    FacePolicy y_min = FacePolicy::Mirrored;
    FacePolicy y_max = FacePolicy::Mirrored;
    FacePolicy z_min = FacePolicy::Exposed;
    FacePolicy z_max = FacePolicy::Exposed;

    FacePolicy at(Face f) const {
        switch (f) {
            case Face::XMin: return x_min;
            case Face::XMax: return x_max;
            case Face::YMin: return y_min;
            case Face::YMax: return y_max;
            case Face::ZMin: return z_min;
            default: return z_max;
        }
    }

    // Double-side etching: both wafer faces exposed, lateral faces periodic.
    static BoundaryPolicy standard() { return BoundaryPolicy{}; }
};

// Result of resolving one neighbor position against the domain boundary.
enum class NeighborKind : std::uint8_t {
    InDomain,  // look the state up
    Present,   // phantom beyond a solid face, counts as material
    Absent     // phantom beyond an exposed face, counts as removed
};

struct ResolvedNeighbor {
    NeighborKind kind = NeighborKind::Absent;
    std::int64_t index = -1;     // valid iff kind == InDomain
    SiteCoord folded{};          // coordinates after periodic folding
    bool crossed_z_min = false;  // crossed an exposed z_min face
    bool crossed_z_max = false;  // crossed an exposed z_max face
    bool crossed_lateral_exposed = false;
};

// Dense storage of every atom site in an nx x ny x nz block of conventional
// cells (8 atoms per cell). Site indexing is bijective:
//   index = ((cz*ny + cy)*nx + cx)*8 + local_atom_id.
class LatticeGrid {
public:
    LatticeGrid(int nx, int ny, int nz, double lattice_constant_um,
                BoundaryPolicy boundary = BoundaryPolicy::standard());

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    double lattice_constant() const { return lattice_constant_um_; }
    const BoundaryPolicy& boundary() const { return boundary_; }

    std::int64_t site_count() const { return static_cast<std::int64_t>(states_.size()); }

    // Extent of the coordinate box in a/4 units: x in [0, 4*nx), etc.
    int extent_x() const { return 4 * nx_; }
    int extent_y() const { return 4 * ny_; }
    int extent_z() const { return 4 * nz_; }

    bool in_domain(const SiteCoord& c) const {
        return c.x >= 0 && c.x < extent_x() && c.y >= 0 && c.y < extent_y() && c.z >= 0 &&
               c.z < extent_z();
    }

    // Throws ConfigError for coordinates that are not lattice sites or lie
    // outside the domain.
    std::int64_t index_of(const SiteCoord& c) const;
    SiteCoord coord_of(std::int64_t index) const;

    SiteState state(std::int64_t index) const { return states_[static_cast<size_t>(index)]; }
    SiteState state(const SiteCoord& c) const { return state(index_of(c)); }
    void set_state(std::int64_t index, SiteState s) { states_[static_cast<size_t>(index)] = s; }

    const std::vector<SiteState>& states() const { return states_; }
    std::vector<SiteState>& states() { return states_; }

    // Folds an arbitrary neighbor position into the domain according to the
    // per-face policies. Positions beyond a solid face resolve to Present,
    // beyond exposed faces to Absent; mirrored axes wrap periodically.
    ResolvedNeighbor resolve(const SiteCoord& neighbor) const;

    // True when the neighbor site holds material (Solid or EtchStop), with
    // phantoms resolved by boundary policy.
    bool neighbor_is_material(const SiteCoord& neighbor) const;

private:
    int nx_, ny_, nz_;
    double lattice_constant_um_;
    BoundaryPolicy boundary_;
    std::vector<SiteState> states_;
};

// Neighbor counts per shell for a site; counts Solid and EtchStop, with
// out-of-domain phantoms per the boundary policy. Throws for coordinates
// outside the domain.
NeighborCounts neighbor_counts(const LatticeGrid& grid, const SiteCoord& c);

// Surface predicate: Solid site with at least one first- or second-shell
// neighbor that is Removed or lies beyond an exposed boundary face. The
// OpenFn hook decides whether an exposed z-face grants etchant access at a
// given (x, y) column; the engine passes the mask bitmaps through it.
template <class OpenFn>
bool is_surface_when(const LatticeGrid& grid, const SiteCoord& c, OpenFn&& open) {
    if (!grid.in_domain(c)) throw ConfigError("is_surface: coordinate outside domain");
    if (grid.state(c) != SiteState::Solid) return false;
    const int sub = sublattice_of(c);
    auto probe = [&](const SiteCoord& off) -> bool {
        const SiteCoord n{c.x + off.x, c.y + off.y, c.z + off.z};
        const ResolvedNeighbor r = grid.resolve(n);
        switch (r.kind) {
            case NeighborKind::InDomain:
                return grid.state(r.index) == SiteState::Removed;
            case NeighborKind::Present:
                return false;
            case NeighborKind::Absent:
                if (r.crossed_lateral_exposed) return true;
                if (r.crossed_z_min && open(Face::ZMin, r.folded.x, r.folded.y)) return true;
                if (r.crossed_z_max && open(Face::ZMax, r.folded.x, r.folded.y)) return true;
                return false;
        }
        return false;
    };
    for (const auto& off : first_shell_offsets(sub))
        if (probe(off)) return true;
    for (const auto& off : second_shell_offsets())
        if (probe(off)) return true;
    return false;
}

inline bool is_surface(const LatticeGrid& grid, const SiteCoord& c) {
    return is_surface_when(grid, c, [](Face, int, int) { return true; });
}

// Precomputed per-site-class neighbor arithmetic for the hot stepping loop.
// For a site with local atom id `lid`, entry k gives the flat index delta
// when no cell boundary is crossed plus the data needed to fold when one is.
class NeighborTable {
public:
    struct Entry {
        std::int64_t flat_delta;  // valid when the cell offset stays in range
        SiteCoord offset;         // a/4-unit lattice offset
        std::int8_t dcx, dcy, dcz;
        std::uint8_t nlid;
    };

    NeighborTable(int nx, int ny, int nz);

    // Entries 0..3 first shell, 4..15 second, 16..27 third.
    const std::array<Entry, kShellTotal>& entries(int lid) const { return entries_[lid]; }

private:
    std::array<std::array<Entry, kShellTotal>, 8> entries_{};
};

// Local atom id helpers (8 atoms per conventional cell).
int local_atom_id(int x_mod4, int y_mod4, int z_mod4);  // -1 if not a site
const std::array<SiteCoord, 8>& local_atom_offsets();

}  // namespace etchsim
