#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "etchsim/lattice.hpp"

namespace etchsim {

// Conventional-cell occupancy derived from the atomistic state by majority
// vote. Voxel edge length is one lattice constant; bytes are stored
// x-fastest. 0 = empty, 1 = solid, 2 = solid with an etch-stop majority.
struct VoxelVolume {
    int nx = 0;
    int ny = 0;
    int nz = 0;
    double spacing_um = 0.0;
    std::vector<std::uint8_t> occ;

    std::uint8_t at(int x, int y, int z) const {
        return occ[(static_cast<size_t>(z) * ny + y) * nx + x];
    }
    bool solid(int x, int y, int z) const {
        return x >= 0 && x < nx && y >= 0 && y < ny && z >= 0 && z < nz && at(x, y, z) != 0;
    }
    std::int64_t solid_count() const;

    friend bool operator==(const VoxelVolume&, const VoxelVolume&) = default;
};

// A cell stays solid while at least 4 of its 8 atoms remain.
VoxelVolume voxelize(const LatticeGrid& grid);

// Axis-aligned triangle surface over the solid voxels. Vertices live on the
// integer corner grid and scale by unit_um, which keeps volume and area
// arithmetic exact.
struct SurfaceMesh {
    double unit_um = 1.0;
    std::vector<std::array<int, 3>> vertices;
    std::vector<std::array<std::int64_t, 3>> triangles;  // CCW from outside
};

// Boundary faces between solid and empty space, two triangles per unit
// face. Corners shared by topologically distinct solid regions are split
// per 6-connected component of the surrounding 2x2x2 voxel block. The
// result is always closed, consistently oriented and volume-exact; it is
// edge-manifold unless two voxels touch diagonally along an edge while
// also being solidly connected around both of its endpoints (an immersed
// pinch no indexed mesh can represent; etch fronts do not produce it, and
// is_edge_manifold detects it).
SurfaceMesh extract_surface(const VoxelVolume& volume);

// Merges coplanar unit faces into maximal rectangles (greedy, per plane).
// Cuts triangle counts by orders of magnitude on flat dies; the tradeoff
// is T-vertices where merged rectangles of different sizes meet, so run
// manifoldness checks on the unsimplified mesh.
SurfaceMesh simplify(const SurfaceMesh& mesh);

// Six times the enclosed volume, exact integer arithmetic in corner-grid
// units. Outward orientation gives a positive value.
std::int64_t signed_volume_times6(const SurfaceMesh& mesh);

// Twice the total area in corner-grid units (axis-aligned right triangles
// each contribute their doubled area exactly).
std::int64_t area_times2(const SurfaceMesh& mesh);

// True when every undirected edge borders exactly two triangles, once in
// each direction.
bool is_edge_manifold(const SurfaceMesh& mesh);

// Binary STL: 80-byte header, uint32 triangle count, 50 bytes per triangle,
// little-endian. File size is exactly 84 + 50 * triangle_count.
void write_stl(const std::string& path, const SurfaceMesh& mesh);

struct StlTriangle {
    std::array<float, 3> normal;
    std::array<std::array<float, 3>, 3> v;
};
std::vector<StlTriangle> read_stl(const std::string& path);

// Wavefront OBJ with shared vertices.
void write_obj(const std::string& path, const SurfaceMesh& mesh);

// Voxel occupancy container: "SUZV" magic, uint32 version (1), uint32
// nx/ny/nz, float64 spacing_um, then nx*ny*nz occupancy bytes x-fastest.
// Everything little-endian.
void write_suzv(const std::string& path, const VoxelVolume& volume);
VoxelVolume read_suzv(const std::string& path);

}  // namespace etchsim
