#include "etchsim/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include "etchsim/error.hpp"

namespace etchsim {

namespace {

// Corner offsets of the six voxel faces, wound counterclockwise as seen
// from outside the voxel. Triangulated as (0,1,2) + (0,2,3).
struct FaceTemplate {
    int dx, dy, dz;           // outward direction
    int corner[4][3];
};

constexpr FaceTemplate kFaces[6] = {
    {-1, 0, 0, {{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0}}},
    {+1, 0, 0, {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1}}},
    {0, -1, 0, {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}}},
    {0, +1, 0, {{0, 1, 0}, {0, 1, 1}, {1, 1, 1}, {1, 1, 0}}},
    {0, 0, -1, {{0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}}},
    {0, 0, +1, {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}},
};

void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& data) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw RuntimeError("cannot open '" + tmp + "' for writing");
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size()));
        if (!out) throw RuntimeError("short write to '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw RuntimeError("cannot move '" + tmp + "' into place at '" + path + "'");
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> data(static_cast<size_t>(size));
    in.read(reinterpret_cast<char*>(data.data()), size);
    if (in.gcount() != size) throw ConfigError("cannot read '" + path + "'");
    return data;
}

void put_u16(std::vector<std::uint8_t>& buf, std::uint16_t v) {
    buf.push_back(static_cast<std::uint8_t>(v & 0xff));
    buf.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& buf, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    put_u32(buf, bits);
}

void put_f64(std::vector<std::uint8_t>& buf, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    put_u64(buf, bits);
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

float get_f32(const std::uint8_t* p) {
    const std::uint32_t bits = get_u32(p);
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
}

double get_f64(const std::uint8_t* p) {
    const std::uint64_t bits = get_u64(p);
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
}

}  // namespace

std::int64_t VoxelVolume::solid_count() const {
    std::int64_t n = 0;
    for (std::uint8_t b : occ) n += (b != 0);
    return n;
}

VoxelVolume voxelize(const LatticeGrid& grid) {
    VoxelVolume vol;
    vol.nx = grid.nx();
    vol.ny = grid.ny();
    vol.nz = grid.nz();
    vol.spacing_um = grid.lattice_constant();
    vol.occ.assign(static_cast<size_t>(vol.nx) * vol.ny * vol.nz, 0);

    const std::int64_t cells = static_cast<std::int64_t>(vol.nx) * vol.ny * vol.nz;
    for (std::int64_t cell = 0; cell < cells; ++cell) {
        int solid = 0, stop = 0;
        for (int lid = 0; lid < 8; ++lid) {
            switch (grid.state(cell * 8 + lid)) {
                case SiteState::Solid: ++solid; break;
                case SiteState::EtchStop: ++stop; break;
                case SiteState::Removed: break;
            }
        }
        // Majority vote over the 8 atoms; ties between plain silicon and
        // etch-stop material read as etch stop.
        if (solid + stop >= 4) vol.occ[static_cast<size_t>(cell)] = stop >= solid ? 2 : 1;
    }
    return vol;
}

namespace {

// Connected components of the solid voxels in the 2x2x2 block around a
// corner (6-connectivity, within the block). Returns the smallest block
// slot of the component containing `slot`, or -1 when that voxel is empty.
int corner_component(const VoxelVolume& vol, int cx, int cy, int cz, int slot) {
    std::uint8_t mask = 0;
    for (int k = 0; k < 8; ++k) {
        const int x = cx - 1 + (k & 1);
        const int y = cy - 1 + ((k >> 1) & 1);
        const int z = cz - 1 + ((k >> 2) & 1);
        if (vol.solid(x, y, z)) mask |= static_cast<std::uint8_t>(1u << k);
    }
    if (!(mask & (1u << slot))) return -1;

    // Flood within the block; adjacency = one axis bit flip.
    std::uint8_t comp = static_cast<std::uint8_t>(1u << slot);
    for (;;) {
        std::uint8_t grown = comp;
        for (int k = 0; k < 8; ++k) {
            if (!(comp & (1u << k))) continue;
            for (int bit : {1, 2, 4}) {
                const int nk = k ^ bit;
                if (mask & (1u << nk)) grown |= static_cast<std::uint8_t>(1u << nk);
            }
        }
        if (grown == comp) break;
        comp = grown;
    }
    for (int k = 0; k < 8; ++k)
        if (comp & (1u << k)) return k;
    return slot;
}

}  // namespace

SurfaceMesh extract_surface(const VoxelVolume& vol) {
    SurfaceMesh mesh;
    mesh.unit_um = vol.spacing_um;
    std::unordered_map<std::uint64_t, std::int64_t> vertex_ids;

    auto vertex_at = [&](int x, int y, int z, int vx, int vy, int vz) -> std::int64_t {
        const int slot = (vx - (x - 1)) | ((vy - (y - 1)) << 1) | ((vz - (z - 1)) << 2);
        const int rep = corner_component(vol, x, y, z, slot);
        const std::uint64_t key =
            (((static_cast<std::uint64_t>(x) << 20 | static_cast<std::uint64_t>(y)) << 20 |
              static_cast<std::uint64_t>(z))
             << 3) |
            static_cast<std::uint64_t>(rep);
        const auto [it, inserted] =
            vertex_ids.try_emplace(key, static_cast<std::int64_t>(mesh.vertices.size()));
        if (inserted) mesh.vertices.push_back({x, y, z});
        return it->second;
    };

    for (int z = 0; z < vol.nz; ++z)
        for (int y = 0; y < vol.ny; ++y)
            for (int x = 0; x < vol.nx; ++x) {
                if (!vol.solid(x, y, z)) continue;
                for (const FaceTemplate& f : kFaces) {
                    if (vol.solid(x + f.dx, y + f.dy, z + f.dz)) continue;
                    std::int64_t ids[4];
                    for (int k = 0; k < 4; ++k)
                        ids[k] = vertex_at(x + f.corner[k][0], y + f.corner[k][1],
                                           z + f.corner[k][2], x, y, z);
                    mesh.triangles.push_back({ids[0], ids[1], ids[2]});
                    mesh.triangles.push_back({ids[0], ids[2], ids[3]});
                }
            }
    return mesh;
}

namespace {

struct PlaneKey {
    int axis;   // 0 x, 1 y, 2 z
    int sign;   // +1 or -1 outward
    int coord;  // plane position on `axis`

    bool operator<(const PlaneKey& o) const {
        if (axis != o.axis) return axis < o.axis;
        if (sign != o.sign) return sign < o.sign;
        return coord < o.coord;
    }
};

}  // namespace

SurfaceMesh simplify(const SurfaceMesh& mesh) {
    if (mesh.triangles.size() % 2 != 0)
        throw RuntimeError("simplify: expected the paired-quad layout of extract_surface");

    // Recover the unit quads (the extractor emits (a,b,c) + (a,c,d)
    // back-to-back) and bucket them per oriented plane.
    std::map<PlaneKey, std::set<std::pair<int, int>>> planes;  // (v, u) cells
    for (size_t t = 0; t + 1 < mesh.triangles.size(); t += 2) {
        const auto& t0 = mesh.triangles[t];
        const auto& t1 = mesh.triangles[t + 1];
        if (t0[0] != t1[0] || t0[2] != t1[1])
            throw RuntimeError("simplify: expected the paired-quad layout of extract_surface");
        const std::array<int, 3> q[4] = {mesh.vertices[static_cast<size_t>(t0[0])],
                                         mesh.vertices[static_cast<size_t>(t0[1])],
                                         mesh.vertices[static_cast<size_t>(t0[2])],
                                         mesh.vertices[static_cast<size_t>(t1[2])]};

        int axis = -1;
        for (int a = 0; a < 3; ++a)
            if (q[0][a] == q[1][a] && q[0][a] == q[2][a] && q[0][a] == q[3][a]) axis = a;
        if (axis < 0) throw RuntimeError("simplify: non-axis-aligned quad");

        // Outward sign from the triangle winding.
        const int e1[3] = {q[1][0] - q[0][0], q[1][1] - q[0][1], q[1][2] - q[0][2]};
        const int e2[3] = {q[2][0] - q[1][0], q[2][1] - q[1][1], q[2][2] - q[1][2]};
        const int cross[3] = {e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2],
                              e1[0] * e2[1] - e1[1] * e2[0]};
        const int sign = cross[axis] > 0 ? 1 : -1;

        const int ua = axis == 0 ? 1 : 0;
        const int va = axis == 2 ? 1 : 2;
        int u0 = q[0][ua], v0 = q[0][va], u1 = u0, v1 = v0;
        for (int k = 1; k < 4; ++k) {
            u0 = std::min(u0, q[k][ua]);
            u1 = std::max(u1, q[k][ua]);
            v0 = std::min(v0, q[k][va]);
            v1 = std::max(v1, q[k][va]);
        }
        if (u1 - u0 != 1 || v1 - v0 != 1) throw RuntimeError("simplify: quad is not unit sized");
        planes[{axis, sign, q[0][axis]}].insert({v0, u0});
    }

    SurfaceMesh out;
    out.unit_um = mesh.unit_um;
    std::map<std::array<int, 3>, std::int64_t> vertex_ids;
    auto vertex_at = [&](std::array<int, 3> p) {
        const auto [it, inserted] =
            vertex_ids.try_emplace(p, static_cast<std::int64_t>(out.vertices.size()));
        if (inserted) out.vertices.push_back(p);
        return it->second;
    };

    for (const auto& [key, cells] : planes) {
        std::set<std::pair<int, int>> remaining = cells;
        while (!remaining.empty()) {
            const auto [v0, u0] = *remaining.begin();
            // Grow rightward along u, then downward along v.
            int u1 = u0;
            while (remaining.count({v0, u1 + 1})) ++u1;
            int v1 = v0;
            for (;;) {
                bool full = true;
                for (int u = u0; u <= u1 && full; ++u) full = remaining.count({v1 + 1, u}) != 0;
                if (!full) break;
                ++v1;
            }
            for (int v = v0; v <= v1; ++v)
                for (int u = u0; u <= u1; ++u) remaining.erase({v, u});

            // Rebuild the corner ring for this (axis, sign) the same way
            // the extractor winds its faces.
            auto corner = [&](int u, int v) {
                std::array<int, 3> p{};
                p[static_cast<size_t>(key.axis)] = key.coord;
                p[static_cast<size_t>(key.axis == 0 ? 1 : 0)] = u;
                p[static_cast<size_t>(key.axis == 2 ? 1 : 2)] = v;
                return p;
            };
            const bool pattern_a = (key.axis == 0 && key.sign < 0) ||
                                   (key.axis == 1 && key.sign > 0) ||
                                   (key.axis == 2 && key.sign < 0);
            std::array<int, 3> ring[4];
            if (pattern_a) {
                ring[0] = corner(u0, v0);
                ring[1] = corner(u0, v1 + 1);
                ring[2] = corner(u1 + 1, v1 + 1);
                ring[3] = corner(u1 + 1, v0);
            } else {
                ring[0] = corner(u0, v0);
                ring[1] = corner(u1 + 1, v0);
                ring[2] = corner(u1 + 1, v1 + 1);
                ring[3] = corner(u0, v1 + 1);
            }
            std::int64_t ids[4];
            for (int k = 0; k < 4; ++k) ids[k] = vertex_at(ring[k]);
            out.triangles.push_back({ids[0], ids[1], ids[2]});
            out.triangles.push_back({ids[0], ids[2], ids[3]});
        }
    }
    return out;
}

std::int64_t signed_volume_times6(const SurfaceMesh& mesh) {
    std::int64_t six_vol = 0;
    for (const auto& t : mesh.triangles) {
        const auto& a = mesh.vertices[static_cast<size_t>(t[0])];
        const auto& b = mesh.vertices[static_cast<size_t>(t[1])];
        const auto& c = mesh.vertices[static_cast<size_t>(t[2])];
        const std::int64_t cx = static_cast<std::int64_t>(b[1]) * c[2] -
                                static_cast<std::int64_t>(b[2]) * c[1];
        const std::int64_t cy = static_cast<std::int64_t>(b[2]) * c[0] -
                                static_cast<std::int64_t>(b[0]) * c[2];
        const std::int64_t cz = static_cast<std::int64_t>(b[0]) * c[1] -
                                static_cast<std::int64_t>(b[1]) * c[0];
        six_vol += a[0] * cx + a[1] * cy + a[2] * cz;
    }
    return six_vol;
}

std::int64_t area_times2(const SurfaceMesh& mesh) {
    std::int64_t twice_area = 0;
    for (const auto& t : mesh.triangles) {
        const auto& a = mesh.vertices[static_cast<size_t>(t[0])];
        const auto& b = mesh.vertices[static_cast<size_t>(t[1])];
        const auto& c = mesh.vertices[static_cast<size_t>(t[2])];
        const std::int64_t e1[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
        const std::int64_t e2[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
        // Axis-aligned triangles: the cross product has one nonzero
        // component, whose magnitude is the doubled area.
        twice_area += std::abs(e1[1] * e2[2] - e1[2] * e2[1]) +
                      std::abs(e1[2] * e2[0] - e1[0] * e2[2]) +
                      std::abs(e1[0] * e2[1] - e1[1] * e2[0]);
    }
    return twice_area;
}

bool is_edge_manifold(const SurfaceMesh& mesh) {
    // Every undirected edge must appear exactly twice, once per direction.
    std::unordered_map<std::uint64_t, std::pair<int, int>> edges;  // (count, direction sum)
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            const std::int64_t a = t[static_cast<size_t>(k)];
            const std::int64_t b = t[static_cast<size_t>((k + 1) % 3)];
            if (a == b) return false;
            const std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) |
                                      static_cast<std::uint64_t>(std::max(a, b));
            auto& e = edges[key];
            e.first += 1;
            e.second += a < b ? 1 : -1;
        }
    }
    for (const auto& [key, e] : edges) {
        (void)key;
        if (e.first != 2 || e.second != 0) return false;
    }
    return true;
}

void write_stl(const std::string& path, const SurfaceMesh& mesh) {
    std::vector<std::uint8_t> buf;
    buf.reserve(84 + mesh.triangles.size() * 50);
    const char header_text[] = "binary surface mesh, axis-aligned facets";
    std::uint8_t header[80] = {0};
    std::memcpy(header, header_text, sizeof(header_text) - 1);
    buf.insert(buf.end(), header, header + 80);
    put_u32(buf, static_cast<std::uint32_t>(mesh.triangles.size()));

    for (const auto& t : mesh.triangles) {
        const auto& a = mesh.vertices[static_cast<size_t>(t[0])];
        const auto& b = mesh.vertices[static_cast<size_t>(t[1])];
        const auto& c = mesh.vertices[static_cast<size_t>(t[2])];
        const double e1[3] = {double(b[0] - a[0]), double(b[1] - a[1]), double(b[2] - a[2])};
        const double e2[3] = {double(c[0] - a[0]), double(c[1] - a[1]), double(c[2] - a[2])};
        double n[3] = {e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2],
                       e1[0] * e2[1] - e1[1] * e2[0]};
        const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
        if (len > 0.0)
            for (double& v : n) v /= len;
        for (double v : n) put_f32(buf, static_cast<float>(v));
        for (const auto* vtx : {&a, &b, &c})
            for (int k = 0; k < 3; ++k)
                put_f32(buf, static_cast<float>((*vtx)[static_cast<size_t>(k)] * mesh.unit_um));
        put_u16(buf, 0);
    }
    write_file_atomic(path, buf);
}

std::vector<StlTriangle> read_stl(const std::string& path) {
    const std::vector<std::uint8_t> data = read_file(path);
    if (data.size() < 84) throw ConfigError("read_stl: '" + path + "' is too short");
    const std::uint32_t count = get_u32(data.data() + 80);
    if (data.size() != 84 + static_cast<size_t>(count) * 50)
        throw ConfigError("read_stl: '" + path + "' size does not match its triangle count");
    std::vector<StlTriangle> tris(count);
    const std::uint8_t* p = data.data() + 84;
    for (std::uint32_t i = 0; i < count; ++i, p += 50) {
        for (int k = 0; k < 3; ++k) tris[i].normal[static_cast<size_t>(k)] = get_f32(p + 4 * k);
        for (int v = 0; v < 3; ++v)
            for (int k = 0; k < 3; ++k)
                tris[i].v[static_cast<size_t>(v)][static_cast<size_t>(k)] =
                    get_f32(p + 12 + 12 * v + 4 * k);
    }
    return tris;
}

void write_obj(const std::string& path, const SurfaceMesh& mesh) {
    std::string text = "# axis-aligned surface mesh\n";
    char line[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(line, sizeof line, "v %.10g %.10g %.10g\n", v[0] * mesh.unit_um,
                      v[1] * mesh.unit_um, v[2] * mesh.unit_um);
        text += line;
    }
    for (const auto& t : mesh.triangles) {
        std::snprintf(line, sizeof line, "f %lld %lld %lld\n",
                      static_cast<long long>(t[0] + 1), static_cast<long long>(t[1] + 1),
                      static_cast<long long>(t[2] + 1));
        text += line;
    }
    write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void write_suzv(const std::string& path, const VoxelVolume& vol) {
    if (vol.nx <= 0 || vol.ny <= 0 || vol.nz <= 0)
        throw ConfigError("write_suzv: volume dimensions must be positive");
    if (vol.occ.size() != static_cast<size_t>(vol.nx) * vol.ny * vol.nz)
        throw ConfigError("write_suzv: occupancy size does not match dimensions");
    std::vector<std::uint8_t> buf;
    buf.reserve(28 + vol.occ.size());
    const char magic[4] = {'S', 'U', 'Z', 'V'};
    buf.insert(buf.end(), magic, magic + 4);
    put_u32(buf, 1);  // version
    put_u32(buf, static_cast<std::uint32_t>(vol.nx));
    put_u32(buf, static_cast<std::uint32_t>(vol.ny));
    put_u32(buf, static_cast<std::uint32_t>(vol.nz));
    put_f64(buf, vol.spacing_um);
    buf.insert(buf.end(), vol.occ.begin(), vol.occ.end());
    write_file_atomic(path, buf);
}

VoxelVolume read_suzv(const std::string& path) {
    const std::vector<std::uint8_t> data = read_file(path);
    if (data.size() < 28 || std::memcmp(data.data(), "SUZV", 4) != 0)
        throw ConfigError("read_suzv: '" + path + "' is not a voxel volume file");
    const std::uint32_t version = get_u32(data.data() + 4);
    if (version != 1)
        throw ConfigError("read_suzv: unsupported version " + std::to_string(version));
    VoxelVolume vol;
    vol.nx = static_cast<int>(get_u32(data.data() + 8));
    vol.ny = static_cast<int>(get_u32(data.data() + 12));
    vol.nz = static_cast<int>(get_u32(data.data() + 16));
    vol.spacing_um = get_f64(data.data() + 20);
    if (vol.nx <= 0 || vol.ny <= 0 || vol.nz <= 0 || !(vol.spacing_um > 0.0))
        throw ConfigError("read_suzv: '" + path + "' has an invalid header");
    const size_t expected = static_cast<size_t>(vol.nx) * vol.ny * vol.nz;
    if (data.size() != 28 + expected)
        throw ConfigError("read_suzv: '" + path + "' payload does not match its dimensions");
    vol.occ.assign(data.begin() + 28, data.end());
    return vol;
}

}  // namespace etchsim
