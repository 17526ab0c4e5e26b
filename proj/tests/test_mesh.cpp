#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>

#include "doctest.h"
#include "etchsim/engine.hpp"
#include "etchsim/error.hpp"
#include "etchsim/mesh.hpp"
#include "etchsim/rng.hpp"
#include "support/reference_ca.hpp"

using namespace etchsim;

namespace {

VoxelVolume make_volume(int nx, int ny, int nz, double spacing = 1.0) {
    VoxelVolume vol;
    vol.nx = nx;
    vol.ny = ny;
    vol.nz = nz;
    vol.spacing_um = spacing;
    vol.occ.assign(static_cast<size_t>(nx) * ny * nz, 0);
    return vol;
}

void set_solid(VoxelVolume& vol, int x, int y, int z, std::uint8_t v = 1) {
    vol.occ[(static_cast<size_t>(z) * vol.ny + y) * vol.nx + x] = v;
}

VoxelVolume random_volume(int nx, int ny, int nz, double fill, std::uint64_t seed) {
    VoxelVolume vol = make_volume(nx, ny, nz);
    for (size_t i = 0; i < vol.occ.size(); ++i)
        if (rng::draw(seed, 0x564f58, static_cast<std::uint64_t>(i)) < fill) vol.occ[i] = 1;
    return vol;
}

}  // namespace

TEST_CASE("single voxel meshes to a closed unit cube") {
    VoxelVolume vol = make_volume(1, 1, 1, 0.5);
    set_solid(vol, 0, 0, 0);
    const SurfaceMesh mesh = extract_surface(vol);

    CHECK(mesh.unit_um == doctest::Approx(0.5));
    CHECK(mesh.vertices.size() == 8);
    CHECK(mesh.triangles.size() == 12);
    CHECK(signed_volume_times6(mesh) == 6);
    CHECK(area_times2(mesh) == 12);
    CHECK(is_edge_manifold(mesh));

    // All 8 corners of the unit cube appear exactly once.
    std::set<std::array<int, 3>> corners(mesh.vertices.begin(), mesh.vertices.end());
    CHECK(corners.size() == 8);
    for (int k = 0; k < 8; ++k)
        CHECK(corners.count({k & 1, (k >> 1) & 1, (k >> 2) & 1}) == 1);
}

TEST_CASE("two stacked voxels: interior face is not emitted") {
    VoxelVolume vol = make_volume(1, 1, 2);
    set_solid(vol, 0, 0, 0);
    set_solid(vol, 0, 0, 1);
    const SurfaceMesh mesh = extract_surface(vol);
    CHECK(mesh.triangles.size() == 20);  // 10 faces of the 1x1x2 box
    CHECK(signed_volume_times6(mesh) == 12);
    CHECK(area_times2(mesh) == 20);
    CHECK(is_edge_manifold(mesh));
}

TEST_CASE("edge-touching voxels get split vertices") {
    // Two voxels sharing only an edge: without vertex splitting the shared
    // corners would each border four faces per direction and the mesh
    // would be non-manifold.
    VoxelVolume vol = make_volume(2, 2, 1);
    set_solid(vol, 0, 0, 0);
    set_solid(vol, 1, 1, 0);
    const SurfaceMesh mesh = extract_surface(vol);
    CHECK(mesh.triangles.size() == 24);
    CHECK(signed_volume_times6(mesh) == 12);
    CHECK(is_edge_manifold(mesh));
    // The two corner points on the shared edge are duplicated, once per
    // solid component.
    int at_shared = 0;
    for (const auto& v : mesh.vertices)
        if (v[0] == 1 && v[1] == 1) ++at_shared;
    CHECK(at_shared == 4);  // (1,1,0) and (1,1,1), twice each
}

TEST_CASE("corner-touching voxels stay manifold too") {
    VoxelVolume vol = make_volume(2, 2, 2);
    set_solid(vol, 0, 0, 0);
    set_solid(vol, 1, 1, 1);
    const SurfaceMesh mesh = extract_surface(vol);
    CHECK(mesh.triangles.size() == 24);
    CHECK(signed_volume_times6(mesh) == 12);
    CHECK(is_edge_manifold(mesh));
}

TEST_CASE("random volumes: exact volume, closed and consistently oriented") {
    for (std::uint64_t seed : {11u, 22u, 33u}) {
        for (double fill : {0.2, 0.5, 0.8}) {
            const VoxelVolume vol = random_volume(6, 5, 4, fill, seed);
            const SurfaceMesh mesh = extract_surface(vol);
            CAPTURE(seed);
            CAPTURE(fill);
            CHECK(signed_volume_times6(mesh) == 6 * vol.solid_count());
            // Arbitrary noise can pinch the surface (see the dedicated
            // pinch case below), but it must stay a closed oriented
            // complex: every undirected edge carries an even face count
            // with directions cancelling.
            std::map<std::pair<std::int64_t, std::int64_t>, std::pair<int, int>> edges;
            for (const auto& t : mesh.triangles)
                for (int k = 0; k < 3; ++k) {
                    const std::int64_t a = t[static_cast<size_t>(k)];
                    const std::int64_t b = t[static_cast<size_t>((k + 1) % 3)];
                    auto& e = edges[{std::min(a, b), std::max(a, b)}];
                    e.first += 1;
                    e.second += a < b ? 1 : -1;
                }
            bool closed = true;
            for (const auto& [key, e] : edges) {
                (void)key;
                if (e.first % 2 != 0 || e.second != 0 || e.first > 4) closed = false;
            }
            CHECK(closed);
            // Closed surface: the boundary integral of any constant vector
            // field vanishes, so the signed face areas cancel per axis.
            std::int64_t flux[3] = {0, 0, 0};
            for (const auto& t : mesh.triangles) {
                const auto& a = mesh.vertices[static_cast<size_t>(t[0])];
                const auto& b = mesh.vertices[static_cast<size_t>(t[1])];
                const auto& c = mesh.vertices[static_cast<size_t>(t[2])];
                const std::int64_t e1[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
                const std::int64_t e2[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
                flux[0] += e1[1] * e2[2] - e1[2] * e2[1];
                flux[1] += e1[2] * e2[0] - e1[0] * e2[2];
                flux[2] += e1[0] * e2[1] - e1[1] * e2[0];
            }
            CHECK(flux[0] == 0);
            CHECK(flux[1] == 0);
            CHECK(flux[2] == 0);
        }
    }
}

TEST_CASE("bridged diagonal contact is the one honest non-manifold case") {
    // Two voxels touching along an edge whose solid regions also connect
    // around both edge endpoints: the surface is an immersed sheet that
    // passes through the edge twice. No vertex assignment can make an
    // indexed mesh edge-manifold there; is_edge_manifold reports it.
    VoxelVolume vol = make_volume(2, 2, 3);
    set_solid(vol, 0, 0, 1);  // the diagonal pair
    set_solid(vol, 1, 1, 1);
    set_solid(vol, 0, 0, 0);  // bridge below...
    set_solid(vol, 1, 0, 0);
    set_solid(vol, 1, 1, 0);
    set_solid(vol, 0, 0, 2);  // ...and above
    set_solid(vol, 1, 0, 2);
    set_solid(vol, 1, 1, 2);
    const SurfaceMesh mesh = extract_surface(vol);
    CHECK(!is_edge_manifold(mesh));
    // The geometric integrals stay exact regardless.
    CHECK(signed_volume_times6(mesh) == 6 * vol.solid_count());

    // Removing either bridge restores a clean manifold.
    set_solid(vol, 0, 0, 2, 0);
    set_solid(vol, 1, 0, 2, 0);
    set_solid(vol, 1, 1, 2, 0);
    const SurfaceMesh fixed = extract_surface(vol);
    CHECK(is_edge_manifold(fixed));
    CHECK(signed_volume_times6(fixed) == 6 * vol.solid_count());
}

TEST_CASE("etch-front volumes mesh to manifolds") {
    // A masked pit etch produces monotone columns, which cannot create the
    // pinched configuration; these are the volumes the exporter serves.
    SimDomain domain;
    domain.nx = domain.ny = 8;
    domain.nz = 6;
    domain.boundary.z_min = FacePolicy::Solid;
    MaskBitmap mask(32, 32, true);
    for (int y = 10; y < 22; ++y)
        for (int x = 10; x < 22; ++x) mask.set_protected(x, y, false);
    domain.top_mask = mask;
    Simulation sim(domain);
    EngineConfig config;
    config.seed = 77;
    config.rules = testing::make_rule_table(1.0, 0.5, 0.02);
    for (int s = 0; s < 10; ++s) sim.step(config);

    const VoxelVolume vol = voxelize(sim.grid());
    CHECK(vol.solid_count() > 0);
    CHECK(vol.solid_count() < 8 * 8 * 6);
    const SurfaceMesh mesh = extract_surface(vol);
    CHECK(signed_volume_times6(mesh) == 6 * vol.solid_count());
    CHECK(is_edge_manifold(mesh));
    const SurfaceMesh slim = simplify(mesh);
    CHECK(signed_volume_times6(slim) == 6 * vol.solid_count());
}

TEST_CASE("simplify merges coplanar faces and preserves the integrals") {
    SUBCASE("flat slab collapses to a handful of rectangles") {
        VoxelVolume vol = make_volume(8, 6, 1);
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 8; ++x) set_solid(vol, x, y, 0);
        const SurfaceMesh full = extract_surface(vol);
        const SurfaceMesh slim = simplify(full);
        CHECK(full.triangles.size() == 2 * (2 * 48 + 2 * 8 + 2 * 6));
        // Top and bottom collapse to one rectangle each; each side wall is
        // one rectangle as well.
        CHECK(slim.triangles.size() == 12);
        CHECK(signed_volume_times6(slim) == signed_volume_times6(full));
        CHECK(area_times2(slim) == area_times2(full));
        CHECK(slim.unit_um == doctest::Approx(full.unit_um));
    }
    SUBCASE("random volumes keep volume and area") {
        for (std::uint64_t seed : {5u, 6u}) {
            const VoxelVolume vol = random_volume(5, 5, 5, 0.5, seed);
            const SurfaceMesh full = extract_surface(vol);
            const SurfaceMesh slim = simplify(full);
            CAPTURE(seed);
            CHECK(slim.triangles.size() <= full.triangles.size());
            CHECK(signed_volume_times6(slim) == signed_volume_times6(full));
            CHECK(area_times2(slim) == area_times2(full));
        }
    }
}

TEST_CASE("voxelize applies the atom-majority rule") {
    // 1x1x1 cell grid: flip atoms one by one and watch the voxel state.
    LatticeGrid grid(1, 1, 1, 0.5431, BoundaryPolicy::standard());
    VoxelVolume vol = voxelize(grid);
    CHECK(vol.nx == 1);
    CHECK(vol.spacing_um == doctest::Approx(0.5431));
    CHECK(vol.at(0, 0, 0) == 1);  // pristine cell is solid

    // Remove 4 of 8: still solid (>= 4 remain). Remove a 5th: empty.
    for (std::int64_t i = 0; i < 4; ++i) grid.set_state(i, SiteState::Removed);
    CHECK(voxelize(grid).at(0, 0, 0) == 1);
    grid.set_state(4, SiteState::Removed);
    CHECK(voxelize(grid).at(0, 0, 0) == 0);

    SUBCASE("etch-stop majority reads as 2") {
        LatticeGrid g2(1, 1, 1, 0.5431, BoundaryPolicy::standard());
        for (std::int64_t i = 0; i < 4; ++i) g2.set_state(i, SiteState::EtchStop);
        CHECK(voxelize(g2).at(0, 0, 0) == 2);  // 4 stop vs 4 solid: tie goes to stop
        g2.set_state(4, SiteState::EtchStop);
        CHECK(voxelize(g2).at(0, 0, 0) == 2);
        g2.set_state(0, SiteState::Solid);
        g2.set_state(1, SiteState::Solid);
        CHECK(voxelize(g2).at(0, 0, 0) == 1);  // 3 stop vs 5 solid
    }
}

TEST_CASE("voxelize tracks a blanket etch layer by layer") {
    SimDomain domain;
    domain.nx = domain.ny = domain.nz = 3;
    domain.boundary.z_min = FacePolicy::Solid;
    Simulation sim(domain);
    EngineConfig config;
    config.rules.set_probability(kP100, 1.0);

    CHECK(voxelize(sim.grid()).solid_count() == 27);
    // After 4 steps one full cell layer (a/4 * 4) is gone; the majority
    // rule drops the top voxel layer at the halfway point.
    for (int s = 0; s < 4; ++s) sim.step(config);
    const VoxelVolume vol = voxelize(sim.grid());
    CHECK(vol.solid_count() == 18);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) {
            CHECK(vol.at(x, y, 2) == 0);
            CHECK(vol.at(x, y, 1) == 1);
        }
}

TEST_CASE("binary STL: exact size, payload round trip") {
    VoxelVolume vol = make_volume(2, 1, 1, 2.0);
    set_solid(vol, 0, 0, 0);
    set_solid(vol, 1, 0, 0);
    const SurfaceMesh mesh = extract_surface(vol);
    const std::string path = "mesh_roundtrip.stl";
    write_stl(path, mesh);

    {
        std::ifstream in(path, std::ios::binary | std::ios::ate);
        REQUIRE(in);
        CHECK(static_cast<size_t>(in.tellg()) == 84 + 50 * mesh.triangles.size());
    }

    const std::vector<StlTriangle> tris = read_stl(path);
    REQUIRE(tris.size() == mesh.triangles.size());
    for (size_t i = 0; i < tris.size(); ++i) {
        const auto& t = mesh.triangles[i];
        for (int v = 0; v < 3; ++v)
            for (int k = 0; k < 3; ++k) {
                const auto& src = mesh.vertices[static_cast<size_t>(t[static_cast<size_t>(v)])];
                CHECK(tris[i].v[static_cast<size_t>(v)][static_cast<size_t>(k)] ==
                      doctest::Approx(src[static_cast<size_t>(k)] * mesh.unit_um));
            }
        // Facet normals are unit axis vectors for axis-aligned geometry.
        float len2 = 0;
        for (float n : tris[i].normal) len2 += n * n;
        CHECK(len2 == doctest::Approx(1.0f));
    }

    SUBCASE("truncated files are rejected") {
        std::ifstream in(path, std::ios::binary);
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out("mesh_truncated.stl", std::ios::binary);
        out.write(data.data(), static_cast<std::streamsize>(data.size() - 7));
        out.close();
        CHECK_THROWS_AS(read_stl("mesh_truncated.stl"), ConfigError);
        CHECK_THROWS_AS(read_stl("mesh_missing.stl"), ConfigError);
    }
}

TEST_CASE("OBJ export lists vertices and 1-based faces") {
    VoxelVolume vol = make_volume(1, 1, 1, 1.0);
    set_solid(vol, 0, 0, 0);
    const SurfaceMesh mesh = extract_surface(vol);
    const std::string path = "mesh_cube.obj";
    write_obj(path, mesh);

    std::ifstream in(path);
    REQUIRE(in);
    int v_lines = 0, f_lines = 0;
    std::string line;
    bool saw_zero_index = false;
    while (std::getline(in, line)) {
        if (line.rfind("v ", 0) == 0) ++v_lines;
        if (line.rfind("f ", 0) == 0) {
            ++f_lines;
            if (line.find(" 0") != std::string::npos) saw_zero_index = true;
        }
    }
    CHECK(v_lines == 8);
    CHECK(f_lines == 12);
    CHECK(!saw_zero_index);
}

TEST_CASE("SUZV container round trip") {
    VoxelVolume vol = make_volume(3, 2, 4, 0.5431);
    set_solid(vol, 0, 0, 0);
    set_solid(vol, 2, 1, 3, 2);
    set_solid(vol, 1, 1, 2);
    const std::string path = "volume_roundtrip.suzv";
    write_suzv(path, vol);

    {
        std::ifstream in(path, std::ios::binary | std::ios::ate);
        REQUIRE(in);
        CHECK(static_cast<size_t>(in.tellg()) == 28 + vol.occ.size());
    }
    const VoxelVolume back = read_suzv(path);
    CHECK(back == vol);

    SUBCASE("minimal 1x1x1 volume is exactly 29 bytes") {
        VoxelVolume tiny = make_volume(1, 1, 1, 1.0);
        set_solid(tiny, 0, 0, 0);
        write_suzv("volume_tiny.suzv", tiny);
        std::ifstream in("volume_tiny.suzv", std::ios::binary | std::ios::ate);
        CHECK(static_cast<size_t>(in.tellg()) == 29);
        CHECK(read_suzv("volume_tiny.suzv") == tiny);
    }
    SUBCASE("byte order is pinned little-endian") {
        std::ifstream in(path, std::ios::binary);
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        CHECK(data.compare(0, 4, "SUZV") == 0);
        CHECK(static_cast<unsigned char>(data[4]) == 1);  // version LSB first
        CHECK(static_cast<unsigned char>(data[5]) == 0);
        CHECK(static_cast<unsigned char>(data[8]) == 3);  // nx
        CHECK(static_cast<unsigned char>(data[12]) == 2);  // ny
        CHECK(static_cast<unsigned char>(data[16]) == 4);  // nz
        // Payload is x-fastest: (0,0,0) first, then (1,0,0)...
        CHECK(static_cast<unsigned char>(data[28]) == 1);
        CHECK(static_cast<unsigned char>(data[29]) == 0);
    }
    SUBCASE("corrupt containers are rejected") {
        std::ifstream in(path, std::ios::binary);
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

        std::string bad_magic = data;
        bad_magic[0] = 'X';
        std::ofstream("volume_badmagic.suzv", std::ios::binary) << bad_magic;
        CHECK_THROWS_AS(read_suzv("volume_badmagic.suzv"), ConfigError);

        std::string bad_version = data;
        bad_version[4] = 9;
        std::ofstream("volume_badver.suzv", std::ios::binary) << bad_version;
        CHECK_THROWS_AS(read_suzv("volume_badver.suzv"), ConfigError);

        std::ofstream("volume_short.suzv", std::ios::binary)
            << data.substr(0, data.size() - 3);
        CHECK_THROWS_AS(read_suzv("volume_short.suzv"), ConfigError);

        CHECK_THROWS_AS(read_suzv("volume_missing.suzv"), ConfigError);
    }
}

TEST_CASE("atomic writers leave no temp file behind") {
    VoxelVolume vol = make_volume(1, 1, 1);
    set_solid(vol, 0, 0, 0);
    write_suzv("volume_atomic.suzv", vol);
    std::ifstream leftover("volume_atomic.suzv.tmp");
    CHECK(!leftover.good());
}
