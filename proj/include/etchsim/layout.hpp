#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "etchsim/lattice.hpp"

namespace etchsim {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

// Closed polygon, vertices in order, implicit closing edge. Units: um.
using Polygon = std::vector<Point2>;

// Even-odd containment test; points exactly on an edge count as inside on
// the lower/left side only, which keeps adjacent rectangles from double
// claiming their shared boundary pixels.
bool point_in_polygon(const Polygon& poly, const Point2& p);

// Rotate about `center`, then translate.
Polygon transform(const Polygon& poly, double rotation_deg, Point2 translation, Point2 center);

// Column mask sampled at the lattice column pitch (a/4 per pixel).
// A protected pixel blocks etchant access through the wafer face; an open
// pixel lets it through. The default-constructed bitmap is the absent mask:
// zero size and open everywhere.
class MaskBitmap {
public:
    MaskBitmap() = default;
    MaskBitmap(int width, int height, bool protect_all = false);

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return width_ == 0; }

    bool open(int x, int y) const {
        if (empty()) return true;
        return !is_protected(x, y);
    }
    bool is_protected(int x, int y) const { return bits_[checked_index(x, y)] != 0; }
    void set_protected(int x, int y, bool v) {
        bits_[checked_index(x, y)] = v ? 1 : 0;
    }

    std::int64_t protected_count() const;

    // Row-major, one byte per pixel, 1 = protected. Row r is y == r.
    const std::vector<std::uint8_t>& bytes() const { return bits_; }
    std::vector<std::uint8_t>& bytes() { return bits_; }

    friend bool operator==(const MaskBitmap&, const MaskBitmap&) = default;

private:
    size_t checked_index(int x, int y) const;

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

// Samples the polygons at pixel centers ((x + 0.5) * pixel_um, ...) with the
// even-odd rule; covered pixels become protected. `rotation_deg` spins the
// polygons about the bitmap center first.
MaskBitmap rasterize(const std::vector<Polygon>& polygons_um, int width, int height,
                     double pixel_um, double rotation_deg = 0.0);

// Axis-aligned box in um; sites inside become etch stops.
struct EtchStopBox {
    Point3 min;
    Point3 max;
};

// Mask layout document: protected regions per wafer face plus etch-stop
// volumes, everything in um.
struct Layout {
    double rotation_deg = 0.0;
    std::vector<Polygon> top;
    std::vector<Polygon> bottom;
    std::vector<EtchStopBox> etch_stops;
};

Layout parse_layout(const std::string& json_text);
std::string layout_to_json(const Layout& layout);

// PGM mask images: P5, maxval 255, value >= 128 reads as protected.
MaskBitmap read_pgm(const std::string& path);
void write_pgm(const std::string& path, const MaskBitmap& mask);

// Greedy decomposition of the protected pixels into maximal rectangles,
// returned as um polygons; the exact inverse input for rasterize at the
// same pitch.
std::vector<Polygon> bitmap_to_polygons(const MaskBitmap& mask, double pixel_um);

}  // namespace etchsim
