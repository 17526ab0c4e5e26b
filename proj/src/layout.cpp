#include "etchsim/layout.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "etchsim/error.hpp"
#include "json.hpp"

namespace etchsim {

bool point_in_polygon(const Polygon& poly, const Point2& p) {
    // Even-odd rule via upward ray casting; the half-open comparison makes
    // the test stable for points on horizontal polygon edges.
    bool inside = false;
    const size_t n = poly.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point2& a = poly[i];
        const Point2& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

Polygon transform(const Polygon& poly, double rotation_deg, Point2 translation, Point2 center) {
    const double rad = rotation_deg * std::acos(-1.0) / 180.0;
    const double c = std::cos(rad);
    const double s = std::sin(rad);
    Polygon out;
    out.reserve(poly.size());
    for (const Point2& p : poly) {
        const double dx = p.x - center.x;
        const double dy = p.y - center.y;
        out.push_back({center.x + c * dx - s * dy + translation.x,
                       center.y + s * dx + c * dy + translation.y});
    }
    return out;
}

MaskBitmap::MaskBitmap(int width, int height, bool protect_all)
    : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw ConfigError("MaskBitmap: dimensions must be positive");
    bits_.assign(static_cast<size_t>(width) * height, protect_all ? 1 : 0);
}

size_t MaskBitmap::checked_index(int x, int y) const {
    if (x < 0 || x >= width_ || y < 0 || y >= height_)
        throw ConfigError("MaskBitmap: pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                          ") outside " + std::to_string(width_) + "x" + std::to_string(height_));
    return static_cast<size_t>(y) * width_ + x;
}

std::int64_t MaskBitmap::protected_count() const {
    std::int64_t n = 0;
    for (std::uint8_t b : bits_) n += b;
    return n;
}

MaskBitmap rasterize(const std::vector<Polygon>& polygons_um, int width, int height,
                     double pixel_um, double rotation_deg) {
    if (!(pixel_um > 0.0)) throw ConfigError("rasterize: pixel size must be positive");
    for (const Polygon& poly : polygons_um)
        if (poly.size() < 3) throw ConfigError("rasterize: polygon needs at least 3 vertices");

    const Point2 center{0.5 * width * pixel_um, 0.5 * height * pixel_um};
    std::vector<Polygon> polys;
    polys.reserve(polygons_um.size());
    for (const Polygon& poly : polygons_um)
        polys.push_back(rotation_deg == 0.0 ? poly
                                            : transform(poly, rotation_deg, {0.0, 0.0}, center));

    MaskBitmap mask(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Point2 p{(x + 0.5) * pixel_um, (y + 0.5) * pixel_um};
            for (const Polygon& poly : polys) {
                if (point_in_polygon(poly, p)) {
                    mask.set_protected(x, y, !mask.is_protected(x, y));  // even-odd across polys
                }
            }
        }
    }
    return mask;
}

namespace {

Polygon parse_polygon(const nlohmann::json& jp) {
    if (!jp.is_array() || jp.size() < 3)
        throw ConfigError("layout: each polygon needs at least 3 [x, y] vertices");
    Polygon poly;
    for (const auto& jv : jp) {
        if (!jv.is_array() || jv.size() != 2 || !jv[0].is_number() || !jv[1].is_number())
            throw ConfigError("layout: polygon vertex must be a numeric pair [x, y]");
        poly.push_back({jv[0].get<double>(), jv[1].get<double>()});
    }
    return poly;
}

Point3 parse_triple(const nlohmann::json& jv, const char* what) {
    if (!jv.is_array() || jv.size() != 3 || !jv[0].is_number() || !jv[1].is_number() ||
        !jv[2].is_number())
        throw ConfigError(std::string("layout: '") + what + "' must be a numeric triple");
    return {jv[0].get<double>(), jv[1].get<double>(), jv[2].get<double>()};
}

}  // namespace

Layout parse_layout(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("layout: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("layout: document must be an object");
    if (!doc.contains("units") || doc["units"] != "um")
        throw ConfigError("layout: field 'units' must be \"um\"");

    Layout layout;
    if (doc.contains("rotation_deg")) {
        if (!doc["rotation_deg"].is_number())
            throw ConfigError("layout: field 'rotation_deg' must be a number");
        layout.rotation_deg = doc["rotation_deg"].get<double>();
    }
    if (doc.contains("layers")) {
        if (!doc["layers"].is_array()) throw ConfigError("layout: field 'layers' must be an array");
        for (const auto& jl : doc["layers"]) {
            if (!jl.is_object() || !jl.contains("name") || !jl["name"].is_string())
                throw ConfigError("layout: each layer needs a string field 'name'");
            const std::string name = jl["name"].get<std::string>();
            std::vector<Polygon>* target = nullptr;
            if (name == "top")
                target = &layout.top;
            else if (name == "bottom")
                target = &layout.bottom;
            else
                throw ConfigError("layout: layer name must be \"top\" or \"bottom\", got \"" +
                                  name + "\"");
            if (!jl.contains("polygons") || !jl["polygons"].is_array())
                throw ConfigError("layout: layer '" + name + "' needs a 'polygons' array");
            for (const auto& jp : jl["polygons"]) target->push_back(parse_polygon(jp));
        }
    }
    if (doc.contains("etch_stops")) {
        if (!doc["etch_stops"].is_array())
            throw ConfigError("layout: field 'etch_stops' must be an array");
        for (const auto& js : doc["etch_stops"]) {
            if (!js.is_object() || !js.contains("min") || !js.contains("max"))
                throw ConfigError("layout: each etch stop needs 'min' and 'max' triples");
            EtchStopBox box{parse_triple(js["min"], "min"), parse_triple(js["max"], "max")};
            if (!(box.min.x < box.max.x && box.min.y < box.max.y && box.min.z < box.max.z))
                throw ConfigError("layout: etch stop 'min' must be strictly below 'max'");
            layout.etch_stops.push_back(box);
        }
    }
    return layout;
}

std::string layout_to_json(const Layout& layout) {
    nlohmann::ordered_json doc;
    doc["units"] = "um";
    doc["rotation_deg"] = layout.rotation_deg;
    doc["layers"] = nlohmann::ordered_json::array();
    auto emit_layer = [&](const char* name, const std::vector<Polygon>& polys) {
        if (polys.empty()) return;
        nlohmann::ordered_json jl;
        jl["name"] = name;
        jl["polygons"] = nlohmann::ordered_json::array();
        for (const Polygon& poly : polys) {
            nlohmann::ordered_json jp = nlohmann::ordered_json::array();
            for (const Point2& p : poly) jp.push_back({p.x, p.y});
            jl["polygons"].push_back(std::move(jp));
        }
        doc["layers"].push_back(std::move(jl));
    };
    emit_layer("top", layout.top);
    emit_layer("bottom", layout.bottom);
    doc["etch_stops"] = nlohmann::ordered_json::array();
    for (const EtchStopBox& box : layout.etch_stops) {
        nlohmann::ordered_json js;
        js["min"] = {box.min.x, box.min.y, box.min.z};
        js["max"] = {box.max.x, box.max.y, box.max.z};
        doc["etch_stops"].push_back(std::move(js));
    }
    return doc.dump(2) + "\n";
}

namespace {

// Consumes PGM whitespace and '#' comment lines.
void skip_pgm_space(std::istream& in) {
    for (;;) {
        const int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

}  // namespace

MaskBitmap read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("read_pgm: cannot open '" + path + "'");
    std::string magic;
    in >> magic;
    if (magic != "P5") throw ConfigError("read_pgm: '" + path + "' is not a binary PGM (P5)");
    skip_pgm_space(in);
    int width = 0, height = 0, maxval = 0;
    in >> width;
    skip_pgm_space(in);
    in >> height;
    skip_pgm_space(in);
    in >> maxval;
    if (!in || width <= 0 || height <= 0 || maxval <= 0 || maxval > 255)
        throw ConfigError("read_pgm: '" + path + "' has an unsupported header");
    in.get();  // single whitespace after maxval
    std::vector<char> raster(static_cast<size_t>(width) * height);
    in.read(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (in.gcount() != static_cast<std::streamsize>(raster.size()))
        throw ConfigError("read_pgm: '" + path + "' is truncated");

    MaskBitmap mask(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const auto v = static_cast<unsigned char>(raster[static_cast<size_t>(y) * width + x]);
            mask.set_protected(x, y, v >= 128);
        }
    return mask;
}

void write_pgm(const std::string& path, const MaskBitmap& mask) {
    if (mask.empty()) throw ConfigError("write_pgm: refusing to write an empty mask");
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw RuntimeError("write_pgm: cannot open '" + tmp + "'");
        out << "P5\n" << mask.width() << " " << mask.height() << "\n255\n";
        std::vector<char> row(static_cast<size_t>(mask.width()));
        for (int y = 0; y < mask.height(); ++y) {
            for (int x = 0; x < mask.width(); ++x)
                row[static_cast<size_t>(x)] = mask.is_protected(x, y) ? char(255) : char(0);
            out.write(row.data(), static_cast<std::streamsize>(row.size()));
        }
        if (!out) throw RuntimeError("write_pgm: short write to '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw RuntimeError("write_pgm: cannot move '" + tmp + "' into place");
}

std::vector<Polygon> bitmap_to_polygons(const MaskBitmap& mask, double pixel_um) {
    if (!(pixel_um > 0.0)) throw ConfigError("bitmap_to_polygons: pixel size must be positive");
    std::vector<Polygon> out;
    if (mask.empty()) return out;

    std::vector<std::uint8_t> covered(static_cast<size_t>(mask.width()) * mask.height(), 0);
    auto is_covered = [&](int x, int y) {
        return covered[static_cast<size_t>(y) * mask.width() + x] != 0;
    };

    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask.is_protected(x, y) || is_covered(x, y)) continue;
            // Grow the run to the right, then extend the strip downward as
            // long as the identical run is protected and uncovered.
            int x1 = x;
            while (x1 + 1 < mask.width() && mask.is_protected(x1 + 1, y) && !is_covered(x1 + 1, y))
                ++x1;
            int y1 = y;
            for (;;) {
                if (y1 + 1 >= mask.height()) break;
                bool row_ok = true;
                for (int xi = x; xi <= x1; ++xi)
                    if (!mask.is_protected(xi, y1 + 1) || is_covered(xi, y1 + 1)) {
                        row_ok = false;
                        break;
                    }
                if (!row_ok) break;
                ++y1;
            }
            for (int yi = y; yi <= y1; ++yi)
                for (int xi = x; xi <= x1; ++xi)
                    covered[static_cast<size_t>(yi) * mask.width() + xi] = 1;

            const double x0u = x * pixel_um, x1u = (x1 + 1) * pixel_um;
            const double y0u = y * pixel_um, y1u = (y1 + 1) * pixel_um;
            out.push_back({{x0u, y0u}, {x1u, y0u}, {x1u, y1u}, {x0u, y1u}});
        }
    }
    return out;
}

}  // namespace etchsim
