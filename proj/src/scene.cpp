#include "rtcal/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "rtcal/error.hpp"

namespace rtcal {
namespace {

using nlohmann::json;

double orient(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

bool on_segment(const Point2& a, const Point2& b, const Point2& p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

// Closed-segment intersection, touching included.
bool segments_intersect(const Point2& p1, const Point2& p2, const Point2& q1, const Point2& q2) {
  const int d1 = sign(orient(q1, q2, p1));
  const int d2 = sign(orient(q1, q2, p2));
  const int d3 = sign(orient(p1, p2, q1));
  const int d4 = sign(orient(p1, p2, q2));
  if (d1 * d2 < 0 && d3 * d4 < 0) return true;
  if (d1 == 0 && on_segment(q1, q2, p1)) return true;
  if (d2 == 0 && on_segment(q1, q2, p2)) return true;
  if (d3 == 0 && on_segment(p1, p2, q1)) return true;
  if (d4 == 0 && on_segment(p1, p2, q2)) return true;
  return false;
}

bool polygons_overlap(const std::vector<Point2>& a, const std::vector<Point2>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Point2& a1 = a[i];
    const Point2& a2 = a[(i + 1) % a.size()];
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (segments_intersect(a1, a2, b[j], b[(j + 1) % b.size()])) return true;
    }
  }
  return point_in_polygon(a.front(), b) || point_in_polygon(b.front(), a);
}

// Tracks the JSON path for error messages.
class Reader {
 public:
  explicit Reader(std::string_view source) : source_(source) {}

  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    std::ostringstream os;
    os << source_ << ": " << path << ": " << msg;
    throw ParseError(os.str());
  }

  const json& member(const json& obj, const std::string& path, const char* key) const {
    if (!obj.is_object()) fail(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(path, std::string("missing field '") + key + "'");
    return *it;
  }

  double number(const json& v, const std::string& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "expected a finite number");
    return d;
  }

  double number_field(const json& obj, const std::string& path, const char* key) const {
    return number(member(obj, path, key), path + "." + key);
  }

 private:
  std::string source_;
};

Material material_from_object(const Reader& rd, const json& obj, const std::string& path,
                              std::string name) {
  Material m;
  m.name = obj.contains("name") && obj["name"].is_string() ? obj["name"].get<std::string>()
                                                           : std::move(name);
  m.rel_permittivity = rd.number_field(obj, path, "eps_r");
  m.conductivity_s_per_m = rd.number_field(obj, path, "sigma");
  return m;
}

Material resolve_material(const Reader& rd, const json& v, const std::string& path,
                          const std::map<std::string, Material>& table, double frequency_hz) {
  if (v.is_object()) return material_from_object(rd, v, path, "custom");
  if (!v.is_string()) rd.fail(path, "expected a material name or an {eps_r, sigma} object");
  const auto name = v.get<std::string>();
  if (auto it = table.find(name); it != table.end()) return it->second;
  if (auto m = itu_material(name, frequency_hz)) return *m;
  rd.fail(path, "unknown material '" + name + "'");
}

std::pair<std::size_t, std::size_t> line_and_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

const std::vector<ItuMaterialParameters>& itu_material_table() {
  static const std::vector<ItuMaterialParameters> table = {
      {"vacuum", 1.0, 0.0, 0.0, 0.0},
      {"concrete", 5.24, 0.0, 0.0462, 0.7822},
      {"brick", 3.91, 0.0, 0.0238, 0.16},
      {"plasterboard", 2.73, 0.0, 0.0085, 0.9395},
      {"wood", 1.99, 0.0, 0.0047, 1.0718},
      {"glass", 6.31, 0.0, 0.0036, 1.3394},
      {"metal", 1.0, 0.0, 1.0e7, 0.0},
      {"very_dry_ground", 3.0, 0.0, 0.00015, 2.52},
      {"medium_dry_ground", 15.0, -0.1, 0.035, 1.63},
      {"wet_ground", 30.0, -0.4, 0.15, 1.30},
  };
  return table;
}

std::optional<Material> itu_material(std::string_view name, double frequency_hz) {
  const double f_ghz = frequency_hz / 1e9;
  for (const auto& row : itu_material_table()) {
    if (row.name == name) {
      return Material{std::string(row.name), row.a * std::pow(f_ghz, row.b),
                      row.c * std::pow(f_ghz, row.d)};
    }
  }
  return std::nullopt;
}

void validate(const Material& m) {
  if (!(m.rel_permittivity >= 1.0) || !std::isfinite(m.rel_permittivity)) {
    throw SceneError("material '" + m.name + "': relative permittivity must be >= 1");
  }
  if (!(m.conductivity_s_per_m >= 0.0) || !std::isfinite(m.conductivity_s_per_m)) {
    throw SceneError("material '" + m.name + "': conductivity must be >= 0");
  }
}

double signed_area(const std::vector<Point2>& polygon) {
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[(i + 1) % polygon.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

bool point_in_polygon(const Point2& p, const std::vector<Point2>& polygon) {
  bool inside = false;
  for (std::size_t i = 0, j = polygon.size() - 1; i < polygon.size(); j = i++) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

bool is_simple_polygon(const std::vector<Point2>& polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (polygon[i] == polygon[(i + 1) % n]) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a1 = polygon[i];
    const Point2& a2 = polygon[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const Point2& b1 = polygon[j];
      const Point2& b2 = polygon[(j + 1) % n];
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (!adjacent) {
        if (segments_intersect(a1, a2, b1, b2)) return false;
        continue;
      }
      // Adjacent edges share one vertex; they must not fold back onto each other.
      const Point2& shared = (j == i + 1) ? a2 : a1;
      const Point2& p = (j == i + 1) ? a1 : a2;
      const Point2& q = (j == i + 1) ? b2 : b1;
      if (orient(p, shared, q) == 0.0) {
        const double dot = (p.x - shared.x) * (q.x - shared.x) + (p.y - shared.y) * (q.y - shared.y);
        if (dot > 0.0) return false;
      }
    }
  }
  return signed_area(polygon) != 0.0;
}

void validate_scene(Scene& scene) {
  validate(scene.projection_center);
  if (!(scene.frequency_hz > 0.0) || !std::isfinite(scene.frequency_hz)) {
    throw SceneError("scene frequency must be > 0 Hz");
  }
  validate(scene.ground_material);
  for (std::size_t i = 0; i < scene.buildings.size(); ++i) {
    Building& b = scene.buildings[i];
    const std::string label = "building " + std::to_string(i);
    for (const auto& v : b.footprint) {
      if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
        throw SceneError(label + ": non-finite footprint vertex");
      }
    }
    if (b.footprint.size() < 3) throw SceneError(label + ": footprint needs at least 3 vertices");
    if (!is_simple_polygon(b.footprint)) {
      throw SceneError(label + ": footprint is not a simple polygon (self-intersecting or degenerate)");
    }
    if (!(b.height_m > 0.0) || !std::isfinite(b.height_m)) {
      throw SceneError(label + ": height must be > 0");
    }
    try {
      validate(b.material);
    } catch (const SceneError& e) {
      throw SceneError(label + ": " + e.what());
    }
    if (signed_area(b.footprint) < 0.0) std::reverse(b.footprint.begin(), b.footprint.end());
  }
  for (std::size_t i = 0; i < scene.buildings.size(); ++i) {
    for (std::size_t j = i + 1; j < scene.buildings.size(); ++j) {
      if (polygons_overlap(scene.buildings[i].footprint, scene.buildings[j].footprint)) {
        throw SceneError("building " + std::to_string(i) + " overlaps building " + std::to_string(j));
      }
    }
  }
}

Scene parse_scene(std::string_view json_text, std::string_view source) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_and_column(json_text, e.byte);
    std::ostringstream os;
    os << source << ":" << line << ":" << col << ": invalid JSON";
    throw ParseError(os.str());
  }

  Reader rd(source);
  Scene scene;
  const json& center = rd.member(doc, "$", "projection_center");
  scene.projection_center.latitude_deg = rd.number_field(center, "projection_center", "lat");
  scene.projection_center.longitude_deg = rd.number_field(center, "projection_center", "lon");
  scene.frequency_hz = rd.number_field(doc, "$", "frequency_hz");

  std::map<std::string, Material> table;
  if (auto it = doc.find("materials"); it != doc.end()) {
    if (!it->is_object()) rd.fail("materials", "expected an object of name -> {eps_r, sigma}");
    for (const auto& [name, value] : it->items()) {
      table[name] = material_from_object(rd, value, "materials." + name, name);
    }
  }

  scene.ground_material = resolve_material(rd, rd.member(doc, "$", "ground_material"),
                                           "ground_material", table, scene.frequency_hz);

  if (auto it = doc.find("buildings"); it != doc.end()) {
    if (!it->is_array()) rd.fail("buildings", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& jb = (*it)[i];
      const std::string path = "buildings[" + std::to_string(i) + "]";
      Building b;
      const json& fp = rd.member(jb, path, "footprint");
      if (!fp.is_array()) rd.fail(path + ".footprint", "expected an array of [x, y]");
      for (std::size_t k = 0; k < fp.size(); ++k) {
        const std::string vpath = path + ".footprint[" + std::to_string(k) + "]";
        if (!fp[k].is_array() || fp[k].size() != 2) rd.fail(vpath, "expected [x, y]");
        b.footprint.push_back({rd.number(fp[k][0], vpath), rd.number(fp[k][1], vpath)});
      }
      b.height_m = rd.number_field(jb, path, "height_m");
      b.material = resolve_material(rd, rd.member(jb, path, "material"), path + ".material", table,
                                    scene.frequency_hz);
      scene.buildings.push_back(std::move(b));
    }
  }

  validate_scene(scene);
  return scene;
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scene file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scene(buf.str(), path.string());
}

std::vector<WallSegment> wall_segments(const Scene& scene) {
  std::vector<WallSegment> walls;
  for (std::size_t i = 0; i < scene.buildings.size(); ++i) {
    const Building& b = scene.buildings[i];
    for (std::size_t e = 0; e < b.footprint.size(); ++e) {
      walls.push_back({b.footprint[e], b.footprint[(e + 1) % b.footprint.size()], b.height_m,
                       b.material, i, e});
    }
  }
  return walls;
}

std::optional<std::size_t> building_containing(const Scene& scene, const LocalPosition& p) {
  for (std::size_t i = 0; i < scene.buildings.size(); ++i) {
    const Building& b = scene.buildings[i];
    if (p.z_m < b.height_m && point_in_polygon({p.x_m, p.y_m}, b.footprint)) return i;
  }
  return std::nullopt;
}

}  // namespace rtcal
