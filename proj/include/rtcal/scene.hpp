#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rtcal/geo.hpp"

namespace rtcal {

struct Material {
  std::string name;
  double rel_permittivity = 1.0;      // real part of epsilon_r
  double conductivity_s_per_m = 0.0;  // sigma
};

// ITU-R P.2040 style parameters: eps_r = a * f^b, sigma = c * f^d (f in GHz).
struct ItuMaterialParameters {
  std::string_view name;
  double a, b, c, d;
};

/// Built-in material table.
const std::vector<ItuMaterialParameters>& itu_material_table();

/// Resolves a built-in material at `frequency_hz`; nullopt for unknown names.
std::optional<Material> itu_material(std::string_view name, double frequency_hz);

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

// Vertical prism over a simple polygon. Footprint is stored counter-clockwise.
struct Building {
  std::vector<Point2> footprint;
  double height_m = 0.0;
  Material material;
};

struct Scene {
  ProjectionCenter projection_center;
  std::vector<Building> buildings;
  Material ground_material;
  double frequency_hz = 0.0;
};

// One facade of one building. Outward normal points to the right of a->b.
struct WallSegment {
  Point2 a;
  Point2 b;
  double height_m = 0.0;
  Material material;
  std::size_t building = 0;
  std::size_t edge = 0;
};

void validate(const Material& m);

/// Checks every scene invariant, reorienting clockwise footprints to
/// counter-clockwise. Throws SceneError naming the offending building.
void validate_scene(Scene& scene);

/// Parses the scene JSON document. `source` is used in error messages.
Scene parse_scene(std::string_view json_text, std::string_view source = "<scene>");

Scene load_scene(const std::filesystem::path& path);

std::vector<WallSegment> wall_segments(const Scene& scene);

double signed_area(const std::vector<Point2>& polygon);
bool point_in_polygon(const Point2& p, const std::vector<Point2>& polygon);
bool is_simple_polygon(const std::vector<Point2>& polygon);

/// Index of the building whose solid contains the point, if any.
std::optional<std::size_t> building_containing(const Scene& scene, const LocalPosition& p);

}  // namespace rtcal
