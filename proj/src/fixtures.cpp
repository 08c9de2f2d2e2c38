#include "rtcal/fixtures.hpp"

namespace rtcal::fixtures {

std::string_view canyon_scene_json() {
  return R"({
  "projection_center": {"lat": 40.6940, "lon": -73.9866},
  "frequency_hz": 6.75e9,
  "ground_material": "medium_dry_ground",
  "materials": {
    "tinted_glass": {"eps_r": 6.5, "sigma": 0.05}
  },
  "buildings": [
    {"footprint": [[-90, 12], [-22, 12], [-22, 34], [-90, 34]], "height_m": 18, "material": "concrete"},
    {"footprint": [[-17, 13], [21, 11], [22, 33], [-16, 35]], "height_m": 26, "material": "brick"},
    {"footprint": [[27, 14], [90, 14], [90, 36], [27, 36]], "height_m": 12, "material": "tinted_glass"},
    {"footprint": [[-90, -34], [-41, -34], [-41, -11], [-90, -11]], "height_m": 15, "material": "concrete"},
    {"footprint": [[-36, -34], [6, -34], [6, -12], [-36, -12]], "height_m": 30, "material": "metal"},
    {"footprint": [[11, -31], [90, -31], [90, -13], [11, -15]], "height_m": 9, "material": "wood"},
    {"footprint": [[96, -40], [120, -40], [120, 40], [96, 40]], "height_m": 20, "material": "glass"},
    {"footprint": [[58, -7], [63, -7], [63, -2], [58, -2]], "height_m": 5, "material": "plasterboard"}
  ]
}
)";
}

}  // namespace rtcal::fixtures
