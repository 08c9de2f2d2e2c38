#pragma once

#include <string_view>

#include "rtcal/geo.hpp"

namespace rtcal::fixtures {

// Street canyon along the x axis with buildings of mixed height, material
// and orientation on both sides. 6.75 GHz.
std::string_view canyon_scene_json();

// Ground-truth link in the canyon and the perturbation applied to obtain
// the "GPS" starting positions.
inline constexpr LocalPosition kCanyonTxTruth{-32.0, -3.0, 4.0};
inline constexpr LocalPosition kCanyonRxTruth{30.0, 4.0, 1.5};
inline constexpr LocalPosition kCanyonTxOffset{3.0, 0.0, 0.0};
inline constexpr LocalPosition kCanyonRxOffset{-2.0, 1.5, 0.0};

inline constexpr LocalPosition offset(const LocalPosition& p, const LocalPosition& d) {
  return {p.x_m + d.x_m, p.y_m + d.y_m, p.z_m + d.z_m};
}

}  // namespace rtcal::fixtures
