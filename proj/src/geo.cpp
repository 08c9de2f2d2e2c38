#include "rtcal/geo.hpp"

#include <algorithm>
#include <numbers>
#include <sstream>

#include "rtcal/error.hpp"

namespace rtcal {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

void check_lat_lon(double lat, double lon, const char* what) {
  if (!std::isfinite(lat) || lat < -90.0 || lat > 90.0) {
    std::ostringstream os;
    os << what << ": latitude " << lat << " outside [-90, 90]";
    throw InvalidArgument(os.str());
  }
  if (!std::isfinite(lon) || lon < -180.0 || lon > 180.0) {
    std::ostringstream os;
    os << what << ": longitude " << lon << " outside [-180, 180]";
    throw InvalidArgument(os.str());
  }
}

double wrap_longitude(double lon_deg) {
  double wrapped = std::remainder(lon_deg, 360.0);
  if (wrapped == -180.0) wrapped = 180.0;
  return wrapped;
}

}  // namespace

void validate(const GeoPosition& p) {
  check_lat_lon(p.latitude_deg, p.longitude_deg, "geographic position");
  if (!std::isfinite(p.antenna_height_m) || p.antenna_height_m <= 0.0) {
    std::ostringstream os;
    os << "geographic position: antenna height " << p.antenna_height_m << " m must be > 0";
    throw InvalidArgument(os.str());
  }
}

void validate(const ProjectionCenter& c) {
  check_lat_lon(c.latitude_deg, c.longitude_deg, "projection center");
}

double great_circle_distance_m(double lat1_deg, double lon1_deg, double lat2_deg, double lon2_deg) {
  const double phi1 = lat1_deg * kDegToRad;
  const double phi2 = lat2_deg * kDegToRad;
  const double dphi = phi2 - phi1;
  const double dlambda = (lon2_deg - lon1_deg) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

double forward_azimuth_rad(double lat1_deg, double lon1_deg, double lat2_deg, double lon2_deg) {
  const double phi1 = lat1_deg * kDegToRad;
  const double phi2 = lat2_deg * kDegToRad;
  const double dlambda = (lon2_deg - lon1_deg) * kDegToRad;
  return std::atan2(std::sin(dlambda) * std::cos(phi2),
                    std::cos(phi1) * std::sin(phi2) -
                        std::sin(phi1) * std::cos(phi2) * std::cos(dlambda));
}

LocalPosition project_to_local(const GeoPosition& p, const ProjectionCenter& center) {
  validate(p);
  validate(center);
  const double rho = great_circle_distance_m(center.latitude_deg, center.longitude_deg,
                                             p.latitude_deg, p.longitude_deg);
  if (rho >= kProjectionValidityRadiusM) {
    std::ostringstream os;
    os << "point is " << rho << " m from the projection center; limit is "
       << kProjectionValidityRadiusM << " m";
    throw InvalidArgument(os.str());
  }
  if (rho == 0.0) return {0.0, 0.0, p.antenna_height_m};
  const double az = forward_azimuth_rad(center.latitude_deg, center.longitude_deg,
                                        p.latitude_deg, p.longitude_deg);
  return {rho * std::sin(az), rho * std::cos(az), p.antenna_height_m};
}

GeoPosition unproject_to_geo(const LocalPosition& p, const ProjectionCenter& center) {
  if (!std::isfinite(p.x_m) || !std::isfinite(p.y_m) || !std::isfinite(p.z_m)) {
    throw InvalidArgument("local position has non-finite coordinates");
  }
  validate(center);
  const double rho = std::hypot(p.x_m, p.y_m);
  if (rho == 0.0) return {center.latitude_deg, center.longitude_deg, p.z_m};

  const double c = rho / kEarthRadiusM;
  const double az = std::atan2(p.x_m, p.y_m);
  const double phi0 = center.latitude_deg * kDegToRad;
  const double sin_phi = std::sin(phi0) * std::cos(c) + std::cos(phi0) * std::sin(c) * std::cos(az);
  const double phi = std::asin(std::clamp(sin_phi, -1.0, 1.0));
  const double dlambda = std::atan2(std::sin(az) * std::sin(c) * std::cos(phi0),
                                    std::cos(c) - std::sin(phi0) * sin_phi);
  return {phi * kRadToDeg, wrap_longitude(center.longitude_deg + dlambda * kRadToDeg), p.z_m};
}

}  // namespace rtcal
