#include <algorithm>
#include <cmath>
#include <sstream>

#include "rtcal/error.hpp"
#include "rtcal/raytrace.hpp"

namespace rtcal {
namespace {

constexpr double kEps = 1e-9;

struct Vec3 {
  double x, y, z;
};

Vec3 to_vec(const LocalPosition& p) { return {p.x_m, p.y_m, p.z_m}; }
LocalPosition to_pos(const Vec3& v) { return {v.x, v.y, v.z}; }
Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator*(double s, const Vec3& v) { return {s * v.x, s * v.y, s * v.z}; }
double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

// Wall geometry precomputed for the tracer.
struct Plane {
  Vec3 origin;   // wall start point at z = 0
  Vec3 along;    // b - a (horizontal)
  Vec3 normal;   // unit, outward
  double length_sq;
  double height;
};

Plane wall_plane(const WallSegment& w) {
  const Vec3 along{w.b.x - w.a.x, w.b.y - w.a.y, 0.0};
  const double len = std::hypot(along.x, along.y);
  // Counter-clockwise footprint: exterior lies to the right of a->b.
  return {{w.a.x, w.a.y, 0.0}, along, {along.y / len, -along.x / len, 0.0}, len * len, w.height_m};
}

class Tracer {
 public:
  Tracer(const Scene& scene, const std::vector<WallSegment>& walls, const TraceOptions& options)
      : scene_(scene), walls_(walls), options_(options) {
    planes_.reserve(walls.size());
    for (const auto& w : walls) planes_.push_back(wall_plane(w));
  }

  PathList run(const LocalPosition& tx, const LocalPosition& rx) {
    tx_ = to_vec(tx);
    rx_ = to_vec(rx);
    out_ = PathList{{}, tx, rx, scene_.frequency_hz};

    if (visible(tx_, rx_, -2, -2)) emit({});
    sequence_.clear();
    images_.assign(1, tx_);
    extend(0);

    std::stable_sort(out_.paths.begin(), out_.paths.end(),
                     [](const PathComponent& a, const PathComponent& b) {
                       return a.delay_ns < b.delay_ns;
                     });
    return std::move(out_);
  }

 private:
  // Signed distance of p in front of surface s (outward side positive).
  double side(int s, const Vec3& p) const {
    if (s == kGroundSurface) return p.z;
    const Plane& pl = planes_[static_cast<std::size_t>(s)];
    return dot(p - pl.origin, pl.normal);
  }

  Vec3 mirror(int s, const Vec3& p) const {
    if (s == kGroundSurface) return {p.x, p.y, -p.z};
    const Plane& pl = planes_[static_cast<std::size_t>(s)];
    return p - (2.0 * side(s, p)) * pl.normal;
  }

  void extend(int order) {
    if (order == options_.max_reflections) return;
    const Vec3 source = images_.back();
    const bool used_ground =
        std::find(sequence_.begin(), sequence_.end(), kGroundSurface) != sequence_.end();
    for (int s = kGroundSurface; s < static_cast<int>(planes_.size()); ++s) {
      if (!sequence_.empty() && sequence_.back() == s) continue;
      // Vertical walls never send a ray back down, so one ground bounce at most.
      if (s == kGroundSurface && used_ground) continue;
      if (side(s, source) <= kEps) continue;
      sequence_.push_back(s);
      images_.push_back(mirror(s, source));
      try_sequence();
      extend(order + 1);
      images_.pop_back();
      sequence_.pop_back();
    }
  }

  // Back-tracks reflection points from the receiver through the images.
  void try_sequence() {
    const std::size_t k = sequence_.size();
    std::vector<Vec3> points(k + 2);
    points.front() = tx_;
    points.back() = rx_;
    Vec3 target = rx_;
    for (std::size_t j = k; j >= 1; --j) {
      const int s = sequence_[j - 1];
      const Vec3& image = images_[j];
      const double d_img = side(s, image);
      const double d_tgt = side(s, target);
      if (!(d_img < 0.0 && d_tgt > kEps)) return;
      const double t = d_img / (d_img - d_tgt);
      const Vec3 hit = image + t * (target - image);
      if (!on_surface(s, hit)) return;
      points[j] = hit;
      target = hit;
    }
    for (std::size_t j = 1; j <= k; ++j) {
      if (side(sequence_[j - 1], points[j - 1]) <= kEps) return;
    }
    for (std::size_t j = 0; j <= k; ++j) {
      const int skip_a = j >= 1 ? sequence_[j - 1] : -2;
      const int skip_b = j < k ? sequence_[j] : -2;
      if (!visible(points[j], points[j + 1], skip_a, skip_b)) return;
    }
    emit(points);
  }

  bool on_surface(int s, const Vec3& p) const {
    if (s == kGroundSurface) {
      for (const auto& b : scene_.buildings) {
        if (point_in_polygon({p.x, p.y}, b.footprint)) return false;
      }
      return true;
    }
    const Plane& pl = planes_[static_cast<std::size_t>(s)];
    const double u = dot(p - pl.origin, pl.along) / pl.length_sq;
    return u >= 0.0 && u <= 1.0 && p.z >= 0.0 && p.z <= pl.height;
  }

  // Straight leg a->b against every wall; walls skip_a/skip_b carry the leg's endpoints.
  bool visible(const Vec3& a, const Vec3& b, int skip_a, int skip_b) const {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    for (std::size_t w = 0; w < planes_.size(); ++w) {
      const int id = static_cast<int>(w);
      if (id == skip_a || id == skip_b) continue;
      const Plane& pl = planes_[w];
      const double denom = dx * pl.along.y - dy * pl.along.x;
      if (std::abs(denom) < 1e-15) continue;
      const double ox = pl.origin.x - a.x;
      const double oy = pl.origin.y - a.y;
      const double u = (ox * pl.along.y - oy * pl.along.x) / denom;
      if (u <= kEps || u >= 1.0 - kEps) continue;
      const double v = (ox * dy - oy * dx) / denom;
      if (v < 0.0 || v > 1.0) continue;
      const double z = a.z + u * (b.z - a.z);
      if (z < pl.height) return false;
    }
    return true;
  }

  void emit(const std::vector<Vec3>& points) {
    PathComponent path;
    double length = 0.0;
    double reflection_db = 0.0;
    if (points.empty()) {
      length = norm(rx_ - tx_);
    } else {
      for (std::size_t j = 0; j + 1 < points.size(); ++j) length += norm(points[j + 1] - points[j]);
      for (std::size_t j = 1; j + 1 < points.size(); ++j) {
        const int s = sequence_[j - 1];
        const Vec3 incoming = points[j] - points[j - 1];
        const Vec3 normal = s == kGroundSurface ? Vec3{0.0, 0.0, 1.0}
                                                : planes_[static_cast<std::size_t>(s)].normal;
        const double cos_i = std::clamp(std::abs(dot(incoming, normal)) / norm(incoming), 0.0, 1.0);
        const Material& mat = s == kGroundSurface ? scene_.ground_material
                                                  : walls_[static_cast<std::size_t>(s)].material;
        const auto gamma =
            fresnel_reflection_coeff(mat, scene_.frequency_hz, std::acos(cos_i), options_.polarization);
        reflection_db += 20.0 * std::log10(std::abs(gamma));
        path.interactions.push_back({s == kGroundSurface ? InteractionKind::ground_reflection
                                                         : InteractionKind::wall_reflection,
                                     s, to_pos(points[j])});
      }
    }
    path.delay_ns = length / kSpeedOfLight * 1e9;
    path.power_dbm = kTransmitPowerDbm - free_space_path_loss_db(length, scene_.frequency_hz) + reflection_db;
    if (!(path.power_dbm >= options_.min_power_dbm)) return;
    out_.paths.push_back(std::move(path));
  }

  const Scene& scene_;
  const std::vector<WallSegment>& walls_;
  const TraceOptions& options_;
  std::vector<Plane> planes_;
  Vec3 tx_{}, rx_{};
  std::vector<int> sequence_;
  std::vector<Vec3> images_;
  PathList out_;
};

void check_endpoint(const Scene& scene, const LocalPosition& p, const char* label) {
  if (!std::isfinite(p.x_m) || !std::isfinite(p.y_m) || !std::isfinite(p.z_m)) {
    throw GeometryError(std::string(label) + " position is not finite");
  }
  if (p.z_m < 0.0) throw GeometryError(std::string(label) + " is below ground");
  if (auto b = building_containing(scene, p)) {
    std::ostringstream os;
    os << label << " at (" << p.x_m << ", " << p.y_m << ", " << p.z_m << ") lies inside building "
       << *b;
    throw GeometryError(os.str());
  }
}

}  // namespace

ImageMethodModel::ImageMethodModel(Scene scene, TraceOptions options)
    : scene_(std::move(scene)), options_(options), walls_(wall_segments(scene_)) {
  if (options_.max_reflections < 0 || options_.max_reflections > 3) {
    throw InvalidArgument("max_reflections must lie in [0, 3]");
  }
}

PathList ImageMethodModel::trace(const LocalPosition& tx, const LocalPosition& rx) const {
  check_endpoint(scene_, tx, "TX");
  check_endpoint(scene_, rx, "RX");
  if (distance(tx, rx) == 0.0) throw GeometryError("TX and RX coincide (zero-length path)");
  Tracer tracer(scene_, walls_, options_);
  return tracer.run(tx, rx);
}

PathList trace_image_method(const Scene& scene, const LocalPosition& tx, const LocalPosition& rx,
                            int max_reflections, const TraceOptions& options) {
  TraceOptions opts = options;
  opts.max_reflections = max_reflections;
  return ImageMethodModel(scene, opts).trace(tx, rx);
}

void normalize_path_list(PathList& list) {
  for (std::size_t i = 0; i < list.paths.size(); ++i) {
    const auto& p = list.paths[i];
    if (!std::isfinite(p.delay_ns) || p.delay_ns <= 0.0) {
      throw InvalidArgument("path " + std::to_string(i) + ": delay must be finite and > 0 ns");
    }
    if (!std::isfinite(p.power_dbm) || p.power_dbm > kTransmitPowerDbm) {
      throw InvalidArgument("path " + std::to_string(i) +
                            ": power must be finite and not exceed the transmit power");
    }
  }
  std::stable_sort(list.paths.begin(), list.paths.end(),
                   [](const PathComponent& a, const PathComponent& b) { return a.delay_ns < b.delay_ns; });
}

}  // namespace rtcal
