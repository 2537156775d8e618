#include "cephalo/pupil.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "cephalo/errors.hpp"

namespace cephalo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kGoldenAngle = std::numbers::pi * (3.0 - 2.2360679774997896964091736687747);  // pi(3-sqrt5)

double point_segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double abx = bx - ax, aby = by - ay;
  const double ab2 = abx * abx + aby * aby;
  double t = 0.0;
  if (ab2 > 0.0) t = std::clamp(((px - ax) * abx + (py - ay) * aby) / ab2, 0.0, 1.0);
  const double dx = px - (ax + t * abx), dy = py - (ay + t * aby);
  return std::hypot(dx, dy);
}

}  // namespace

PupilFrame PupilFrame::around(const Vec3& axis_unit) {
  const Vec3 helper = std::abs(axis_unit.z) < 0.9 ? Vec3{0.0, 0.0, 1.0} : Vec3{1.0, 0.0, 0.0};
  const Vec3 t1 = normalized(cross(helper, axis_unit));
  const Vec3 t2 = cross(axis_unit, t1);
  return {axis_unit, t1, t2};
}

PupilMask PupilMask::full_aperture() { return PupilMask(FullAperture{}); }

PupilMask PupilMask::circular_hole(double half_angle_deg, const Vec3& center_axis) {
  if (!(half_angle_deg > 0.0)) throw ConfigError("circular hole half angle must be positive");
  return PupilMask(CircularHole{half_angle_deg, normalized(center_axis)});
}

PupilMask PupilMask::annulus(double inner_half_angle_deg, double outer_half_angle_deg) {
  if (!(inner_half_angle_deg >= 0.0) || !(outer_half_angle_deg > inner_half_angle_deg))
    throw ConfigError("annulus needs 0 <= inner < outer half angle");
  return PupilMask(Annulus{inner_half_angle_deg, outer_half_angle_deg});
}

PupilMask PupilMask::off_axis_slit(double width_angle_deg, double offset_angle_deg,
                                   double orientation_deg) {
  if (!(width_angle_deg > 0.0)) throw ConfigError("slit width angle must be positive");
  return PupilMask(OffAxisSlit{width_angle_deg, offset_angle_deg, orientation_deg});
}

PupilMask PupilMask::polyline_band(std::vector<std::array<double, 2>> vertices_az_polar_deg,
                                   double band_width_deg) {
  if (vertices_az_polar_deg.size() < 2) throw ConfigError("polyline band needs at least two vertices");
  if (!(band_width_deg > 0.0)) throw ConfigError("band width must be positive");
  return PupilMask(PolylineBand{std::move(vertices_az_polar_deg), band_width_deg});
}

bool PupilMask::transmits(const Vec3& entry_point_unit, const Vec3& source_axis_unit) const {
  const PupilFrame frame = PupilFrame::around(source_axis_unit);
  const double cz = dot(entry_point_unit, frame.axis);
  const double polar_deg = std::acos(std::clamp(cz, -1.0, 1.0)) / kDegToRad;

  return std::visit(
      [&](const auto& s) -> bool {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FullAperture>) {
          return true;
        } else if constexpr (std::is_same_v<T, CircularHole>) {
          const Vec3 center = frame.t1 * s.center_axis.x + frame.t2 * s.center_axis.y +
                              frame.axis * s.center_axis.z;
          const double c = dot(entry_point_unit, center);
          return std::acos(std::clamp(c, -1.0, 1.0)) <= s.half_angle_deg * kDegToRad;
        } else if constexpr (std::is_same_v<T, Annulus>) {
          return polar_deg >= s.inner_half_angle_deg && polar_deg <= s.outer_half_angle_deg;
        } else {
          const double az = std::atan2(dot(entry_point_unit, frame.t2), dot(entry_point_unit, frame.t1));
          const double px = polar_deg * std::cos(az);
          const double py = polar_deg * std::sin(az);
          if constexpr (std::is_same_v<T, OffAxisSlit>) {
            const double o = s.orientation_deg * kDegToRad;
            const double v = -px * std::sin(o) + py * std::cos(o);
            return std::abs(v - s.offset_angle_deg) <= s.width_angle_deg / 2.0;
          } else {
            double best = 1e300;
            for (std::size_t i = 0; i + 1 < s.vertices_az_polar_deg.size(); ++i) {
              const auto& a = s.vertices_az_polar_deg[i];
              const auto& b = s.vertices_az_polar_deg[i + 1];
              const double ar = a[0] * kDegToRad, br = b[0] * kDegToRad;
              best = std::min(best, point_segment_distance(px, py, a[1] * std::cos(ar), a[1] * std::sin(ar),
                                                           b[1] * std::cos(br), b[1] * std::sin(br)));
            }
            return best <= s.band_width_deg / 2.0;
          }
        }
      },
      shape_);
}

double PupilMask::open_fraction(std::size_t n_samples) const {
  if (n_samples < 1000) throw ConfigError("open_fraction needs at least 1000 samples");
  const Vec3 axis{0.0, 0.0, 1.0};
  std::size_t open = 0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    // Equal-area samples over the front hemisphere.
    const double z = 1.0 - (static_cast<double>(i) + 0.5) / static_cast<double>(n_samples);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = kGoldenAngle * static_cast<double>(i);
    const Vec3 p{r * std::cos(phi), r * std::sin(phi), z};
    if (transmits(p, axis)) ++open;
  }
  return static_cast<double>(open) / static_cast<double>(n_samples);
}

std::string PupilMask::describe() const {
  std::ostringstream os;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FullAperture>) {
          os << "full_aperture";
        } else if constexpr (std::is_same_v<T, CircularHole>) {
          os << "circular_hole(half_angle=" << s.half_angle_deg << "deg)";
        } else if constexpr (std::is_same_v<T, Annulus>) {
          os << "annulus(" << s.inner_half_angle_deg << "deg," << s.outer_half_angle_deg << "deg)";
        } else if constexpr (std::is_same_v<T, OffAxisSlit>) {
          os << "off_axis_slit(width=" << s.width_angle_deg << "deg,offset=" << s.offset_angle_deg
             << "deg,orientation=" << s.orientation_deg << "deg)";
        } else {
          os << "polyline_band(" << s.vertices_az_polar_deg.size() << " vertices,width="
             << s.band_width_deg << "deg)";
        }
      },
      shape_);
  return os.str();
}

}  // namespace cephalo
