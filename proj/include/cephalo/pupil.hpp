#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "cephalo/vec3.hpp"

namespace cephalo {

// Orthonormal frame with z along `axis`; the tangent pair is a deterministic
// function of the axis so pupil azimuths are reproducible.
struct PupilFrame {
  Vec3 axis, t1, t2;
  static PupilFrame around(const Vec3& axis_unit);
};

/// Binary transmission mask evaluated at the ray's entry point on the sphere
/// surface, in the pupil frame aligned to the source axis. Angles in degrees.
///
/// Off-axis shapes (slit, polyline band) live in azimuthal-equidistant pupil
/// coordinates (polar*cos(az), polar*sin(az)); distances in that projection
/// approximate angular distances, which is exact through the pupil centre and
/// slightly compressed toward the rim.
class PupilMask {
public:
  struct FullAperture {};
  struct CircularHole {
    double half_angle_deg;
    Vec3 center_axis;  // in the pupil frame; {0,0,1} puts the hole on axis
  };
  struct Annulus {
    double inner_half_angle_deg;
    double outer_half_angle_deg;
  };
  struct OffAxisSlit {
    double width_angle_deg;
    double offset_angle_deg;
    double orientation_deg;
  };
  struct PolylineBand {
    std::vector<std::array<double, 2>> vertices_az_polar_deg;
    double band_width_deg;
  };

  static PupilMask full_aperture();
  static PupilMask circular_hole(double half_angle_deg, const Vec3& center_axis = {0.0, 0.0, 1.0});
  static PupilMask annulus(double inner_half_angle_deg, double outer_half_angle_deg);
  static PupilMask off_axis_slit(double width_angle_deg, double offset_angle_deg,
                                 double orientation_deg);
  static PupilMask polyline_band(std::vector<std::array<double, 2>> vertices_az_polar_deg,
                                 double band_width_deg);

  /// True iff the entry point (unit vector from the sphere centre) is inside
  /// the open region. `source_axis` is the unit vector from the sphere centre
  /// toward the source.
  bool transmits(const Vec3& entry_point_unit, const Vec3& source_axis_unit) const;

  /// Monte-Carlo estimate of the transmitted solid-angle fraction of the
  /// source-facing hemisphere. Uses a fixed spherical Fibonacci sequence, so
  /// the estimate is deterministic.
  double open_fraction(std::size_t n_samples) const;

  std::string describe() const;

private:
  using Shape = std::variant<FullAperture, CircularHole, Annulus, OffAxisSlit, PolylineBand>;
  explicit PupilMask(Shape shape) : shape_(std::move(shape)) {}
  Shape shape_;
};

}  // namespace cephalo
