#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "cephalo/dispersion.hpp"
#include "cephalo/pupil.hpp"
#include "cephalo/vec3.hpp"

namespace cephalo {

/// Sphere of radius R centred at the origin with the radial graded-index
/// profile n(r) = n_core / (1 + (n_core/n_outer - 1) r^2/R^2), immersed in a
/// medium of index n_medium. A constant-index ball is the special case
/// n_core == n_outer.
struct GrinSphere {
  double radius_mm;
  DispersionModel n_core;
  DispersionModel n_outer;
  DispersionModel n_medium;
};

double grin_index(const GrinSphere& sphere, double r_mm, double lambda_nm);
Vec3 grin_gradient(const GrinSphere& sphere, const Vec3& position_mm, double lambda_nm);

/// Vector Snell refraction. `normal` may point either way; it is re-oriented
/// against the incoming direction. Returns nullopt on total internal
/// reflection.
std::optional<Vec3> refract(const Vec3& e0, const Vec3& normal, double n_from, double n_to);

enum class RayStatus : std::uint8_t { Propagating, Blocked, TotallyReflected, Escaped, Landed };

struct Ray {
  Vec3 position;
  Vec3 direction;  // unit
  RayStatus status = RayStatus::Propagating;
};

/// One Euler step inside the sphere: X += e ds, then e += (1/n) grad(n) ds with
/// both n and grad(n) evaluated at the pre-step position, then renormalize.
Ray step_inside(const GrinSphere& sphere, Ray ray, double lambda_nm, double ds_mm);

struct EmissionScheme {
  enum class Kind { FibonacciCone, UniformGrid };
  Kind kind = Kind::FibonacciCone;
  // Cone half angle around the source->sphere-centre axis; <= 0 selects the
  // angle subtended by the sphere.
  double half_angle_deg = 0.0;
  std::uint32_t n_per_axis = 0;  // UniformGrid only
};

struct TraceConfig {
  std::size_t n_rays = 0;  // FibonacciCone only; UniformGrid emits per grid
  double ds_mm = 0.0;
  Vec3 source_position_mm;
  EmissionScheme emission;
  std::uint64_t seed = 0;
};

/// Deterministic emission directions for a config; exposed for tests.
std::vector<Vec3> emission_directions(const TraceConfig& cfg, double sphere_radius_mm);

struct ExitRay {
  Vec3 point;      // on the sphere surface, mm
  Vec3 direction;  // unit
};

struct TraceTallies {
  std::size_t emitted = 0;
  std::size_t blocked = 0;
  std::size_t totally_reflected = 0;
  std::size_t escaped = 0;
  std::size_t exited = 0;
};

struct TraceResult {
  std::vector<ExitRay> exit_rays;  // in emission order
  TraceTallies tallies;
};

/// Casts the configured ray fan from the point source through the pupil and
/// the graded-index sphere. Returns rays that exit toward the retina side
/// (positive component along the source->centre axis), in emission order; the
/// result is bit-identical for any worker count.
TraceResult trace_point_source(const GrinSphere& sphere, const PupilMask& mask, const TraceConfig& cfg,
                               double lambda_nm, unsigned threads = 1);

struct SingleTraceResult {
  RayStatus status;  // Propagating = exited
  Vec3 entry_point;
  Vec3 exit_point;
  Vec3 exit_direction;
};

/// Traces one ray from a position outside the sphere (no pupil, no exit-side
/// filter). Used by trace_point_source and directly by tests.
SingleTraceResult trace_single_ray(const GrinSphere& sphere, const Vec3& start_mm, const Vec3& dir_unit,
                                   double lambda_nm, double ds_mm);

}  // namespace cephalo
