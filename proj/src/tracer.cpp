#include "cephalo/tracer.hpp"

#include <atomic>
#include <cmath>
#include <numbers>

#include "cephalo/errors.hpp"
#include "cephalo/parallel.hpp"

namespace cephalo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kGoldenAngle = 2.39996322972865332;  // pi(3 - sqrt5)

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double unit_double(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

// Per-wavelength snapshot of the sphere so the march loop stays free of
// dispersion-model dispatch.
struct SphereAtLambda {
  double radius;
  double n_core;
  double n_outer;
  double n_medium;
  double k;        // n_core/n_outer - 1
  double inv_r2;   // 1/R^2
  double max_steps;

  SphereAtLambda(const GrinSphere& s, double lambda_nm, double ds_mm)
      : radius(s.radius_mm),
        n_core(s.n_core(lambda_nm)),
        n_outer(s.n_outer(lambda_nm)),
        n_medium(s.n_medium(lambda_nm)),
        k(n_core / n_outer - 1.0),
        inv_r2(1.0 / (s.radius_mm * s.radius_mm)),
        max_steps(10.0 * 2.0 * s.radius_mm / ds_mm + 64.0) {
    if (!(n_core > 1.0) || !(n_outer > 1.0))
      throw ConfigError("sphere material index must exceed 1 over the traced wavelengths");
    if (!(n_medium >= 1.0)) throw ConfigError("medium index must be >= 1");
  }

  double index_at_r2(double r2) const { return n_core / (1.0 + k * r2 * inv_r2); }

  Vec3 gradient(const Vec3& p, double r2) const {
    const double c = 1.0 + k * r2 * inv_r2;
    const double scale = -2.0 * n_core * k * inv_r2 / (c * c);
    return p * scale;
  }
};

// First intersection of the line start + t*dir with the sphere |X| = R,
// t > 0. Returns negative when there is none.
double sphere_entry_t(const Vec3& start, const Vec3& dir, double radius) {
  const double b = dot(start, dir);
  const double c = norm2(start) - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return -1.0;
  const double sq = std::sqrt(disc);
  const double t0 = -b - sq;
  if (t0 > 0.0) return t0;
  const double t1 = -b + sq;
  return t1 > 0.0 ? t1 : -1.0;
}

// Marches the ray through the sphere interior from an entry point on the
// surface. `dir` must already be the refracted interior direction.
// On success returns Propagating with the exit point/direction (pre exit
// refraction applied by the caller via refract()).
struct MarchOutcome {
  bool exited;
  Vec3 point;
  Vec3 direction;
};

MarchOutcome march_inside(const SphereAtLambda& s, Vec3 pos, Vec3 dir, double ds) {
  const double r2_limit = s.radius * s.radius;
  // Direction update folds Eq. 6-7 into dir += pos * (B / c):
  //   (1/n) grad(n) ds = -2 k ds / (R^2 c) * pos   with c = 1 + k r^2/R^2.
  const double kir2 = s.k * s.inv_r2;
  const double b_coeff = -2.0 * s.k * s.inv_r2 * ds;
  double r2 = norm2(pos);
  double steps = 0.0;
  while (steps < s.max_steps) {
    const Vec3 next = pos + dir * ds;
    const double next_r2 = norm2(next);
    if (next_r2 >= r2_limit) {
      // Clip the crossing step to the surface by bisection on |X| - R.
      double lo = 0.0, hi = ds;
      while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        if (norm2(pos + dir * mid) >= r2_limit)
          hi = mid;
        else
          lo = mid;
      }
      const double c = 1.0 + kir2 * r2;
      Vec3 exit_point = pos + dir * hi;
      exit_point = exit_point * (s.radius / norm(exit_point));
      const Vec3 exit_dir = normalized(dir + pos * (-2.0 * s.k * s.inv_r2 * hi / c));
      return {true, exit_point, exit_dir};
    }
    const double c = 1.0 + kir2 * r2;
    const Vec3 bent = dir + pos * (b_coeff / c);
    const double inv_len = 1.0 / std::sqrt(norm2(bent));
    dir = bent * inv_len;
    pos = next;
    r2 = next_r2;
    steps += 1.0;
  }
  return {false, pos, dir};  // trapped; caller counts it as escaped
}

}  // namespace

double grin_index(const GrinSphere& sphere, double r_mm, double lambda_nm) {
  if (r_mm < 0.0 || r_mm > sphere.radius_mm)
    throw OutOfSphereError("radius " + std::to_string(r_mm) + " mm outside sphere");
  const double nc = sphere.n_core(lambda_nm);
  const double no = sphere.n_outer(lambda_nm);
  const double rr = r_mm / sphere.radius_mm;
  return nc / (1.0 + (nc / no - 1.0) * rr * rr);
}

Vec3 grin_gradient(const GrinSphere& sphere, const Vec3& position_mm, double lambda_nm) {
  const double r2 = norm2(position_mm);
  if (r2 >= sphere.radius_mm * sphere.radius_mm)
    throw OutOfSphereError("position outside sphere interior");
  const double nc = sphere.n_core(lambda_nm);
  const double no = sphere.n_outer(lambda_nm);
  const double k = nc / no - 1.0;
  const double inv_r2 = 1.0 / (sphere.radius_mm * sphere.radius_mm);
  const double c = 1.0 + k * r2 * inv_r2;
  return position_mm * (-2.0 * nc * k * inv_r2 / (c * c));
}

std::optional<Vec3> refract(const Vec3& e0, const Vec3& normal, double n_from, double n_to) {
  Vec3 n = normal;
  if (dot(e0, n) > 0.0) n = -n;
  const double mu = n_from / n_to;
  const double cos_i = -dot(e0, n);
  const double sin2_r = mu * mu * (1.0 - cos_i * cos_i);
  if (sin2_r > 1.0) return std::nullopt;
  const double cos_r = std::sqrt(1.0 - sin2_r);
  return normalized(e0 * mu + n * (mu * cos_i - cos_r));
}

Ray step_inside(const GrinSphere& sphere, Ray ray, double lambda_nm, double ds_mm) {
  const SphereAtLambda s(sphere, lambda_nm, ds_mm);
  const double r2 = norm2(ray.position);
  const double n_local = s.index_at_r2(r2);
  const Vec3 next = ray.position + ray.direction * ds_mm;
  ray.direction = normalized(ray.direction + s.gradient(ray.position, r2) * (ds_mm / n_local));
  ray.position = next;
  return ray;
}

std::vector<Vec3> emission_directions(const TraceConfig& cfg, double sphere_radius_mm) {
  const double dist = norm(cfg.source_position_mm);
  if (dist <= sphere_radius_mm) throw ConfigError("source position must lie outside the sphere");
  const Vec3 axis = normalized(-cfg.source_position_mm);
  const PupilFrame frame = PupilFrame::around(axis);

  double half = cfg.emission.half_angle_deg * kDegToRad;
  if (!(half > 0.0)) half = std::asin(sphere_radius_mm / dist);

  std::vector<Vec3> dirs;
  if (cfg.emission.kind == EmissionScheme::Kind::FibonacciCone) {
    if (cfg.n_rays == 0) throw ConfigError("n_rays must be positive");
    // Spherical Fibonacci lattice over the cone; the seed shifts the lattice
    // phase in both coordinates so distinct seeds decorrelate.
    std::uint64_t state = cfg.seed;
    const double u0 = unit_double(splitmix64(state));
    const double phi0 = unit_double(splitmix64(state)) * 2.0 * std::numbers::pi;
    const double s_half = std::sin(0.5 * half);
    dirs.reserve(cfg.n_rays);
    const double n = static_cast<double>(cfg.n_rays);
    for (std::size_t i = 0; i < cfg.n_rays; ++i) {
      double u = (static_cast<double>(i) + 0.5) / n + u0;
      u -= std::floor(u);
      const double theta = 2.0 * std::asin(s_half * std::sqrt(u));  // equal solid angle in u
      const double phi = static_cast<double>(i) * kGoldenAngle + phi0;
      const double st = std::sin(theta), ct = std::cos(theta);
      dirs.push_back(frame.axis * ct + (frame.t1 * std::cos(phi) + frame.t2 * std::sin(phi)) * st);
    }
  } else {
    const std::uint32_t n = cfg.emission.n_per_axis;
    if (n < 2) throw ConfigError("uniform grid emission needs n_per_axis >= 2");
    dirs.reserve(static_cast<std::size_t>(n) * n);
    const double half_deg = half / kDegToRad;
    for (std::uint32_t iy = 0; iy < n; ++iy) {
      for (std::uint32_t ix = 0; ix < n; ++ix) {
        const double gx = half_deg * (2.0 * ix / (n - 1.0) - 1.0);
        const double gy = half_deg * (2.0 * iy / (n - 1.0) - 1.0);
        const double alpha = std::hypot(gx, gy);
        if (alpha > half_deg) continue;
        const double a = alpha * kDegToRad;
        const double beta = std::atan2(gy, gx);
        dirs.push_back(frame.axis * std::cos(a) +
                       (frame.t1 * std::cos(beta) + frame.t2 * std::sin(beta)) * std::sin(a));
      }
    }
    if (dirs.empty()) throw ConfigError("uniform grid emission produced no rays");
  }
  return dirs;
}

SingleTraceResult trace_single_ray(const GrinSphere& sphere, const Vec3& start_mm, const Vec3& dir_unit,
                                   double lambda_nm, double ds_mm) {
  const SphereAtLambda s(sphere, lambda_nm, ds_mm);
  SingleTraceResult out{RayStatus::Escaped, {}, {}, {}};

  const double t_entry = sphere_entry_t(start_mm, dir_unit, s.radius);
  if (t_entry < 0.0) return out;
  Vec3 entry = start_mm + dir_unit * t_entry;
  entry = entry * (s.radius / norm(entry));
  out.entry_point = entry;

  const Vec3 outward = entry * (1.0 / s.radius);
  const auto inside_dir = refract(dir_unit, outward, s.n_medium, s.n_outer);
  if (!inside_dir) {
    out.status = RayStatus::TotallyReflected;
    return out;
  }

  const MarchOutcome m = march_inside(s, entry, *inside_dir, ds_mm);
  if (!m.exited) return out;  // Escaped (trapped in the interior)

  const Vec3 exit_outward = m.point * (1.0 / s.radius);
  const auto exit_dir = refract(m.direction, exit_outward, s.n_outer, s.n_medium);
  if (!exit_dir) {
    out.status = RayStatus::TotallyReflected;
    return out;
  }
  out.status = RayStatus::Propagating;
  out.exit_point = m.point;
  out.exit_direction = *exit_dir;
  return out;
}

TraceResult trace_point_source(const GrinSphere& sphere, const PupilMask& mask, const TraceConfig& cfg,
                               double lambda_nm, unsigned threads) {
  if (!(cfg.ds_mm > 0.0)) throw ConfigError("trace step ds must be positive");
  if (cfg.ds_mm > sphere.radius_mm / 100.0)
    throw ConfigError("trace step ds must not exceed R/100");
  const SphereAtLambda s(sphere, lambda_nm, cfg.ds_mm);  // validates indices up front

  const std::vector<Vec3> dirs = emission_directions(cfg, sphere.radius_mm);
  const Vec3 source = cfg.source_position_mm;
  const Vec3 axis = normalized(-source);          // toward the sphere centre
  const Vec3 to_source = normalized(source);      // pupil frame axis

  struct Slot {
    RayStatus status;
    ExitRay exit;
  };
  std::vector<Slot> slots(dirs.size());

  parallel_for_chunks(dirs.size(), resolve_threads(threads), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Slot& slot = slots[i];
      const double t_entry = sphere_entry_t(source, dirs[i], s.radius);
      if (t_entry < 0.0) {
        slot.status = RayStatus::Escaped;
        continue;
      }
      Vec3 entry = source + dirs[i] * t_entry;
      entry = entry * (s.radius / norm(entry));
      if (!mask.transmits(entry * (1.0 / s.radius), to_source)) {
        slot.status = RayStatus::Blocked;
        continue;
      }
      const auto inside_dir = refract(dirs[i], entry * (1.0 / s.radius), s.n_medium, s.n_outer);
      if (!inside_dir) {
        slot.status = RayStatus::TotallyReflected;
        continue;
      }
      const MarchOutcome m = march_inside(s, entry, *inside_dir, cfg.ds_mm);
      if (!m.exited) {
        slot.status = RayStatus::Escaped;
        continue;
      }
      const auto exit_dir = refract(m.direction, m.point * (1.0 / s.radius), s.n_outer, s.n_medium);
      if (!exit_dir) {
        slot.status = RayStatus::TotallyReflected;
        continue;
      }
      if (dot(*exit_dir, axis) <= 0.0) {  // exits back toward the source side
        slot.status = RayStatus::Escaped;
        continue;
      }
      slot.status = RayStatus::Propagating;
      slot.exit = {m.point, *exit_dir};
    }
  });

  TraceResult result;
  result.tallies.emitted = dirs.size();
  for (const Slot& slot : slots) {
    switch (slot.status) {
      case RayStatus::Blocked: ++result.tallies.blocked; break;
      case RayStatus::TotallyReflected: ++result.tallies.totally_reflected; break;
      case RayStatus::Escaped: ++result.tallies.escaped; break;
      default:
        ++result.tallies.exited;
        result.exit_rays.push_back(slot.exit);
        break;
    }
  }
  return result;
}

}  // namespace cephalo
