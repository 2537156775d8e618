#include "cephalo/retina.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>

#include "cephalo/errors.hpp"
#include "cephalo/parallel.hpp"

namespace cephalo {

namespace {

constexpr char kStackMagic[8] = {'C', 'P', 'H', 'S', 'T', 'K', '0', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

void require_strictly_increasing(std::span<const double> values, const char* what) {
  if (values.empty()) throw ConfigError(std::string(what) + " list must not be empty");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i] > values[i - 1]))
      throw ConfigError(std::string(what) + " list must be strictly increasing");
}

}  // namespace

std::size_t IntensityStack::lambda_index(double lambda_nm) const {
  for (std::size_t i = 0; i < wavelengths_nm.size(); ++i)
    if (wavelengths_nm[i] == lambda_nm) return i;
  throw WavelengthNotInStackError("wavelength " + std::to_string(lambda_nm) + " nm not in stack");
}

IntensityPlane accumulate(std::span<const ExitRay> exit_rays, const RetinaGeometry& geometry,
                          double retina_distance_mm) {
  if (geometry.n_theta < 8 || geometry.n_phi < 8) throw ConfigError("retina grid must be at least 8x8");
  if (!(retina_distance_mm > 0.0)) throw ConfigError("retina distance must be positive");

  IntensityPlane plane;
  plane.counts.assign(static_cast<std::size_t>(geometry.n_theta) * geometry.n_phi, 0u);
  const double max_polar = geometry.max_polar_deg * std::numbers::pi / 180.0;
  const double r2 = retina_distance_mm * retina_distance_mm;
  const double two_pi = 2.0 * std::numbers::pi;

  for (const ExitRay& ray : exit_rays) {
    // First crossing of |P + t e| = R_retina; the exit point lies inside, so
    // there is exactly one positive root.
    const double b = dot(ray.point, ray.direction);
    const double c = norm2(ray.point) - r2;
    const double t = -b + std::sqrt(b * b - c);
    const Vec3 hit = ray.point + ray.direction * t;
    const double theta = std::acos(std::clamp(hit.z / retina_distance_mm, -1.0, 1.0));
    if (theta > max_polar) {
      ++plane.missed;
      continue;
    }
    double phi = std::atan2(hit.y, hit.x);
    if (phi < 0.0) phi += two_pi;
    std::uint32_t it = static_cast<std::uint32_t>(theta / max_polar * geometry.n_theta);
    if (it >= geometry.n_theta) it = geometry.n_theta - 1;
    std::uint32_t ip = static_cast<std::uint32_t>(phi / two_pi * geometry.n_phi);
    if (ip >= geometry.n_phi) ip = geometry.n_phi - 1;
    ++plane.counts[static_cast<std::size_t>(it) * geometry.n_phi + ip];
  }
  return plane;
}

IntensityStack sweep(const GrinSphere& sphere, const PupilMask& mask, const TraceConfig& cfg,
                     const RetinaGeometry& geometry, std::vector<double> wavelengths_nm,
                     std::vector<double> distances_mm, unsigned threads) {
  require_strictly_increasing(wavelengths_nm, "wavelength");
  require_strictly_increasing(distances_mm, "distance");
  if (!(distances_mm.front() > sphere.radius_mm))
    throw ConfigError("retina distances must lie behind the lens (greater than the sphere radius)");

  IntensityStack stack;
  stack.geometry = geometry;
  stack.wavelengths_nm = std::move(wavelengths_nm);
  stack.distances_mm = std::move(distances_mm);
  stack.planes.resize(stack.wavelengths_nm.size() * stack.distances_mm.size());

  nlohmann::json tallies_json = nlohmann::json::array();
  const unsigned workers = resolve_threads(threads);

  for (std::size_t il = 0; il < stack.wavelengths_nm.size(); ++il) {
    const TraceResult traced =
        trace_point_source(sphere, mask, cfg, stack.wavelengths_nm[il], workers);
    parallel_for_chunks(stack.distances_mm.size(), workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t id = begin; id < end; ++id) {
        stack.planes[stack.plane_index(il, id)] =
            accumulate(traced.exit_rays, geometry, stack.distances_mm[id]);
      }
    });
    tallies_json.push_back({{"lambda_nm", stack.wavelengths_nm[il]},
                            {"emitted", traced.tallies.emitted},
                            {"blocked", traced.tallies.blocked},
                            {"totally_reflected", traced.tallies.totally_reflected},
                            {"escaped", traced.tallies.escaped},
                            {"exited", traced.tallies.exited}});
  }

  nlohmann::json missed = nlohmann::json::array();
  for (const IntensityPlane& p : stack.planes) missed.push_back(p.missed);
  stack.metadata = {
      {"sphere",
       {{"radius_mm", sphere.radius_mm},
        {"core", sphere.n_core.kind()},
        {"outer", sphere.n_outer.kind()},
        {"medium", sphere.n_medium.kind()}}},
      {"pupil", mask.describe()},
      {"trace",
       {{"n_rays", cfg.n_rays},
        {"ds_mm", cfg.ds_mm},
        {"source_position_mm", {cfg.source_position_mm.x, cfg.source_position_mm.y, cfg.source_position_mm.z}},
        {"emission",
         cfg.emission.kind == EmissionScheme::Kind::FibonacciCone ? "fibonacci_cone" : "uniform_grid"},
        {"emission_half_angle_deg", cfg.emission.half_angle_deg},
        {"seed", cfg.seed}}},
      {"ray_tallies", tallies_json},
      {"missed_per_plane", missed},
      {"retina", {{"n_theta", geometry.n_theta}, {"n_phi", geometry.n_phi}, {"max_polar_deg", geometry.max_polar_deg}}}};
  return stack;
}

IntensityStack merge_stacks(std::span<const IntensityStack> stacks) {
  if (stacks.empty()) throw ConfigError("merge_stacks needs at least one stack");
  IntensityStack out = stacks.front();
  for (std::size_t i = 1; i < stacks.size(); ++i) {
    const IntensityStack& s = stacks[i];
    if (s.distances_mm != out.distances_mm || s.geometry.n_theta != out.geometry.n_theta ||
        s.geometry.n_phi != out.geometry.n_phi || s.geometry.max_polar_deg != out.geometry.max_polar_deg)
      throw ConfigError("merge_stacks requires identical retina geometry and distances");
    if (!(s.wavelengths_nm.front() > out.wavelengths_nm.back()))
      throw ConfigError("merge_stacks requires strictly increasing wavelengths across stacks");
    out.wavelengths_nm.insert(out.wavelengths_nm.end(), s.wavelengths_nm.begin(), s.wavelengths_nm.end());
    out.planes.insert(out.planes.end(), s.planes.begin(), s.planes.end());
  }
  out.metadata = {{"merged_from", stacks.size()}};
  for (const IntensityStack& s : stacks) out.metadata["sources"].push_back(s.metadata);
  return out;
}

std::vector<PeakSample> peak_profile(const IntensityStack& stack, double lambda_nm, bool normalized) {
  const std::size_t il = stack.lambda_index(lambda_nm);
  std::vector<PeakSample> profile;
  profile.reserve(stack.distances_mm.size());
  double max_peak = 0.0;
  for (std::size_t id = 0; id < stack.distances_mm.size(); ++id) {
    const IntensityPlane& p = stack.plane(il, id);
    std::uint32_t peak = 0;
    std::uint64_t total = 0;
    for (const std::uint32_t v : p.counts) {
      peak = std::max(peak, v);
      total += v;
    }
    max_peak = std::max(max_peak, static_cast<double>(peak));
    profile.push_back({stack.distances_mm[id], static_cast<double>(peak), total});
  }
  if (normalized && max_peak > 0.0)
    for (PeakSample& s : profile) s.peak /= max_peak;
  return profile;
}

GradientMap radial_log_gradient(const IntensityStack& stack, std::span<const double> weights, double eps,
                                std::optional<std::pair<double, double>> azimuth_slice_deg) {
  if (stack.distances_mm.size() < 2)
    throw InsufficientDistancesError("radial_log_gradient needs at least two distances");
  if (weights.size() != stack.wavelengths_nm.size())
    throw ConfigError("composite weights must match the stack wavelength count");

  const std::uint32_t n_theta = stack.geometry.n_theta;
  const std::uint32_t n_phi = stack.geometry.n_phi;

  std::uint32_t phi_begin = 0, phi_end = n_phi;
  if (azimuth_slice_deg) {
    const double lo = azimuth_slice_deg->first, hi = azimuth_slice_deg->second;
    if (!(hi > lo) || lo < 0.0 || hi > 360.0) throw ConfigError("azimuth slice must satisfy 0 <= lo < hi <= 360");
    phi_begin = static_cast<std::uint32_t>(lo / 360.0 * n_phi);
    phi_end = std::max<std::uint32_t>(phi_begin + 1, static_cast<std::uint32_t>(hi / 360.0 * n_phi));
    phi_end = std::min(phi_end, n_phi);
  }

  const std::size_t n_dist = stack.distances_mm.size();
  // Azimuthally reduced log profiles, one row per distance.
  std::vector<double> rows(n_dist * n_theta, 0.0);
  for (std::size_t id = 0; id < n_dist; ++id) {
    for (std::uint32_t it = 0; it < n_theta; ++it) {
      double acc = 0.0;
      for (std::uint32_t ip = phi_begin; ip < phi_end; ++ip) {
        double composite = 0.0;
        for (std::size_t il = 0; il < weights.size(); ++il)
          composite += weights[il] *
                       stack.plane(il, id).counts[static_cast<std::size_t>(it) * n_phi + ip];
        acc += std::log(composite + eps);
      }
      rows[id * n_theta + it] = acc / static_cast<double>(phi_end - phi_begin);
    }
  }

  GradientMap map;
  map.n_radial = n_theta;
  map.values.resize((n_dist - 1) * n_theta);
  map.distances_mm.resize(n_dist - 1);
  for (std::size_t id = 0; id + 1 < n_dist; ++id) {
    const double dd = stack.distances_mm[id + 1] - stack.distances_mm[id];
    map.distances_mm[id] = 0.5 * (stack.distances_mm[id + 1] + stack.distances_mm[id]);
    for (std::uint32_t it = 0; it < n_theta; ++it)
      map.values[id * n_theta + it] = (rows[(id + 1) * n_theta + it] - rows[id * n_theta + it]) / dd;
  }
  return map;
}

GradientMap radial_log_gradient(const IntensityStack& stack, double lambda_nm, double eps,
                                std::optional<std::pair<double, double>> azimuth_slice_deg) {
  std::vector<double> weights(stack.wavelengths_nm.size(), 0.0);
  weights[stack.lambda_index(lambda_nm)] = 1.0;
  return radial_log_gradient(stack, weights, eps, azimuth_slice_deg);
}

double l2_distance(const GradientMap& a, const GradientMap& b) {
  if (a.values.size() != b.values.size()) throw ConfigError("gradient maps differ in shape");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

void save_stack(const IntensityStack& stack, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kStackMagic, 8);
  put_u32(os, static_cast<std::uint32_t>(stack.wavelengths_nm.size()));
  put_u32(os, static_cast<std::uint32_t>(stack.distances_mm.size()));
  put_u32(os, stack.geometry.n_theta);
  put_u32(os, stack.geometry.n_phi);
  for (const double w : stack.wavelengths_nm) put_f64(os, w);
  for (const double d : stack.distances_mm) put_f64(os, d);

  nlohmann::json meta = stack.metadata;
  meta["max_polar_deg"] = stack.geometry.max_polar_deg;
  const std::string blob = meta.dump();
  put_u32(os, static_cast<std::uint32_t>(blob.size()));
  os.write(blob.data(), static_cast<std::streamsize>(blob.size()));

  for (const IntensityPlane& p : stack.planes)
    for (const std::uint32_t v : p.counts) put_u32(os, v);
  if (!os) throw IoError("failed writing " + path.string());
}

IntensityStack load_stack(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifactError("cannot open stack file " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kStackMagic, 8) != 0)
    throw ParseError("bad magic in stack file " + path.string());

  IntensityStack stack;
  const std::uint32_t n_lambda = get_u32(is);
  const std::uint32_t n_dist = get_u32(is);
  stack.geometry.n_theta = get_u32(is);
  stack.geometry.n_phi = get_u32(is);
  stack.wavelengths_nm.resize(n_lambda);
  for (double& w : stack.wavelengths_nm) w = get_f64(is);
  stack.distances_mm.resize(n_dist);
  for (double& d : stack.distances_mm) d = get_f64(is);

  const std::uint32_t blob_len = get_u32(is);
  std::string blob(blob_len, '\0');
  is.read(blob.data(), blob_len);
  if (!is) throw ParseError("truncated stack header in " + path.string());
  stack.metadata = nlohmann::json::parse(blob, nullptr, false);
  if (stack.metadata.is_discarded()) throw ParseError("bad metadata JSON in " + path.string());
  if (stack.metadata.contains("max_polar_deg"))
    stack.geometry.max_polar_deg = stack.metadata["max_polar_deg"].get<double>();

  const std::size_t plane_size = static_cast<std::size_t>(stack.geometry.n_theta) * stack.geometry.n_phi;
  stack.planes.resize(static_cast<std::size_t>(n_lambda) * n_dist);
  nlohmann::json missed = stack.metadata.value("missed_per_plane", nlohmann::json::array());
  for (std::size_t ip = 0; ip < stack.planes.size(); ++ip) {
    IntensityPlane& p = stack.planes[ip];
    p.counts.resize(plane_size);
    for (std::uint32_t& v : p.counts) v = get_u32(is);
    if (ip < missed.size()) p.missed = missed[ip].get<std::uint64_t>();
  }
  if (!is) throw ParseError("truncated plane data in " + path.string());
  return stack;
}

void write_peak_profile_csv(const IntensityStack& stack, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "lambda_nm,distance_mm,peak,total\n";
  char buf[128];
  for (const double lambda : stack.wavelengths_nm) {
    for (const PeakSample& s : peak_profile(stack, lambda)) {
      std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%llu\n", lambda, s.distance_mm, s.peak,
                    static_cast<unsigned long long>(s.total));
      os << buf;
    }
  }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace cephalo
