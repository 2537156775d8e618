#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "cephalo/tracer.hpp"

namespace cephalo {

/// Equirectangular (theta, phi) binning of a hemispherical detector of radius
/// R_retina measured from the sphere centre. theta runs from the +z pole to
/// max_polar_deg, phi over the full turn. Bins are equal-angle, so solid angle
/// per bin shrinks toward the pole.
struct RetinaGeometry {
  std::uint32_t n_theta = 256;
  std::uint32_t n_phi = 256;
  double max_polar_deg = 90.0;
};

struct IntensityPlane {
  std::vector<std::uint32_t> counts;  // n_theta * n_phi, theta-row-major
  std::uint64_t missed = 0;           // exit rays that hit beyond max_polar_deg
};

struct IntensityStack {
  RetinaGeometry geometry;
  std::vector<double> wavelengths_nm;  // strictly increasing
  std::vector<double> distances_mm;    // strictly increasing
  std::vector<IntensityPlane> planes;  // wavelength-major, then distance
  nlohmann::json metadata;

  std::size_t plane_index(std::size_t i_lambda, std::size_t i_dist) const {
    return i_lambda * distances_mm.size() + i_dist;
  }
  const IntensityPlane& plane(std::size_t i_lambda, std::size_t i_dist) const {
    return planes[plane_index(i_lambda, i_dist)];
  }
  std::size_t lambda_index(double lambda_nm) const;  // throws WavelengthNotInStack
};

/// Propagates each exit ray to its first crossing of the hemisphere and
/// increments the containing bin; hits beyond max_polar_deg go to `missed`.
IntensityPlane accumulate(std::span<const ExitRay> exit_rays, const RetinaGeometry& geometry,
                          double retina_distance_mm);

/// Traces once per wavelength and accumulates every retina distance from the
/// same exit rays (free propagation after exit makes the trace
/// distance-independent).
IntensityStack sweep(const GrinSphere& sphere, const PupilMask& mask, const TraceConfig& cfg,
                     const RetinaGeometry& geometry, std::vector<double> wavelengths_nm,
                     std::vector<double> distances_mm, unsigned threads = 1);

/// Concatenates the wavelength slices of stacks sharing one geometry and
/// distance list (used to compose multi-source scenes).
IntensityStack merge_stacks(std::span<const IntensityStack> stacks);

struct PeakSample {
  double distance_mm;
  double peak;          // max bin value (divided by the profile max if normalized)
  std::uint64_t total;  // landed counts in the plane
};

std::vector<PeakSample> peak_profile(const IntensityStack& stack, double lambda_nm,
                                     bool normalized = false);

/// d/d(distance) of the azimuthally reduced log intensity: log(plane + eps) is
/// averaged over phi (optionally restricted to an azimuth slice) into a radial
/// profile per distance, then forward-differenced along the distance axis.
/// `weights` blends the per-wavelength planes into one composite spectrum.
struct GradientMap {
  std::vector<double> distances_mm;  // interval midpoints, size n_dist - 1
  std::size_t n_radial = 0;          // n_theta
  std::vector<double> values;        // (n_dist - 1) x n_radial, row-major
};

GradientMap radial_log_gradient(const IntensityStack& stack, std::span<const double> weights,
                                double eps = 1.0,
                                std::optional<std::pair<double, double>> azimuth_slice_deg = {});
GradientMap radial_log_gradient(const IntensityStack& stack, double lambda_nm, double eps = 1.0,
                                std::optional<std::pair<double, double>> azimuth_slice_deg = {});

double l2_distance(const GradientMap& a, const GradientMap& b);

// Stack file ("CPHSTK01"): little-endian header u32 {n_lambda, n_dist,
// n_theta, n_phi}, f64 wavelengths, f64 distances, u32 JSON byte length +
// UTF-8 JSON metadata, then u32 plane counts wavelength-major, then distance,
// then theta-row-major.
void save_stack(const IntensityStack& stack, const std::filesystem::path& path);
IntensityStack load_stack(const std::filesystem::path& path);

/// CSV columns: lambda_nm, distance_mm, peak, total.
void write_peak_profile_csv(const IntensityStack& stack, const std::filesystem::path& path);

}  // namespace cephalo
