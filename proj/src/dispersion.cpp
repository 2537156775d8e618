#include "cephalo/dispersion.hpp"

#include <algorithm>
#include <cmath>

#include "cephalo/errors.hpp"

namespace cephalo {

DispersionModel DispersionModel::constant(double n, WavelengthRange range) {
  return DispersionModel(Constant{n}, range);
}

DispersionModel DispersionModel::cauchy(double a, double b_um2, WavelengthRange range) {
  return DispersionModel(Cauchy{a, b_um2}, range);
}

DispersionModel DispersionModel::sellmeier(const std::array<double, 3>& b,
                                           const std::array<double, 3>& c_um2, WavelengthRange range) {
  return DispersionModel(Sellmeier{b, c_um2}, range);
}

DispersionModel DispersionModel::tabulated(std::vector<std::pair<double, double>> points_nm) {
  if (points_nm.size() < 2) throw ConfigError("tabulated dispersion needs at least two points");
  std::sort(points_nm.begin(), points_nm.end());
  for (std::size_t i = 1; i < points_nm.size(); ++i) {
    if (points_nm[i].first == points_nm[i - 1].first)
      throw ConfigError("tabulated dispersion has duplicate wavelength");
  }
  const WavelengthRange range{points_nm.front().first, points_nm.back().first};
  return DispersionModel(Tabulated{std::move(points_nm)}, range);
}

double DispersionModel::operator()(double lambda_nm) const {
  if (!range_.contains(lambda_nm))
    throw OutOfRangeError("wavelength " + std::to_string(lambda_nm) + " nm outside valid range [" +
                          std::to_string(range_.min_nm) + ", " + std::to_string(range_.max_nm) + "] nm");
  return std::visit(
      [lambda_nm](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return m.n;
        } else if constexpr (std::is_same_v<T, Cauchy>) {
          const double lum = lambda_nm * 1e-3;
          return m.a + m.b_um2 / (lum * lum);
        } else if constexpr (std::is_same_v<T, Sellmeier>) {
          const double l2 = (lambda_nm * 1e-3) * (lambda_nm * 1e-3);
          double n2 = 1.0;
          for (int i = 0; i < 3; ++i) n2 += m.b[i] * l2 / (l2 - m.c_um2[i]);
          return std::sqrt(n2);
        } else {
          const auto& pts = m.points;
          auto hi = std::lower_bound(pts.begin(), pts.end(), lambda_nm,
                                     [](const auto& p, double l) { return p.first < l; });
          if (hi == pts.begin()) return hi->second;
          if (hi == pts.end()) return pts.back().second;
          const auto lo = hi - 1;
          const double t = (lambda_nm - lo->first) / (hi->first - lo->first);
          return lo->second + t * (hi->second - lo->second);
        }
      },
      model_);
}

std::string DispersionModel::kind() const {
  switch (model_.index()) {
    case 0: return "constant";
    case 1: return "cauchy";
    case 2: return "sellmeier";
    default: return "tabulated";
  }
}

namespace presets {

DispersionModel nbk7() {
  return DispersionModel::sellmeier({1.03961212, 0.231792344, 1.01046945},
                                    {0.00600069867, 0.0200179144, 103.560653}, {300.0, 2500.0});
}

DispersionModel vacuum() { return DispersionModel::constant(1.0); }

namespace {
// Sampled from a mild Cauchy form over 400-800 nm so the synthetic curves are
// smooth and normally dispersive.
DispersionModel sampled_cauchy(double a, double b_um2) {
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i <= 8; ++i) {
    const double lambda = 400.0 + 50.0 * i;
    const double lum = lambda * 1e-3;
    pts.emplace_back(lambda, a + b_um2 / (lum * lum));
  }
  return DispersionModel::tabulated(std::move(pts));
}
}  // namespace

DispersionModel synthetic_core() { return sampled_cauchy(1.49333, 0.0042667); }    // ~1.52 -> 1.50
DispersionModel synthetic_outer() { return sampled_cauchy(1.35333, 0.0042667); }   // ~1.38 -> 1.36
DispersionModel synthetic_medium() { return sampled_cauchy(1.32700, 0.0025600); }  // ~1.343 -> 1.331

}  // namespace presets

BallLensSpec::BallLensSpec(double diameter, DispersionModel mat)
    : diameter_mm(diameter), material(std::move(mat)) {
  if (!(diameter_mm > 0.0)) throw ConfigError("ball lens diameter must be positive");
}

LensFocal efl_bfl(const BallLensSpec& lens, double lambda_nm) {
  const double n = lens.material(lambda_nm);
  if (!(n > 1.0))
    throw DegenerateLensError("lens index n(" + std::to_string(lambda_nm) + " nm) = " +
                              std::to_string(n) + " <= 1");
  const double efl = n * lens.diameter_mm / (4.0 * (n - 1.0));
  return {efl, efl - lens.diameter_mm / 2.0};
}

ImageConjugate image_distance_and_magnification(const BallLensSpec& lens, double lambda_nm,
                                                double object_distance_mm) {
  if (!(object_distance_mm > 0.0)) throw ConfigError("object distance must be positive");
  const double efl = efl_bfl(lens, lambda_nm).efl_mm;
  if (std::abs(object_distance_mm - efl) < 1e-9 * efl)
    throw AtFocalPlaneError("object at the focal plane; image at infinity");
  const double di = 1.0 / (1.0 / efl - 1.0 / object_distance_mm);
  return {di, -di / object_distance_mm};
}

double longitudinal_chromatic_shift(const BallLensSpec& lens, double lambda1_nm, double lambda2_nm) {
  return efl_bfl(lens, lambda2_nm).bfl_mm - efl_bfl(lens, lambda1_nm).bfl_mm;
}

}  // namespace cephalo
