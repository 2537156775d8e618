#pragma once

#include <array>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cephalo {

struct WavelengthRange {
  double min_nm = 0.0;
  double max_nm = 0.0;
  bool contains(double lambda_nm) const { return lambda_nm >= min_nm && lambda_nm <= max_nm; }
};

/// Wavelength -> refractive index. Evaluation outside the valid range throws
/// OutOfRangeError; no extrapolation, ever.
class DispersionModel {
public:
  struct Constant {
    double n;
  };
  // n = a + b / lambda_um^2
  struct Cauchy {
    double a;
    double b_um2;
  };
  // n^2 = 1 + sum_i b[i] * l2 / (l2 - c[i]),  l2 = lambda_um^2
  struct Sellmeier {
    std::array<double, 3> b;
    std::array<double, 3> c_um2;
  };
  // Piecewise-linear interpolation over (lambda_nm, n) points sorted by lambda.
  struct Tabulated {
    std::vector<std::pair<double, double>> points;
  };

  static DispersionModel constant(double n, WavelengthRange range = {1.0, 1e9});
  static DispersionModel cauchy(double a, double b_um2, WavelengthRange range);
  static DispersionModel sellmeier(const std::array<double, 3>& b, const std::array<double, 3>& c_um2,
                                   WavelengthRange range);
  static DispersionModel tabulated(std::vector<std::pair<double, double>> points_nm);

  double operator()(double lambda_nm) const;
  const WavelengthRange& valid_range() const { return range_; }
  std::string kind() const;

  template <typename T>
  const T* get_if() const {
    return std::get_if<T>(&model_);
  }

private:
  DispersionModel(std::variant<Constant, Cauchy, Sellmeier, Tabulated> model, WavelengthRange range)
      : model_(std::move(model)), range_(range) {}

  std::variant<Constant, Cauchy, Sellmeier, Tabulated> model_;
  WavelengthRange range_;
};

inline double refractive_index(const DispersionModel& model, double lambda_nm) { return model(lambda_nm); }

namespace presets {

/// Sellmeier coefficients for Schott N-BK7 (the standard equivalent of K9).
DispersionModel nbk7();
DispersionModel vacuum();

// Synthetic graded-index sphere materials. Plausible magnitudes only; the
// shapes are not taken from any measured dataset.
DispersionModel synthetic_core();
DispersionModel synthetic_outer();
DispersionModel synthetic_medium();

}  // namespace presets

struct BallLensSpec {
  double diameter_mm;
  DispersionModel material;

  BallLensSpec(double diameter, DispersionModel mat);
};

struct LensFocal {
  double efl_mm;  // measured from the lens centre
  double bfl_mm;  // efl - D/2; may be negative (focus inside the lens)
};

struct ImageConjugate {
  double image_distance_mm;
  double magnification;
};

LensFocal efl_bfl(const BallLensSpec& lens, double lambda_nm);
ImageConjugate image_distance_and_magnification(const BallLensSpec& lens, double lambda_nm,
                                                double object_distance_mm);
double longitudinal_chromatic_shift(const BallLensSpec& lens, double lambda1_nm, double lambda2_nm);

}  // namespace cephalo
