#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cephalo/events.hpp"
#include "cephalo/retina.hpp"

namespace cephalo {

enum class ProfileSource { FramePeakIntensity, EventRate };

/// Response vs focal distance for one wavelength; samples are kept sorted by
/// distance.
struct SpectralProfile {
  double lambda_nm = 0.0;
  std::vector<std::pair<double, double>> samples;  // (f_mm, response)
  ProfileSource source = ProfileSource::FramePeakIntensity;
};

struct PeakFwhm {
  double f0_mm = 0.0;
  double fwhm_mm = 0.0;
  // False when a half-maximum crossing is missing on one side; f0 is still
  // reported.
  bool fwhm_valid = false;
};

/// Peak location and full width at half maximum of a response profile.
/// Smoothing is a centered moving average (window must be odd; 1 disables).
/// Half maximum is taken between the profile minimum (baseline) and the peak.
/// Throws NoPeak on monotone profiles.
PeakFwhm find_peak_and_fwhm(std::span<const std::pair<double, double>> samples,
                            int smoothing_window = 5);

/// Monotone piecewise-cubic (Fritsch-Carlson) wavelength <-> best-focus
/// mapping built from (lambda, f0) knots.
class FocusCurve {
public:
  explicit FocusCurve(std::vector<std::pair<double, double>> lambda_f0_points);

  double f0_at(double lambda_nm) const;        // interpolated best focus
  double lambda_at(double f_mm) const;         // inverse mapping
  double dlambda_df(double f_mm) const;        // interpolant derivative
  const std::vector<std::pair<double, double>>& points() const { return points_; }

private:
  std::vector<std::pair<double, double>> points_;  // (lambda, f0), lambda increasing
  std::vector<double> lambda_, f0_;
  bool f_monotone_;
  std::vector<double> slopes_f_of_lambda_;  // d f0 / d lambda at the knots
  std::vector<double> slopes_lambda_of_f_;  // d lambda / d f at the knots
};

/// Eq.-8-style conversion of a spatial FWHM into a spectral width using the
/// local slope of the focus curve at lambda's best focus.
double spectral_width(const FocusCurve& curve, double lambda_nm, double fwhm_mm,
                      double slope_cap_nm_per_mm = 1e6);

/// eta = lambda / dlambda.
double resolving_power(double lambda_nm, double dlambda_nm);

struct CalibrationRow {
  double lambda_nm;
  double qe;
  double p_full_nw;
  double p_dark_nw;
  double p_adjusted_nw;  // p_full * qe - p_dark
  double p_target_nw;    // p_adjusted(reference) / qe
};

struct CalibrationInput {
  double lambda_nm;
  double qe;
  double p_full_nw;
};

/// Light-source calibration: every wavelength is driven to replicate the
/// reference wavelength's net camera signal.
std::vector<CalibrationRow> calibration_targets(std::span<const CalibrationInput> rows,
                                                double p_dark_nw, double reference_lambda_nm);

/// Frame-path profiles: per-wavelength peak intensity vs retina distance.
std::vector<SpectralProfile> profiles_from_stack(const IntensityStack& stack);

struct EventProfileOptions {
  double f_lo_mm = 0.0;  // histogram range; lo >= hi derives it from the data
  double f_hi_mm = -1.0;
  std::size_t n_bins = 60;
  // Multi-cycle recordings: drop whole leading/trailing cycles before
  // histogramming (period in us).
  std::optional<double> period_us;
  std::uint32_t n_cycles = 0;
  std::uint32_t trim_leading = 0;
  std::uint32_t trim_trailing = 0;
};

/// Event-path profile: event rate vs focal distance from each event's f field.
SpectralProfile profile_from_events(std::span<const Event> events, double lambda_nm,
                                    const EventProfileOptions& options);

struct AnalysisOptions {
  int smoothing_window = 5;
  double eta_max_lambda_nm = 700.0;  // resolving power reported at or below
  double slope_cap_nm_per_mm = 1e6;
};

struct SpectralSummary {
  double lambda_nm;
  double f0_mm;
  double fwhm_mm;
  bool fwhm_valid;
  double dlambda_nm;  // NaN when not computed
  double eta;         // NaN when not computed
};

/// Full characterization of a profile set: per-wavelength peak/FWHM, the
/// focus curve over all wavelengths, and eta where defined.
std::vector<SpectralSummary> spectral_summary(std::span<const SpectralProfile> profiles,
                                              const AnalysisOptions& options);

}  // namespace cephalo
