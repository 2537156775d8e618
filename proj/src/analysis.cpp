#include "cephalo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cephalo/errors.hpp"

namespace cephalo {

namespace {

std::vector<double> moving_average(std::span<const double> v, int window) {
  if (window <= 1) return {v.begin(), v.end()};
  std::vector<double> out(v.size());
  const int half = window / 2;
  const int n = static_cast<int>(v.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    double acc = 0.0;
    for (int j = lo; j <= hi; ++j) acc += v[j];
    out[i] = acc / (hi - lo + 1);
  }
  return out;
}

bool is_monotone(std::span<const double> v) {
  bool non_increasing = true, non_decreasing = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1]) non_increasing = false;
    if (v[i] < v[i - 1]) non_decreasing = false;
  }
  return non_increasing || non_decreasing;
}

// Fritsch-Carlson shape-preserving slopes, matching the standard PCHIP
// construction (weighted harmonic mean inside, clipped three-point formula at
// the ends).
std::vector<double> pchip_slopes(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  std::vector<double> d(n);
  if (n == 2) {
    d[0] = d[1] = (y[1] - y[0]) / (x[1] - x[0]);
    return d;
  }
  std::vector<double> h(n - 1), s(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    s[i] = (y[i + 1] - y[i]) / h[i];
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (s[i - 1] * s[i] <= 0.0) {
      d[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      d[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
    }
  }
  auto end_slope = [](double h0, double h1, double s0, double s1) {
    double d0 = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if (d0 * s0 <= 0.0)
      d0 = 0.0;
    else if (s0 * s1 < 0.0 && std::abs(d0) > 3.0 * std::abs(s0))
      d0 = 3.0 * s0;
    return d0;
  };
  d[0] = end_slope(h[0], h[1], s[0], s[1]);
  d[n - 1] = end_slope(h[n - 2], h[n - 3], s[n - 2], s[n - 3]);
  return d;
}

struct HermiteEval {
  double value;
  double derivative;
};

HermiteEval pchip_eval(std::span<const double> x, std::span<const double> y,
                       std::span<const double> d, double q) {
  const std::size_t n = x.size();
  std::size_t i = 0;
  while (i + 2 < n && q > x[i + 1]) ++i;
  const double h = x[i + 1] - x[i];
  const double t = (q - x[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1;
  const double h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = t3 - t2;
  const double value = h00 * y[i] + h10 * h * d[i] + h01 * y[i + 1] + h11 * h * d[i + 1];
  const double dh00 = (6 * t2 - 6 * t) / h;
  const double dh10 = 3 * t2 - 4 * t + 1;
  const double dh01 = (-6 * t2 + 6 * t) / h;
  const double dh11 = 3 * t2 - 2 * t;
  const double deriv = dh00 * y[i] + dh10 * d[i] + dh01 * y[i + 1] + dh11 * d[i + 1];
  return {value, deriv};
}

}  // namespace

PeakFwhm find_peak_and_fwhm(std::span<const std::pair<double, double>> samples_in,
                            int smoothing_window) {
  if (samples_in.size() < 5) throw AlgorithmError("peak finding needs at least 5 samples");
  if (smoothing_window < 1 || smoothing_window % 2 == 0)
    throw ConfigError("smoothing window must be odd and >= 1");

  std::vector<std::pair<double, double>> samples(samples_in.begin(), samples_in.end());
  std::sort(samples.begin(), samples.end());

  std::vector<double> f(samples.size()), v(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    f[i] = samples[i].first;
    v[i] = samples[i].second;
  }
  const std::vector<double> sm = moving_average(v, smoothing_window);
  if (is_monotone(sm)) throw NoPeakError("profile is monotone; no interior peak");

  const std::size_t peak =
      static_cast<std::size_t>(std::max_element(sm.begin(), sm.end()) - sm.begin());
  const double baseline = *std::min_element(sm.begin(), sm.end());
  const double half = baseline + (sm[peak] - baseline) / 2.0;

  PeakFwhm out;
  out.f0_mm = f[peak];

  double left = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = peak; i-- > 0;) {
    if (sm[i] < half) {
      left = f[i] + (half - sm[i]) / (sm[i + 1] - sm[i]) * (f[i + 1] - f[i]);
      break;
    }
  }
  double right = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = peak + 1; i < sm.size(); ++i) {
    if (sm[i] < half) {
      right = f[i - 1] + (sm[i - 1] - half) / (sm[i - 1] - sm[i]) * (f[i] - f[i - 1]);
      break;
    }
  }
  if (std::isnan(left) || std::isnan(right)) {
    out.fwhm_valid = false;  // half-max crossing missing on one side
    out.fwhm_mm = std::numeric_limits<double>::quiet_NaN();
  } else {
    out.fwhm_valid = true;
    out.fwhm_mm = right - left;
  }
  return out;
}

FocusCurve::FocusCurve(std::vector<std::pair<double, double>> lambda_f0_points)
    : points_(std::move(lambda_f0_points)) {
  if (points_.size() < 2) throw ConfigError("focus curve needs at least two points");
  for (std::size_t i = 1; i < points_.size(); ++i)
    if (!(points_[i].first > points_[i - 1].first))
      throw ConfigError("focus curve wavelengths must be strictly increasing");

  lambda_.resize(points_.size());
  f0_.resize(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    lambda_[i] = points_[i].first;
    f0_[i] = points_[i].second;
  }
  slopes_f_of_lambda_ = pchip_slopes(lambda_, f0_);

  f_monotone_ = true;
  for (std::size_t i = 1; i < f0_.size(); ++i)
    if (!(f0_[i] > f0_[i - 1])) f_monotone_ = false;
  if (f_monotone_) slopes_lambda_of_f_ = pchip_slopes(f0_, lambda_);
}

double FocusCurve::f0_at(double lambda_nm) const {
  if (lambda_nm < lambda_.front() || lambda_nm > lambda_.back())
    throw OutOfCurveRangeError("wavelength outside the focus curve range");
  return pchip_eval(lambda_, f0_, slopes_f_of_lambda_, lambda_nm).value;
}

double FocusCurve::lambda_at(double f_mm) const {
  if (!f_monotone_) throw ZeroSlopeError("focus curve is not strictly increasing in f");
  if (f_mm < f0_.front() || f_mm > f0_.back())
    throw OutOfCurveRangeError("focal distance outside the focus curve range");
  return pchip_eval(f0_, lambda_, slopes_lambda_of_f_, f_mm).value;
}

double FocusCurve::dlambda_df(double f_mm) const {
  if (!f_monotone_) throw ZeroSlopeError("focus curve is not strictly increasing in f");
  if (f_mm < f0_.front() || f_mm > f0_.back())
    throw OutOfCurveRangeError("focal distance outside the focus curve range");
  return pchip_eval(f0_, lambda_, slopes_lambda_of_f_, f_mm).derivative;
}

double spectral_width(const FocusCurve& curve, double lambda_nm, double fwhm_mm,
                      double slope_cap_nm_per_mm) {
  if (lambda_nm < curve.points().front().first || lambda_nm > curve.points().back().first)
    throw OutOfCurveRangeError("wavelength outside the focus curve range");
  if (!(fwhm_mm >= 0.0)) throw AlgorithmError("FWHM must be non-negative");
  const double f0 = curve.f0_at(lambda_nm);
  const double slope = curve.dlambda_df(f0);
  if (std::abs(slope) > slope_cap_nm_per_mm)
    throw ZeroSlopeError("focus mapping slope exceeds the configured cap (flat mapping)");
  return std::abs(slope) * fwhm_mm;
}

double resolving_power(double lambda_nm, double dlambda_nm) {
  if (!(dlambda_nm > 0.0)) throw DivisionByZeroWidthError("spectral width must be positive");
  return lambda_nm / dlambda_nm;
}

std::vector<CalibrationRow> calibration_targets(std::span<const CalibrationInput> rows,
                                                double p_dark_nw, double reference_lambda_nm) {
  const CalibrationInput* ref = nullptr;
  for (const CalibrationInput& r : rows) {
    if (!(r.qe > 0.0))
      throw NonPositiveQEError("QE must be positive at " + std::to_string(r.lambda_nm) + " nm");
    if (r.qe > 1.0) throw ConfigError("QE cannot exceed 1");
    if (r.p_full_nw < 0.0) throw ConfigError("powers must be non-negative");
    if (r.lambda_nm == reference_lambda_nm) ref = &r;
  }
  if (ref == nullptr)
    throw MissingReferenceError("reference wavelength " + std::to_string(reference_lambda_nm) +
                                " nm not among the calibration rows");

  const double ref_adjusted = ref->p_full_nw * ref->qe - p_dark_nw;
  std::vector<CalibrationRow> out;
  out.reserve(rows.size());
  for (const CalibrationInput& r : rows) {
    out.push_back({r.lambda_nm, r.qe, r.p_full_nw, p_dark_nw, r.p_full_nw * r.qe - p_dark_nw,
                   ref_adjusted / r.qe});
  }
  return out;
}

std::vector<SpectralProfile> profiles_from_stack(const IntensityStack& stack) {
  std::vector<SpectralProfile> out;
  out.reserve(stack.wavelengths_nm.size());
  for (const double lambda : stack.wavelengths_nm) {
    SpectralProfile p;
    p.lambda_nm = lambda;
    p.source = ProfileSource::FramePeakIntensity;
    for (const PeakSample& s : peak_profile(stack, lambda)) p.samples.emplace_back(s.distance_mm, s.peak);
    out.push_back(std::move(p));
  }
  return out;
}

SpectralProfile profile_from_events(std::span<const Event> events, double lambda_nm,
                                    const EventProfileOptions& options) {
  if (options.n_bins < 2) throw ConfigError("event profile needs at least two bins");

  std::vector<Event> kept;
  kept.reserve(events.size());
  if (options.period_us) {
    if (options.n_cycles == 0 ||
        options.trim_leading + options.trim_trailing >= options.n_cycles)
      throw ConfigError("cycle trimming leaves no cycles");
    // Keep events with lead*T < t <= (n_cycles - trail)*T; the seam crossing
    // at exactly lead*T belongs to the trimmed-away cycle.
    const double t_lo = options.trim_leading * *options.period_us;
    const double t_hi = (options.n_cycles - options.trim_trailing) * *options.period_us;
    const std::uint64_t lo = static_cast<std::uint64_t>(std::llround(t_lo));
    const std::uint64_t hi = static_cast<std::uint64_t>(std::llround(t_hi));
    for (const Event& e : events)
      if (e.t_us > lo && e.t_us <= hi) kept.push_back(e);
  } else {
    kept.assign(events.begin(), events.end());
  }

  double lo_um, hi_um;
  if (options.f_hi_mm > options.f_lo_mm) {
    lo_um = options.f_lo_mm * 1000.0;
    hi_um = options.f_hi_mm * 1000.0;
  } else {
    if (kept.empty()) throw AlgorithmError("cannot derive a focus range from an empty stream");
    lo_um = hi_um = static_cast<double>(kept.front().f_um);
    for (const Event& e : kept) {
      lo_um = std::min(lo_um, static_cast<double>(e.f_um));
      hi_um = std::max(hi_um, static_cast<double>(e.f_um));
    }
  }

  SpectralProfile p;
  p.lambda_nm = lambda_nm;
  p.source = ProfileSource::EventRate;
  const double bin = (hi_um - lo_um) / static_cast<double>(options.n_bins);
  std::vector<double> counts(options.n_bins, 0.0);
  for (const Event& e : kept) {
    const double f = static_cast<double>(e.f_um);
    if (f < lo_um || f > hi_um) continue;
    std::size_t idx = static_cast<std::size_t>((f - lo_um) / bin);
    if (idx >= options.n_bins) idx = options.n_bins - 1;
    counts[idx] += 1.0;
  }
  for (std::size_t i = 0; i < options.n_bins; ++i)
    p.samples.emplace_back((lo_um + (i + 0.5) * bin) / 1000.0, counts[i]);
  return p;
}

std::vector<SpectralSummary> spectral_summary(std::span<const SpectralProfile> profiles,
                                              const AnalysisOptions& options) {
  if (profiles.empty()) throw AlgorithmError("no profiles to analyze");

  std::vector<SpectralSummary> out;
  std::vector<std::pair<double, double>> knots;
  for (const SpectralProfile& p : profiles) {
    const PeakFwhm pk = find_peak_and_fwhm(p.samples, options.smoothing_window);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.push_back({p.lambda_nm, pk.f0_mm, pk.fwhm_mm, pk.fwhm_valid, nan, nan});
    knots.emplace_back(p.lambda_nm, pk.f0_mm);
  }
  std::sort(knots.begin(), knots.end());
  if (knots.size() >= 2) {
    const FocusCurve curve(knots);
    for (SpectralSummary& s : out) {
      if (!s.fwhm_valid || s.lambda_nm > options.eta_max_lambda_nm) continue;
      const double dl = spectral_width(curve, s.lambda_nm, s.fwhm_mm, options.slope_cap_nm_per_mm);
      if (dl > 0.0) {
        s.dlambda_nm = dl;
        s.eta = resolving_power(s.lambda_nm, dl);
      }
    }
  }
  return out;
}

}  // namespace cephalo
