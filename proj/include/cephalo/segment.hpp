#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cephalo/events.hpp"

namespace cephalo {

template <typename T>
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<T> data;

  Image() = default;
  Image(std::size_t w, std::size_t h, T fill = T{}) : width(w), height(h), data(w * h, fill) {}
  T& at(std::size_t y, std::size_t x) { return data[y * width + x]; }
  const T& at(std::size_t y, std::size_t x) const { return data[y * width + x]; }
};

/// Polarity-agnostic per-pixel event counts.
Image<std::uint32_t> accumulate_event_image(std::span<const Event> events, std::size_t width,
                                            std::size_t height);

struct VelocityGrid {
  double v_min_px_per_s = -100.0;
  double v_max_px_per_s = 100.0;
  std::size_t n_per_axis = 21;
};

struct CmaxResult {
  double vx_px_per_s = 0.0;
  double vy_px_per_s = 0.0;
  Image<float> warped;  // bilinear event votes at the best velocity
  double objective = 0.0;
};

/// Contrast maximization with a linear motion model: events are warped to the
/// stream's first timestamp for every candidate velocity (the zero velocity is
/// always among the candidates) and the variance of the warped count image is
/// maximized by exhaustive search. Degenerate streams (empty, single event,
/// zero time span) return the identity warp.
CmaxResult cmax_linear(std::span<const Event> events, std::size_t width, std::size_t height,
                       const VelocityGrid& grid, unsigned threads = 1);

/// Sliding-window population variance, stride 1, valid region only: the map is
/// (height - window + 1) x (width - window + 1).
Image<double> sharpness_map(const Image<float>& image, std::size_t window);

/// Otsu threshold over a 256-bin quantization of the value range; ties go to
/// the lowest qualifying bin. Values <= the returned threshold form the low
/// class. Throws DegenerateHistogram when all values coincide.
double otsu_threshold(std::span<const double> values);
std::size_t otsu_bin(const std::array<std::uint64_t, 256>& histogram);

struct FocalCalibrationEntry {
  std::string label;
  double lambda_nm;
  double position_mm;  // actuator position of sharpest focus
};

struct FocalCalibrationMap {
  std::vector<FocalCalibrationEntry> entries;
  std::vector<std::size_t> visit_order;  // empty = entry order
};

enum class SegmentationMode { Static, Dynamic };

struct SegmentParams {
  std::size_t window = 30;
  VelocityGrid grid;
  SegmentationMode mode = SegmentationMode::Static;
  double dwell_tolerance_mm = 0.0;  // <= 0 selects 2% of the covered f range
};

constexpr int kUnlabeled = -1;

struct PlaneReport {
  std::size_t entry_index = 0;
  bool empty = false;  // no events in the dwell; plane skipped
  double vx_px_per_s = 0.0;
  double vy_px_per_s = 0.0;
  double threshold = 0.0;
  Image<std::uint8_t> mask;  // above-threshold sharpness windows (0/255)
  std::size_t selected_events = 0;
  std::size_t labeled_events = 0;
};

struct SegmentationResult {
  std::vector<int> labels;  // per event: calibration entry index or kUnlabeled
  std::vector<PlaneReport> planes;
};

/// Per-focal-plane labeling: select events in the dwell around each calibrated
/// position, motion-compensate, measure windowed sharpness, Otsu-binarize, and
/// label events whose warped coordinates fall inside above-threshold window
/// footprints. Static mode removes labeled events from later planes; dynamic
/// mode keeps them (later planes may relabel).
SegmentationResult segment_sweep(std::span<const Event> events, std::size_t width, std::size_t height,
                                 const FocalCalibrationMap& calibration, const SegmentParams& params,
                                 unsigned threads = 1);

/// Binary PGM ("P5"), 255 = above threshold.
void write_mask_pgm(const Image<std::uint8_t>& mask, const std::filesystem::path& path);

/// CSV with header t_us,x,y,p,f_um,label; unlabeled events get "unlabeled".
void write_labeled_events_csv(std::span<const Event> events, std::span<const int> labels,
                              const FocalCalibrationMap& calibration,
                              const std::filesystem::path& path);

}  // namespace cephalo
