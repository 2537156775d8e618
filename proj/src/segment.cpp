#include "cephalo/segment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "cephalo/errors.hpp"
#include "cephalo/parallel.hpp"

namespace cephalo {

namespace {

struct WarpStats {
  Image<float> image;
  double variance;
};

double image_variance(const Image<float>& img) {
  double sum = 0.0, sum2 = 0.0;
  for (const float v : img.data) {
    sum += v;
    sum2 += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(img.data.size());
  const double mean = sum / n;
  return std::max(0.0, sum2 / n - mean * mean);
}

Image<float> warp_bilinear(std::span<const Event> events, std::size_t width, std::size_t height,
                           double vx, double vy, std::uint64_t t_ref_us) {
  Image<float> img(width, height, 0.0f);
  for (const Event& e : events) {
    const double dt_s = (static_cast<double>(e.t_us) - static_cast<double>(t_ref_us)) * 1e-6;
    const double xf = e.x - vx * dt_s;
    const double yf = e.y - vy * dt_s;
    if (xf < 0.0 || yf < 0.0 || xf > width - 1.0 || yf > height - 1.0) continue;
    const std::size_t x0 = static_cast<std::size_t>(xf);
    const std::size_t y0 = static_cast<std::size_t>(yf);
    const double dx = xf - x0, dy = yf - y0;
    img.at(y0, x0) += static_cast<float>((1.0 - dx) * (1.0 - dy));
    if (x0 + 1 < width) img.at(y0, x0 + 1) += static_cast<float>(dx * (1.0 - dy));
    if (y0 + 1 < height) img.at(y0 + 1, x0) += static_cast<float>((1.0 - dx) * dy);
    if (x0 + 1 < width && y0 + 1 < height) img.at(y0 + 1, x0 + 1) += static_cast<float>(dx * dy);
  }
  return img;
}

}  // namespace

Image<std::uint32_t> accumulate_event_image(std::span<const Event> events, std::size_t width,
                                            std::size_t height) {
  Image<std::uint32_t> img(width, height, 0u);
  for (const Event& e : events) {
    if (e.x < width && e.y < height) ++img.at(e.y, e.x);
  }
  return img;
}

CmaxResult cmax_linear(std::span<const Event> events, std::size_t width, std::size_t height,
                       const VelocityGrid& grid, unsigned threads) {
  if (grid.n_per_axis == 0) throw ConfigError("velocity grid needs at least one candidate per axis");
  if (!(grid.v_max_px_per_s >= grid.v_min_px_per_s)) throw ConfigError("velocity grid bounds inverted");

  std::uint64_t t_min = std::numeric_limits<std::uint64_t>::max(), t_max = 0;
  for (const Event& e : events) {
    t_min = std::min(t_min, e.t_us);
    t_max = std::max(t_max, e.t_us);
  }
  const bool degenerate = events.size() < 2 || t_min >= t_max;
  if (degenerate) {
    CmaxResult r;
    r.warped = warp_bilinear(events, width, height, 0.0, 0.0, events.empty() ? 0 : t_min);
    r.objective = image_variance(r.warped);
    return r;
  }

  std::vector<std::pair<double, double>> candidates;
  candidates.reserve(grid.n_per_axis * grid.n_per_axis + 1);
  for (std::size_t iy = 0; iy < grid.n_per_axis; ++iy) {
    for (std::size_t ix = 0; ix < grid.n_per_axis; ++ix) {
      const double fx = grid.n_per_axis == 1 ? 0.5 : ix / (grid.n_per_axis - 1.0);
      const double fy = grid.n_per_axis == 1 ? 0.5 : iy / (grid.n_per_axis - 1.0);
      candidates.emplace_back(grid.v_min_px_per_s + fx * (grid.v_max_px_per_s - grid.v_min_px_per_s),
                              grid.v_min_px_per_s + fy * (grid.v_max_px_per_s - grid.v_min_px_per_s));
    }
  }
  if (std::find(candidates.begin(), candidates.end(), std::make_pair(0.0, 0.0)) == candidates.end())
    candidates.emplace_back(0.0, 0.0);

  std::vector<double> objectives(candidates.size());
  parallel_for_chunks(candidates.size(), resolve_threads(threads),
                      [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      objectives[i] =
          image_variance(warp_bilinear(events, width, height, candidates[i].first,
                                       candidates[i].second, t_min));
    }
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i)
    if (objectives[i] > objectives[best]) best = i;

  CmaxResult r;
  r.vx_px_per_s = candidates[best].first;
  r.vy_px_per_s = candidates[best].second;
  r.warped = warp_bilinear(events, width, height, r.vx_px_per_s, r.vy_px_per_s, t_min);
  r.objective = objectives[best];
  return r;
}

Image<double> sharpness_map(const Image<float>& image, std::size_t window) {
  if (window == 0) throw ConfigError("sharpness window must be positive");
  if (window > image.width || window > image.height)
    throw WindowTooLargeError("sharpness window exceeds the image dimensions");

  const std::size_t w = image.width, h = image.height;
  // Summed-area tables with a zero top row / left column.
  std::vector<double> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
  std::vector<double> sat2(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    double row = 0.0, row2 = 0.0;
    for (std::size_t x = 0; x < w; ++x) {
      const double v = image.at(y, x);
      row += v;
      row2 += v * v;
      sat[(y + 1) * (w + 1) + (x + 1)] = sat[y * (w + 1) + (x + 1)] + row;
      sat2[(y + 1) * (w + 1) + (x + 1)] = sat2[y * (w + 1) + (x + 1)] + row2;
    }
  }

  Image<double> map(w - window + 1, h - window + 1, 0.0);
  const double n = static_cast<double>(window) * window;
  for (std::size_t y = 0; y < map.height; ++y) {
    for (std::size_t x = 0; x < map.width; ++x) {
      const std::size_t y1 = y + window, x1 = x + window;
      const double s = sat[y1 * (w + 1) + x1] - sat[y * (w + 1) + x1] - sat[y1 * (w + 1) + x] +
                       sat[y * (w + 1) + x];
      const double s2 = sat2[y1 * (w + 1) + x1] - sat2[y * (w + 1) + x1] - sat2[y1 * (w + 1) + x] +
                        sat2[y * (w + 1) + x];
      const double mean = s / n;
      map.at(y, x) = std::max(0.0, s2 / n - mean * mean);
    }
  }
  return map;
}

std::size_t otsu_bin(const std::array<std::uint64_t, 256>& histogram) {
  std::uint64_t total = 0;
  double total_sum = 0.0;
  for (std::size_t i = 0; i < 256; ++i) {
    total += histogram[i];
    total_sum += static_cast<double>(i) * histogram[i];
  }
  if (total == 0) throw DegenerateHistogramError("empty histogram");

  double best_var = -1.0;
  std::size_t best_k = 256;
  std::uint64_t w0 = 0;
  double sum0 = 0.0;
  for (std::size_t k = 0; k < 256; ++k) {
    w0 += histogram[k];
    sum0 += static_cast<double>(k) * histogram[k];
    const std::uint64_t w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (total_sum - sum0) / w1;
    const double var = static_cast<double>(w0) * static_cast<double>(w1) * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best_k = k;
    }
  }
  if (best_k == 256) throw DegenerateHistogramError("histogram has a single occupied bin");
  return best_k;
}

double otsu_threshold(std::span<const double> values) {
  if (values.size() < 2) throw DegenerateHistogramError("need at least two values");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  if (!(*mx > *mn)) throw DegenerateHistogramError("all values equal");
  std::array<std::uint64_t, 256> hist{};
  const double scale = 256.0 / (*mx - *mn);
  for (const double v : values) {
    std::size_t idx = static_cast<std::size_t>((v - *mn) * scale);
    if (idx > 255) idx = 255;
    ++hist[idx];
  }
  const std::size_t k = otsu_bin(hist);
  return *mn + (*mx - *mn) * (static_cast<double>(k) + 1.0) / 256.0;
}

SegmentationResult segment_sweep(std::span<const Event> events, std::size_t width, std::size_t height,
                                 const FocalCalibrationMap& calibration, const SegmentParams& params,
                                 unsigned threads) {
  if (calibration.entries.empty()) throw NoCalibrationError("calibration map has no entries");
  std::vector<std::size_t> order = calibration.visit_order;
  if (order.empty())
    for (std::size_t i = 0; i < calibration.entries.size(); ++i) order.push_back(i);
  for (const std::size_t i : order)
    if (i >= calibration.entries.size()) throw ConfigError("visit order index out of range");

  SegmentationResult result;
  result.labels.assign(events.size(), kUnlabeled);
  if (events.empty()) {
    for (const std::size_t entry : order) result.planes.push_back({entry, true, 0, 0, 0, {}, 0, 0});
    return result;
  }

  double tol = params.dwell_tolerance_mm;
  if (!(tol > 0.0)) {
    std::uint32_t f_lo = events.front().f_um, f_hi = events.front().f_um;
    for (const Event& e : events) {
      f_lo = std::min(f_lo, e.f_um);
      f_hi = std::max(f_hi, e.f_um);
    }
    tol = 0.02 * (f_hi - f_lo) / 1000.0;
  }

  std::vector<char> available(events.size(), 1);
  for (const std::size_t entry_idx : order) {
    const FocalCalibrationEntry& entry = calibration.entries[entry_idx];
    PlaneReport report;
    report.entry_index = entry_idx;

    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < events.size(); ++i) {
      if (!available[i]) continue;
      const double f_mm = events[i].f_um / 1000.0;
      if (std::abs(f_mm - entry.position_mm) <= tol) selected.push_back(i);
    }
    report.selected_events = selected.size();
    if (selected.empty()) {
      report.empty = true;
      result.planes.push_back(std::move(report));
      continue;
    }

    std::vector<Event> plane_events;
    plane_events.reserve(selected.size());
    std::uint64_t t_ref = std::numeric_limits<std::uint64_t>::max();
    for (const std::size_t i : selected) {
      plane_events.push_back(events[i]);
      t_ref = std::min(t_ref, events[i].t_us);
    }

    const CmaxResult cmax = cmax_linear(plane_events, width, height, params.grid, threads);
    report.vx_px_per_s = cmax.vx_px_per_s;
    report.vy_px_per_s = cmax.vy_px_per_s;

    const Image<double> sharp = sharpness_map(cmax.warped, params.window);
    double threshold;
    try {
      threshold = otsu_threshold(sharp.data);
    } catch (const DegenerateHistogramError&) {
      report.empty = true;  // flat sharpness map; nothing to isolate
      result.planes.push_back(std::move(report));
      continue;
    }
    report.threshold = threshold;

    Image<std::uint8_t> mask(sharp.width, sharp.height, 0);
    for (std::size_t i = 0; i < sharp.data.size(); ++i)
      mask.data[i] = sharp.data[i] > threshold ? 255 : 0;
    report.mask = mask;

    // Union of the above-threshold window footprints, via prefix sums over
    // the mask so coverage lookups are O(1).
    std::vector<std::uint32_t> pref((mask.width + 1) * (mask.height + 1), 0);
    for (std::size_t y = 0; y < mask.height; ++y) {
      std::uint32_t row = 0;
      for (std::size_t x = 0; x < mask.width; ++x) {
        row += mask.at(y, x) ? 1u : 0u;
        pref[(y + 1) * (mask.width + 1) + (x + 1)] = pref[y * (mask.width + 1) + (x + 1)] + row;
      }
    }
    const auto covered = [&](long py, long px) -> bool {
      if (py < 0 || px < 0 || py >= static_cast<long>(height) || px >= static_cast<long>(width))
        return false;
      const long i0 = std::max<long>(0, py - static_cast<long>(params.window) + 1);
      const long i1 = std::min<long>(static_cast<long>(mask.height) - 1, py);
      const long j0 = std::max<long>(0, px - static_cast<long>(params.window) + 1);
      const long j1 = std::min<long>(static_cast<long>(mask.width) - 1, px);
      if (i0 > i1 || j0 > j1) return false;
      const std::uint32_t s = pref[(i1 + 1) * (mask.width + 1) + (j1 + 1)] -
                              pref[i0 * (mask.width + 1) + (j1 + 1)] -
                              pref[(i1 + 1) * (mask.width + 1) + j0] + pref[i0 * (mask.width + 1) + j0];
      return s > 0;
    };

    for (const std::size_t i : selected) {
      const Event& e = events[i];
      const double dt_s = (static_cast<double>(e.t_us) - static_cast<double>(t_ref)) * 1e-6;
      const long px = std::lround(e.x - cmax.vx_px_per_s * dt_s);
      const long py = std::lround(e.y - cmax.vy_px_per_s * dt_s);
      if (covered(py, px)) {
        result.labels[i] = static_cast<int>(entry_idx);
        ++report.labeled_events;
        if (params.mode == SegmentationMode::Static) available[i] = 0;
      }
    }
    result.planes.push_back(std::move(report));
  }
  return result;
}

void write_mask_pgm(const Image<std::uint8_t>& mask, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(mask.data.data()),
           static_cast<std::streamsize>(mask.data.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

void write_labeled_events_csv(std::span<const Event> events, std::span<const int> labels,
                              const FocalCalibrationMap& calibration,
                              const std::filesystem::path& path) {
  if (events.size() != labels.size()) throw ConfigError("event and label counts differ");
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "t_us,x,y,p,f_um,label\n";
  char buf[96];
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    std::snprintf(buf, sizeof buf, "%llu,%u,%u,%d,%u,", static_cast<unsigned long long>(e.t_us),
                  unsigned{e.x}, unsigned{e.y}, int{e.polarity}, unsigned{e.f_um});
    os << buf;
    os << (labels[i] == kUnlabeled ? "unlabeled" : calibration.entries[labels[i]].label) << "\n";
  }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace cephalo
