#include "cephalo/events.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "cephalo/errors.hpp"
#include "cephalo/parallel.hpp"

namespace cephalo {

namespace {

constexpr char kEventMagic[8] = {'C', 'P', 'H', 'E', 'V', 'T', '0', '1'};
constexpr double kBoundaryTol = 1e-9;

void validate_profile(const ActuatorProfile& p) {
  if (!(p.f_min_mm < p.f_max_mm)) throw ConfigError("actuator range needs f_min < f_max");
  if (!(p.frequency_hz > 0.0)) throw ConfigError("actuator frequency must be positive");
  if (p.n_cycles == 0) throw ConfigError("actuator needs at least one cycle");
}

// Time offset within the forward half-period at which the actuator passes
// position a.
double forward_offset_us(const ActuatorProfile& p, double a) {
  const double amp = p.f_max_mm - p.f_min_mm;
  const double u = std::clamp((a - p.f_min_mm) / amp, 0.0, 1.0);
  if (p.waveform == Waveform::Triangular) return u * p.period_us() / 2.0;
  return p.period_us() / (2.0 * std::numbers::pi) * std::acos(std::clamp(1.0 - 2.0 * u, -1.0, 1.0));
}

bool near(double a, double b) { return std::abs(a - b) < kBoundaryTol; }

}  // namespace

double actuator_position(const ActuatorProfile& profile, double t_us) {
  validate_profile(profile);
  const double period = profile.period_us();
  const double total = period * profile.n_cycles;
  if (t_us < 0.0 || t_us > total + 0.5)
    throw OutOfSweepError("time " + std::to_string(t_us) + " us outside the sweep");
  double phase = std::fmod(t_us, period) / period;
  const double amp = profile.f_max_mm - profile.f_min_mm;
  if (profile.waveform == Waveform::Triangular)
    return profile.f_min_mm + amp * (phase <= 0.5 ? 2.0 * phase : 2.0 * (1.0 - phase));
  return profile.f_min_mm + amp * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * phase));
}

std::vector<SweepSample> sweep_schedule(const ActuatorProfile& profile, const DistanceMapping& mapping,
                                        std::span<const double> distances_mm) {
  validate_profile(profile);
  if (!(mapping.scale > 0.0)) throw ConfigError("distance mapping scale must be positive");
  if (distances_mm.size() < 2) throw InsufficientDistancesError("sweep needs at least two stack distances");

  const double d_lo = mapping.to_distance(profile.f_min_mm);
  const double d_hi = mapping.to_distance(profile.f_max_mm);
  if (d_lo < distances_mm.front() - kBoundaryTol || d_hi > distances_mm.back() + kBoundaryTol)
    throw MappingGapError("actuator sweep [" + std::to_string(d_lo) + ", " + std::to_string(d_hi) +
                          "] mm leaves the stack distance range");

  // Actuator positions of the stack distances that fall inside the sweep.
  struct Crossing {
    double a;
    std::size_t index;
  };
  std::vector<Crossing> crossings;
  for (std::size_t i = 0; i < distances_mm.size(); ++i) {
    const double a = (distances_mm[i] - mapping.offset_mm) / mapping.scale;
    if (a >= profile.f_min_mm - kBoundaryTol && a <= profile.f_max_mm + kBoundaryTol)
      crossings.push_back({std::clamp(a, profile.f_min_mm, profile.f_max_mm), i});
  }

  const double period = profile.period_us();
  std::vector<SweepSample> schedule;
  schedule.reserve(crossings.size() * 2 * profile.n_cycles);
  for (std::uint32_t cycle = 0; cycle < profile.n_cycles; ++cycle) {
    const double t0 = cycle * period;
    for (const Crossing& c : crossings) {
      if (cycle > 0 && near(c.a, profile.f_min_mm)) continue;  // owned by the previous cycle's return
      schedule.push_back({t0 + forward_offset_us(profile, c.a), c.index});
    }
    for (auto it = crossings.rbegin(); it != crossings.rend(); ++it) {
      if (near(it->a, profile.f_max_mm)) continue;  // the turnaround is a single crossing
      schedule.push_back({t0 + period - forward_offset_us(profile, it->a), it->index});
    }
  }
  return schedule;
}

std::vector<Event> synthesize_events(const IntensityStack& stack, std::span<const double> weights,
                                     const ActuatorProfile& profile, const EventSimParams& params,
                                     const DistanceMapping& mapping, unsigned threads) {
  if (weights.size() != stack.wavelengths_nm.size())
    throw ConfigError("composite weights must match the stack wavelength count");
  if (!(params.contrast > 0.0)) throw ConfigError("contrast threshold must be positive");
  if (params.refractory_us < 0.0) throw ConfigError("refractory period must be non-negative");

  const std::vector<SweepSample> schedule = sweep_schedule(profile, mapping, stack.distances_mm);
  if (schedule.empty()) return {};

  const std::size_t n_pixels = static_cast<std::size_t>(stack.geometry.n_theta) * stack.geometry.n_phi;
  const std::size_t n_dist = stack.distances_mm.size();

  // Composite scene intensity, pixel-major so the per-pixel replay below is
  // contiguous.
  std::vector<double> composite(n_pixels * n_dist, 0.0);
  for (std::size_t il = 0; il < weights.size(); ++il) {
    if (weights[il] == 0.0) continue;
    for (std::size_t id = 0; id < n_dist; ++id) {
      const auto& counts = stack.plane(il, id).counts;
      for (std::size_t px = 0; px < n_pixels; ++px)
        composite[px * n_dist + id] += weights[il] * counts[px];
    }
  }

  // Quantized timestamps and the matching focal distance, shared per sample.
  std::vector<std::uint64_t> sample_t(schedule.size());
  std::vector<std::uint32_t> sample_f(schedule.size());
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    sample_t[i] = static_cast<std::uint64_t>(schedule[i].t_us);
    sample_f[i] = static_cast<std::uint32_t>(
        std::llround(actuator_position(profile, static_cast<double>(sample_t[i])) * 1000.0));
  }

  std::vector<std::vector<Event>> per_row(stack.geometry.n_theta);
  parallel_for_chunks(stack.geometry.n_theta, resolve_threads(threads),
                      [&](std::size_t begin, std::size_t end) {
    for (std::size_t row = begin; row < end; ++row) {
      std::vector<Event>& out = per_row[row];
      for (std::size_t col = 0; col < stack.geometry.n_phi; ++col) {
        const double* levels = &composite[(row * stack.geometry.n_phi + col) * n_dist];
        double ref = 0.0;
        std::size_t first = 0;
        if (params.init == ReferenceInit::FirstFrame) {
          ref = std::log(levels[schedule[0].distance_index] + params.log_eps);
          first = 1;
        }
        double last_emit_t = -1.0;
        bool emitted_before = false;
        for (std::size_t si = first; si < schedule.size(); ++si) {
          const double level = std::log(levels[schedule[si].distance_index] + params.log_eps);
          while (std::abs(level - ref) >= params.contrast) {
            const std::int8_t pol = level > ref ? std::int8_t{1} : std::int8_t{-1};
            ref += pol > 0 ? params.contrast : -params.contrast;
            const double t = static_cast<double>(sample_t[si]);
            if (params.refractory_us <= 0.0 || !emitted_before ||
                t - last_emit_t >= params.refractory_us) {
              out.push_back({sample_t[si], static_cast<std::uint16_t>(col),
                             static_cast<std::uint16_t>(row), pol, sample_f[si]});
              last_emit_t = t;
              emitted_before = true;
            }
          }
        }
      }
    }
  });

  std::size_t total = 0;
  for (const auto& v : per_row) total += v.size();
  std::vector<Event> events;
  events.reserve(total);
  for (const auto& v : per_row) events.insert(events.end(), v.begin(), v.end());
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.t_us != b.t_us) return a.t_us < b.t_us;
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.polarity < b.polarity;
  });
  return events;
}

std::vector<Event> synthesize_events(const IntensityStack& stack, double lambda_nm,
                                     const ActuatorProfile& profile, const EventSimParams& params,
                                     const DistanceMapping& mapping, unsigned threads) {
  std::vector<double> weights(stack.wavelengths_nm.size(), 0.0);
  weights[stack.lambda_index(lambda_nm)] = 1.0;
  return synthesize_events(stack, weights, profile, params, mapping, threads);
}

std::size_t RateHistogram::argmax() const {
  if (counts.empty()) throw AlgorithmError("argmax of an empty histogram");
  return static_cast<std::size_t>(
      std::max_element(counts.begin(), counts.end()) - counts.begin());
}

namespace {

RateHistogram histogram(std::span<const double> values, double bin, bool normalized, double lo,
                        double hi) {
  RateHistogram h;
  if (values.empty()) return h;
  if (!(bin > 0.0)) throw ConfigError("histogram bin width must be positive");
  if (hi < lo) {
    lo = *std::min_element(values.begin(), values.end());
    hi = *std::max_element(values.begin(), values.end());
  }
  const std::size_t n_bins = static_cast<std::size_t>((hi - lo) / bin) + 1;
  h.bin_centers.resize(n_bins);
  h.counts.assign(n_bins, 0.0);
  for (std::size_t i = 0; i < n_bins; ++i) h.bin_centers[i] = lo + (i + 0.5) * bin;
  for (const double v : values) {
    if (v < lo || v > hi) continue;
    std::size_t idx = static_cast<std::size_t>((v - lo) / bin);
    if (idx >= n_bins) idx = n_bins - 1;
    h.counts[idx] += 1.0;
  }
  if (normalized) {
    const double peak = *std::max_element(h.counts.begin(), h.counts.end());
    if (peak > 0.0)
      for (double& c : h.counts) c /= peak;
  }
  return h;
}

}  // namespace

RateHistogram event_rate_by_time(std::span<const Event> events, double bin_us, bool normalized,
                                 double lo_us, double hi_us) {
  std::vector<double> ts(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) ts[i] = static_cast<double>(events[i].t_us);
  return histogram(ts, bin_us, normalized, lo_us, hi_us);
}

RateHistogram event_rate_by_focus(std::span<const Event> events, double bin_um, bool normalized,
                                  double lo_um, double hi_um) {
  std::vector<double> fs(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) fs[i] = static_cast<double>(events[i].f_um);
  return histogram(fs, bin_um, normalized, lo_um, hi_um);
}

void save_events(std::span<const Event> events, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kEventMagic, 8);
  unsigned char rec[17];
  const std::uint32_t count = static_cast<std::uint32_t>(events.size());
  for (int i = 0; i < 4; ++i) rec[i] = static_cast<unsigned char>(count >> (8 * i));
  os.write(reinterpret_cast<const char*>(rec), 4);
  for (const Event& e : events) {
    for (int i = 0; i < 8; ++i) rec[i] = static_cast<unsigned char>(e.t_us >> (8 * i));
    rec[8] = static_cast<unsigned char>(e.x);
    rec[9] = static_cast<unsigned char>(e.x >> 8);
    rec[10] = static_cast<unsigned char>(e.y);
    rec[11] = static_cast<unsigned char>(e.y >> 8);
    rec[12] = static_cast<unsigned char>(e.polarity);
    for (int i = 0; i < 4; ++i) rec[13 + i] = static_cast<unsigned char>(e.f_um >> (8 * i));
    os.write(reinterpret_cast<const char*>(rec), 17);
  }
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<Event> load_events(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifactError("cannot open event file " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kEventMagic, 8) != 0)
    throw ParseError("bad magic in event file " + path.string());
  unsigned char rec[17];
  is.read(reinterpret_cast<char*>(rec), 4);
  std::uint32_t count = 0;
  for (int i = 0; i < 4; ++i) count |= static_cast<std::uint32_t>(rec[i]) << (8 * i);
  std::vector<Event> events(count);
  for (Event& e : events) {
    is.read(reinterpret_cast<char*>(rec), 17);
    if (!is) throw ParseError("truncated event file " + path.string());
    e.t_us = 0;
    for (int i = 0; i < 8; ++i) e.t_us |= static_cast<std::uint64_t>(rec[i]) << (8 * i);
    e.x = static_cast<std::uint16_t>(rec[8] | (rec[9] << 8));
    e.y = static_cast<std::uint16_t>(rec[10] | (rec[11] << 8));
    e.polarity = static_cast<std::int8_t>(rec[12]);
    e.f_um = 0;
    for (int i = 0; i < 4; ++i) e.f_um |= static_cast<std::uint32_t>(rec[13 + i]) << (8 * i);
  }
  return events;
}

void write_events_csv(std::span<const Event> events, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "t_us,x,y,p,f_um\n";
  char buf[96];
  for (const Event& e : events) {
    std::snprintf(buf, sizeof buf, "%llu,%u,%u,%d,%u\n", static_cast<unsigned long long>(e.t_us),
                  unsigned{e.x}, unsigned{e.y}, int{e.polarity}, unsigned{e.f_um});
    os << buf;
  }
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<Event> read_events_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingArtifactError("cannot open event CSV " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ParseError(path.string() + ": empty file");
  if (line == "t_us,x,y,p") throw MissingFocalFieldError(path.string() + ": events lack the f_um field");
  if (line != "t_us,x,y,p,f_um")
    throw ParseError(path.string() + ":1: expected header t_us,x,y,p,f_um");

  std::vector<Event> events;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    Event e;
    unsigned long long t;
    unsigned x, y, f;
    int p;
    if (std::sscanf(line.c_str(), "%llu,%u,%u,%d,%u", &t, &x, &y, &p, &f) != 5)
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed event row");
    if (p != 1 && p != -1)
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": polarity must be +1 or -1");
    e.t_us = t;
    e.x = static_cast<std::uint16_t>(x);
    e.y = static_cast<std::uint16_t>(y);
    e.polarity = static_cast<std::int8_t>(p);
    e.f_um = f;
    events.push_back(e);
  }
  return events;
}

}  // namespace cephalo
