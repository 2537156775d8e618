#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cephalo/retina.hpp"

namespace cephalo {

/// The paper's event record e_i = {x, y, p, t, f}: microsecond timestamp,
/// pixel, polarity and the focal (actuator) distance at emission time in um.
struct Event {
  std::uint64_t t_us = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t polarity = 0;  // +1 or -1
  std::uint32_t f_um = 0;

  friend bool operator==(const Event&, const Event&) = default;
};

enum class Waveform { Triangular, Sinusoidal };

struct ActuatorProfile {
  double f_min_mm = 0.0;
  double f_max_mm = 0.0;
  double frequency_hz = 0.0;
  Waveform waveform = Waveform::Triangular;
  std::uint32_t n_cycles = 1;

  double period_us() const { return 1e6 / frequency_hz; }
};

/// Actuator position at time t in [0, n_cycles/frequency]; throws OutOfSweep
/// outside that window.
double actuator_position(const ActuatorProfile& profile, double t_us);

enum class ReferenceInit { FirstFrame, Zero };

struct EventSimParams {
  double contrast = 0.2;     // log-intensity threshold C
  ReferenceInit init = ReferenceInit::FirstFrame;
  double refractory_us = 0.0;
  double log_eps = 1.0;      // counts are integers; 1 is the quantization floor
};

/// Affine actuator-position -> stack-distance mapping d = offset + scale * a.
struct DistanceMapping {
  double offset_mm = 0.0;
  double scale = 1.0;
  double to_distance(double actuator_mm) const { return offset_mm + scale * actuator_mm; }
};

struct SweepSample {
  double t_us;
  std::size_t distance_index;
};

/// Times at which the actuator crosses each stack distance, over all cycles,
/// sorted by time. Shared-boundary crossings (turnaround, cycle seam) appear
/// once. Throws MappingGap when the swept range leaves the stack's distances.
std::vector<SweepSample> sweep_schedule(const ActuatorProfile& profile, const DistanceMapping& mapping,
                                        std::span<const double> distances_mm);

/// Replays the focal sweep through a per-pixel log temporal-contrast ladder.
/// `weights` blends the per-wavelength planes into the scene intensity
/// (one-hot for a single wavelength). Events are sorted by t, ties by
/// (y, x, p); each event's f is the actuator position at its (quantized)
/// timestamp. Deterministic and worker-count independent.
std::vector<Event> synthesize_events(const IntensityStack& stack, std::span<const double> weights,
                                     const ActuatorProfile& profile, const EventSimParams& params,
                                     const DistanceMapping& mapping, unsigned threads = 1);
std::vector<Event> synthesize_events(const IntensityStack& stack, double lambda_nm,
                                     const ActuatorProfile& profile, const EventSimParams& params,
                                     const DistanceMapping& mapping, unsigned threads = 1);

struct RateHistogram {
  std::vector<double> bin_centers;
  std::vector<double> counts;
  std::size_t argmax() const;
};

/// Event counts per time bin. Pass lo/hi to pin the bin grid; defaults span
/// the data. Empty stream -> empty histogram.
RateHistogram event_rate_by_time(std::span<const Event> events, double bin_us, bool normalized = false,
                                 double lo_us = -1.0, double hi_us = -1.0);
/// Event counts per focal-distance bin, using each event's f field (um).
RateHistogram event_rate_by_focus(std::span<const Event> events, double bin_um, bool normalized = false,
                                  double lo_um = -1.0, double hi_um = -1.0);

// Event file ("CPHEVT01"): little-endian u32 count, then per event
// u64 t_us, u16 x, u16 y, i8 p, u32 f_um.
void save_events(std::span<const Event> events, const std::filesystem::path& path);
std::vector<Event> load_events(const std::filesystem::path& path);

/// CSV with header t_us,x,y,p,f_um (the interchange default; also the import
/// format for externally recorded data).
void write_events_csv(std::span<const Event> events, const std::filesystem::path& path);
std::vector<Event> read_events_csv(const std::filesystem::path& path);

}  // namespace cephalo
