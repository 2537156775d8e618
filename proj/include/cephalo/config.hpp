#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cephalo/analysis.hpp"
#include "cephalo/events.hpp"
#include "cephalo/retina.hpp"
#include "cephalo/segment.hpp"
#include "cephalo/tracer.hpp"

namespace cephalo {

struct EventsSection {
  std::filesystem::path stack_file;
  EventSimParams params;
  std::optional<DistanceMapping> mapping;          // nullopt = map sweep onto the stack range
  std::optional<std::map<double, double>> weights;  // composite lambda -> weight
};

struct AnalysisEventsInput {
  std::filesystem::path file;
  double lambda_nm;
};

struct AnalysisSection {
  std::optional<std::filesystem::path> stack_file;  // frame path
  std::vector<AnalysisEventsInput> event_inputs;    // event path
  AnalysisOptions options;
  std::size_t event_bins = 60;
  double f_lo_mm = 0.0;
  double f_hi_mm = -1.0;
  std::uint32_t trim_leading = 0;
  std::uint32_t trim_trailing = 0;
};

struct CalibrationSection {
  double p_dark_nw = 0.0;
  double reference_lambda_nm = 0.0;
  std::vector<CalibrationInput> rows;
};

struct SegmentationSection {
  std::filesystem::path events_file;
  std::size_t width = 256;
  std::size_t height = 256;
  SegmentParams params;
  FocalCalibrationMap calibration;
};

struct SpectrumComposite {
  std::string name;
  std::map<double, double> weights;  // lambda -> weight, resolved against the stack
};

struct SpectrumSection {
  std::filesystem::path stack_file;
  double eps = 1.0;
  std::optional<std::pair<double, double>> azimuth_slice_deg;
  std::vector<SpectrumComposite> composites;
};

struct RunConfig {
  int schema_version = 1;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = all hardware threads

  std::optional<GrinSphere> sphere;
  std::optional<PupilMask> pupil;
  std::optional<TraceConfig> trace;  // trace.seed mirrors the global seed
  RetinaGeometry retina;
  std::vector<double> wavelengths_nm;
  std::vector<double> distances_mm;
  std::optional<ActuatorProfile> actuator;
  std::optional<EventsSection> events;
  std::optional<AnalysisSection> analysis;
  std::optional<CalibrationSection> calibration;
  std::optional<SegmentationSection> segmentation;
  std::optional<SpectrumSection> spectrum;

  nlohmann::json raw;  // the validated config document, for the resolved copy
};

DispersionModel parse_dispersion(const nlohmann::json& j, const std::string& where);
PupilMask parse_pupil(const nlohmann::json& j, const std::string& where);

/// Parses and validates the whole config; unknown keys anywhere are errors.
RunConfig parse_config(const nlohmann::json& document);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace cephalo
