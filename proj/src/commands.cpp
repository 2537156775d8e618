#include "cephalo/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "cephalo/errors.hpp"

namespace cephalo {

namespace {

namespace fs = std::filesystem;

void prepare_out_dir(const RunConfig& config, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string());
  std::ofstream os(out_dir / "resolved_config.json");
  if (!os) throw IoError("cannot write resolved config in " + out_dir.string());
  nlohmann::json resolved = config.raw;
  resolved["seed"] = config.seed;
  resolved["threads"] = config.threads;
  os << resolved.dump(2) << "\n";
}

const GrinSphere& need_sphere(const RunConfig& c) {
  if (!c.sphere) throw ConfigError("sphere: section required for this command");
  return *c.sphere;
}

const PupilMask& need_pupil(const RunConfig& c) {
  if (!c.pupil) throw ConfigError("pupil: section required for this command");
  return *c.pupil;
}

TraceConfig need_trace(const RunConfig& c) {
  if (!c.trace) throw ConfigError("trace: section required for this command");
  TraceConfig t = *c.trace;
  t.seed = c.seed;
  return t;
}

const ActuatorProfile& need_actuator(const RunConfig& c) {
  if (!c.actuator) throw ConfigError("actuator: section required for this command");
  return *c.actuator;
}

IntensityStack load_stack_artifact(const fs::path& path) {
  if (!fs::exists(path)) throw MissingArtifactError("stack file " + path.string() + " does not exist");
  return load_stack(path);
}

std::vector<Event> load_events_artifact(const fs::path& path) {
  if (!fs::exists(path)) throw MissingArtifactError("event file " + path.string() + " does not exist");
  if (path.extension() == ".csv") return read_events_csv(path);
  return load_events(path);
}

std::string lambda_tag(double lambda_nm) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", lambda_nm);
  return buf;
}

std::vector<double> resolve_weights(const std::map<double, double>& by_lambda,
                                    const IntensityStack& stack, const std::string& where) {
  std::vector<double> weights(stack.wavelengths_nm.size(), 0.0);
  for (const auto& [lambda, w] : by_lambda) {
    bool found = false;
    for (std::size_t i = 0; i < stack.wavelengths_nm.size(); ++i) {
      if (stack.wavelengths_nm[i] == lambda) {
        weights[i] = w;
        found = true;
        break;
      }
    }
    if (!found)
      throw ConfigError(where + ": wavelength " + lambda_tag(lambda) + " nm is not in the stack");
  }
  return weights;
}

void run_sweep(const RunConfig& config, const fs::path& out_dir) {
  prepare_out_dir(config, out_dir);
  if (config.wavelengths_nm.empty()) throw ConfigError("sweep.wavelengths_nm: required");
  if (config.distances_mm.empty()) throw ConfigError("sweep.distances_mm: required");

  const IntensityStack stack =
      sweep(need_sphere(config), need_pupil(config), need_trace(config), config.retina,
            config.wavelengths_nm, config.distances_mm, config.threads);
  save_stack(stack, out_dir / "stack.cphstk");
  write_peak_profile_csv(stack, out_dir / "peak_profiles.csv");

  for (const auto& tally : stack.metadata["ray_tallies"]) {
    std::cerr << "lambda " << tally["lambda_nm"] << " nm: emitted " << tally["emitted"] << ", blocked "
              << tally["blocked"] << ", totally_reflected " << tally["totally_reflected"]
              << ", escaped " << tally["escaped"] << ", exited " << tally["exited"] << "\n";
  }
}

}  // namespace

DistanceMapping auto_mapping(const ActuatorProfile& profile, const IntensityStack& stack) {
  DistanceMapping m;
  m.scale = (stack.distances_mm.back() - stack.distances_mm.front()) /
            (profile.f_max_mm - profile.f_min_mm);
  m.offset_mm = stack.distances_mm.front() - m.scale * profile.f_min_mm;
  return m;
}

void cmd_trace(const RunConfig& config, const fs::path& out_dir) { run_sweep(config, out_dir); }
void cmd_sweep(const RunConfig& config, const fs::path& out_dir) { run_sweep(config, out_dir); }

void cmd_events(const RunConfig& config, const fs::path& out_dir) {
  prepare_out_dir(config, out_dir);
  if (!config.events) throw ConfigError("events: section required for this command");
  const EventsSection& sec = *config.events;
  const ActuatorProfile& profile = need_actuator(config);

  const IntensityStack stack = load_stack_artifact(sec.stack_file);
  const DistanceMapping mapping = sec.mapping ? *sec.mapping : auto_mapping(profile, stack);

  if (sec.weights) {
    const std::vector<double> weights = resolve_weights(*sec.weights, stack, "events.weights");
    const std::vector<Event> events =
        synthesize_events(stack, weights, profile, sec.params, mapping, config.threads);
    save_events(events, out_dir / "events_composite.cphevt");
    write_events_csv(events, out_dir / "events_composite.csv");
    std::cerr << "composite: " << events.size() << " events\n";
  } else {
    for (const double lambda : stack.wavelengths_nm) {
      const std::vector<Event> events =
          synthesize_events(stack, lambda, profile, sec.params, mapping, config.threads);
      const std::string tag = lambda_tag(lambda);
      save_events(events, out_dir / ("events_" + tag + "nm.cphevt"));
      write_events_csv(events, out_dir / ("events_" + tag + "nm.csv"));
      std::cerr << "lambda " << tag << " nm: " << events.size() << " events\n";
    }
  }
}

void cmd_analyze(const RunConfig& config, const fs::path& out_dir) {
  prepare_out_dir(config, out_dir);
  if (!config.analysis) throw ConfigError("analysis: section required for this command");
  const AnalysisSection& sec = *config.analysis;

  std::vector<SpectralProfile> profiles;
  if (sec.stack_file) {
    profiles = profiles_from_stack(load_stack_artifact(*sec.stack_file));
  } else if (!sec.event_inputs.empty()) {
    EventProfileOptions opt;
    opt.f_lo_mm = sec.f_lo_mm;
    opt.f_hi_mm = sec.f_hi_mm;
    opt.n_bins = sec.event_bins;
    if (sec.trim_leading > 0 || sec.trim_trailing > 0) {
      const ActuatorProfile& profile = need_actuator(config);
      opt.period_us = profile.period_us();
      opt.n_cycles = profile.n_cycles;
      opt.trim_leading = sec.trim_leading;
      opt.trim_trailing = sec.trim_trailing;
    }
    for (const AnalysisEventsInput& input : sec.event_inputs)
      profiles.push_back(profile_from_events(load_events_artifact(input.file), input.lambda_nm, opt));
  } else {
    throw ConfigError("analysis: needs stack_file or events inputs");
  }

  const std::vector<SpectralSummary> summary = spectral_summary(profiles, sec.options);
  write_spectral_summary_csv(summary, out_dir / "spectral_analysis.csv");
}

void cmd_calibrate(const RunConfig& config, const fs::path& out_dir) {
  prepare_out_dir(config, out_dir);
  if (!config.calibration) throw ConfigError("calibration: section required for this command");
  const CalibrationSection& sec = *config.calibration;
  const std::vector<CalibrationRow> rows =
      calibration_targets(sec.rows, sec.p_dark_nw, sec.reference_lambda_nm);
  write_calibration_csv(rows, out_dir / "calibration.csv");
}

void cmd_segment(const RunConfig& config, const fs::path& out_dir) {
  prepare_out_dir(config, out_dir);
  if (!config.segmentation) throw ConfigError("segmentation: section required for this command");
  const SegmentationSection& sec = *config.segmentation;

  const std::vector<Event> events = load_events_artifact(sec.events_file);
  const SegmentationResult result =
      segment_sweep(events, sec.width, sec.height, sec.calibration, sec.params, config.threads);

  write_labeled_events_csv(events, result.labels, sec.calibration, out_dir / "labeled_events.csv");
  for (const PlaneReport& plane : result.planes) {
    const FocalCalibrationEntry& entry = sec.calibration.entries[plane.entry_index];
    if (plane.empty) {
      std::cerr << "plane '" << entry.label << "': empty, skipped\n";
      continue;
    }
    write_mask_pgm(plane.mask, out_dir / ("mask_" + entry.label + ".pgm"));
    std::cerr << "plane '" << entry.label << "': " << plane.labeled_events << "/"
              << plane.selected_events << " events labeled, v=(" << plane.vx_px_per_s << ","
              << plane.vy_px_per_s << ") px/s\n";
  }
}

void cmd_spectrum(const RunConfig& config, const fs::path& out_dir) {
  prepare_out_dir(config, out_dir);
  if (!config.spectrum) throw ConfigError("spectrum: section required for this command");
  const SpectrumSection& sec = *config.spectrum;

  const IntensityStack stack = load_stack_artifact(sec.stack_file);
  for (const SpectrumComposite& comp : sec.composites) {
    const std::vector<double> weights =
        resolve_weights(comp.weights, stack, "spectrum.composites[" + comp.name + "]");
    const GradientMap map = radial_log_gradient(stack, weights, sec.eps, sec.azimuth_slice_deg);

    std::ofstream os(out_dir / ("gradient_" + comp.name + ".csv"));
    if (!os) throw IoError("cannot write gradient map for composite " + comp.name);
    os << "distance_mm";
    for (std::size_t r = 0; r < map.n_radial; ++r) os << ",theta_bin_" << r;
    os << "\n";
    char buf[64];
    for (std::size_t id = 0; id < map.distances_mm.size(); ++id) {
      std::snprintf(buf, sizeof buf, "%.9g", map.distances_mm[id]);
      os << buf;
      for (std::size_t r = 0; r < map.n_radial; ++r) {
        std::snprintf(buf, sizeof buf, ",%.9g", map.values[id * map.n_radial + r]);
        os << buf;
      }
      os << "\n";
    }
  }
}

void write_spectral_summary_csv(std::span<const SpectralSummary> summary,
                                const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "lambda_nm,f0_mm,fwhm_mm,dlambda_nm,eta\n";
  char buf[160];
  for (const SpectralSummary& s : summary) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g\n", s.lambda_nm, s.f0_mm, s.fwhm_mm,
                  s.dlambda_nm, s.eta);
    os << buf;
  }
  if (!os) throw IoError("failed writing " + path.string());
}

void write_calibration_csv(std::span<const CalibrationRow> rows, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "lambda_nm,qe,p_full_nw,p_dark_nw,p_adjusted_nw,p_target_nw\n";
  char buf[160];
  for (const CalibrationRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.lambda_nm, r.qe, r.p_full_nw,
                  r.p_dark_nw, r.p_adjusted_nw, r.p_target_nw);
    os << buf;
  }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace cephalo
