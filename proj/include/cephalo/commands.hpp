#pragma once

#include <filesystem>

#include "cephalo/config.hpp"

namespace cephalo {

// Each command validates its config sections, writes its artifacts plus a
// resolved_config.json into out_dir, and reports progress on stderr. Errors
// surface as cephalo::Error whose code is the CLI exit code.

void cmd_trace(const RunConfig& config, const std::filesystem::path& out_dir);
/// `sweep` runs the same wavelength x distance sweep as `trace`.
void cmd_sweep(const RunConfig& config, const std::filesystem::path& out_dir);
void cmd_events(const RunConfig& config, const std::filesystem::path& out_dir);
void cmd_analyze(const RunConfig& config, const std::filesystem::path& out_dir);
void cmd_calibrate(const RunConfig& config, const std::filesystem::path& out_dir);
void cmd_segment(const RunConfig& config, const std::filesystem::path& out_dir);
void cmd_spectrum(const RunConfig& config, const std::filesystem::path& out_dir);

/// Mapping used by cmd_events when the config says "auto": the actuator range
/// spans the stack's distance range exactly.
DistanceMapping auto_mapping(const ActuatorProfile& profile, const IntensityStack& stack);

/// CSV columns: lambda_nm,f0_mm,fwhm_mm,dlambda_nm,eta.
void write_spectral_summary_csv(std::span<const SpectralSummary> summary,
                                const std::filesystem::path& path);

/// CSV mirroring the calibration table columns.
void write_calibration_csv(std::span<const CalibrationRow> rows, const std::filesystem::path& path);

}  // namespace cephalo
