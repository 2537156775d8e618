#include "cephalo/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

#include "cephalo/errors.hpp"

namespace cephalo {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  require_object(j, where);
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

double get_number(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + std::string(key) + "'");
  if (!j[key].is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return j[key].get<double>();
}

double get_number_or(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  return j[key].get<double>();
}

std::string get_string(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key) || !j[key].is_string())
    throw ConfigError(where + ": missing string key '" + std::string(key) + "'");
  return j[key].get<std::string>();
}

Vec3 get_vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

WavelengthRange get_range(const json& j, const std::string& where, WavelengthRange fallback) {
  if (!j.contains("range_nm")) return fallback;
  const json& r = j["range_nm"];
  if (!r.is_array() || r.size() != 2) throw ConfigError(where + ".range_nm: expected [min, max]");
  WavelengthRange out{r[0].get<double>(), r[1].get<double>()};
  if (!(out.min_nm < out.max_nm)) throw ConfigError(where + ".range_nm: min must be below max");
  return out;
}

std::vector<double> parse_value_list(const json& j, const std::string& where) {
  std::vector<double> out;
  if (j.is_array()) {
    for (const auto& v : j) out.push_back(v.get<double>());
  } else if (j.is_object()) {
    check_keys(j, where, {"from", "to", "count"});
    const double from = get_number(j, where, "from");
    const double to = get_number(j, where, "to");
    const auto count = static_cast<std::size_t>(get_number(j, where, "count"));
    if (count < 1) throw ConfigError(where + ".count: must be at least 1");
    if (count == 1) {
      out.push_back(from);
    } else {
      for (std::size_t i = 0; i < count; ++i)
        out.push_back(from + (to - from) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
  } else {
    throw ConfigError(where + ": expected an array or {from, to, count}");
  }
  if (out.empty()) throw ConfigError(where + ": must not be empty");
  for (std::size_t i = 1; i < out.size(); ++i)
    if (!(out[i] > out[i - 1])) throw ConfigError(where + ": values must be strictly increasing");
  return out;
}

std::map<double, double> parse_weight_map(const json& j, const std::string& where) {
  require_object(j, where);
  std::map<double, double> out;
  for (const auto& [key, value] : j.items()) {
    try {
      out[std::stod(key)] = value.get<double>();
    } catch (const std::invalid_argument&) {
      throw ConfigError(where + ": weight keys must be wavelengths in nm, got '" + key + "'");
    }
  }
  if (out.empty()) throw ConfigError(where + ": needs at least one wavelength weight");
  return out;
}

}  // namespace

DispersionModel parse_dispersion(const json& j, const std::string& where) {
  require_object(j, where);
  if (j.contains("preset")) {
    check_keys(j, where, {"preset"});
    const std::string name = j["preset"].get<std::string>();
    if (name == "nbk7") return presets::nbk7();
    if (name == "vacuum") return presets::vacuum();
    if (name == "synthetic_core") return presets::synthetic_core();
    if (name == "synthetic_outer") return presets::synthetic_outer();
    if (name == "synthetic_medium") return presets::synthetic_medium();
    throw ConfigError(where + ".preset: unknown preset '" + name + "'");
  }
  const std::string kind = get_string(j, where, "kind");
  if (kind == "constant") {
    check_keys(j, where, {"kind", "n", "range_nm"});
    return DispersionModel::constant(get_number(j, where, "n"), get_range(j, where, {1.0, 1e9}));
  }
  if (kind == "cauchy") {
    check_keys(j, where, {"kind", "a", "b_um2", "range_nm"});
    if (!j.contains("range_nm")) throw ConfigError(where + ": cauchy model needs range_nm");
    return DispersionModel::cauchy(get_number(j, where, "a"), get_number(j, where, "b_um2"),
                                   get_range(j, where, {}));
  }
  if (kind == "sellmeier") {
    check_keys(j, where, {"kind", "b", "c_um2", "range_nm"});
    if (!j.contains("range_nm")) throw ConfigError(where + ": sellmeier model needs range_nm");
    const json& b = j["b"];
    const json& c = j["c_um2"];
    if (!b.is_array() || b.size() != 3 || !c.is_array() || c.size() != 3)
      throw ConfigError(where + ": sellmeier needs three b and three c_um2 coefficients");
    return DispersionModel::sellmeier({b[0].get<double>(), b[1].get<double>(), b[2].get<double>()},
                                      {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()},
                                      get_range(j, where, {}));
  }
  if (kind == "tabulated") {
    check_keys(j, where, {"kind", "points"});
    if (!j.contains("points") || !j["points"].is_array())
      throw ConfigError(where + ": tabulated model needs a points array");
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : j["points"]) {
      if (!p.is_array() || p.size() != 2) throw ConfigError(where + ".points: expected [lambda_nm, n] pairs");
      pts.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    return DispersionModel::tabulated(std::move(pts));
  }
  throw ConfigError(where + ".kind: unknown dispersion kind '" + kind + "'");
}

PupilMask parse_pupil(const json& j, const std::string& where) {
  const std::string shape = get_string(j, where, "shape");
  if (shape == "full_aperture") {
    check_keys(j, where, {"shape"});
    return PupilMask::full_aperture();
  }
  if (shape == "circular_hole") {
    check_keys(j, where, {"shape", "half_angle_deg", "center_axis"});
    Vec3 axis{0.0, 0.0, 1.0};
    if (j.contains("center_axis")) axis = get_vec3(j["center_axis"], where + ".center_axis");
    return PupilMask::circular_hole(get_number(j, where, "half_angle_deg"), axis);
  }
  if (shape == "annulus") {
    check_keys(j, where, {"shape", "inner_deg", "outer_deg"});
    return PupilMask::annulus(get_number(j, where, "inner_deg"), get_number(j, where, "outer_deg"));
  }
  if (shape == "off_axis_slit") {
    check_keys(j, where, {"shape", "width_deg", "offset_deg", "orientation_deg"});
    return PupilMask::off_axis_slit(get_number(j, where, "width_deg"),
                                    get_number(j, where, "offset_deg"),
                                    get_number_or(j, "orientation_deg", 0.0));
  }
  if (shape == "polyline_band") {
    check_keys(j, where, {"shape", "vertices_az_polar_deg", "band_width_deg"});
    if (!j.contains("vertices_az_polar_deg") || !j["vertices_az_polar_deg"].is_array())
      throw ConfigError(where + ": polyline band needs vertices_az_polar_deg");
    std::vector<std::array<double, 2>> verts;
    for (const auto& v : j["vertices_az_polar_deg"]) {
      if (!v.is_array() || v.size() != 2)
        throw ConfigError(where + ".vertices_az_polar_deg: expected [azimuth, polar] pairs");
      verts.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    return PupilMask::polyline_band(std::move(verts), get_number(j, where, "band_width_deg"));
  }
  throw ConfigError(where + ".shape: unknown pupil shape '" + shape + "'");
}

RunConfig parse_config(const json& document) {
  check_keys(document, "config",
             {"schema_version", "seed", "threads", "sphere", "pupil", "trace", "retina", "sweep",
              "actuator", "events", "analysis", "calibration", "segmentation", "spectrum"});

  RunConfig cfg;
  cfg.raw = document;
  if (!document.contains("schema_version"))
    throw ConfigError("config: missing schema_version");
  cfg.schema_version = document["schema_version"].get<int>();
  if (cfg.schema_version != 1)
    throw ConfigError("config.schema_version: unsupported version " + std::to_string(cfg.schema_version));
  cfg.seed = document.value("seed", 0ull);
  cfg.threads = document.value("threads", 0u);

  if (document.contains("sphere")) {
    const json& s = document["sphere"];
    check_keys(s, "sphere", {"radius_mm", "core", "outer", "medium"});
    const double radius = get_number(s, "sphere", "radius_mm");
    if (!(radius > 0.0)) throw ConfigError("sphere.radius_mm: must be positive");
    if (!s.contains("core") || !s.contains("outer") || !s.contains("medium"))
      throw ConfigError("sphere: needs core, outer, and medium dispersion models");
    cfg.sphere = GrinSphere{radius, parse_dispersion(s["core"], "sphere.core"),
                            parse_dispersion(s["outer"], "sphere.outer"),
                            parse_dispersion(s["medium"], "sphere.medium")};
  }

  if (document.contains("pupil")) cfg.pupil = parse_pupil(document["pupil"], "pupil");

  if (document.contains("trace")) {
    const json& t = document["trace"];
    check_keys(t, "trace", {"n_rays", "ds_mm", "source_position_mm", "emission"});
    TraceConfig tc;
    tc.n_rays = static_cast<std::size_t>(get_number_or(t, "n_rays", 0.0));
    tc.ds_mm = get_number(t, "trace", "ds_mm");
    if (!(tc.ds_mm > 0.0)) throw ConfigError("trace.ds_mm: must be positive");
    if (cfg.sphere && tc.ds_mm > cfg.sphere->radius_mm / 100.0)
      throw ConfigError("trace.ds_mm: must not exceed sphere.radius_mm / 100");
    if (!t.contains("source_position_mm"))
      throw ConfigError("trace: missing source_position_mm");
    tc.source_position_mm = get_vec3(t["source_position_mm"], "trace.source_position_mm");
    if (t.contains("emission")) {
      const json& e = t["emission"];
      check_keys(e, "trace.emission", {"scheme", "half_angle_deg", "n_per_axis"});
      const std::string scheme = get_string(e, "trace.emission", "scheme");
      if (scheme == "fibonacci_cone") {
        tc.emission.kind = EmissionScheme::Kind::FibonacciCone;
      } else if (scheme == "uniform_grid") {
        tc.emission.kind = EmissionScheme::Kind::UniformGrid;
        tc.emission.n_per_axis = static_cast<std::uint32_t>(get_number(e, "trace.emission", "n_per_axis"));
      } else {
        throw ConfigError("trace.emission.scheme: unknown scheme '" + scheme + "'");
      }
      tc.emission.half_angle_deg = get_number_or(e, "half_angle_deg", 0.0);
    }
    if (tc.emission.kind == EmissionScheme::Kind::FibonacciCone && tc.n_rays == 0)
      throw ConfigError("trace.n_rays: must be positive");
    tc.seed = cfg.seed;
    cfg.trace = tc;
  }

  if (document.contains("retina")) {
    const json& r = document["retina"];
    check_keys(r, "retina", {"n_theta", "n_phi", "max_polar_deg"});
    cfg.retina.n_theta = static_cast<std::uint32_t>(get_number_or(r, "n_theta", 256.0));
    cfg.retina.n_phi = static_cast<std::uint32_t>(get_number_or(r, "n_phi", 256.0));
    cfg.retina.max_polar_deg = get_number_or(r, "max_polar_deg", 90.0);
    if (cfg.retina.n_theta < 8 || cfg.retina.n_phi < 8)
      throw ConfigError("retina: grid must be at least 8x8");
    if (!(cfg.retina.max_polar_deg > 0.0) || cfg.retina.max_polar_deg > 180.0)
      throw ConfigError("retina.max_polar_deg: must be in (0, 180]");
  }

  if (document.contains("sweep")) {
    const json& s = document["sweep"];
    check_keys(s, "sweep", {"wavelengths_nm", "distances_mm"});
    if (s.contains("wavelengths_nm"))
      cfg.wavelengths_nm = parse_value_list(s["wavelengths_nm"], "sweep.wavelengths_nm");
    if (s.contains("distances_mm"))
      cfg.distances_mm = parse_value_list(s["distances_mm"], "sweep.distances_mm");
  }

  if (document.contains("actuator")) {
    const json& a = document["actuator"];
    check_keys(a, "actuator", {"f_min_mm", "f_max_mm", "frequency_hz", "waveform", "n_cycles"});
    ActuatorProfile p;
    p.f_min_mm = get_number(a, "actuator", "f_min_mm");
    p.f_max_mm = get_number(a, "actuator", "f_max_mm");
    if (!(p.f_min_mm < p.f_max_mm))
      throw ConfigError("actuator.f_min_mm/f_max_mm: range needs f_min < f_max");
    p.frequency_hz = get_number(a, "actuator", "frequency_hz");
    if (!(p.frequency_hz > 0.0)) throw ConfigError("actuator.frequency_hz: must be positive");
    const std::string waveform = a.value("waveform", std::string("triangular"));
    if (waveform == "triangular")
      p.waveform = Waveform::Triangular;
    else if (waveform == "sinusoidal")
      p.waveform = Waveform::Sinusoidal;
    else
      throw ConfigError("actuator.waveform: unknown waveform '" + waveform + "'");
    p.n_cycles = static_cast<std::uint32_t>(get_number_or(a, "n_cycles", 1.0));
    if (p.n_cycles == 0) throw ConfigError("actuator.n_cycles: must be at least 1");
    cfg.actuator = p;
  }

  if (document.contains("events")) {
    const json& e = document["events"];
    check_keys(e, "events",
               {"stack_file", "contrast", "ref_init", "refractory_us", "log_eps", "mapping", "weights"});
    EventsSection sec;
    sec.stack_file = get_string(e, "events", "stack_file");
    sec.params.contrast = get_number_or(e, "contrast", 0.2);
    if (!(sec.params.contrast > 0.0)) throw ConfigError("events.contrast: must be positive");
    const std::string init = e.value("ref_init", std::string("first_frame"));
    if (init == "first_frame")
      sec.params.init = ReferenceInit::FirstFrame;
    else if (init == "zero")
      sec.params.init = ReferenceInit::Zero;
    else
      throw ConfigError("events.ref_init: expected 'first_frame' or 'zero'");
    sec.params.refractory_us = get_number_or(e, "refractory_us", 0.0);
    if (sec.params.refractory_us < 0.0) throw ConfigError("events.refractory_us: must be non-negative");
    sec.params.log_eps = get_number_or(e, "log_eps", 1.0);
    if (!(sec.params.log_eps > 0.0)) throw ConfigError("events.log_eps: must be positive");
    if (e.contains("mapping") && !e["mapping"].is_string()) {
      const json& m = e["mapping"];
      check_keys(m, "events.mapping", {"offset_mm", "scale"});
      DistanceMapping dm;
      dm.offset_mm = get_number_or(m, "offset_mm", 0.0);
      dm.scale = get_number_or(m, "scale", 1.0);
      if (!(dm.scale > 0.0)) throw ConfigError("events.mapping.scale: must be positive");
      sec.mapping = dm;
    } else if (e.contains("mapping") && e["mapping"].get<std::string>() != "auto") {
      throw ConfigError("events.mapping: expected 'auto' or {offset_mm, scale}");
    }
    if (e.contains("weights")) sec.weights = parse_weight_map(e["weights"], "events.weights");
    cfg.events = sec;
  }

  if (document.contains("analysis")) {
    const json& a = document["analysis"];
    check_keys(a, "analysis",
               {"stack_file", "events", "smoothing_window", "eta_max_lambda_nm", "slope_cap_nm_per_mm",
                "event_bins", "f_lo_mm", "f_hi_mm", "trim_leading", "trim_trailing"});
    AnalysisSection sec;
    if (a.contains("stack_file")) sec.stack_file = get_string(a, "analysis", "stack_file");
    if (a.contains("events")) {
      for (const auto& item : a["events"]) {
        check_keys(item, "analysis.events[]", {"file", "lambda_nm"});
        sec.event_inputs.push_back({std::filesystem::path(get_string(item, "analysis.events[]", "file")),
                                    get_number(item, "analysis.events[]", "lambda_nm")});
      }
    }
    sec.options.smoothing_window = static_cast<int>(get_number_or(a, "smoothing_window", 5.0));
    if (sec.options.smoothing_window < 1 || sec.options.smoothing_window % 2 == 0)
      throw ConfigError("analysis.smoothing_window: must be odd and >= 1");
    sec.options.eta_max_lambda_nm = get_number_or(a, "eta_max_lambda_nm", 700.0);
    sec.options.slope_cap_nm_per_mm = get_number_or(a, "slope_cap_nm_per_mm", 1e6);
    sec.event_bins = static_cast<std::size_t>(get_number_or(a, "event_bins", 60.0));
    sec.f_lo_mm = get_number_or(a, "f_lo_mm", 0.0);
    sec.f_hi_mm = get_number_or(a, "f_hi_mm", -1.0);
    sec.trim_leading = static_cast<std::uint32_t>(get_number_or(a, "trim_leading", 0.0));
    sec.trim_trailing = static_cast<std::uint32_t>(get_number_or(a, "trim_trailing", 0.0));
    cfg.analysis = sec;
  }

  if (document.contains("calibration")) {
    const json& c = document["calibration"];
    check_keys(c, "calibration", {"p_dark_nw", "reference_lambda_nm", "rows"});
    CalibrationSection sec;
    sec.p_dark_nw = get_number(c, "calibration", "p_dark_nw");
    sec.reference_lambda_nm = get_number(c, "calibration", "reference_lambda_nm");
    if (!c.contains("rows") || !c["rows"].is_array() || c["rows"].empty())
      throw ConfigError("calibration.rows: needs [lambda_nm, qe, p_full_nw] rows");
    for (const auto& r : c["rows"]) {
      if (!r.is_array() || r.size() != 3)
        throw ConfigError("calibration.rows: each row is [lambda_nm, qe, p_full_nw]");
      sec.rows.push_back({r[0].get<double>(), r[1].get<double>(), r[2].get<double>()});
    }
    cfg.calibration = sec;
  }

  if (document.contains("segmentation")) {
    const json& s = document["segmentation"];
    check_keys(s, "segmentation",
               {"events_file", "width", "height", "window", "mode", "cmax", "dwell_tolerance_mm",
                "calibration", "visit_order"});
    SegmentationSection sec;
    sec.events_file = get_string(s, "segmentation", "events_file");
    sec.width = static_cast<std::size_t>(get_number_or(s, "width", 256.0));
    sec.height = static_cast<std::size_t>(get_number_or(s, "height", 256.0));
    sec.params.window = static_cast<std::size_t>(get_number_or(s, "window", 30.0));
    const std::string mode = s.value("mode", std::string("static"));
    if (mode == "static")
      sec.params.mode = SegmentationMode::Static;
    else if (mode == "dynamic")
      sec.params.mode = SegmentationMode::Dynamic;
    else
      throw ConfigError("segmentation.mode: expected 'static' or 'dynamic'");
    if (s.contains("cmax")) {
      const json& g = s["cmax"];
      check_keys(g, "segmentation.cmax", {"v_min_px_per_s", "v_max_px_per_s", "n_per_axis"});
      sec.params.grid.v_min_px_per_s = get_number_or(g, "v_min_px_per_s", -100.0);
      sec.params.grid.v_max_px_per_s = get_number_or(g, "v_max_px_per_s", 100.0);
      sec.params.grid.n_per_axis = static_cast<std::size_t>(get_number_or(g, "n_per_axis", 21.0));
    }
    sec.params.dwell_tolerance_mm = get_number_or(s, "dwell_tolerance_mm", 0.0);
    if (!s.contains("calibration") || !s["calibration"].is_array() || s["calibration"].empty())
      throw ConfigError("segmentation.calibration: needs entries [{label, lambda_nm, position_mm}]");
    for (const auto& entry : s["calibration"]) {
      check_keys(entry, "segmentation.calibration[]", {"label", "lambda_nm", "position_mm"});
      sec.calibration.entries.push_back({get_string(entry, "segmentation.calibration[]", "label"),
                                         get_number(entry, "segmentation.calibration[]", "lambda_nm"),
                                         get_number(entry, "segmentation.calibration[]", "position_mm")});
    }
    if (s.contains("visit_order"))
      for (const auto& v : s["visit_order"])
        sec.calibration.visit_order.push_back(v.get<std::size_t>());
    cfg.segmentation = sec;
  }

  if (document.contains("spectrum")) {
    const json& sp = document["spectrum"];
    check_keys(sp, "spectrum", {"stack_file", "eps", "azimuth_slice_deg", "composites"});
    SpectrumSection sec;
    sec.stack_file = get_string(sp, "spectrum", "stack_file");
    sec.eps = get_number_or(sp, "eps", 1.0);
    if (sp.contains("azimuth_slice_deg")) {
      const json& sl = sp["azimuth_slice_deg"];
      if (!sl.is_array() || sl.size() != 2)
        throw ConfigError("spectrum.azimuth_slice_deg: expected [lo, hi] degrees");
      sec.azimuth_slice_deg = {sl[0].get<double>(), sl[1].get<double>()};
    }
    if (!sp.contains("composites") || !sp["composites"].is_array() || sp["composites"].empty())
      throw ConfigError("spectrum.composites: needs at least one composite");
    for (const auto& comp : sp["composites"]) {
      check_keys(comp, "spectrum.composites[]", {"name", "weights"});
      SpectrumComposite c;
      c.name = get_string(comp, "spectrum.composites[]", "name");
      if (!comp.contains("weights"))
        throw ConfigError("spectrum.composites[]: missing weights");
      c.weights = parse_weight_map(comp["weights"], "spectrum.composites[].weights");
      sec.composites.push_back(std::move(c));
    }
    cfg.spectrum = sec;
  }

  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file " + path.string());
  json document = json::parse(is, nullptr, false);
  if (document.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
  return parse_config(document);
}

}  // namespace cephalo
