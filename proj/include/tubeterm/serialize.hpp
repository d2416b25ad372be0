#pragma once

// JSON and CSV for reports, plus JSON parsers for phantom, perturbation and
// pipeline configurations.
//
// JSON numbers are written with shortest round-trip precision. CSV numbers
// use 4 fixed decimals. Object keys keep insertion order, so output bytes
// depend only on the values.

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tubeterm/errors.hpp"
#include "tubeterm/harness.hpp"
#include "tubeterm/metrics.hpp"
#include "tubeterm/nifti_io.hpp"
#include "tubeterm/phantom.hpp"

namespace tubeterm {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// writers

inline Json to_json(const Index3& p) { return Json::array({p.x, p.y, p.z}); }

inline Json to_json(const Box& b) {
  Json j;
  j["lo"] = to_json(b.lo);
  j["hi"] = to_json(b.hi);
  return j;
}

inline Json to_json(const ConfusionCounts& c) {
  Json j;
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["fn"] = c.fn;
  j["tn"] = c.tn;
  return j;
}

inline Json optional_number(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

inline Json to_json(const MetricReport& r) {
  Json j;
  j["d"] = r.params.d;
  j["counts"] = to_json(r.counts);
  j["tdice"] = r.tdice;
  j["tprec"] = r.tprec;
  j["tsens"] = r.tsens;
  j["cldice"] = r.cldice;
  j["dsc"] = r.dsc;
  j["fpsr"] = r.fpsr;
  j["fnsr"] = r.fnsr;
  j["hd_mm"] = optional_number(r.hd_mm);
  return j;
}

inline Json to_json(const OverlapReport& r) {
  Json j;
  j["counts"] = to_json(r.counts);
  j["dsc"] = r.dsc;
  j["fpsr"] = r.fpsr;
  j["fnsr"] = r.fnsr;
  j["hd_mm"] = optional_number(r.hd_mm);
  return j;
}

inline Json to_json(const DistractionReports& r) {
  Json j;
  j["false_positive"] = to_json(r.false_positive);
  j["false_negative"] = to_json(r.false_negative);
  return j;
}

inline Json to_json(std::span<const Index3> points) {
  Json j = Json::array();
  for (const auto& p : points) j.push_back(to_json(p));
  return j;
}

inline Json to_json(const StageReport& r, bool with_timings = false) {
  Json stages = Json::array();
  for (const auto& s : r.stages) {
    Json j;
    j["stage"] = stage_name(s.stage);
    j["metrics"] = to_json(s.metrics);
    if (with_timings) j["seconds"] = s.seconds;
    stages.push_back(std::move(j));
  }
  return stages;
}

inline Json to_json(const PipelineResult& r, bool with_timings = false) {
  Json j;
  j["roi"] = to_json(r.roi);
  Json windows = Json::array();
  for (const auto& w : r.fine_windows) windows.push_back(to_json(w));
  j["fine_windows"] = std::move(windows);
  j["stages"] = to_json(r.report, with_timings);
  return j;
}

/// Fixed 4-decimal formatting; `percent` scales by 100 first.
inline std::string fixed4(double v, bool percent = false) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", percent ? v * 100.0 : v);
  return buf;
}

inline std::string csv_header(bool with_stage) {
  return std::string(with_stage ? "stage," : "") + "tdice,cldice,dsc,fpsr,fnsr,hd_mm";
}

/// Column order: tDice, clDice, DSC, FPSR, FNSR, HD. An undefined HD is an empty field.
inline std::string csv_row(const MetricReport& r, bool percent = false) {
  std::string s = fixed4(r.tdice, percent) + "," + fixed4(r.cldice, percent) + "," +
                  fixed4(r.dsc, percent) + "," + fixed4(r.fpsr, percent) + "," +
                  fixed4(r.fnsr, percent) + ",";
  if (r.hd_mm) s += fixed4(*r.hd_mm);
  return s;
}

inline std::string to_csv(const StageReport& r, bool percent = false) {
  std::string out = csv_header(true) + "\n";
  for (const auto& s : r.stages)
    out += std::string(stage_name(s.stage)) + "," + csv_row(s.metrics, percent) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// parsers; malformed documents raise FormatError

namespace detail {

[[noreturn]] inline void bad(const std::string& field, const std::string& what) {
  throw FormatError(field, what);
}

template <class T>
T get_as(const Json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    bad(field, e.what());
  }
}

template <class T>
T value_or(const Json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  return get_as<T>(obj[key], key);
}

inline void require_object(const Json& j, const std::string& field) {
  if (!j.is_object()) bad(field, "expected an object");
}

inline std::array<double, 3> triple(const Json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) bad(field, "expected an array of 3 numbers");
  return {get_as<double>(j[0], field), get_as<double>(j[1], field), get_as<double>(j[2], field)};
}

inline Index3 index_triple(const Json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) bad(field, "expected an array of 3 integers");
  return {get_as<std::int64_t>(j[0], field), get_as<std::int64_t>(j[1], field),
          get_as<std::int64_t>(j[2], field)};
}

inline Json parse_text(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    bad(what, e.what());
  }
}

}  // namespace detail

inline Json read_json_file(const std::string& path) {
  const std::vector<std::uint8_t> bytes = detail::read_file(path);
  return detail::parse_text(std::string(bytes.begin(), bytes.end()), path);
}

/// {"shape":[nx,ny,nz], "spacing":[sx,sy,sz], "tubes":[{"points":[[x,y,z],...],
///  "radii":[...]} or {"points":..., "radius": r}], "organ_radius": r,
///  "intensity":{"foreground","background","blur_radius","noise_amplitude"}, "seed": s}
inline PhantomSpec phantom_spec_from_json(const Json& j) {
  detail::require_object(j, "phantom");
  PhantomSpec s;
  if (j.contains("shape")) {
    const Index3 n = detail::index_triple(j["shape"], "shape");
    if (n.x <= 0 || n.y <= 0 || n.z <= 0) detail::bad("shape", "extents must be positive");
    s.shape = {static_cast<std::size_t>(n.x), static_cast<std::size_t>(n.y),
               static_cast<std::size_t>(n.z)};
  }
  if (j.contains("spacing")) {
    const auto sp = detail::triple(j["spacing"], "spacing");
    s.spacing = {sp[0], sp[1], sp[2]};
  }
  if (!j.contains("tubes") || !j["tubes"].is_array()) detail::bad("tubes", "expected an array");
  for (const auto& t : j["tubes"]) {
    detail::require_object(t, "tubes");
    Tube tube;
    if (!t.contains("points") || !t["points"].is_array()) detail::bad("points", "expected an array");
    for (const auto& p : t["points"]) tube.points.push_back(detail::triple(p, "points"));
    if (t.contains("radii")) {
      tube.radii = detail::get_as<std::vector<double>>(t["radii"], "radii");
    } else if (t.contains("radius")) {
      const auto r = detail::get_as<double>(t["radius"], "radius");
      tube.radii.assign(tube.points.empty() ? 0 : tube.points.size() - 1, r);
    } else {
      detail::bad("radii", "tube needs radii or radius");
    }
    s.tubes.push_back(std::move(tube));
  }
  s.organ_radius = detail::value_or(j, "organ_radius", s.organ_radius);
  if (j.contains("intensity")) {
    const Json& in = j["intensity"];
    detail::require_object(in, "intensity");
    s.intensity.foreground = detail::value_or(in, "foreground", s.intensity.foreground);
    s.intensity.background = detail::value_or(in, "background", s.intensity.background);
    s.intensity.blur_radius = detail::value_or(in, "blur_radius", s.intensity.blur_radius);
    s.intensity.noise_amplitude = detail::value_or(in, "noise_amplitude", s.intensity.noise_amplitude);
  }
  s.seed = detail::value_or<std::uint64_t>(j, "seed", 0);
  return s;
}

/// {"seed": s, "ops": [{"op":"truncate_terminal","k":8,"endpoint":0},
///  {"op":"dilate","radius":1}, {"op":"erode","radius":1},
///  {"op":"add_blob","center":[x,y,z],"radius":2}, {"op":"drop_component","index":0}]}
inline PerturbationSpec perturbation_spec_from_json(const Json& j) {
  detail::require_object(j, "perturbation");
  PerturbationSpec s;
  s.seed = detail::value_or<std::uint64_t>(j, "seed", 0);
  if (!j.contains("ops")) return s;
  if (!j["ops"].is_array()) detail::bad("ops", "expected an array");
  for (const auto& o : j["ops"]) {
    detail::require_object(o, "ops");
    const auto name = detail::value_or<std::string>(o, "op", "");
    if (name == "truncate_terminal") {
      TruncateTerminal t;
      t.k = detail::value_or<std::size_t>(o, "k", 0);
      if (o.contains("endpoint")) t.endpoint = detail::get_as<std::size_t>(o["endpoint"], "endpoint");
      s.ops.emplace_back(t);
    } else if (name == "dilate") {
      s.ops.emplace_back(DilateBy{detail::value_or(o, "radius", 1)});
    } else if (name == "erode") {
      s.ops.emplace_back(ErodeBy{detail::value_or(o, "radius", 1)});
    } else if (name == "add_blob") {
      AddBlob b;
      if (o.contains("center")) b.center = detail::index_triple(o["center"], "center");
      b.radius = detail::value_or(o, "radius", b.radius);
      s.ops.emplace_back(b);
    } else if (name == "drop_component") {
      s.ops.emplace_back(DropComponent{detail::value_or<std::size_t>(o, "index", 0)});
    } else {
      detail::bad("op", "unknown operation '" + name + "'");
    }
  }
  return s;
}

struct SegmenterChoice {
  std::string type = "oracle";  ///< oracle | perturbed_oracle | threshold | passthrough | none
  PerturbationSpec perturbation;
  float threshold = 0.5f;
  std::size_t channel = 0;
};

struct PipelineInputs {
  std::string intensity, organ, gt;
};

struct PipelineConfig {
  std::optional<PhantomSpec> phantom;
  std::optional<PipelineInputs> inputs;
  SegmenterChoice coarse, fine, refine;
  TerminalParams params;
  int margin = 8;
};

namespace detail {

inline SegmenterChoice segmenter_choice_from_json(const Json& j, const std::string& stage) {
  detail::require_object(j, stage);
  SegmenterChoice c;
  c.type = value_or<std::string>(j, "type", c.type);
  if (j.contains("perturbation")) c.perturbation = perturbation_spec_from_json(j["perturbation"]);
  c.threshold = value_or(j, "threshold", c.threshold);
  c.channel = value_or(j, "channel", c.channel);
  return c;
}

}  // namespace detail

/// {"phantom": {...} | "inputs": {"intensity","organ","gt"}, "d": 32, "margin": 8,
///  "segmenters": {"coarse": {"type": ...}, "fine": {...}, "refine": {...}}}
inline PipelineConfig pipeline_config_from_json(const Json& j) {
  detail::require_object(j, "pipeline");
  PipelineConfig c;
  if (j.contains("phantom")) c.phantom = phantom_spec_from_json(j["phantom"]);
  if (j.contains("inputs")) {
    const Json& in = j["inputs"];
    detail::require_object(in, "inputs");
    c.inputs = PipelineInputs{detail::value_or<std::string>(in, "intensity", ""),
                              detail::value_or<std::string>(in, "organ", ""),
                              detail::value_or<std::string>(in, "gt", "")};
  }
  if (c.phantom.has_value() == c.inputs.has_value())
    detail::bad("pipeline", "exactly one of 'phantom' or 'inputs' is required");
  c.params.d = detail::value_or(j, "d", c.params.d);
  c.margin = detail::value_or(j, "margin", c.margin);
  if (j.contains("segmenters")) {
    const Json& s = j["segmenters"];
    detail::require_object(s, "segmenters");
    if (s.contains("coarse")) c.coarse = detail::segmenter_choice_from_json(s["coarse"], "coarse");
    if (s.contains("fine")) c.fine = detail::segmenter_choice_from_json(s["fine"], "fine");
    if (s.contains("refine")) c.refine = detail::segmenter_choice_from_json(s["refine"], "refine");
  }
  return c;
}

inline MaskSegmenter make_mask_segmenter(const SegmenterChoice& c, const BinaryGrid& truth,
                                         std::size_t default_channel) {
  if (c.type == "oracle") return oracle_segmenter(truth);
  if (c.type == "perturbed_oracle") return perturbed_oracle_segmenter(truth, c.perturbation);
  if (c.type == "threshold") return threshold_segmenter(c.threshold, c.channel);
  if (c.type == "passthrough") return passthrough_segmenter(default_channel);
  throw FormatError("type", "unknown mask segmenter '" + c.type + "'");
}

inline DistractionSegmenter make_distraction_segmenter(const SegmenterChoice& c,
                                                       const BinaryGrid& truth) {
  if (c.type == "oracle") return oracle_distraction(truth);
  if (c.type == "none") return null_distraction();
  throw FormatError("type", "unknown distraction segmenter '" + c.type + "'");
}

inline Segmenters make_segmenters(const PipelineConfig& c, const BinaryGrid& truth) {
  return {make_mask_segmenter(c.coarse, truth, 0), make_mask_segmenter(c.fine, truth, 1),
          make_distraction_segmenter(c.refine, truth)};
}

}  // namespace tubeterm
