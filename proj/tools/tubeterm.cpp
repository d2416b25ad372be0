// tubeterm command-line front end.
//
// Reports (JSON or CSV) go to stdout, or to --report when given. The one-line
// summary of each command goes to stderr. Volumes ending in .rawvol are read
// and written as raw+JSON sidecar pairs, everything else as NIfTI-1.
//
// Exit codes: 0 ok, 2 bad arguments, 3 I/O or format error, 4 geometry or
// contract error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tubeterm/tubeterm.hpp"

namespace fs = std::filesystem;
using namespace tubeterm;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kIo = 3, kContract = 4, kInternal = 1 };

bool is_raw(const std::string& path) {
  return fs::path(path).extension() == ".rawvol";
}

fs::path raw_stem(const std::string& path) {
  fs::path p(path);
  return p.replace_extension();
}

Volume load(const std::string& path) {
  return is_raw(path) ? read_raw(raw_stem(path)) : read_volume(path);
}

BinaryGrid load_mask(const std::string& path) { return as_mask(load(path)); }
ScalarField load_field(const std::string& path) { return as_field(load(path)); }
DistractionMap load_distraction(const std::string& path) { return as_distraction(load(path)); }

void save(const std::string& path, const BinaryGrid& g) {
  if (is_raw(path))
    write_raw(raw_stem(path), g);
  else
    write_volume(path, g);
}

void save(const std::string& path, const ScalarField& g) {
  if (is_raw(path))
    write_raw(raw_stem(path), g);
  else
    write_volume(path, g);
}

void save(const std::string& path, const DistractionMap& dm) {
  if (is_raw(path)) {
    BinaryGrid codes(dm.shape(), dm.spacing());
    for (std::size_t i = 0; i < dm.size(); ++i) codes[i] = static_cast<std::uint8_t>(dm[i]);
    write_raw(raw_stem(path), codes);
  } else {
    write_volume(path, dm);
  }
}

struct Common {
  std::vector<std::string> in;
  std::string out;
  std::string pred, gt;
  std::string report;
  std::string format = "json";
  std::string config;
  int d = 32;
  int margin = 8;
  int connectivity = 26;
  int radius = 1;
  std::size_t min_size = 0;
  std::optional<std::uint64_t> seed;
  bool percent = false;
  bool timings = false;
  std::string op = "dilate";
};

void emit_report(const Common& c, const std::string& text) {
  if (c.report.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  const std::vector<std::uint8_t> bytes(text.begin(), text.end());
  detail::write_file(c.report, bytes);
}

void emit_json(const Common& c, const Json& j) { emit_report(c, j.dump(2) + "\n"); }

void summary(const std::string& line) { std::cerr << line << "\n"; }

const std::string& single_input(const Common& c) {
  if (c.in.size() != 1) throw CLI::ValidationError("--in", "exactly one input volume is required");
  return c.in.front();
}

std::string fmt(double v) { return fixed4(v); }

// ---------------------------------------------------------------------------

int cmd_edt(const Common& c, bool as_paa) {
  const BinaryGrid mask = load_mask(single_input(c));
  const ScalarField f = as_paa ? paa(mask) : edt_inside(mask);
  float peak = 0.0f;
  for (float v : f.values()) peak = std::max(peak, v);
  save(c.out, f);
  summary(std::string(as_paa ? "paa" : "edt") + ": " + std::to_string(count(mask)) +
          " foreground voxels, max distance " + fmt(peak) + " mm -> " + c.out);
  return kOk;
}

int cmd_skeletonize(const Common& c) {
  const BinaryGrid mask = load_mask(single_input(c));
  const BinaryGrid skel = skeletonize(mask, {c.min_size});
  save(c.out, skel);
  summary("skeletonize: " + std::to_string(count(mask)) + " -> " + std::to_string(count(skel)) +
          " voxels -> " + c.out);
  return kOk;
}

int cmd_endpoints(const Common& c) {
  const BinaryGrid mask = load_mask(single_input(c));
  const EndpointSet ends = skeleton_endpoints(mask, {c.min_size});
  emit_json(c, to_json(std::span<const Index3>(ends)));
  summary("endpoints: " + std::to_string(ends.size()));
  return kOk;
}

int cmd_terminal_mask(const Common& c) {
  const BinaryGrid mask = load_mask(single_input(c));
  const BinaryGrid region = terminal_region(mask, {c.d});
  save(c.out, region);
  summary("terminal-mask: d=" + std::to_string(c.d) + ", " + std::to_string(count(region)) +
          " voxels -> " + c.out);
  return kOk;
}

int cmd_patches(const Common& c) {
  const BinaryGrid mask = load_mask(single_input(c));
  const TerminalParams p{c.d};
  p.validate();
  const EndpointSet ends = skeleton_endpoints(mask);
  Json arr = Json::array();
  for (const auto& e : ends) {
    Json j;
    j["endpoint"] = to_json(e);
    j["window"] = to_json(terminal_window(e, p, mask.shape()));
    arr.push_back(std::move(j));
  }
  emit_json(c, arr);
  summary("patches: " + std::to_string(ends.size()) + " windows, d=" + std::to_string(c.d));
  return kOk;
}

int cmd_metrics(const Common& c) {
  const BinaryGrid pred = load_mask(c.pred), gt = load_mask(c.gt);
  const MetricReport r = evaluate(pred, gt, {c.d});
  if (c.format == "csv")
    emit_report(c, csv_header(false) + "\n" + csv_row(r, c.percent) + "\n");
  else
    emit_json(c, to_json(r));
  summary("metrics: dsc=" + fmt(r.dsc) + " tdice=" + fmt(r.tdice) + " cldice=" + fmt(r.cldice));
  return kOk;
}

int cmd_distraction(const Common& c) {
  const BinaryGrid pred = load_mask(c.pred), gt = load_mask(c.gt);
  const DistractionMap dm = distraction_map(gt, pred);
  save(c.out, dm);
  std::size_t fp = 0, fn = 0;
  for (auto v : dm.values()) {
    fp += v == Distraction::false_positive;
    fn += v == Distraction::false_negative;
  }
  summary("distraction: " + std::to_string(fp) + " false positive, " + std::to_string(fn) +
          " false negative -> " + c.out);
  return kOk;
}

int cmd_refine(const Common& c) {
  const BinaryGrid pred = load_mask(c.pred);
  const DistractionMap dm = load_distraction(single_input(c));
  const BinaryGrid out = apply_refinement(pred, dm);
  save(c.out, out);
  summary("refine: " + std::to_string(count(pred)) + " -> " + std::to_string(count(out)) +
          " voxels -> " + c.out);
  return kOk;
}

// --pred / --gt are distraction maps; the region is the terminal region of --in.
int cmd_distraction_eval(const Common& c) {
  const DistractionMap dm_pred = load_distraction(c.pred), dm_true = load_distraction(c.gt);
  BinaryGrid region;
  if (c.in.empty())
    region = BinaryGrid(dm_pred.shape(), dm_pred.spacing(), 1);
  else
    region = terminal_region(load_mask(single_input(c)), {c.d});
  const DistractionReports r = distraction_eval(dm_pred, dm_true, region);
  emit_json(c, to_json(r));
  summary("distraction-eval: fp dsc=" + fmt(r.false_positive.dsc) +
          " fn dsc=" + fmt(r.false_negative.dsc));
  return kOk;
}

int cmd_components(const Common& c) {
  const BinaryGrid mask = load_mask(single_input(c));
  const Components cc = connected_components(mask, connectivity_from_int(c.connectivity));
  std::vector<std::size_t> sizes(cc.count, 0);
  for (auto l : cc.labels.values())
    if (l > 0) ++sizes[static_cast<std::size_t>(l - 1)];
  Json j;
  j["connectivity"] = c.connectivity;
  j["count"] = cc.count;
  j["sizes"] = sizes;
  emit_json(c, j);
  summary("components: " + std::to_string(cc.count));
  return kOk;
}

int cmd_morph(const Common& c) {
  MorphOp op;
  if (c.op == "dilate")
    op = MorphOp::dilate;
  else if (c.op == "erode")
    op = MorphOp::erode;
  else
    throw CLI::ValidationError("--op", "must be dilate or erode");
  const BinaryGrid mask = load_mask(single_input(c));
  const BinaryGrid out = morphology(mask, op, c.radius);
  save(c.out, out);
  summary("morph: " + c.op + " r=" + std::to_string(c.radius) + ", " +
          std::to_string(count(mask)) + " -> " + std::to_string(count(out)) + " voxels -> " + c.out);
  return kOk;
}

int cmd_roi(const Common& c) {
  const BinaryGrid organ = load_mask(single_input(c));
  const Box w = roi_window(organ, c.margin);
  emit_json(c, to_json(w));
  summary("roi: " + std::to_string(w.shape().nx) + "x" + std::to_string(w.shape().ny) + "x" +
          std::to_string(w.shape().nz));
  return kOk;
}

int cmd_phantom(const Common& c) {
  PhantomSpec spec = phantom_spec_from_json(read_json_file(c.config));
  spec.seed = *c.seed;
  const Phantom ph = gen_phantom(spec);
  const std::string ext = c.out.ends_with(".rawvol") ? ".rawvol" : ".nii";
  std::string prefix = c.out;
  if (prefix.ends_with(ext)) prefix.resize(prefix.size() - ext.size());
  save(prefix + "_duct" + ext, ph.duct);
  save(prefix + "_organ" + ext, ph.organ);
  save(prefix + "_intensity" + ext, ph.intensity);
  summary("phantom: duct " + std::to_string(count(ph.duct)) + " voxels, organ " +
          std::to_string(count(ph.organ)) + " voxels -> " + prefix + "_{duct,organ,intensity}" + ext);
  return kOk;
}

int cmd_perturb(const Common& c) {
  PerturbationSpec spec = perturbation_spec_from_json(read_json_file(c.config));
  spec.seed = *c.seed;
  const BinaryGrid mask = load_mask(single_input(c));
  const BinaryGrid out = perturb(mask, spec);
  save(c.out, out);
  summary("perturb: " + std::to_string(spec.ops.size()) + " ops, " + std::to_string(count(mask)) +
          " -> " + std::to_string(count(out)) + " voxels -> " + c.out);
  return kOk;
}

int cmd_pipeline(const Common& c, bool margin_given, bool d_given) {
  PipelineConfig cfg = pipeline_config_from_json(read_json_file(c.config));
  if (margin_given) cfg.margin = c.margin;
  if (d_given) cfg.params.d = c.d;
  ScalarField intensity;
  BinaryGrid organ, gt;
  if (cfg.phantom) {
    if (c.seed) cfg.phantom->seed = *c.seed;
    Phantom ph = gen_phantom(*cfg.phantom);
    intensity = std::move(ph.intensity);
    organ = std::move(ph.organ);
    gt = std::move(ph.duct);
  } else {
    // relative paths resolve against the config file's directory
    const fs::path base = fs::path(c.config).parent_path();
    auto resolve = [&](const std::string& p) { return (base / p).string(); };
    intensity = load_field(resolve(cfg.inputs->intensity));
    organ = load_mask(resolve(cfg.inputs->organ));
    gt = load_mask(resolve(cfg.inputs->gt));
  }
  const PipelineResult res =
      run_pipeline(intensity, organ, gt, make_segmenters(cfg, gt), cfg.params, cfg.margin);
  if (c.format == "csv")
    emit_report(c, to_csv(res.report, c.percent));
  else
    emit_json(c, to_json(res, c.timings));
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    save((fs::path(c.out) / "coarse.nii").string(), res.coarse);
    save((fs::path(c.out) / "fine.nii").string(), res.fine);
    save((fs::path(c.out) / "refine.nii").string(), res.refine);
  }
  const auto& s = res.report.stages;
  summary("pipeline: dsc " + fmt(s[0].metrics.dsc) + " -> " + fmt(s[1].metrics.dsc) + " -> " +
          fmt(s[2].metrics.dsc) + ", tdice " + fmt(s[0].metrics.tdice) + " -> " +
          fmt(s[1].metrics.tdice) + " -> " + fmt(s[2].metrics.tdice));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tubeterm: terminal-aware metrics and pipeline tools for tubular segmentation"};
  app.require_subcommand(1);
  Common c;

  auto add_in = [&](CLI::App* s, bool required = true) {
    auto* o = s->add_option("--in", c.in, "input volume");
    if (required) o->required();
  };
  auto add_out = [&](CLI::App* s, bool required = true) {
    auto* o = s->add_option("--out", c.out, "output volume");
    if (required) o->required();
  };
  auto add_report = [&](CLI::App* s) {
    s->add_option("--report", c.report, "write the report here instead of stdout");
  };
  auto add_format = [&](CLI::App* s) {
    s->add_option("--format", c.format, "report format")->check(CLI::IsMember({"json", "csv"}));
    s->add_flag("--percent", c.percent, "CSV values as percentages");
  };
  auto add_d = [&](CLI::App* s) {
    return s->add_option("-d", c.d, "terminal window size in voxels (even)");
  };

  std::vector<std::pair<CLI::App*, std::function<int()>>> commands;
  auto sub = [&](const char* name, const char* help, std::function<int()> run) {
    CLI::App* s = app.add_subcommand(name, help);
    commands.emplace_back(s, std::move(run));
    return s;
  };

  {
    auto* s = sub("edt", "Euclidean distance to background, in mm", [&] { return cmd_edt(c, false); });
    add_in(s);
    add_out(s);
  }
  {
    auto* s = sub("paa", "anatomy prior map of an organ mask", [&] { return cmd_edt(c, true); });
    add_in(s);
    add_out(s);
  }
  {
    auto* s = sub("skeletonize", "3D thinning to a one-voxel centreline", [&] { return cmd_skeletonize(c); });
    add_in(s);
    add_out(s);
    s->add_option("--min-size", c.min_size, "drop input components smaller than this");
  }
  {
    auto* s = sub("endpoints", "skeleton endpoints as [x,y,z] (JSON)", [&] { return cmd_endpoints(c); });
    add_in(s);
    add_report(s);
    s->add_option("--min-size", c.min_size, "drop input components smaller than this");
  }
  {
    auto* s = sub("terminal-mask", "foreground within d/2 of a skeleton endpoint",
                  [&] { return cmd_terminal_mask(c); });
    add_in(s);
    add_out(s);
    add_d(s);
  }
  {
    auto* s = sub("patches", "terminal patch windows (JSON)", [&] { return cmd_patches(c); });
    add_in(s);
    add_report(s);
    add_d(s);
  }
  {
    auto* s = sub("metrics", "tDice, clDice, DSC, FPSR, FNSR and HD", [&] { return cmd_metrics(c); });
    s->add_option("--pred", c.pred, "predicted mask")->required();
    s->add_option("--gt", c.gt, "ground-truth mask")->required();
    add_d(s);
    add_format(s);
    add_report(s);
  }
  {
    auto* s = sub("distraction", "distraction map of --pred against --gt", [&] { return cmd_distraction(c); });
    s->add_option("--pred", c.pred, "predicted mask")->required();
    s->add_option("--gt", c.gt, "ground-truth mask")->required();
    add_out(s);
  }
  {
    auto* s = sub("refine", "apply the distraction map --in to --pred", [&] { return cmd_refine(c); });
    s->add_option("--pred", c.pred, "predicted mask")->required();
    add_in(s);
    add_out(s);
  }
  {
    auto* s = sub("distraction-eval", "compare distraction maps --pred and --gt per class",
                  [&] { return cmd_distraction_eval(c); });
    s->add_option("--pred", c.pred, "predicted distraction map")->required();
    s->add_option("--gt", c.gt, "reference distraction map")->required();
    add_in(s, false);
    add_d(s);
    add_report(s);
  }
  {
    auto* s = sub("components", "connected components (JSON)", [&] { return cmd_components(c); });
    add_in(s);
    add_report(s);
    s->add_option("--connectivity", c.connectivity, "6, 18 or 26")->check(CLI::IsMember({6, 18, 26}));
  }
  {
    auto* s = sub("morph", "binary dilation or erosion with a cube", [&] { return cmd_morph(c); });
    add_in(s);
    add_out(s);
    s->add_option("--op", c.op, "dilate or erode")->check(CLI::IsMember({"dilate", "erode"}));
    s->add_option("--radius", c.radius, "Chebyshev radius in voxels");
  }
  {
    auto* s = sub("roi", "organ bounding box plus margin (JSON)", [&] { return cmd_roi(c); });
    add_in(s);
    add_report(s);
    s->add_option("--margin", c.margin, "margin in voxels");
  }
  {
    auto* s = sub("phantom", "synthetic duct, organ and intensity volumes", [&] { return cmd_phantom(c); });
    s->add_option("--config", c.config, "phantom spec (JSON)")->required();
    s->add_option("--seed", c.seed, "random seed")->required();
    add_out(s);
  }
  {
    auto* s = sub("perturb", "apply a perturbation spec to a mask", [&] { return cmd_perturb(c); });
    add_in(s);
    add_out(s);
    s->add_option("--config", c.config, "perturbation spec (JSON)")->required();
    s->add_option("--seed", c.seed, "random seed")->required();
  }
  CLI::Option* margin_opt = nullptr;
  CLI::Option* d_opt = nullptr;
  {
    auto* s = sub("pipeline", "coarse, fine and refine stages with per-stage metrics",
                  [&] { return cmd_pipeline(c, margin_opt->count() > 0, d_opt->count() > 0); });
    s->add_option("--config", c.config, "pipeline config (JSON)")->required();
    s->add_option("--seed", c.seed, "override the phantom seed");
    margin_opt = s->add_option("--margin", c.margin, "RoI margin in voxels");
    d_opt = add_d(s);
    add_format(s);
    add_report(s);
    s->add_flag("--timings", c.timings, "include per-stage wall clock in JSON");
    add_out(s, false);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    for (auto& [s, run] : commands)
      if (s->parsed()) return run();
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const GeometryError& e) {
    std::cerr << "geometry error: " << e.what() << "\n";
    return kContract;
  } catch (const ContractError& e) {
    std::cerr << "contract error: " << e.what() << "\n";
    return kContract;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
