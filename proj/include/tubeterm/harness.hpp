#pragma once

// Coarse -> fine -> refine pipeline with pluggable segmenters.
//
//   coarse: one mask segmenter over the organ RoI of the intensity volume
//   fine:   per-endpoint patches of the coarse skeleton, each segmented from
//           three channels (intensity, coarse prediction, PAA of the organ)
//           and stitched back with OR on overlaps; voxels outside every
//           patch keep the coarse value
//   refine: a distraction segmenter over (intensity, fine prediction) whose
//           map is applied to the fine prediction
//
// Every stage is scored against the ground truth on the full grid.

#include <array>
#include <chrono>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tubeterm/distraction.hpp"
#include "tubeterm/edt.hpp"
#include "tubeterm/metrics.hpp"
#include "tubeterm/phantom.hpp"
#include "tubeterm/terminal.hpp"

namespace tubeterm {

struct SegmenterInput {
  std::vector<ScalarField> channels;  ///< all sharing one geometry
  Box window;                         ///< full-grid voxels the channels cover
};

/// Must return a mask with the geometry of the input channels.
using MaskSegmenter = std::function<BinaryGrid(const SegmenterInput&)>;
/// Must return a distraction map with the geometry of the input channels.
using DistractionSegmenter = std::function<DistractionMap(const SegmenterInput&)>;

struct Segmenters {
  MaskSegmenter coarse;
  MaskSegmenter fine;
  DistractionSegmenter refine;
};

/// Returns the supplied truth over the requested window.
inline MaskSegmenter oracle_segmenter(BinaryGrid truth) {
  return [truth = std::move(truth)](const SegmenterInput& in) { return crop(truth, in.window); };
}

/// Oracle over a perturbed copy of the truth (perturbed once, on the full grid).
inline MaskSegmenter perturbed_oracle_segmenter(const BinaryGrid& truth,
                                                const PerturbationSpec& spec) {
  return oracle_segmenter(perturb(truth, spec));
}

/// Foreground where channels[channel] >= threshold.
inline MaskSegmenter threshold_segmenter(float threshold, std::size_t channel = 0) {
  return [threshold, channel](const SegmenterInput& in) {
    if (channel >= in.channels.size()) throw ContractError("threshold segmenter: missing channel");
    const ScalarField& f = in.channels[channel];
    BinaryGrid out(f.shape(), f.spacing());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i] >= threshold ? 1 : 0;
    return out;
  };
}

/// Returns the previous prediction channel unchanged (fine stage as a no-op).
inline MaskSegmenter passthrough_segmenter(std::size_t channel = 1) {
  return threshold_segmenter(0.5f, channel);
}

/// Exact distraction map of the prediction channel against the truth.
inline DistractionSegmenter oracle_distraction(BinaryGrid truth, std::size_t prediction_channel = 1) {
  return [truth = std::move(truth), prediction_channel](const SegmenterInput& in) {
    if (prediction_channel >= in.channels.size())
      throw ContractError("oracle distraction: missing prediction channel");
    const ScalarField& f = in.channels[prediction_channel];
    BinaryGrid pred(f.shape(), f.spacing());
    for (std::size_t i = 0; i < f.size(); ++i) pred[i] = f[i] >= 0.5f ? 1 : 0;
    return distraction_map(crop(truth, in.window), pred);
  };
}

/// Predicts no distractions (refine stage as a no-op).
inline DistractionSegmenter null_distraction() {
  return [](const SegmenterInput& in) {
    const ScalarField& f = in.channels.at(0);
    return DistractionMap(f.shape(), f.spacing(), Distraction::none);
  };
}

// ---------------------------------------------------------------------------

/// Bounding box of the organ mask grown by `margin` voxels, clipped to the grid.
inline Box roi_window(const BinaryGrid& organ_mask, int margin) {
  if (margin < 0) throw ContractError("roi margin must be >= 0");
  bool found = false;
  Box b{};
  for (std::size_t i = 0; i < organ_mask.size(); ++i) {
    if (!organ_mask[i]) continue;
    const Index3 p = organ_mask.coord(i);
    if (!found) {
      b = {p, p};
      found = true;
      continue;
    }
    b.lo = {std::min(b.lo.x, p.x), std::min(b.lo.y, p.y), std::min(b.lo.z, p.z)};
    b.hi = {std::max(b.hi.x, p.x), std::max(b.hi.y, p.y), std::max(b.hi.z, p.z)};
  }
  if (!found) throw ContractError("crop_roi: organ mask is empty");
  return clip({{b.lo.x - margin, b.lo.y - margin, b.lo.z - margin},
               {b.hi.x + margin, b.hi.y + margin, b.hi.z + margin}},
              organ_mask.shape());
}

struct RoiCrop {
  Box window;
  std::vector<ScalarField> channels;
};

/// Crops every volume to the organ RoI.
inline RoiCrop crop_roi(std::span<const ScalarField> volumes, const BinaryGrid& organ_mask,
                        int margin) {
  for (const auto& v : volumes) require_same_geometry(v, organ_mask, "crop_roi");
  RoiCrop out{roi_window(organ_mask, margin), {}};
  out.channels.reserve(volumes.size());
  for (const auto& v : volumes) out.channels.push_back(crop(v, out.window));
  return out;
}

enum class Stage { coarse, fine, refine };

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::coarse: return "coarse";
    case Stage::fine: return "fine";
    case Stage::refine: return "refine";
  }
  return "?";
}

struct StageResult {
  Stage stage = Stage::coarse;
  MetricReport metrics;
  double seconds = 0.0;  ///< wall clock of the stage's segmentation work
};

struct StageReport {
  std::array<StageResult, 3> stages;
};

struct PipelineResult {
  StageReport report;
  Box roi;
  std::vector<Box> fine_windows;  ///< full-grid coordinates
  BinaryGrid coarse;              ///< stage predictions on the full grid
  BinaryGrid fine;
  BinaryGrid refine;
};

namespace detail {

inline Box shifted(const Box& b, const Index3& by) {
  return {{b.lo.x + by.x, b.lo.y + by.y, b.lo.z + by.z}, {b.hi.x + by.x, b.hi.y + by.y, b.hi.z + by.z}};
}

template <class T, class U>
void check_output(const Grid<T>& out, const Grid<U>& like, const char* stage) {
  if (!same_geometry(out, like))
    throw ContractError(std::string(stage) + " segmenter returned a grid of the wrong geometry");
}

inline BinaryGrid to_full(const BinaryGrid& roi_mask, const Box& roi, const BinaryGrid& like) {
  BinaryGrid full(like.shape(), like.spacing());
  paste(full, roi_mask, roi);
  return full;
}

}  // namespace detail

inline PipelineResult run_pipeline(const ScalarField& intensity, const BinaryGrid& organ_mask,
                                   const BinaryGrid& gt_duct, const Segmenters& seg,
                                   const TerminalParams& params, int margin) {
  require_same_geometry(intensity, organ_mask, "run_pipeline");
  require_same_geometry(intensity, gt_duct, "run_pipeline");
  params.validate();
  if (!seg.coarse || !seg.fine || !seg.refine)
    throw ContractError("run_pipeline: every stage needs a segmenter");

  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point t0) {
    return std::chrono::duration<double>(clock::now() - t0).count();
  };

  PipelineResult res;
  res.roi = roi_window(organ_mask, margin);
  const ScalarField intensity_roi = crop(intensity, res.roi);

  // coarse
  auto t0 = clock::now();
  const BinaryGrid coarse_roi = seg.coarse({{intensity_roi}, res.roi});
  detail::check_output(coarse_roi, intensity_roi, "coarse");
  const double coarse_s = seconds_since(t0);

  // fine
  t0 = clock::now();
  const ScalarField paa_roi = crop(paa(organ_mask), res.roi);
  const std::vector<ScalarField> fine_channels = {intensity_roi, to_field(coarse_roi), paa_roi};
  const EndpointSet ends = skeleton_endpoints(coarse_roi);
  const PatchSet patches = extract_patches(fine_channels, ends, params);
  std::vector<RefinedPatch> refined(patches.size());
  parallel_for(patches.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Patch& patch = patches[i];
      BinaryGrid m = seg.fine({patch.channels, detail::shifted(patch.window, res.roi.lo)});
      detail::check_output(m, patch.channels[0], "fine");
      refined[i] = {patch.window, std::move(m)};
    }
  });
  const BinaryGrid fine_roi = stitch(coarse_roi, refined);
  for (const auto& p : patches) res.fine_windows.push_back(detail::shifted(p.window, res.roi.lo));
  const double fine_s = seconds_since(t0);

  // refine
  t0 = clock::now();
  const DistractionMap dm = seg.refine({{intensity_roi, to_field(fine_roi)}, res.roi});
  detail::check_output(dm, intensity_roi, "refine");
  const BinaryGrid refine_roi = apply_refinement(fine_roi, dm);
  const double refine_s = seconds_since(t0);

  res.coarse = detail::to_full(coarse_roi, res.roi, gt_duct);
  res.fine = detail::to_full(fine_roi, res.roi, gt_duct);
  res.refine = detail::to_full(refine_roi, res.roi, gt_duct);
  res.report.stages = {{
      {Stage::coarse, evaluate(res.coarse, gt_duct, params), coarse_s},
      {Stage::fine, evaluate(res.fine, gt_duct, params), fine_s},
      {Stage::refine, evaluate(res.refine, gt_duct, params), refine_s},
  }};
  return res;
}

}  // namespace tubeterm
