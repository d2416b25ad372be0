#pragma once

// Segmentation metrics for tubular structures.
//
// Overlap metrics share one denominator, 2TP + FP + FN, so that
// DSC + FPSR + FNSR = 1 exactly in rational arithmetic. Counts are integers
// and each ratio is formed by a single division.
//
// Empty-input conventions:
//   dsc(empty, empty) = 1, fpsr = fnsr = 0
//   Tprec with an empty prediction terminal region is 1 if the ground-truth
//   terminal region is also empty, else 0 (Tsens mirrored)
//   clDice precision/sensitivity with an empty skeleton follow the same rule
//   a harmonic mean whose two terms are both 0 is 0
//   Hausdorff distance is undefined (absent) if either mask is empty

#include <cmath>
#include <future>
#include <limits>
#include <optional>

#include "tubeterm/edt.hpp"
#include "tubeterm/grid.hpp"
#include "tubeterm/skeleton.hpp"
#include "tubeterm/terminal.hpp"

namespace tubeterm {

inline double dsc(const ConfusionCounts& c) {
  const std::uint64_t den = 2 * c.tp + c.fp + c.fn;
  if (den == 0) return 1.0;
  return static_cast<double>(2 * c.tp) / static_cast<double>(den);
}

struct ErrorRates {
  double fpsr = 0.0;
  double fnsr = 0.0;
};

inline ErrorRates fpsr_fnsr(const ConfusionCounts& c) {
  const std::uint64_t den = 2 * c.tp + c.fp + c.fn;
  if (den == 0) return {};
  return {static_cast<double>(c.fp) / static_cast<double>(den),
          static_cast<double>(c.fn) / static_cast<double>(den)};
}

namespace detail {

// max over x in `from` of the squared distance to the nearest voxel of `to`
inline double directed_squared_hausdorff(const BinaryGrid& from, const BinaryGrid& to) {
  const SquaredField dist = squared_distance_to_sites(to, Border::none);
  double worst = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i)
    if (from[i]) worst = std::max(worst, dist[i]);
  return worst;
}

inline double harmonic_mean(double a, double b) {
  if (a + b == 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

// |a ∩ b| / |a|. For empty a: 1 when the mirrored region is empty too, else 0.
inline double covered_fraction(const BinaryGrid& a, const BinaryGrid& b, bool other_empty) {
  std::uint64_t num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i]) continue;
    ++den;
    if (b[i]) ++num;
  }
  if (den == 0) return other_empty ? 1.0 : 0.0;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

/// Directed Hausdorff distance h(x, y) in mm: max over x of the distance to
/// the nearest voxel centre of y.
inline double directed_hausdorff(const BinaryGrid& x, const BinaryGrid& y) {
  require_same_geometry(x, y, "hausdorff");
  if (!any(x) || !any(y)) throw UndefinedMetric("hausdorff: empty mask");
  return std::sqrt(detail::directed_squared_hausdorff(x, y));
}

/// Symmetric Hausdorff distance in mm between voxel-centre sets.
inline double hausdorff(const BinaryGrid& x, const BinaryGrid& y) {
  require_same_geometry(x, y, "hausdorff");
  if (!any(x) || !any(y)) throw UndefinedMetric("hausdorff: empty mask");
  const double sq = std::max(detail::directed_squared_hausdorff(x, y),
                             detail::directed_squared_hausdorff(y, x));
  return std::sqrt(sq);
}

inline std::optional<double> try_hausdorff(const BinaryGrid& x, const BinaryGrid& y) {
  require_same_geometry(x, y, "hausdorff");
  if (!any(x) || !any(y)) return std::nullopt;
  return hausdorff(x, y);
}

/// clDice from precomputed skeletons.
inline double cl_dice_from_skeletons(const BinaryGrid& pred, const BinaryGrid& gt,
                                     const BinaryGrid& skel_pred, const BinaryGrid& skel_gt) {
  const bool pred_empty = !any(skel_pred), gt_empty = !any(skel_gt);
  const double tprec = detail::covered_fraction(skel_pred, gt, gt_empty);
  const double tsens = detail::covered_fraction(skel_gt, pred, pred_empty);
  return detail::harmonic_mean(tprec, tsens);
}

/// Harmonic mean of |skel(pred) ∩ gt| / |skel(pred)| and |skel(gt) ∩ pred| / |skel(gt)|.
inline double cl_dice(const BinaryGrid& pred, const BinaryGrid& gt) {
  require_same_geometry(pred, gt, "cl_dice");
  return cl_dice_from_skeletons(pred, gt, skeletonize(pred), skeletonize(gt));
}

struct TerminalScores {
  double tprec = 0.0;
  double tsens = 0.0;
  double tdice = 0.0;
};

/// Terminal scores from already-gated terminal regions.
inline TerminalScores t_metrics_from_regions(const BinaryGrid& pred, const BinaryGrid& gt,
                                             const BinaryGrid& region_pred,
                                             const BinaryGrid& region_gt) {
  const bool rp_empty = !any(region_pred), rg_empty = !any(region_gt);
  TerminalScores s;
  s.tprec = detail::covered_fraction(region_pred, gt, rg_empty);
  s.tsens = detail::covered_fraction(region_gt, pred, rp_empty);
  s.tdice = detail::harmonic_mean(s.tprec, s.tsens);
  return s;
}

/// Terminal precision, sensitivity and tDice. Each mask's terminal region
/// is gated by the endpoints of its own skeleton.
inline TerminalScores t_metrics(const BinaryGrid& pred, const BinaryGrid& gt,
                                const TerminalParams& p) {
  require_same_geometry(pred, gt, "t_metrics");
  p.validate();
  return t_metrics_from_regions(pred, gt, terminal_region(pred, p), terminal_region(gt, p));
}

struct MetricReport {
  ConfusionCounts counts;
  double dsc = 1.0;
  double fpsr = 0.0;
  double fnsr = 0.0;
  std::optional<double> hd_mm;
  double cldice = 1.0;
  double tprec = 1.0;
  double tsens = 1.0;
  double tdice = 1.0;
  TerminalParams params;
};

/// All metrics from one confusion pass and one skeleton per mask.
inline MetricReport evaluate(const BinaryGrid& pred, const BinaryGrid& gt,
                             const TerminalParams& p = {}) {
  require_same_geometry(pred, gt, "evaluate");
  p.validate();
  MetricReport r;
  r.params = p;
  r.counts = confusion(pred, gt);
  r.dsc = dsc(r.counts);
  const auto rates = fpsr_fnsr(r.counts);
  r.fpsr = rates.fpsr;
  r.fnsr = rates.fnsr;

  BinaryGrid skel_pred, skel_gt;
  if (thread_count() > 1) {
    auto pending = std::async(std::launch::async, [&] { return skeletonize(gt); });
    skel_pred = skeletonize(pred);
    skel_gt = pending.get();
  } else {
    skel_pred = skeletonize(pred);
    skel_gt = skeletonize(gt);
  }

  r.hd_mm = try_hausdorff(pred, gt);
  r.cldice = cl_dice_from_skeletons(pred, gt, skel_pred, skel_gt);
  const BinaryGrid region_pred = terminal_mask(pred, endpoints(build_graph(skel_pred)), p);
  const BinaryGrid region_gt = terminal_mask(gt, endpoints(build_graph(skel_gt)), p);
  const TerminalScores t = t_metrics_from_regions(pred, gt, region_pred, region_gt);
  r.tprec = t.tprec;
  r.tsens = t.tsens;
  r.tdice = t.tdice;
  return r;
}

/// Overlap-only report (DSC, FPSR, FNSR, HD) used for restricted comparisons.
struct OverlapReport {
  ConfusionCounts counts;
  double dsc = 1.0;
  double fpsr = 0.0;
  double fnsr = 0.0;
  std::optional<double> hd_mm;
};

inline OverlapReport evaluate_overlap(const BinaryGrid& pred, const BinaryGrid& gt) {
  require_same_geometry(pred, gt, "evaluate_overlap");
  OverlapReport r;
  r.counts = confusion(pred, gt);
  r.dsc = dsc(r.counts);
  const auto rates = fpsr_fnsr(r.counts);
  r.fpsr = rates.fpsr;
  r.fnsr = rates.fnsr;
  r.hd_mm = try_hausdorff(pred, gt);
  return r;
}

}  // namespace tubeterm
