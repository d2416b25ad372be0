#pragma once

// Distraction maps: per-voxel labelling of a prediction's false-positive and
// false-negative voxels, and the refinement rule that consumes them.

#include <cstdint>
#include <utility>

#include "tubeterm/grid.hpp"
#include "tubeterm/metrics.hpp"

namespace tubeterm {

enum class Distraction : std::uint8_t {
  none = 0,
  false_positive = 1,
  false_negative = 2,
};

using DistractionMap = Grid<Distraction>;

inline DistractionMap distraction_map(const BinaryGrid& gt, const BinaryGrid& pred) {
  require_same_geometry(gt, pred, "distraction_map");
  DistractionMap dm(gt.shape(), gt.spacing(), Distraction::none);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (pred[i] && !gt[i])
      dm[i] = Distraction::false_positive;
    else if (gt[i] && !pred[i])
      dm[i] = Distraction::false_negative;
  }
  return dm;
}

/// Removes false-positive voxels from `pred` and adds false-negative ones.
/// Labels that disagree with `pred` (FP on background, FN on foreground) are
/// no-ops.
inline BinaryGrid apply_refinement(const BinaryGrid& pred, const DistractionMap& dm) {
  require_same_geometry(pred, dm, "apply_refinement");
  BinaryGrid out = pred;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (dm[i] == Distraction::false_positive)
      out[i] = 0;
    else if (dm[i] == Distraction::false_negative)
      out[i] = 1;
  }
  return out;
}

/// Voxels carrying `label`, as a mask.
inline BinaryGrid label_mask(const DistractionMap& dm, Distraction label) {
  BinaryGrid out(dm.shape(), dm.spacing());
  for (std::size_t i = 0; i < dm.size(); ++i) out[i] = dm[i] == label ? 1 : 0;
  return out;
}

struct DistractionReports {
  OverlapReport false_positive;
  OverlapReport false_negative;
};

/// Agreement between a predicted and a reference distraction map, per class,
/// restricted to `region` (typically the terminal mask of the prediction).
inline DistractionReports distraction_eval(const DistractionMap& dm_pred,
                                           const DistractionMap& dm_true,
                                           const BinaryGrid& region) {
  require_same_geometry(dm_pred, dm_true, "distraction_eval");
  require_same_geometry(dm_pred, region, "distraction_eval");
  auto restricted = [&](const DistractionMap& dm, Distraction label) {
    return intersect(label_mask(dm, label), region);
  };
  return {evaluate_overlap(restricted(dm_pred, Distraction::false_positive),
                           restricted(dm_true, Distraction::false_positive)),
          evaluate_overlap(restricted(dm_pred, Distraction::false_negative),
                           restricted(dm_true, Distraction::false_negative))};
}

}  // namespace tubeterm
