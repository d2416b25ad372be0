#pragma once

// Terminal regions around skeleton endpoints: the gated masks used by the
// terminal metrics, and the cubic patches handed to a fine-stage segmenter.

#include <span>
#include <string>
#include <vector>

#include "tubeterm/grid.hpp"
#include "tubeterm/skeleton.hpp"

namespace tubeterm {

struct TerminalParams {
  /// Terminal RoI size in voxels. Must be even and >= 2.
  int d = 32;

  void validate() const {
    if (d < 2 || d % 2 != 0)
      throw ContractError("terminal RoI size d must be even and >= 2, got " + std::to_string(d));
  }
  friend constexpr bool operator==(const TerminalParams&, const TerminalParams&) = default;
};

/// Keeps voxels of `v` lying within Chebyshev distance d/2 (index space) of
/// at least one endpoint; everything else is cleared.
inline BinaryGrid terminal_mask(const BinaryGrid& v, std::span<const Index3> ends,
                                const TerminalParams& p) {
  p.validate();
  BinaryGrid out(v.shape(), v.spacing());
  const std::int64_t h = p.d / 2;
  for (const Index3& c : ends) {
    const Box box = clip({{c.x - h, c.y - h, c.z - h}, {c.x + h, c.y + h, c.z + h}}, v.shape());
    if (box.empty()) continue;
    for (std::int64_t z = box.lo.z; z <= box.hi.z; ++z)
      for (std::int64_t y = box.lo.y; y <= box.hi.y; ++y)
        for (std::int64_t x = box.lo.x; x <= box.hi.x; ++x) {
          const std::size_t i = v.index(Index3{x, y, z});
          if (v[i]) out[i] = 1;
        }
  }
  return out;
}

/// Terminal mask of `v` gated by the endpoints of its own skeleton.
inline BinaryGrid terminal_region(const BinaryGrid& v, const TerminalParams& p) {
  return terminal_mask(v, skeleton_endpoints(v), p);
}

/// Patch window around an endpoint: [c - d/2, c + d/2 - 1] per axis, clipped.
inline Box terminal_window(const Index3& c, const TerminalParams& p, const Shape& shape) {
  p.validate();
  const std::int64_t h = p.d / 2;
  return clip({{c.x - h, c.y - h, c.z - h}, {c.x + h - 1, c.y + h - 1, c.z + h - 1}}, shape);
}

struct Patch {
  Index3 endpoint;
  Box window;                         ///< full-grid coordinates
  std::vector<ScalarField> channels;  ///< each cropped to `window`
};

using PatchSet = std::vector<Patch>;

/// One patch per endpoint, every channel cropped to the same window.
inline PatchSet extract_patches(std::span<const ScalarField> channels, std::span<const Index3> ends,
                                const TerminalParams& p) {
  p.validate();
  for (std::size_t c = 1; c < channels.size(); ++c)
    require_same_geometry(channels[0], channels[c], "extract_patches");
  PatchSet out;
  if (ends.empty()) return out;
  if (channels.empty()) throw ContractError("extract_patches: no channels");
  const Shape shape = channels[0].shape();
  out.reserve(ends.size());
  for (const Index3& e : ends) {
    if (!channels[0].in_bounds(e)) throw GeometryError("extract_patches: endpoint outside grid");
    Patch patch{e, terminal_window(e, p, shape), {}};
    patch.channels.reserve(channels.size());
    for (const auto& ch : channels) patch.channels.push_back(crop(ch, patch.window));
    out.push_back(std::move(patch));
  }
  return out;
}

/// A per-patch result to be merged back into the full grid.
struct RefinedPatch {
  Box window;
  BinaryGrid mask;  ///< shape must equal window.shape()
};

/// Voxels outside every window copy `base`; voxels covered by one or more
/// windows take the logical OR of all refined masks covering them.
inline BinaryGrid stitch(const BinaryGrid& base, std::span<const RefinedPatch> patches) {
  BinaryGrid out = base;
  for (const auto& rp : patches) {
    if (rp.window.empty() || clip(rp.window, base.shape()) != rp.window)
      throw GeometryError("stitch: patch window exceeds the grid");
    if (rp.mask.shape() != rp.window.shape())
      throw GeometryError("stitch: refined mask does not match its window");
  }
  // clear covered voxels first so OR only sees refined values
  for (const auto& rp : patches) {
    const Box& b = rp.window;
    for (std::int64_t z = b.lo.z; z <= b.hi.z; ++z)
      for (std::int64_t y = b.lo.y; y <= b.hi.y; ++y)
        for (std::int64_t x = b.lo.x; x <= b.hi.x; ++x) out.at({x, y, z}) = 0;
  }
  for (const auto& rp : patches) {
    const Box& b = rp.window;
    for (std::int64_t z = b.lo.z; z <= b.hi.z; ++z)
      for (std::int64_t y = b.lo.y; y <= b.hi.y; ++y)
        for (std::int64_t x = b.lo.x; x <= b.hi.x; ++x)
          if (rp.mask(x - b.lo.x, y - b.lo.y, z - b.lo.z)) out.at({x, y, z}) = 1;
  }
  return out;
}

}  // namespace tubeterm
