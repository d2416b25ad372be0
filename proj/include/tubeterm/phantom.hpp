#pragma once

// Synthetic tubular phantoms and controlled prediction perturbations.
//
// Randomness comes from std::mt19937_64, whose output sequence is fixed by
// the C++ standard. Raw 64-bit draws are mapped to [0, 1) as
// (draw >> 11) * 2^-53, so results do not depend on library-specific
// distribution implementations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "tubeterm/grid.hpp"
#include "tubeterm/skeleton.hpp"

namespace tubeterm {

using Point3 = std::array<double, 3>;

/// Piecewise-linear tube: radii[i] applies to the segment points[i] -> points[i+1].
struct Tube {
  std::vector<Point3> points;
  std::vector<double> radii;
};

struct IntensityParams {
  double foreground = 1.0;
  double background = 0.0;
  int blur_radius = 0;           ///< box half-width in voxels, applied 3 times per axis
  double noise_amplitude = 0.0;  ///< uniform noise in [-a, a]
};

struct PhantomSpec {
  Shape shape{64, 64, 64};
  Spacing spacing;
  std::vector<Tube> tubes;
  double organ_radius = 6.0;  ///< envelope around the centreline, voxels
  IntensityParams intensity;
  std::uint64_t seed = 0;
};

struct Phantom {
  BinaryGrid duct;
  BinaryGrid organ;
  ScalarField intensity;
};

namespace detail {

inline double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double squared_distance_to_segment(const Point3& p, const Point3& a, const Point3& b) {
  Point3 ab{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  Point3 ap{p[0] - a[0], p[1] - a[1], p[2] - a[2]};
  const double len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2, 0.0, 1.0);
  const double dx = ap[0] - t * ab[0], dy = ap[1] - t * ab[1], dz = ap[2] - t * ab[2];
  return dx * dx + dy * dy + dz * dz;
}

// Sets every voxel within `radius` (index space, inclusive) of segment a-b.
inline void stamp_capsule(BinaryGrid& g, const Point3& a, const Point3& b, double radius) {
  const Shape s = g.shape();
  Box box;
  for (int axis = 0; axis < 3; ++axis) {
    const double lo = std::floor(std::min(a[axis], b[axis]) - radius);
    const double hi = std::ceil(std::max(a[axis], b[axis]) + radius);
    const auto n = static_cast<double>(s[axis]) - 1.0;
    const auto l = static_cast<std::int64_t>(std::clamp(lo, 0.0, n));
    const auto h = static_cast<std::int64_t>(std::clamp(hi, 0.0, n));
    if (axis == 0) box.lo.x = l, box.hi.x = h;
    if (axis == 1) box.lo.y = l, box.hi.y = h;
    if (axis == 2) box.lo.z = l, box.hi.z = h;
  }
  const double r2 = radius * radius;
  for (std::int64_t z = box.lo.z; z <= box.hi.z; ++z)
    for (std::int64_t y = box.lo.y; y <= box.hi.y; ++y)
      for (std::int64_t x = box.lo.x; x <= box.hi.x; ++x) {
        const Point3 p{static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
        if (squared_distance_to_segment(p, a, b) <= r2) g.at({x, y, z}) = 1;
      }
}

// Box mean of half-width r along each axis, repeated `passes` times. The
// window is clipped at the grid border and averaged over the voxels it holds.
inline void box_blur(ScalarField& f, int r, int passes) {
  if (r <= 0) return;
  const auto rr = static_cast<std::size_t>(r);
  for (int pass = 0; pass < passes; ++pass) {
    for (int axis = 0; axis < 3; ++axis) {
      detail::for_each_line(f.shape(), axis, [&](std::size_t start, std::size_t stride,
                                                 std::size_t len) {
        std::vector<double> prefix(len + 1, 0.0);
        for (std::size_t i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + f[start + i * stride];
        std::vector<float> out(len);
        for (std::size_t i = 0; i < len; ++i) {
          const std::size_t lo = i >= rr ? i - rr : 0;
          const std::size_t hi = std::min(len - 1, i + rr);
          out[i] = static_cast<float>((prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1));
        }
        for (std::size_t i = 0; i < len; ++i) f[start + i * stride] = out[i];
      });
    }
  }
}

}  // namespace detail

inline void validate(const PhantomSpec& spec) {
  if (!spec.shape.valid()) throw ContractError("phantom: shape components must be >= 1");
  if (!spec.spacing.valid()) throw ContractError("phantom: invalid spacing");
  if (spec.organ_radius < 0) throw ContractError("phantom: organ_radius must be >= 0");
  if (spec.intensity.blur_radius < 0) throw ContractError("phantom: blur_radius must be >= 0");
  if (spec.intensity.noise_amplitude < 0)
    throw ContractError("phantom: noise_amplitude must be >= 0");
  for (const auto& tube : spec.tubes) {
    if (tube.points.size() < 2) throw ContractError("phantom: a tube needs at least 2 points");
    if (tube.radii.size() != tube.points.size() - 1)
      throw ContractError("phantom: one radius per tube segment is required");
    for (double r : tube.radii)
      if (!(r >= 1.0)) throw ContractError("phantom: tube radii must be >= 1");
    for (const auto& p : tube.points)
      for (int a = 0; a < 3; ++a)
        if (!(p[a] >= 0.0 && p[a] <= static_cast<double>(spec.shape[a]) - 1.0))
          throw ContractError("phantom: centreline point outside the grid");
  }
}

/// Duct = union of capsules around the centreline; organ = voxels within
/// organ_radius of the centreline, united with the duct; intensity = two-level
/// image, box-blurred, plus seeded uniform noise.
inline Phantom gen_phantom(const PhantomSpec& spec) {
  validate(spec);
  Phantom ph{BinaryGrid(spec.shape, spec.spacing), BinaryGrid(spec.shape, spec.spacing),
             ScalarField(spec.shape, spec.spacing)};
  for (const auto& tube : spec.tubes) {
    for (std::size_t s = 0; s + 1 < tube.points.size(); ++s) {
      detail::stamp_capsule(ph.duct, tube.points[s], tube.points[s + 1], tube.radii[s]);
      if (spec.organ_radius > 0)
        detail::stamp_capsule(ph.organ, tube.points[s], tube.points[s + 1], spec.organ_radius);
    }
  }
  ph.organ = unite(ph.organ, ph.duct);

  const auto fg = static_cast<float>(spec.intensity.foreground);
  const auto bg = static_cast<float>(spec.intensity.background);
  for (std::size_t i = 0; i < ph.duct.size(); ++i) ph.intensity[i] = ph.duct[i] ? fg : bg;
  detail::box_blur(ph.intensity, spec.intensity.blur_radius, 3);
  if (spec.intensity.noise_amplitude > 0) {
    std::mt19937_64 rng(spec.seed);
    const double a = spec.intensity.noise_amplitude;
    for (std::size_t i = 0; i < ph.intensity.size(); ++i)
      ph.intensity[i] += static_cast<float>(a * (2.0 * detail::unit_draw(rng) - 1.0));
  }
  return ph;
}

// ---------------------------------------------------------------------------
// Perturbations

/// Removes the k mask voxels nearest (index space) to one skeleton endpoint.
/// Without an explicit endpoint index the endpoint is drawn from the seed.
struct TruncateTerminal {
  std::size_t k = 0;
  std::optional<std::size_t> endpoint;
};
struct DilateBy {
  int radius = 1;
};
struct ErodeBy {
  int radius = 1;
};
/// Sets a Euclidean ball (index space). Without a centre, one is drawn from the seed.
struct AddBlob {
  /// Drawn from the seed when absent, away from the mask so the blob is a
  /// separate component.
  std::optional<Index3> center;
  double radius = 2.0;
};
/// Clears the index-th 26-connected component (0-based, component label order).
struct DropComponent {
  std::size_t index = 0;
};

using PerturbOp = std::variant<TruncateTerminal, DilateBy, ErodeBy, AddBlob, DropComponent>;

struct PerturbationSpec {
  std::vector<PerturbOp> ops;
  std::uint64_t seed = 0;
};

inline BinaryGrid truncate_terminal(const BinaryGrid& mask, std::size_t k, const Index3& endpoint) {
  std::vector<std::pair<std::int64_t, std::size_t>> order;  // (squared distance, linear index)
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const Index3 p = mask.coord(i);
    const std::int64_t dx = p.x - endpoint.x, dy = p.y - endpoint.y, dz = p.z - endpoint.z;
    order.emplace_back(dx * dx + dy * dy + dz * dz, i);
  }
  const std::size_t n = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end());
  BinaryGrid out = mask;
  for (std::size_t j = 0; j < n; ++j) out[order[j].second] = 0;
  return out;
}

inline BinaryGrid add_ball(const BinaryGrid& mask, const Index3& c, double radius) {
  BinaryGrid out = mask;
  const auto r = static_cast<std::int64_t>(std::ceil(radius));
  const double r2 = radius * radius;
  for (std::int64_t z = c.z - r; z <= c.z + r; ++z)
    for (std::int64_t y = c.y - r; y <= c.y + r; ++y)
      for (std::int64_t x = c.x - r; x <= c.x + r; ++x) {
        const Index3 p{x, y, z};
        if (!out.in_bounds(p)) continue;
        const auto dx = static_cast<double>(x - c.x), dy = static_cast<double>(y - c.y),
                   dz = static_cast<double>(z - c.z);
        if (dx * dx + dy * dy + dz * dz <= r2) out.at(p) = 1;
      }
  return out;
}

/// Uniform over voxels far enough from the mask that a ball of `radius` there
/// is not 26-adjacent to it.
inline Index3 disjoint_blob_center(const BinaryGrid& mask, double radius, std::mt19937_64& rng) {
  const int reach = static_cast<int>(std::ceil(radius)) + 1;
  const BinaryGrid near = morphology(mask, MorphOp::dilate, reach);
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < near.size(); ++i)
    if (!near[i]) free.push_back(i);
  if (free.empty()) throw ContractError("perturb: no room for a blob disjoint from the mask");
  return mask.coord(free[static_cast<std::size_t>(rng() % free.size())]);
}

/// Applies the operations in order. One generator seeded with spec.seed
/// serves every randomized choice, consumed in operation order.
inline BinaryGrid perturb(const BinaryGrid& mask, const PerturbationSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  BinaryGrid cur = mask;
  for (const auto& op : spec.ops) {
    if (const auto* t = std::get_if<TruncateTerminal>(&op)) {
      const EndpointSet ends = skeleton_endpoints(cur);
      if (ends.empty()) throw ContractError("perturb: truncate_terminal on a mask without endpoints");
      std::size_t which;
      if (t->endpoint) {
        if (*t->endpoint >= ends.size())
          throw ContractError("perturb: endpoint index " + std::to_string(*t->endpoint) +
                              " out of range (" + std::to_string(ends.size()) + " endpoints)");
        which = *t->endpoint;
      } else {
        which = static_cast<std::size_t>(rng() % ends.size());
      }
      cur = truncate_terminal(cur, t->k, ends[which]);
    } else if (const auto* d = std::get_if<DilateBy>(&op)) {
      cur = morphology(cur, MorphOp::dilate, d->radius);
    } else if (const auto* e = std::get_if<ErodeBy>(&op)) {
      cur = morphology(cur, MorphOp::erode, e->radius);
    } else if (const auto* b = std::get_if<AddBlob>(&op)) {
      if (!(b->radius >= 0)) throw ContractError("perturb: blob radius must be >= 0");
      const Index3 c = b->center ? *b->center : disjoint_blob_center(cur, b->radius, rng);
      cur = add_ball(cur, c, b->radius);
    } else if (const auto* dc = std::get_if<DropComponent>(&op)) {
      const Components cc = connected_components(cur, Connectivity::twentysix);
      if (dc->index >= cc.count)
        throw ContractError("perturb: component index " + std::to_string(dc->index) +
                            " out of range (" + std::to_string(cc.count) + " components)");
      const auto label = static_cast<std::int32_t>(dc->index + 1);
      for (std::size_t i = 0; i < cur.size(); ++i)
        if (cc.labels[i] == label) cur[i] = 0;
    }
  }
  return cur;
}

}  // namespace tubeterm
