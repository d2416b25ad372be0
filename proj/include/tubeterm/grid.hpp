#pragma once

// Voxel containers shared by every module.
//
// Linear voxel order is x fastest, then y, then z:
//   index(x, y, z) = x + nx * (y + ny * z)
// All serialized forms (NIfTI payload, raw volumes, JSON coordinate lists)
// use this order. Coordinates outside the grid are treated as background by
// every neighbourhood operation.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tubeterm/errors.hpp"
#include "tubeterm/parallel.hpp"

namespace tubeterm {

/// Physical voxel edge lengths in millimetres.
struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;

  constexpr double operator[](int axis) const { return axis == 0 ? sx : axis == 1 ? sy : sz; }
  friend constexpr bool operator==(const Spacing&, const Spacing&) = default;

  bool valid() const {
    return std::isfinite(sx) && std::isfinite(sy) && std::isfinite(sz) && sx > 0 && sy > 0 &&
           sz > 0;
  }
};

struct Shape {
  std::size_t nx = 1;
  std::size_t ny = 1;
  std::size_t nz = 1;

  constexpr std::size_t operator[](int axis) const { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  constexpr std::size_t voxel_count() const { return nx * ny * nz; }
  constexpr bool valid() const { return nx >= 1 && ny >= 1 && nz >= 1; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

/// Voxel coordinate. Signed so that offsets and window arithmetic can leave
/// the grid before clipping. Ordering is lexicographic by (z, y, x), which
/// coincides with linear voxel order.
struct Index3 {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  friend constexpr bool operator==(const Index3&, const Index3&) = default;
  friend constexpr std::strong_ordering operator<=>(const Index3& a, const Index3& b) {
    if (auto c = a.z <=> b.z; c != 0) return c;
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
  constexpr std::int64_t operator[](int axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
};

inline std::int64_t chebyshev(const Index3& a, const Index3& b) {
  return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
}

/// Inclusive axis-aligned voxel box.
struct Box {
  Index3 lo;
  Index3 hi;

  constexpr bool empty() const { return hi.x < lo.x || hi.y < lo.y || hi.z < lo.z; }
  constexpr Shape shape() const {
    return {static_cast<std::size_t>(hi.x - lo.x + 1), static_cast<std::size_t>(hi.y - lo.y + 1),
            static_cast<std::size_t>(hi.z - lo.z + 1)};
  }
  constexpr bool contains(const Index3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
  }
  friend constexpr bool operator==(const Box&, const Box&) = default;
};

inline Box full_box(const Shape& s) {
  return {{0, 0, 0},
          {static_cast<std::int64_t>(s.nx) - 1, static_cast<std::int64_t>(s.ny) - 1,
           static_cast<std::int64_t>(s.nz) - 1}};
}

inline Box clip(const Box& b, const Shape& s) {
  const Box g = full_box(s);
  return {{std::max(b.lo.x, g.lo.x), std::max(b.lo.y, g.lo.y), std::max(b.lo.z, g.lo.z)},
          {std::min(b.hi.x, g.hi.x), std::min(b.hi.y, g.hi.y), std::min(b.hi.z, g.hi.z)}};
}

/// Dense 3D voxel array with geometry. Immutable from the caller's point of
/// view once handed to an operation; every operation returns a new grid.
template <class T>
class Grid {
public:
  using value_type = T;

  Grid() = default;

  Grid(Shape shape, Spacing spacing, T fill = T{})
      : shape_(checked(shape, spacing)), spacing_(spacing), data_(shape.voxel_count(), fill) {}

  Grid(Shape shape, Spacing spacing, std::vector<T> data)
      : shape_(checked(shape, spacing)), spacing_(spacing), data_(std::move(data)) {
    if (data_.size() != shape_.voxel_count())
      throw ContractError("grid data length " + std::to_string(data_.size()) +
                          " does not match shape voxel count " +
                          std::to_string(shape_.voxel_count()));
  }

  const Shape& shape() const { return shape_; }
  const Spacing& spacing() const { return spacing_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + shape_.nx * (y + shape_.ny * z);
  }
  std::size_t index(const Index3& p) const {
    return index(static_cast<std::size_t>(p.x), static_cast<std::size_t>(p.y),
                 static_cast<std::size_t>(p.z));
  }
  Index3 coord(std::size_t i) const {
    const std::size_t x = i % shape_.nx;
    const std::size_t y = (i / shape_.nx) % shape_.ny;
    const std::size_t z = i / (shape_.nx * shape_.ny);
    return {static_cast<std::int64_t>(x), static_cast<std::int64_t>(y),
            static_cast<std::int64_t>(z)};
  }
  bool in_bounds(const Index3& p) const {
    return p.x >= 0 && p.y >= 0 && p.z >= 0 && p.x < static_cast<std::int64_t>(shape_.nx) &&
           p.y < static_cast<std::int64_t>(shape_.ny) && p.z < static_cast<std::int64_t>(shape_.nz);
  }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& operator()(std::size_t x, std::size_t y, std::size_t z) { return data_[index(x, y, z)]; }
  const T& operator()(std::size_t x, std::size_t y, std::size_t z) const {
    return data_[index(x, y, z)];
  }
  T& at(const Index3& p) { return data_[index(p)]; }
  const T& at(const Index3& p) const { return data_[index(p)]; }

  /// Value at p, or `outside` when p is off-grid.
  T get_or(const Index3& p, T outside) const { return in_bounds(p) ? data_[index(p)] : outside; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

private:
  static Shape checked(const Shape& shape, const Spacing& spacing) {
    if (!shape.valid()) throw ContractError("grid shape components must be >= 1");
    if (!spacing.valid()) throw ContractError("spacing components must be finite and > 0");
    return shape;
  }

  Shape shape_{};
  Spacing spacing_{};
  std::vector<T> data_;
};

/// Boolean mask stored one byte per voxel (0 or 1).
using BinaryGrid = Grid<std::uint8_t>;
/// Real-valued voxel map (intensities, distance maps).
using ScalarField = Grid<float>;
/// Integer label map (connected-component labels).
using LabelGrid = Grid<std::int32_t>;

template <class A, class B>
bool same_geometry(const Grid<A>& a, const Grid<B>& b) {
  return a.shape() == b.shape() && a.spacing() == b.spacing();
}

template <class A, class B>
void require_same_geometry(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (a.shape() != b.shape())
    throw GeometryError(std::string(what) + ": shape mismatch");
  if (a.spacing() != b.spacing())
    throw GeometryError(std::string(what) + ": spacing mismatch");
}

inline std::size_t count(const BinaryGrid& m) {
  std::size_t n = 0;
  for (auto v : m.values()) n += (v != 0);
  return n;
}

inline bool any(const BinaryGrid& m) {
  return std::any_of(m.values().begin(), m.values().end(), [](auto v) { return v != 0; });
}

/// Coordinates of all foreground voxels in linear order.
inline std::vector<Index3> foreground(const BinaryGrid& m) {
  std::vector<Index3> out;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) out.push_back(m.coord(i));
  return out;
}

/// True when every foreground voxel of `a` is foreground in `b`.
inline bool is_subset(const BinaryGrid& a, const BinaryGrid& b) {
  require_same_geometry(a, b, "is_subset");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

inline BinaryGrid intersect(const BinaryGrid& a, const BinaryGrid& b) {
  require_same_geometry(a, b, "intersect");
  BinaryGrid out(a.shape(), a.spacing());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] && b[i]) ? 1 : 0;
  return out;
}

inline BinaryGrid unite(const BinaryGrid& a, const BinaryGrid& b) {
  require_same_geometry(a, b, "unite");
  BinaryGrid out(a.shape(), a.spacing());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] || b[i]) ? 1 : 0;
  return out;
}

/// Mask converted to a 0/1 scalar channel.
inline ScalarField to_field(const BinaryGrid& m) {
  ScalarField out(m.shape(), m.spacing());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] ? 1.0f : 0.0f;
  return out;
}

/// Sub-volume inside `box` (which must lie inside the grid).
template <class T>
Grid<T> crop(const Grid<T>& g, const Box& box) {
  if (box.empty() || clip(box, g.shape()) != box)
    throw GeometryError("crop: window is empty or exceeds the grid");
  const Shape s = box.shape();
  Grid<T> out(s, g.spacing());
  for (std::size_t z = 0; z < s.nz; ++z)
    for (std::size_t y = 0; y < s.ny; ++y)
      for (std::size_t x = 0; x < s.nx; ++x)
        out(x, y, z) = g(x + box.lo.x, y + box.lo.y, z + box.lo.z);
  return out;
}

/// Writes `src` into `dst` with its origin at box.lo.
template <class T>
void paste(Grid<T>& dst, const Grid<T>& src, const Box& box) {
  if (box.shape() != src.shape() || clip(box, dst.shape()) != box)
    throw GeometryError("paste: window does not match source or exceeds the grid");
  const Shape s = src.shape();
  for (std::size_t z = 0; z < s.nz; ++z)
    for (std::size_t y = 0; y < s.ny; ++y)
      for (std::size_t x = 0; x < s.nx; ++x)
        dst(x + box.lo.x, y + box.lo.y, z + box.lo.z) = src(x, y, z);
}

namespace detail {

/// Calls f(start, stride, length) for every 1D line of the grid along `axis`.
/// Lines are visited in parallel; each line is owned by one call.
template <class F>
void for_each_line(const Shape& s, int axis, F&& f) {
  const std::size_t nx = s.nx, ny = s.ny, nz = s.nz;
  const std::size_t len = s[axis];
  const std::size_t lines = s.voxel_count() / len;
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? nx : nx * ny;
  parallel_for(
      lines,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t l = begin; l < end; ++l) {
          std::size_t start;
          if (axis == 0) {
            start = l * nx;
          } else if (axis == 1) {
            const std::size_t x = l % nx, z = l / nx;
            start = x + nx * ny * z;
          } else {
            start = l;
          }
          f(start, stride, len);
        }
      },
      64);
  (void)nz;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Confusion counts

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  friend constexpr bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline ConfusionCounts confusion(const BinaryGrid& pred, const BinaryGrid& gt) {
  require_same_geometry(pred, gt, "confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    if (p && g)
      ++c.tp;
    else if (p)
      ++c.fp;
    else if (g)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Connectivity

enum class Connectivity { six = 6, eighteen = 18, twentysix = 26 };

inline Connectivity connectivity_from_int(int n) {
  switch (n) {
    case 6: return Connectivity::six;
    case 18: return Connectivity::eighteen;
    case 26: return Connectivity::twentysix;
    default: throw ContractError("connectivity must be 6, 18 or 26, got " + std::to_string(n));
  }
}

/// Neighbour offsets (excluding the centre) for a connectivity.
inline std::vector<Index3> neighbour_offsets(Connectivity c) {
  std::vector<Index3> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int order = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (order == 0) continue;
        if (c == Connectivity::six && order > 1) continue;
        if (c == Connectivity::eighteen && order > 2) continue;
        out.push_back({dx, dy, dz});
      }
  return out;
}

struct Components {
  LabelGrid labels;  ///< 0 on background, 1..count on foreground.
  std::size_t count = 0;
};

/// Labels are assigned in order of each component's first voxel in linear order.
inline Components connected_components(const BinaryGrid& mask,
                                       Connectivity conn = Connectivity::twentysix) {
  Components out{LabelGrid(mask.shape(), mask.spacing(), 0), 0};
  const auto offsets = neighbour_offsets(conn);
  std::deque<std::size_t> queue;
  for (std::size_t seed = 0; seed < mask.size(); ++seed) {
    if (!mask[seed] || out.labels[seed] != 0) continue;
    const auto label = static_cast<std::int32_t>(++out.count);
    out.labels[seed] = label;
    queue.push_back(seed);
    while (!queue.empty()) {
      const std::size_t cur = queue.front();
      queue.pop_front();
      const Index3 p = mask.coord(cur);
      for (const auto& o : offsets) {
        const Index3 q{p.x + o.x, p.y + o.y, p.z + o.z};
        if (!mask.in_bounds(q)) continue;
        const std::size_t qi = mask.index(q);
        if (mask[qi] && out.labels[qi] == 0) {
          out.labels[qi] = label;
          queue.push_back(qi);
        }
      }
    }
  }
  return out;
}

inline std::size_t component_count(const BinaryGrid& mask,
                                   Connectivity conn = Connectivity::twentysix) {
  return connected_components(mask, conn).count;
}

// ---------------------------------------------------------------------------
// Morphology with a cubic (Chebyshev) structuring element, index space.

enum class MorphOp { dilate, erode };

inline BinaryGrid morphology(const BinaryGrid& mask, MorphOp op, int radius) {
  if (radius < 0) throw ContractError("morphology radius must be >= 0");
  BinaryGrid cur = mask;
  if (radius == 0) return cur;
  const auto r = static_cast<std::size_t>(radius);
  for (int axis = 0; axis < 3; ++axis) {
    BinaryGrid next(cur.shape(), cur.spacing());
    detail::for_each_line(cur.shape(), axis, [&](std::size_t start, std::size_t stride,
                                                 std::size_t len) {
      // prefix[i] = number of foreground voxels among the first i of the line
      std::vector<std::uint32_t> prefix(len + 1, 0);
      for (std::size_t i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + (cur[start + i * stride] != 0);
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t lo = i >= r ? i - r : 0;
        const std::size_t hi = std::min(len - 1, i + r);
        const std::uint32_t hits = prefix[hi + 1] - prefix[lo];
        bool v;
        if (op == MorphOp::dilate) {
          v = hits > 0;
        } else {
          // the window must lie fully inside the grid: outside is background
          v = i >= r && i + r < len && hits == 2 * r + 1;
        }
        next[start + i * stride] = v ? 1 : 0;
      }
    });
    cur = std::move(next);
  }
  return cur;
}

}  // namespace tubeterm
