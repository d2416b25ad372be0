#pragma once

// Medial-axis thinning, skeleton graphs and endpoint detection.
//
// Thinning follows Lee, Kashyap & Chu (1994): repeated sub-iterations over six
// border directions. In each sub-iteration every border voxel that is not an
// arc end, is Euler invariant and is simple becomes a candidate; candidates
// are then deleted one at a time in scan order, re-checking simplicity against
// the current image so that parallel deletion cannot break connectivity.
// The re-check includes the Euler test and treats a voxel left with no
// neighbours as not simple. It also keeps a candidate that has become the end
// of a one-voxel curve earlier in the same pass; otherwise a tube two voxels
// thick is eaten from one end, voxel after voxel, within a single pass.
// Iteration stops after a full round in which nothing was deleted.

#include <algorithm>
#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "tubeterm/grid.hpp"

namespace tubeterm {

struct SkeletonOptions {
  /// Input components (26-connected) smaller than this are dropped before
  /// thinning. 0 keeps everything.
  std::size_t min_component_size = 0;
};

/// Undirected graph over skeleton voxels with 26-adjacency edges.
struct SkeletonGraph {
  Shape shape;
  std::vector<Index3> nodes;                             ///< linear voxel order
  std::vector<std::pair<std::size_t, std::size_t>> edges;  ///< first < second
  std::vector<std::size_t> degree;
};

/// Endpoints sorted by (z, y, x).
using EndpointSet = std::vector<Index3>;

namespace detail {

// Neighbourhood layout: index (dz+1)*9 + (dy+1)*3 + (dx+1); 13 is the centre.
using Neighbourhood = std::array<std::uint8_t, 27>;

// Euler characteristic change per 2x2x2 octant configuration (Lee et al.,
// table for 26-connectivity). Indexed by the 8-bit octant code; only odd
// codes (centre set) are used.
inline constexpr std::array<int, 256> kEulerLut = [] {
  std::array<int, 256> t{};
  constexpr std::pair<int, int> entries[] = {
      {1, 1},    {3, -1},   {5, -1},   {7, 1},    {9, -3},   {11, -1},  {13, -1},  {15, 1},
      {17, -1},  {19, 1},   {21, 1},   {23, -1},  {25, 3},   {27, 1},   {29, 1},   {31, -1},
      {33, -3},  {35, -1},  {37, 3},   {39, 1},   {41, 1},   {43, -1},  {45, 3},   {47, 1},
      {49, -1},  {51, 1},   {53, 1},   {55, -1},  {57, 3},   {59, 1},   {61, 1},   {63, -1},
      {65, -3},  {67, 3},   {69, -1},  {71, 1},   {73, 1},   {75, 3},   {77, -1},  {79, 1},
      {81, -1},  {83, 1},   {85, 1},   {87, -1},  {89, 3},   {91, 1},   {93, 1},   {95, -1},
      {97, 1},   {99, 3},   {101, 3},  {103, 1},  {105, 5},  {107, 3},  {109, 3},  {111, 1},
      {113, -1}, {115, 1},  {117, 1},  {119, -1}, {121, 3},  {123, 1},  {125, 1},  {127, -1},
      {129, -7}, {131, -1}, {133, -1}, {135, 1},  {137, -3}, {139, -1}, {141, -1}, {143, 1},
      {145, -1}, {147, 1},  {149, 1},  {151, -1}, {153, 3},  {155, 1},  {157, 1},  {159, -1},
      {161, -3}, {163, -1}, {165, 3},  {167, 1},  {169, 1},  {171, -1}, {173, 3},  {175, 1},
      {177, -1}, {179, 1},  {181, 1},  {183, -1}, {185, 3},  {187, 1},  {189, 1},  {191, -1},
      {193, -3}, {195, 3},  {197, -1}, {199, 1},  {201, 1},  {203, 3},  {205, -1}, {207, 1},
      {209, -1}, {211, 1},  {213, 1},  {215, -1}, {217, 3},  {219, 1},  {221, 1},  {223, -1},
      {225, 1},  {227, 3},  {229, 3},  {231, 1},  {233, 5},  {235, 3},  {237, 3},  {239, 1},
      {241, -1}, {243, 1},  {245, 1},  {247, -1}, {249, 3},  {251, 1},  {253, 1},  {255, -1},
  };
  for (auto [code, value] : entries) t[code] = value;
  return t;
}();

// For each octant, the seven non-centre neighbourhood positions mapped to
// bits 128, 64, 32, 16, 8, 4, 2 (bit 1 is the centre).
inline constexpr std::array<std::array<int, 7>, 8> kOctants = {{
    {24, 25, 15, 16, 21, 22, 12},
    {26, 23, 17, 14, 25, 22, 16},
    {18, 21, 9, 12, 19, 22, 10},
    {20, 23, 19, 22, 11, 14, 10},
    {6, 15, 7, 16, 3, 12, 4},
    {8, 7, 17, 16, 5, 4, 14},
    {0, 9, 3, 12, 1, 10, 4},
    {2, 1, 11, 10, 5, 4, 14},
}};

inline bool euler_invariant(const Neighbourhood& nb) {
  int change = 0;
  for (const auto& oct : kOctants) {
    unsigned code = 1;
    unsigned bit = 128;
    for (int pos : oct) {
      if (nb[pos]) code |= bit;
      bit >>= 1;
    }
    change += kEulerLut[code];
  }
  return change == 0;
}

// Adjacency of the 26 neighbourhood positions among themselves (26-adjacency).
inline const std::array<std::vector<int>, 27>& neighbourhood_adjacency() {
  static const auto table = [] {
    std::array<std::vector<int>, 27> adj;
    for (int a = 0; a < 27; ++a) {
      if (a == 13) continue;
      for (int b = 0; b < 27; ++b) {
        if (b == 13 || b == a) continue;
        const int ax = a % 3, ay = (a / 3) % 3, az = a / 9;
        const int bx = b % 3, by = (b / 3) % 3, bz = b / 9;
        if (std::abs(ax - bx) <= 1 && std::abs(ay - by) <= 1 && std::abs(az - bz) <= 1)
          adj[a].push_back(b);
      }
    }
    return adj;
  }();
  return table;
}

// Number of 26-connected components among the foreground neighbours, capped at 2.
inline int neighbour_components(const Neighbourhood& nb) {
  const auto& adj = neighbourhood_adjacency();
  std::array<bool, 27> seen{};
  int components = 0;
  std::array<int, 27> stack{};
  for (int start = 0; start < 27; ++start) {
    if (start == 13 || !nb[start] || seen[start]) continue;
    if (++components > 1) return components;
    int top = 0;
    stack[top++] = start;
    seen[start] = true;
    while (top > 0) {
      const int cur = stack[--top];
      for (int n : adj[cur]) {
        if (nb[n] && !seen[n]) {
          seen[n] = true;
          stack[top++] = n;
        }
      }
    }
  }
  return components;
}

// Removing the centre keeps topology: Euler invariant and the neighbours stay
// one connected piece. Zero neighbours is not simple, so the last voxel of a
// component is never removed.
inline bool simple_point(const Neighbourhood& nb) {
  return neighbour_components(nb) == 1 && euler_invariant(nb);
}

// Volume padded by one background voxel on every side so neighbourhood reads
// never leave the buffer.
class PaddedVolume {
public:
  explicit PaddedVolume(const BinaryGrid& m)
      : px_(m.shape().nx + 2), py_(m.shape().ny + 2), pz_(m.shape().nz + 2),
        data_(px_ * py_ * pz_, 0) {
    const Shape s = m.shape();
    for (std::size_t z = 0; z < s.nz; ++z)
      for (std::size_t y = 0; y < s.ny; ++y)
        for (std::size_t x = 0; x < s.nx; ++x)
          if (m(x, y, z)) data_[padded(x, y, z)] = 1;
    int k = 0;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          offset_[k++] = dx + static_cast<std::ptrdiff_t>(px_) *
                                  (dy + static_cast<std::ptrdiff_t>(py_) * dz);
  }

  std::size_t padded(std::size_t x, std::size_t y, std::size_t z) const {
    return (x + 1) + px_ * ((y + 1) + py_ * (z + 1));
  }
  std::uint8_t& operator[](std::size_t i) { return data_[i]; }
  std::uint8_t operator[](std::size_t i) const { return data_[i]; }
  std::ptrdiff_t offset(int k) const { return offset_[k]; }

  int neighbour_count(std::size_t i) const {
    int n = -static_cast<int>(data_[i]);
    for (int k = 0; k < 27; ++k) n += data_[i + offset_[k]];
    return n;
  }

  // True when the voxel has exactly one neighbour and that neighbour has at
  // most two, i.e. the voxel ends a one-voxel-thick curve.
  bool curve_end(std::size_t i) const {
    std::size_t only = 0;
    int n = 0;
    for (int k = 0; k < 27; ++k) {
      if (k == 13 || !data_[i + offset_[k]]) continue;
      ++n;
      only = i + offset_[k];
    }
    return n == 1 && neighbour_count(only) <= 2;
  }

  Neighbourhood neighbourhood(std::size_t i) const {
    Neighbourhood nb;
    for (int k = 0; k < 27; ++k) nb[k] = data_[i + offset_[k]];
    return nb;
  }

  BinaryGrid unpad(const Shape& s, const Spacing& sp) const {
    BinaryGrid out(s, sp);
    for (std::size_t z = 0; z < s.nz; ++z)
      for (std::size_t y = 0; y < s.ny; ++y)
        for (std::size_t x = 0; x < s.nx; ++x) out(x, y, z) = data_[padded(x, y, z)];
    return out;
  }

private:
  std::size_t px_, py_, pz_;
  std::vector<std::uint8_t> data_;
  std::array<std::ptrdiff_t, 27> offset_{};
};

// Border directions in sub-iteration order U, D, N, S, E, W, given as the
// neighbourhood position whose emptiness makes a voxel a border voxel.
// U/D step along -y/+y (image rows), N/S along +x/-x, E/W along +z/-z.
inline constexpr std::array<int, 6> kBorderOrder = {10, 16, 14, 12, 22, 4};

}  // namespace detail

inline BinaryGrid drop_small_components(const BinaryGrid& mask, std::size_t min_size) {
  if (min_size <= 1) return mask;
  const Components cc = connected_components(mask, Connectivity::twentysix);
  std::vector<std::size_t> sizes(cc.count + 1, 0);
  for (auto l : cc.labels.values()) ++sizes[static_cast<std::size_t>(l)];
  BinaryGrid out(mask.shape(), mask.spacing());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto l = static_cast<std::size_t>(cc.labels[i]);
    out[i] = (l != 0 && sizes[l] >= min_size) ? 1 : 0;
  }
  return out;
}

/// Topology-preserving thinning to a one-voxel-thick skeleton. The result is
/// a subset of the input with the same 26-connected component count.
inline BinaryGrid skeletonize(const BinaryGrid& input, const SkeletonOptions& options = {}) {
  const BinaryGrid mask = drop_small_components(input, options.min_component_size);
  detail::PaddedVolume vol(mask);

  std::vector<std::size_t> alive;  // padded indices of foreground voxels, linear order
  {
    const Shape s = mask.shape();
    for (std::size_t z = 0; z < s.nz; ++z)
      for (std::size_t y = 0; y < s.ny; ++y)
        for (std::size_t x = 0; x < s.nx; ++x)
          if (mask(x, y, z)) alive.push_back(vol.padded(x, y, z));
  }

  std::vector<std::size_t> candidates;
  int unchanged = 0;
  while (unchanged < 6) {
    unchanged = 0;
    for (int border_pos : detail::kBorderOrder) {
      const std::ptrdiff_t border_offset = vol.offset(border_pos);
      candidates.clear();
      for (std::size_t i : alive) {
        if (vol[i + border_offset]) continue;  // not a border voxel in this direction
        const auto nb = vol.neighbourhood(i);
        int neighbours = 0;
        for (int k = 0; k < 27; ++k) neighbours += nb[k];
        if (neighbours - 1 == 1) continue;  // arc end
        if (!detail::simple_point(nb)) continue;
        candidates.push_back(i);
      }

      bool changed = false;
      for (std::size_t i : candidates) {
        if (vol.curve_end(i)) continue;
        vol[i] = 0;
        if (!detail::simple_point(vol.neighbourhood(i))) {
          vol[i] = 1;
        } else {
          changed = true;
        }
      }
      if (changed) {
        std::erase_if(alive, [&](std::size_t i) { return vol[i] == 0; });
      } else {
        ++unchanged;
      }
    }
  }
  return vol.unpad(mask.shape(), mask.spacing());
}

/// One node per foreground voxel, one edge per unordered 26-adjacent pair.
inline SkeletonGraph build_graph(const BinaryGrid& skeleton) {
  SkeletonGraph g;
  g.shape = skeleton.shape();
  constexpr auto none = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> node_of(skeleton.size(), none);
  for (std::size_t i = 0; i < skeleton.size(); ++i) {
    if (!skeleton[i]) continue;
    node_of[i] = static_cast<std::uint32_t>(g.nodes.size());
    g.nodes.push_back(skeleton.coord(i));
  }
  g.degree.assign(g.nodes.size(), 0);

  // the 13 offsets that come later in linear order
  std::vector<Index3> forward;
  for (const auto& o : neighbour_offsets(Connectivity::twentysix))
    if (o.z > 0 || (o.z == 0 && (o.y > 0 || (o.y == 0 && o.x > 0)))) forward.push_back(o);

  for (std::size_t a = 0; a < g.nodes.size(); ++a) {
    const Index3 p = g.nodes[a];
    for (const auto& o : forward) {
      const Index3 q{p.x + o.x, p.y + o.y, p.z + o.z};
      if (!skeleton.in_bounds(q)) continue;
      const std::uint32_t b = node_of[skeleton.index(q)];
      if (b == none) continue;
      g.edges.emplace_back(a, b);
      ++g.degree[a];
      ++g.degree[b];
    }
  }
  return g;
}

/// Nodes of degree 0 or 1, in (z, y, x) order.
inline EndpointSet endpoints(const SkeletonGraph& graph) {
  EndpointSet out;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i)
    if (graph.degree[i] <= 1) out.push_back(graph.nodes[i]);
  std::sort(out.begin(), out.end());
  return out;
}

/// Endpoints of the skeleton of `mask`.
inline EndpointSet skeleton_endpoints(const BinaryGrid& mask, const SkeletonOptions& options = {}) {
  return endpoints(build_graph(skeletonize(mask, options)));
}

}  // namespace tubeterm
