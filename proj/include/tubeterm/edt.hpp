#pragma once

// Exact Euclidean distance transforms.
//
// Separable lower-envelope algorithm (Felzenszwalb & Huttenlocher): one pass
// of 1D squared transforms per axis, each O(n). Anisotropic spacing enters as
// a per-axis scale on index offsets, so a squared distance is accumulated as
//   (dx*sx)^2 + (dy*sy)^2 + (dz*sz)^2
// in that order. With spacings that are exact binary fractions every value is
// exact in double precision.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "tubeterm/grid.hpp"

namespace tubeterm {

/// Squared physical distances in mm^2.
using SquaredField = Grid<double>;

/// Pancreas anatomy-aware map: distance to the complement inside the organ,
/// zero outside.
using PaaMap = ScalarField;

/// How voxels beyond the grid border are treated when looking for sites.
enum class Border {
  background_site,  ///< a virtual shell of sites surrounds the grid
  none,             ///< nothing exists beyond the grid
};

namespace detail {

struct EnvelopeScratch {
  std::vector<double> f;
  std::vector<std::int64_t> site;
  std::vector<double> site_f;
  std::vector<double> bound;
  std::vector<std::size_t> env;
};

// 1D squared distance transform of the line f (values +inf where no site
// reaches), in place. `scale` is the physical length of one index step.
inline void squared_edt_line(double* line, std::size_t stride, std::size_t n, double scale,
                             bool shell, EnvelopeScratch& s) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  s.f.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.f[i] = line[i * stride];

  s.site.clear();
  s.site_f.clear();
  if (shell) {
    s.site.push_back(-1);
    s.site_f.push_back(0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (s.f[i] != inf) {
      s.site.push_back(static_cast<std::int64_t>(i));
      s.site_f.push_back(s.f[i]);
    }
  }
  if (shell) {
    s.site.push_back(static_cast<std::int64_t>(n));
    s.site_f.push_back(0.0);
  }
  if (s.site.empty()) {
    for (std::size_t i = 0; i < n; ++i) line[i * stride] = inf;
    return;
  }

  auto height = [scale](std::int64_t q, double fq) {
    const double d = static_cast<double>(q) * scale;
    return fq + d * d;
  };
  // Abscissa where parabola rooted at b overtakes parabola rooted at a (a < b).
  auto intersect = [&](std::size_t a, std::size_t b) {
    return (height(s.site[b], s.site_f[b]) - height(s.site[a], s.site_f[a])) /
           (2.0 * scale * scale * static_cast<double>(s.site[b] - s.site[a]));
  };

  // env holds the parabolas of the lower envelope; bound[k] is where env[k] starts winning
  auto& env = s.env;
  env.clear();
  s.bound.assign(s.site.size() + 1, 0.0);
  env.push_back(0);
  s.bound[0] = -inf;
  s.bound[1] = inf;
  for (std::size_t q = 1; q < s.site.size(); ++q) {
    double x = intersect(env.back(), q);
    while (x <= s.bound[env.size() - 1]) {
      env.pop_back();
      x = intersect(env.back(), q);
    }
    env.push_back(q);
    s.bound[env.size() - 1] = x;
    s.bound[env.size()] = inf;
  }

  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double qi = static_cast<double>(i);
    while (k + 1 < env.size() && s.bound[k + 1] < qi) ++k;
    const std::size_t v = env[k];
    const double d = static_cast<double>(static_cast<std::int64_t>(i) - s.site[v]) * scale;
    line[i * stride] = s.site_f[v] + d * d;
  }
}

}  // namespace detail

/// Squared distance (mm^2) from each voxel centre to the nearest voxel with
/// sites[v] != 0. Voxels that are sites get 0. With Border::none and no sites
/// at all, every value is +infinity.
inline SquaredField squared_distance_to_sites(const BinaryGrid& sites, Border border) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  SquaredField out(sites.shape(), sites.spacing(), inf);
  for (std::size_t i = 0; i < sites.size(); ++i)
    if (sites[i]) out[i] = 0.0;
  const bool shell = border == Border::background_site;
  for (int axis = 0; axis < 3; ++axis) {
    const double scale = sites.spacing()[axis];
    detail::for_each_line(sites.shape(), axis,
                          [&](std::size_t start, std::size_t stride, std::size_t len) {
                            thread_local detail::EnvelopeScratch scratch;
                            detail::squared_edt_line(out.values().data() + start, stride, len,
                                                     scale, shell, scratch);
                          });
  }
  return out;
}

/// Exact squared distance (mm^2) from each foreground voxel to the nearest
/// background voxel, counting the space outside the grid as background.
/// Background voxels are 0.
inline SquaredField squared_edt_inside(const BinaryGrid& mask) {
  BinaryGrid complement(mask.shape(), mask.spacing());
  for (std::size_t i = 0; i < mask.size(); ++i) complement[i] = mask[i] ? 0 : 1;
  return squared_distance_to_sites(complement, Border::background_site);
}

/// Euclidean distance (mm) to the nearest background voxel, 0 on background.
/// Computed exactly in squared form; the square root is rounded to float once.
inline ScalarField edt_inside(const BinaryGrid& mask) {
  const SquaredField sq = squared_edt_inside(mask);
  ScalarField out(mask.shape(), mask.spacing());
  for (std::size_t i = 0; i < sq.size(); ++i) out[i] = static_cast<float>(std::sqrt(sq[i]));
  return out;
}

/// Distance-to-boundary map of the organ mask: for x inside the mask, the
/// distance to the nearest voxel centre outside it; 0 elsewhere.
inline PaaMap paa(const BinaryGrid& organ_mask) { return edt_inside(organ_mask); }

}  // namespace tubeterm
