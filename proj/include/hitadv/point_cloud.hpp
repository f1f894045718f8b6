#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hitadv/vec3.hpp"

namespace hitadv {

/// Ordered set of 3D points with an optional label and optional named
/// per-point scalar channels. The universal currency of the toolkit.
struct PointCloud {
  std::vector<Vec3> points;
  std::optional<int> label;
  std::map<std::string, std::vector<double>> attrs;

  std::size_t size() const { return points.size(); }

  /// Throws if empty, non-finite, or an attrs channel has the wrong length.
  void validate() const;
};

/// Exact k-nearest-neighbor table over a cloud. Neighbor lists exclude the
/// query point, are sorted by ascending distance, and break ties by index.
struct NeighborhoodIndex {
  int k = 0;
  std::vector<std::vector<int>> neighbors;  // one list of k indices per point
};

struct NormalField {
  std::vector<Vec3> normals;          // unit vectors
  std::vector<bool> degenerate;       // neighborhood was all-coincident, +z fallback used
};

}  // namespace hitadv
