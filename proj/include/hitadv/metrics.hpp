#pragma once

#include <string>
#include <vector>

#include "hitadv/point_cloud.hpp"

namespace hitadv {

/// Curvature-consistency distance: l2 norm between the per-point
/// curvature-std vectors of the two clouds, correspondence by index for
/// equal counts, nearest neighbor otherwise (with a warning).
double csd_metric(const PointCloud& clean, const PointCloud& adv, int k,
                  std::vector<std::string>* warnings = nullptr);

/// Mean over points of the mean distance to the k nearest neighbors.
double knn_dist_metric(const PointCloud& adv, int k);

/// Symmetric squared-distance Chamfer distance (same formula as the attack's
/// Chamfer loss, exposed with the metrics).
double chamfer_metric(const PointCloud& a, const PointCloud& b);

}  // namespace hitadv
