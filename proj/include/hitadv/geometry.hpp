#pragma once

#include <cstdint>
#include <vector>

#include "hitadv/point_cloud.hpp"

namespace hitadv {

/// Exact k-nearest neighbors under Euclidean distance, ties broken by the
/// smaller index. Requires 1 <= k <= m-1.
NeighborhoodIndex knn(const PointCloud& cloud, int k);

/// Farthest point sampling. The first index is seed % m; each following pick
/// maximizes the minimum distance to everything already selected, ties broken
/// by the smaller index. Returns the n indices in greedy order.
std::vector<int> fps(const PointCloud& cloud, int n, std::uint64_t seed);

/// PCA normals over {p_j} + its k neighbors: unit eigenvector of the smallest
/// covariance eigenvalue, sign fixed so the first nonzero component is
/// positive. Coincident neighborhoods fall back to +z and set the degenerate
/// flag.
NormalField estimate_normals(const PointCloud& cloud, const NeighborhoodIndex& nbr);

/// Mean absolute dot of unit chords against the normal:
///   C(p_j) = (1/k) sum_q |<(q - p_j)/||q - p_j||, n_j>|.
/// Coincident neighbors contribute 0.
double local_curvature(const PointCloud& cloud, const NormalField& normals,
                       const NeighborhoodIndex& nbr, int j);

/// Population standard deviation of the curvatures of p_j's neighbors.
double curvature_std(const PointCloud& cloud, const NormalField& normals,
                     const NeighborhoodIndex& nbr, int j);

/// Per-point curvature for the whole cloud.
std::vector<double> local_curvature_all(const PointCloud& cloud, const NormalField& normals,
                                        const NeighborhoodIndex& nbr);

/// Per-point curvature std; `curvatures` must come from local_curvature_all
/// over the same neighborhood index.
std::vector<double> curvature_std_all(const std::vector<double>& curvatures,
                                      const NeighborhoodIndex& nbr);

/// Per-point curvature-std vector computed from scratch (knn + normals),
/// the quantity compared by the CSD metric.
std::vector<double> curvature_std_profile(const PointCloud& cloud, int k);

}  // namespace hitadv
