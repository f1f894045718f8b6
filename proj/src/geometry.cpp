#include "hitadv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hitadv {

void PointCloud::validate() const {
  if (points.empty()) throw std::runtime_error("point cloud is empty");
  for (const Vec3& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw std::runtime_error("point cloud contains non-finite coordinates");
  }
  for (const auto& [name, values] : attrs) {
    if (values.size() != points.size())
      throw std::runtime_error("attrs channel '" + name + "' has length " +
                               std::to_string(values.size()) + ", expected " +
                               std::to_string(points.size()));
  }
}

NeighborhoodIndex knn(const PointCloud& cloud, int k) {
  const int m = static_cast<int>(cloud.size());
  if (k < 1 || k > m - 1)
    throw std::invalid_argument("knn: k=" + std::to_string(k) + " out of range for m=" +
                                std::to_string(m));

  NeighborhoodIndex idx;
  idx.k = k;
  idx.neighbors.resize(m);

  // Brute force; exact by construction, plenty fast at desk scale.
  std::vector<std::pair<double, int>> cand(m - 1);
  for (int j = 0; j < m; ++j) {
    int c = 0;
    for (int i = 0; i < m; ++i) {
      if (i == j) continue;
      cand[c++] = {norm2(cloud.points[i] - cloud.points[j]), i};
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    auto& list = idx.neighbors[j];
    list.resize(k);
    for (int i = 0; i < k; ++i) list[i] = cand[i].second;
  }
  return idx;
}

std::vector<int> fps(const PointCloud& cloud, int n, std::uint64_t seed) {
  const int m = static_cast<int>(cloud.size());
  if (n < 1 || n > m)
    throw std::invalid_argument("fps: n=" + std::to_string(n) + " out of range for m=" +
                                std::to_string(m));

  std::vector<int> selected;
  selected.reserve(n);
  int first = static_cast<int>(seed % static_cast<std::uint64_t>(m));
  selected.push_back(first);

  std::vector<double> min_d2(m);
  for (int i = 0; i < m; ++i) min_d2[i] = norm2(cloud.points[i] - cloud.points[first]);

  while (static_cast<int>(selected.size()) < n) {
    int best = -1;
    double best_d2 = -1.0;
    for (int i = 0; i < m; ++i) {
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    }
    selected.push_back(best);
    for (int i = 0; i < m; ++i)
      min_d2[i] = std::min(min_d2[i], norm2(cloud.points[i] - cloud.points[best]));
  }
  return selected;
}

NormalField estimate_normals(const PointCloud& cloud, const NeighborhoodIndex& nbr) {
  const int m = static_cast<int>(cloud.size());
  if (nbr.k < 3) throw std::invalid_argument("estimate_normals: needs k >= 3");

  NormalField field;
  field.normals.resize(m);
  field.degenerate.assign(m, false);

  for (int j = 0; j < m; ++j) {
    // covariance of the query point plus its neighborhood
    Vec3 mean = cloud.points[j];
    for (int q : nbr.neighbors[j]) mean += cloud.points[q];
    mean *= 1.0 / (nbr.k + 1);

    Mat3 cov;
    auto accumulate = [&](const Vec3& p) {
      Vec3 d = p - mean;
      cov(0, 0) += d.x * d.x; cov(0, 1) += d.x * d.y; cov(0, 2) += d.x * d.z;
      cov(1, 1) += d.y * d.y; cov(1, 2) += d.y * d.z; cov(2, 2) += d.z * d.z;
    };
    accumulate(cloud.points[j]);
    for (int q : nbr.neighbors[j]) accumulate(cloud.points[q]);
    cov(1, 0) = cov(0, 1); cov(2, 0) = cov(0, 2); cov(2, 1) = cov(1, 2);

    double trace = cov(0, 0) + cov(1, 1) + cov(2, 2);
    if (trace < 1e-24) {
      field.normals[j] = {0.0, 0.0, 1.0};
      field.degenerate[j] = true;
      continue;
    }

    Vec3 n = sym_eigen3(cov).vectors[0];
    // canonical sign: first nonzero component positive
    for (int c = 0; c < 3; ++c) {
      if (std::abs(n[c]) > 1e-12) {
        if (n[c] < 0) n = -n;
        break;
      }
    }
    field.normals[j] = n;
  }
  return field;
}

double local_curvature(const PointCloud& cloud, const NormalField& normals,
                       const NeighborhoodIndex& nbr, int j) {
  double sum = 0.0;
  for (int q : nbr.neighbors[j]) {
    Vec3 chord = cloud.points[q] - cloud.points[j];
    double len = norm(chord);
    if (len <= 0.0) continue;  // coincident neighbor contributes 0
    sum += std::abs(dot(chord, normals.normals[j])) / len;
  }
  return sum / nbr.k;
}

std::vector<double> local_curvature_all(const PointCloud& cloud, const NormalField& normals,
                                        const NeighborhoodIndex& nbr) {
  std::vector<double> out(cloud.size());
  for (int j = 0; j < static_cast<int>(cloud.size()); ++j)
    out[j] = local_curvature(cloud, normals, nbr, j);
  return out;
}

double curvature_std(const PointCloud& cloud, const NormalField& normals,
                     const NeighborhoodIndex& nbr, int j) {
  double mean = 0.0;
  for (int q : nbr.neighbors[j]) mean += local_curvature(cloud, normals, nbr, q);
  mean /= nbr.k;
  double var = 0.0;
  for (int q : nbr.neighbors[j]) {
    double d = local_curvature(cloud, normals, nbr, q) - mean;
    var += d * d;
  }
  return std::sqrt(var / nbr.k);
}

std::vector<double> curvature_std_all(const std::vector<double>& curvatures,
                                      const NeighborhoodIndex& nbr) {
  std::vector<double> out(curvatures.size());
  for (std::size_t j = 0; j < curvatures.size(); ++j) {
    double mean = 0.0;
    for (int q : nbr.neighbors[j]) mean += curvatures[q];
    mean /= nbr.k;
    double var = 0.0;
    for (int q : nbr.neighbors[j]) {
      double d = curvatures[q] - mean;
      var += d * d;
    }
    out[j] = std::sqrt(var / nbr.k);
  }
  return out;
}

std::vector<double> curvature_std_profile(const PointCloud& cloud, int k) {
  NeighborhoodIndex nbr = knn(cloud, k);
  NormalField normals = estimate_normals(cloud, nbr);
  return curvature_std_all(local_curvature_all(cloud, normals, nbr), nbr);
}

}  // namespace hitadv
