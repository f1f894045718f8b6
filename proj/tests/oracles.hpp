#pragma once

// Independent brute-force reference implementations. Everything here is
// deliberately written from the definitions, sharing nothing with the
// library's code paths, so the equivalence tests mean something.

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "hitadv/attack.hpp"
#include "hitadv/point_cloud.hpp"
#include "hitadv/rng.hpp"

namespace oracle {

using hitadv::PointCloud;
using hitadv::Vec3;

inline double dist(const Vec3& a, const Vec3& b) {
  double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline std::vector<std::vector<int>> knn(const PointCloud& cloud, int k) {
  const int m = static_cast<int>(cloud.size());
  std::vector<std::vector<int>> out(m);
  for (int j = 0; j < m; ++j) {
    std::vector<std::pair<double, int>> all;
    for (int i = 0; i < m; ++i)
      if (i != j) all.push_back({dist(cloud.points[i], cloud.points[j]), i});
    std::sort(all.begin(), all.end());
    for (int i = 0; i < k; ++i) out[j].push_back(all[i].second);
  }
  return out;
}

/// Greedy reference that recomputes every min-distance from scratch per step.
inline std::vector<int> fps(const PointCloud& cloud, int n, std::uint64_t seed) {
  const int m = static_cast<int>(cloud.size());
  std::vector<int> sel = {static_cast<int>(seed % m)};
  while (static_cast<int>(sel.size()) < n) {
    int best = -1;
    double best_d = -1.0;
    for (int i = 0; i < m; ++i) {
      double mind = 1e300;
      for (int s : sel) mind = std::min(mind, dist(cloud.points[i], cloud.points[s]));
      if (mind > best_d) {
        best_d = mind;
        best = i;
      }
    }
    sel.push_back(best);
  }
  return sel;
}

inline double chamfer(const PointCloud& a, const PointCloud& b) {
  double t1 = 0.0;
  for (const Vec3& p : a.points) {
    double best = 1e300;
    for (const Vec3& q : b.points) best = std::min(best, dist(p, q) * dist(p, q));
    t1 += best;
  }
  double t2 = 0.0;
  for (const Vec3& q : b.points) {
    double best = 1e300;
    for (const Vec3& p : a.points) best = std::min(best, dist(p, q) * dist(p, q));
    t2 += best;
  }
  return t1 / a.size() + t2 / b.size();
}

inline std::vector<int> sor_survivors(const PointCloud& cloud, int k, double mult) {
  const int m = static_cast<int>(cloud.size());
  auto nbr = oracle::knn(cloud, k);
  std::vector<double> d(m, 0.0);
  for (int j = 0; j < m; ++j) {
    for (int q : nbr[j]) d[j] += dist(cloud.points[j], cloud.points[q]);
    d[j] /= k;
  }
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= m;
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean);
  double cut = mean + mult * std::sqrt(var / m);
  std::vector<int> keep;
  for (int j = 0; j < m; ++j)
    if (d[j] <= cut) keep.push_back(j);
  return keep;
}

/// Both region-search stages re-done from the text: FPS seeds, regions of
/// seed + k neighbors, per-region max-SI candidate, dedupe, SI-descending
/// truncation to n_tilde.
inline std::vector<int> search_regions(const PointCloud& cloud, const std::vector<double>& si,
                                       int n, int k, int n_tilde, std::uint64_t seed) {
  auto seeds = oracle::fps(cloud, n, seed);
  auto nbr = oracle::knn(cloud, k);
  std::set<int> cands;
  for (int s : seeds) {
    std::vector<int> region = {s};
    for (int q : nbr[s]) region.push_back(q);
    int best = region[0];
    for (int q : region)
      if (si[q] > si[best] || (si[q] == si[best] && q < best)) best = q;
    cands.insert(best);
  }
  std::vector<int> out(cands.begin(), cands.end());
  std::stable_sort(out.begin(), out.end(), [&](int a, int b) {
    if (si[a] != si[b]) return si[a] > si[b];
    return a < b;
  });
  if (static_cast<int>(out.size()) > n_tilde) out.resize(n_tilde);
  return out;
}

/// Direct dot-product formulation of the hide loss.
inline double hide_loss(std::vector<double> sigmas, std::vector<double> cstd) {
  auto normalize = [](std::vector<double>& v) {
    double lo = *std::min_element(v.begin(), v.end());
    double hi = *std::max_element(v.begin(), v.end());
    if (hi - lo <= 0.0) {
      std::fill(v.begin(), v.end(), 0.0);
      return;
    }
    for (double& x : v) x = (x - lo) / (hi - lo);
  };
  normalize(sigmas);
  normalize(cstd);
  double dot = 0.0, ns = 0.0, nc = 0.0;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    dot += sigmas[i] * cstd[i];
    ns += sigmas[i] * sigmas[i];
    nc += cstd[i] * cstd[i];
  }
  if (ns <= 0.0 || nc <= 0.0) return 0.0;
  return dot / (std::sqrt(ns) * std::sqrt(nc));
}

/// Straightforward re-implementation of the local curvature formula.
inline double local_curvature(const PointCloud& cloud, const std::vector<Vec3>& normals,
                              const std::vector<std::vector<int>>& nbr, int j) {
  double acc = 0.0;
  int k = static_cast<int>(nbr[j].size());
  for (int q : nbr[j]) {
    Vec3 chord = cloud.points[q] - cloud.points[j];
    double len = std::sqrt(hitadv::norm2(chord));
    if (len == 0.0) continue;
    acc += std::abs(hitadv::dot(chord, normals[j])) / len;
  }
  return acc / k;
}

inline double knn_dist(const PointCloud& cloud, int k) {
  auto nbr = oracle::knn(cloud, k);
  double total = 0.0;
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    double s = 0.0;
    for (int q : nbr[j]) s += dist(cloud.points[j], cloud.points[q]);
    total += s / k;
  }
  return total / cloud.size();
}

inline PointCloud random_cloud(hitadv::Rng& rng, int m, double spread = 1.0) {
  PointCloud cloud;
  for (int j = 0; j < m; ++j) cloud.points.push_back(rng.normal_vec3(spread));
  return cloud;
}

}  // namespace oracle
