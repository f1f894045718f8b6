#include "hitadv/defense.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hitadv/geometry.hpp"
#include "hitadv/rng.hpp"

namespace hitadv {

std::string DefenseSpec::name() const {
  switch (kind) {
    case Kind::None: return "none";
    case Kind::SRS: return "srs";
    case Kind::SOR: return "sor";
  }
  return "none";
}

DefenseSpec DefenseSpec::parse(const std::string& name) {
  DefenseSpec spec;
  if (name == "none") spec.kind = Kind::None;
  else if (name == "srs") spec.kind = Kind::SRS;
  else if (name == "sor") spec.kind = Kind::SOR;
  else throw std::invalid_argument("unknown defense '" + name + "'");
  return spec;
}

namespace {

PointCloud subset(const PointCloud& cloud, const std::vector<int>& keep_sorted) {
  PointCloud out;
  out.label = cloud.label;
  out.points.reserve(keep_sorted.size());
  for (int idx : keep_sorted) out.points.push_back(cloud.points[idx]);
  for (const auto& [name, values] : cloud.attrs) {
    auto& channel = out.attrs[name];
    channel.reserve(keep_sorted.size());
    for (int idx : keep_sorted) channel.push_back(values[idx]);
  }
  return out;
}

}  // namespace

PointCloud srs(const PointCloud& cloud, double drop_ratio, std::uint64_t seed) {
  if (drop_ratio <= 0.0 || drop_ratio >= 1.0)
    throw std::invalid_argument("srs: drop_ratio must be in (0, 1)");
  const int m = static_cast<int>(cloud.size());
  int keep_count = static_cast<int>(std::ceil(m * (1.0 - drop_ratio)));
  if (keep_count < 1) throw std::invalid_argument("srs: nothing would survive");

  std::vector<int> indices(m);
  for (int i = 0; i < m; ++i) indices[i] = i;
  Rng rng(seed);
  rng.shuffle(indices);
  indices.resize(keep_count);
  std::sort(indices.begin(), indices.end());  // survivors keep original order
  return subset(cloud, indices);
}

PointCloud sor(const PointCloud& cloud, int k, double std_mult,
               std::vector<std::string>* warnings) {
  const int m = static_cast<int>(cloud.size());
  if (m <= k) throw std::invalid_argument("sor: needs m > k");
  if (k < 1 || std_mult <= 0.0) throw std::invalid_argument("sor: bad parameters");

  NeighborhoodIndex nbr = knn(cloud, k);
  std::vector<double> mean_dist(m);
  for (int j = 0; j < m; ++j) {
    double s = 0.0;
    for (int q : nbr.neighbors[j]) s += norm(cloud.points[q] - cloud.points[j]);
    mean_dist[j] = s / k;
  }
  double mean = 0.0;
  for (double d : mean_dist) mean += d;
  mean /= m;
  double var = 0.0;
  for (double d : mean_dist) var += (d - mean) * (d - mean);
  double threshold = mean + std_mult * std::sqrt(var / m);

  std::vector<int> keep;
  for (int j = 0; j < m; ++j)
    if (mean_dist[j] <= threshold) keep.push_back(j);

  if (keep.empty()) {
    if (warnings) warnings->push_back("sor: every point flagged; keeping the most central one");
    int best = static_cast<int>(std::min_element(mean_dist.begin(), mean_dist.end()) -
                                mean_dist.begin());
    keep.push_back(best);
  }
  return subset(cloud, keep);
}

PointCloud apply_defense(const PointCloud& cloud, const DefenseSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case DefenseSpec::Kind::None: return cloud;
    case DefenseSpec::Kind::SRS: return srs(cloud, spec.srs_drop_ratio, seed);
    case DefenseSpec::Kind::SOR: return sor(cloud, spec.sor_k, spec.sor_std_mult);
  }
  return cloud;
}

}  // namespace hitadv
