#include "hitadv/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "hitadv/attack.hpp"
#include "hitadv/geometry.hpp"

namespace hitadv {

double csd_metric(const PointCloud& clean, const PointCloud& adv, int k,
                  std::vector<std::string>* warnings) {
  if (clean.size() == 0 || adv.size() == 0)
    throw std::invalid_argument("csd_metric: empty cloud");

  std::vector<double> cs = curvature_std_profile(clean, k);
  std::vector<double> as = curvature_std_profile(adv, k);

  double sum = 0.0;
  if (clean.size() == adv.size()) {
    for (std::size_t j = 0; j < cs.size(); ++j) sum += (cs[j] - as[j]) * (cs[j] - as[j]);
  } else {
    if (warnings)
      warnings->push_back("csd_metric: point counts differ, using nearest-neighbor pairing");
    for (std::size_t j = 0; j < adv.size(); ++j) {
      std::size_t best = 0;
      double best_d = norm2(adv.points[j] - clean.points[0]);
      for (std::size_t a = 1; a < clean.size(); ++a) {
        double d = norm2(adv.points[j] - clean.points[a]);
        if (d < best_d) {
          best_d = d;
          best = a;
        }
      }
      sum += (cs[best] - as[j]) * (cs[best] - as[j]);
    }
  }
  return std::sqrt(sum);
}

double knn_dist_metric(const PointCloud& adv, int k) {
  const int m = static_cast<int>(adv.size());
  if (m <= k) throw std::invalid_argument("knn_dist_metric: needs m > k");
  NeighborhoodIndex nbr = knn(adv, k);
  double total = 0.0;
  for (int j = 0; j < m; ++j) {
    double s = 0.0;
    for (int q : nbr.neighbors[j]) s += norm(adv.points[q] - adv.points[j]);
    total += s / k;
  }
  return total / m;
}

double chamfer_metric(const PointCloud& a, const PointCloud& b) { return loss_chamfer(a, b); }

}  // namespace hitadv
