#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hitadv/point_cloud.hpp"

namespace hitadv {

struct DefenseSpec {
  enum class Kind { None, SRS, SOR };
  Kind kind = Kind::None;
  double srs_drop_ratio = 0.5;
  int sor_k = 2;
  double sor_std_mult = 1.1;

  std::string name() const;
  static DefenseSpec parse(const std::string& name);
};

/// Simple random sampling: keeps a uniformly random subset of
/// ceil(m * (1 - drop_ratio)) points, original order preserved.
PointCloud srs(const PointCloud& cloud, double drop_ratio, std::uint64_t seed);

/// Statistical outlier removal: drops points whose mean distance to their k
/// nearest neighbors exceeds mean + std_mult * std over the cloud. If that
/// would remove everything, the single most central point survives.
PointCloud sor(const PointCloud& cloud, int k, double std_mult,
               std::vector<std::string>* warnings = nullptr);

PointCloud apply_defense(const PointCloud& cloud, const DefenseSpec& spec, std::uint64_t seed);

}  // namespace hitadv
