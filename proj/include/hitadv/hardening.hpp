#pragma once

#include <cstdint>
#include <vector>

#include "hitadv/attack.hpp"
#include "hitadv/classifier.hpp"
#include "hitadv/point_cloud.hpp"

namespace hitadv {

/// p -> scale * (R p) + translation, applied in exactly that order.
struct RigidTransform {
  double scale = 1.0;
  Quat rotation;
  Vec3 translation;

  static RigidTransform identity() { return {}; }
};

struct HardeningConfig {
  int maxot_steps = 5;
  double maxot_lr = 0.1;
  double scale_lo = 0.8;
  double scale_hi = 1.2;
  double translation_bound = 0.2;  // fraction of the cloud radius
  int upsample_factor = 2;
  double rescan_noise = 0.01;      // fraction of the cloud radius
  std::uint64_t seed = 0;
};

PointCloud apply_rigid(const RigidTransform& t, const PointCloud& cloud);

RigidTransform inverse(const RigidTransform& t);

/// Worst-case rigid transform: projected gradient ascent on
/// L_cls(normalize(T(P')), y) starting from the identity, accepting a step
/// only when it improves the objective, so the reported objective is
/// monotone over accepted steps and never below the identity's.
RigidTransform maxot_search(const ClassifierModel& model, const PointCloud& adv,
                            const HardeningConfig& cfg, int true_label, double kappa);

double maxot_objective(const ClassifierModel& model, const PointCloud& adv,
                       const RigidTransform& t, int true_label, double kappa);

/// Upsample by inserting midpoints toward random near neighbors, then FPS
/// back down to the original count. Clouds with fewer than 4 points are
/// returned unchanged with a warning.
PointCloud benign_resample(const PointCloud& cloud, int factor, std::uint64_t seed,
                           std::vector<std::string>* warnings = nullptr);

/// Stand-in for the print-and-rescan pipeline: midpoint upsample, isotropic
/// Gaussian jitter, FPS back to the original count.
PointCloud simulate_rescan(const PointCloud& cloud, const HardeningConfig& cfg,
                           std::uint64_t seed);

/// run_attack with digital-strength suppression: every inner iteration
/// upsamples the adversarial cloud, searches the worst in-bounds rigid
/// transform, and takes the step on the transformed objective with both
/// clouds of the distance losses transformed.
AttackResult hardened_attack(const ClassifierModel& model, const PointCloud& cloud,
                             const AttackConfig& acfg, const RegionSearchConfig& rcfg,
                             const HardeningConfig& hcfg,
                             const AttackObserver& observer = nullptr);

/// Uniform random transform within the config bounds (rotation unrestricted).
RigidTransform random_rigid(const HardeningConfig& cfg, std::uint64_t seed);

}  // namespace hitadv
