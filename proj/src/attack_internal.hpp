#pragma once

// Shared engine between the plain and the hardened attack drivers: setup
// (SI scores, region search, field init) and the C&W binary-search loop with
// a pluggable per-iteration evaluator.

#include <functional>
#include <string>
#include <vector>

#include "hitadv/attack.hpp"
#include "hitadv/classifier.hpp"

namespace hitadv {
struct RigidTransform;
}

namespace hitadv::detail {

struct PreparedAttack {
  PointCloud clean;  // normalized, labeled
  int label = 0;
  SIScores si;
  std::vector<int> center_indices;
  std::vector<double> center_cstd;
  DeformationField field;  // delta/sigma initialized
  std::vector<std::string> warnings;
};

PreparedAttack prepare_attack(const ClassifierModel& model, const PointCloud& cloud,
                              const AttackConfig& cfg, const RegionSearchConfig& rcfg);

struct IterEvalResult {
  AttackGradient grad;
  bool success = false;
  double l_dis = 0.0;      // unweighted distance loss, used to rank candidates
  PointCloud adv_plain;    // deform output at the evaluated field
  // instrumentation, filled only on request
  bool has_instrumentation = false;
  const RigidTransform* transform = nullptr;
  PointCloud dis_clean, dis_adv;
};

using IterEvaluator = std::function<IterEvalResult(const DeformationField& field, double lambda,
                                                   int probe, int iter, bool instrument)>;

/// Binary search over lambda around inner Adam loops; restores the field and
/// fails the probe on NaN; keeps the successful iterate with minimal L_dis.
AttackResult run_cw_search(const PreparedAttack& prep, const AttackConfig& cfg,
                           const IterEvaluator& evaluate, const AttackObserver& observer,
                           int metric_k);

void validate_attack_config(const AttackConfig& cfg);

// building blocks shared with the hardened driver

struct NwCache {
  std::vector<double> d2;    // m x nt squared center distances
  std::vector<int> nearest;  // nearest center per point
};

NwCache make_nw_cache(const PointCloud& clean, const DeformationField& field);

PointCloud nw_deform(const PointCloud& clean, const DeformationField& field, const NwCache& c);

/// Adds the chain of per-point gradients through the NW map into
/// (d_delta, d_sigma).
void nw_chain(const PointCloud& clean, const DeformationField& field, const NwCache& c,
              const std::vector<Vec3>& point_grads, std::vector<Vec3>& d_delta,
              std::vector<double>& d_sigma);

struct HideGrad {
  double value = 0.0;
  std::vector<double> d_sigma;
};
HideGrad hide_with_grad(const std::vector<double>& sigmas, const std::vector<double>& center_cstd);

struct KerGrad {
  double value = 0.0;
  std::vector<Vec3> d_delta;
  std::vector<double> d_sigma;
};
KerGrad ker_with_grad(const DeformationField& field, double cap);

struct ChamferGrad {
  double value = 0.0;
  std::vector<Vec3> d_adv;
};
ChamferGrad chamfer_with_grad(const PointCloud& clean, const PointCloud& adv);

}  // namespace hitadv::detail
