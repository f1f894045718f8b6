#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hitadv/classifier.hpp"
#include "hitadv/point_cloud.hpp"

namespace hitadv {

/// Saliency + imperceptibility scores, each min-max normalized to [0,1].
struct SIScores {
  std::vector<double> s1;        // normalized saliency
  std::vector<double> s2;        // normalized curvature std
  double alpha = 1.0;
  std::vector<double> combined;  // s1 + alpha * s2
};

struct RegionSearchConfig {
  int n = 100;        // candidate region count (FPS seeds)
  int k = 10;         // neighborhood size
  int n_tilde = 50;   // final deformation center count
  std::uint64_t seed = 0;
};

/// Gaussian deformation field: fixed centers from the clean cloud, one offset
/// and one bandwidth per center. Fully determines the adversarial cloud.
struct DeformationField {
  std::vector<Vec3> centers;
  std::vector<Vec3> deltas;
  std::vector<double> sigmas;

  std::size_t size() const { return centers.size(); }
};

struct AttackConfig {
  double kappa = 30.0;
  double bandwidth_cap = 1.5;       // a; sigma is clipped to [sigma_min, a]
  double sigma_min = 0.05;
  double alpha = 1.0;               // SI score weight
  double lambda1 = 1.0;             // L_ker
  double lambda2 = 1.0;             // L_hide
  double lambda3 = 0.1;             // L_cha
  double lambda_init = 10.0;
  double lambda_max = 80.0;
  double lambda_min = 0.0;
  int binary_search_steps = 10;
  int inner_iters = 200;
  double lr = 0.01;
  double delta_init_scale = 0.05;   // fraction of the cloud radius
  std::optional<int> target;        // targeted mode
  std::uint64_t seed = 0;
};

struct LambdaProbe {
  double lambda = 0.0;
  bool success = false;
  double best_l_dis = 0.0;   // among successful iterates of this probe
  double final_l_cls = 0.0;
};

struct AttackMetrics {
  double csd = 0.0;
  double chamfer = 0.0;
  double knn_dist = 0.0;
};

struct AttackResult {
  PointCloud adversarial;
  bool success = false;
  bool already_misclassified = false;
  double final_lambda = 0.0;
  int iterations = 0;
  std::vector<LambdaProbe> trace;
  AttackMetrics metrics;
  DeformationField field;  // field of the returned cloud (empty for baselines)
};

/// Test/instrumentation hook; fired once per inner iteration.
struct AttackIterationView {
  int probe = 0;
  int iter = 0;
  double lambda = 0.0;
  const std::vector<double>* sigmas = nullptr;
  double l_cls = 0.0, l_ker = 0.0, l_hide = 0.0, l_cha = 0.0;
  bool success = false;
  // hardened mode only: the transform of this iteration and the two clouds
  // the distance losses were evaluated on
  const struct RigidTransform* transform = nullptr;
  const PointCloud* dis_clean = nullptr;
  const PointCloud* dis_adv = nullptr;
};
using AttackObserver = std::function<void(const AttackIterationView&)>;

// --- scores and region search ---

/// S1 from the classifier, S2 from curvature statistics, both min-max
/// normalized over the cloud; a constant channel normalizes to all zeros.
SIScores si_score(const PointCloud& cloud, const ClassifierModel& model,
                  const RegionSearchConfig& cfg, double alpha);

/// Two-stage search: FPS n region seeds, each region (seed + its k
/// neighbors) nominates its max-SI point; candidates are deduplicated,
/// sorted by SI descending (ties to the lower index) and cut to n_tilde.
std::vector<int> search_regions(const PointCloud& cloud, const SIScores& si,
                                const RegionSearchConfig& cfg,
                                std::vector<std::string>* warnings = nullptr);

// --- deformation ---

/// exp(-||center - point||^2 / (2 sigma^2))
double gauss_weight(const Vec3& center, const Vec3& point, double sigma);

/// Nadaraya-Watson blend of the per-center offsets:
///   p_j' = p_j + sum_i delta_i w_ij / sum_i w_ij.
/// If the total weight at a point underflows, the point takes the delta of
/// its nearest center (the sigma -> 0 limit).
PointCloud deform(const PointCloud& cloud, const DeformationField& field);

// --- losses ---

/// Untargeted: max{-kappa, Z_t - max_{j != t} Z_j}; targeted flips the roles.
/// Throws if the target equals the true label.
double loss_cls(const std::vector<double>& logits, int true_label, double kappa,
                std::optional<int> target = std::nullopt);

/// ||delta||_2 + ||a - sigma||_2 over the concatenated vectors.
double loss_ker(const DeformationField& field, double bandwidth_cap);

/// Cosine similarity between the min-max-normalized sigma vector and the
/// min-max-normalized curvature-std-at-centers vector; 0 when either
/// normalizes to the zero vector (constant input).
double loss_hide(const DeformationField& field, const std::vector<double>& center_cstd);

/// Symmetric squared-distance Chamfer loss.
double loss_chamfer(const PointCloud& clean, const PointCloud& adv);

double loss_dis(const DeformationField& field, const PointCloud& clean, const PointCloud& adv,
                const std::vector<double>& center_cstd, double bandwidth_cap, double lambda1,
                double lambda2, double lambda3);

// --- gradients ---

struct AttackGradient {
  std::vector<Vec3> d_delta;
  std::vector<double> d_sigma;
  double total = 0.0;
  double l_cls = 0.0, l_ker = 0.0, l_hide = 0.0, l_cha = 0.0;
  std::vector<double> logits;
};

/// Analytic gradient of  L_cls(deform(P)) + lambda * L_dis  with respect to
/// every delta_i and sigma_i. The keystone of the attack; checked against
/// central finite differences in the test suite.
AttackGradient attack_gradient(const ClassifierModel& model, const PointCloud& cloud,
                               const DeformationField& field, const AttackConfig& cfg,
                               const std::vector<double>& center_cstd, double lambda);

/// The same objective as a plain value, for finite-difference checks.
double attack_objective(const ClassifierModel& model, const PointCloud& cloud,
                        const DeformationField& field, const AttackConfig& cfg,
                        const std::vector<double>& center_cstd, double lambda);

// --- drivers ---

/// The full attack: SI scoring, two-stage region search, then a binary
/// search over lambda, each probe running inner_iters adaptive gradient
/// steps on (delta, sigma). Returns the successful cloud with minimal L_dis,
/// or failure once the search exhausts its probes without a success.
AttackResult run_attack(const ClassifierModel& model, const PointCloud& cloud,
                        const AttackConfig& cfg, const RegionSearchConfig& rcfg,
                        const AttackObserver& observer = nullptr);

/// Iterative l2 gradient baseline: per-step normalized ascent on the
/// cross-entropy loss with projection onto the l2 ball of the budget.
AttackResult ifgm_baseline(const ClassifierModel& model, const PointCloud& cloud, double budget,
                           int steps);

AttackMetrics compute_attack_metrics(const PointCloud& clean, const PointCloud& adv, int metric_k);

}  // namespace hitadv
