#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hitadv/point_cloud.hpp"

namespace hitadv {

/// Point-set classifier: shared per-point MLP 3-64-128-256 with ReLU, global
/// max-pool, head 256-128-C. No batch norm, no T-Nets; every gradient is
/// hand-derived and exact, which is the whole point of this victim.
struct ClassifierModel {
  static constexpr int kPointLayers = 3;
  static constexpr int kHeadLayers = 2;

  int num_classes = 0;
  // weights[l] is row-major (out x in); layers 0..2 per-point, 3..4 head.
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static const std::array<int, 6>& layer_widths();  // {3, 64, 128, 256, 128, C-slot}

  static ClassifierModel random_init(int num_classes, std::uint64_t seed);

  std::size_t parameter_count() const;
};

struct Dataset {
  std::vector<PointCloud> clouds;  // labels stored on the clouds
  std::vector<std::string> class_names;
  std::string split;  // "train" or "test"

  int num_classes() const { return static_cast<int>(class_names.size()); }
};

/// Loss evaluated on logits.
struct LossSpec {
  enum class Kind { CrossEntropy, CwMargin };
  Kind kind = Kind::CrossEntropy;
  double kappa = 0.0;               // CwMargin only
  std::optional<int> target;        // CwMargin targeted mode
  double scale = 1.0;               // multiplies the loss and its gradients
};

struct GradientReport {
  std::vector<Vec3> point_gradients;  // dLoss/dp_j
  double loss = 0.0;
  std::vector<double> logits;
};

/// Raw forward pass; no input normalization is applied.
std::vector<double> forward(const ClassifierModel& model, const PointCloud& cloud);

int predict(const ClassifierModel& model, const PointCloud& cloud);

/// Centers the centroid at the origin and scales the farthest point to
/// distance 1. Exact no-op when already normalized within 1e-9, so the
/// operation is idempotent. All-coincident clouds are centered only.
PointCloud normalize_cloud(const PointCloud& cloud);

/// Exact reverse-mode gradient of the loss with respect to the input
/// coordinates. Max-pool routes to the argmax point per channel (ties to the
/// lowest index).
GradientReport input_gradient(const ClassifierModel& model, const PointCloud& cloud,
                              const LossSpec& loss);

/// dLoss/dX for X -> normalize(X) -> model. Used where a transform
/// de-normalizes the cloud before classification.
GradientReport input_gradient_normalized(const ClassifierModel& model, const PointCloud& raw,
                                         const LossSpec& loss);

struct TrainOptions {
  int epochs = 30;
  double lr = 0.01;
  int batch_size = 16;
  double momentum = 0.9;
  int lr_decay_every = 10;   // epochs; lr *= 0.5
  std::uint64_t seed = 0;
  bool verbose = false;
  // l2 PGD adversarial training; budget 0 reproduces plain training exactly.
  bool adversarial = false;
  double at_budget = 1.0;
  int at_steps = 5;
};

struct TrainStats {
  double final_train_accuracy = 0.0;
  double final_train_loss = 0.0;
};

/// Mini-batch SGD with momentum on cross-entropy. Deterministic for a fixed
/// seed in a single-threaded run. Throws on divergence (NaN loss).
ClassifierModel train(const Dataset& dataset, const TrainOptions& opts, TrainStats* stats = nullptr);

/// PGD-AT: every batch is replaced by l2-bounded adversarial clouds before
/// the descent step (aggregate per-cloud norm <= budget, projected each
/// ascent step).
ClassifierModel adversarial_train(const Dataset& dataset, double budget, int steps, int epochs,
                                  std::uint64_t seed, TrainStats* stats = nullptr);

/// One l2 PGD attack on the cross-entropy loss, zero-initialized; exposed for
/// the projection-contract tests.
PointCloud pgd_l2_perturb(const ClassifierModel& model, const PointCloud& cloud, double budget,
                          int steps);

double accuracy(const ClassifierModel& model, const Dataset& dataset);

/// Saliency of each point for the correct classification: the radial
/// gradient of the cross-entropy loss around the coordinate-wise median,
///   S1(p_j) = -(dL/dr_j) * r_j^2.
std::vector<double> saliency_scores(const ClassifierModel& model, const PointCloud& cloud);

/// Checkpoint I/O: JSON with a format-version field, architecture widths and
/// flat parameter arrays.
void save_model(const ClassifierModel& model, const std::string& path);
ClassifierModel load_model(const std::string& path);

}  // namespace hitadv
