#include "hitadv/classifier.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hitadv/rng.hpp"
#include "json.hpp"

namespace hitadv {

namespace {

constexpr std::array<int, 6> kWidths = {3, 64, 128, 256, 128, 0};  // last slot = C

int in_width(int layer, int C) { (void)C; return kWidths[layer]; }
int out_width(int layer, int C) { return layer == 4 ? C : kWidths[layer + 1]; }

/// y = relu(W x + b); W row-major (out x in).
void dense_forward(const std::vector<double>& W, const std::vector<double>& b, const double* x,
                   double* y, int in, int out, bool relu) {
  for (int o = 0; o < out; ++o) {
    const double* row = W.data() + static_cast<std::size_t>(o) * in;
    double acc = b[o];
#pragma omp simd reduction(+ : acc)
    for (int i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = (relu && acc < 0.0) ? 0.0 : acc;
  }
}

/// dx = W^T dy, masked by relu activity of y (post-activation).
void dense_backward_input(const std::vector<double>& W, const double* dy, const double* y_post,
                          double* dx, int in, int out, bool relu) {
  std::fill(dx, dx + in, 0.0);
  for (int o = 0; o < out; ++o) {
    double d = dy[o];
    if (relu && y_post[o] <= 0.0) continue;
    if (d == 0.0) continue;
    const double* row = W.data() + static_cast<std::size_t>(o) * in;
    for (int i = 0; i < in; ++i) dx[i] += d * row[i];
  }
}

struct ForwardTrace {
  int m = 0;
  std::vector<double> h1, h2, h3;   // per-point activations, point-major
  std::vector<double> pooled;       // 256
  std::vector<int> arg;             // winning point per pooled channel
  std::vector<double> h4;           // 128
  std::vector<double> logits;       // C
};

void run_forward(const ClassifierModel& model, const PointCloud& cloud, ForwardTrace& t) {
  const int m = static_cast<int>(cloud.size());
  const int C = model.num_classes;
  t.m = m;
  t.h1.resize(static_cast<std::size_t>(m) * 64);
  t.h2.resize(static_cast<std::size_t>(m) * 128);
  t.h3.resize(static_cast<std::size_t>(m) * 256);

  for (int j = 0; j < m; ++j) {
    double p[3] = {cloud.points[j].x, cloud.points[j].y, cloud.points[j].z};
    dense_forward(model.weights[0], model.biases[0], p, t.h1.data() + j * 64, 3, 64, true);
    dense_forward(model.weights[1], model.biases[1], t.h1.data() + j * 64,
                  t.h2.data() + j * 128, 64, 128, true);
    dense_forward(model.weights[2], model.biases[2], t.h2.data() + j * 128,
                  t.h3.data() + j * 256, 128, 256, true);
  }

  t.pooled.assign(256, 0.0);
  t.arg.assign(256, 0);
  for (int c = 0; c < 256; ++c) {
    double best = t.h3[c];
    int best_j = 0;
    for (int j = 1; j < m; ++j) {
      double v = t.h3[static_cast<std::size_t>(j) * 256 + c];
      if (v > best) {  // strict: ties go to the lowest index
        best = v;
        best_j = j;
      }
    }
    t.pooled[c] = best;
    t.arg[c] = best_j;
  }

  t.h4.resize(128);
  t.logits.resize(C);
  dense_forward(model.weights[3], model.biases[3], t.pooled.data(), t.h4.data(), 256, 128, true);
  dense_forward(model.weights[4], model.biases[4], t.h4.data(), t.logits.data(), 128, C, false);
}

struct LossValue {
  double loss = 0.0;
  std::vector<double> dlogits;
};

LossValue eval_loss_unscaled(const LossSpec& spec, const std::vector<double>& logits, int label) {
  const int C = static_cast<int>(logits.size());
  LossValue out;
  out.dlogits.assign(C, 0.0);

  if (spec.kind == LossSpec::Kind::CrossEntropy) {
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - mx);
    double lse = mx + std::log(sum);
    out.loss = lse - logits[label];
    for (int c = 0; c < C; ++c) out.dlogits[c] = std::exp(logits[c] - lse);
    out.dlogits[label] -= 1.0;
    return out;
  }

  // C&W margin
  if (spec.target && *spec.target == label)
    throw std::invalid_argument("targeted margin loss: target equals the true label");
  int t = spec.target ? *spec.target : label;
  int other = -1;
  double other_z = -1e300;
  for (int c = 0; c < C; ++c) {
    if (c == t) continue;
    if (logits[c] > other_z) {  // ties to the lowest index
      other_z = logits[c];
      other = c;
    }
  }
  double margin = spec.target ? other_z - logits[t] : logits[t] - other_z;
  if (margin <= -spec.kappa) {
    out.loss = -spec.kappa;  // clamped: zero gradient
    return out;
  }
  out.loss = margin;
  if (spec.target) {
    out.dlogits[other] = 1.0;
    out.dlogits[t] = -1.0;
  } else {
    out.dlogits[t] = 1.0;
    out.dlogits[other] = -1.0;
  }
  return out;
}

LossValue eval_loss(const LossSpec& spec, const std::vector<double>& logits, int label) {
  LossValue out = eval_loss_unscaled(spec, logits, label);
  if (spec.scale != 1.0) {
    out.loss *= spec.scale;
    for (double& d : out.dlogits) d *= spec.scale;
  }
  return out;
}

/// Backprop from dlogits to per-point input gradients.
std::vector<Vec3> backprop_to_input(const ClassifierModel& model, const ForwardTrace& t,
                                    const std::vector<double>& dlogits) {
  const int m = t.m;
  std::vector<double> dh4(128), dpool(256);
  dense_backward_input(model.weights[4], dlogits.data(), nullptr, dh4.data(), 128,
                       model.num_classes, false);
  for (int i = 0; i < 128; ++i)
    if (t.h4[i] <= 0.0) dh4[i] = 0.0;
  dense_backward_input(model.weights[3], dh4.data(), nullptr, dpool.data(), 256, 128, false);

  std::vector<Vec3> grads(m, Vec3{});
  // gather the channels won by each point, then backprop only those points
  std::vector<std::vector<int>> won(m);
  for (int c = 0; c < 256; ++c)
    if (dpool[c] != 0.0) won[t.arg[c]].push_back(c);

  std::vector<double> d3(256), d2(128), d1(64), dp(3);
  for (int j = 0; j < m; ++j) {
    if (won[j].empty()) continue;
    std::fill(d3.begin(), d3.end(), 0.0);
    for (int c : won[j]) d3[c] = dpool[c];
    const double* h3 = t.h3.data() + static_cast<std::size_t>(j) * 256;
    const double* h2 = t.h2.data() + static_cast<std::size_t>(j) * 128;
    const double* h1 = t.h1.data() + static_cast<std::size_t>(j) * 64;
    for (int c = 0; c < 256; ++c)
      if (h3[c] <= 0.0) d3[c] = 0.0;
    dense_backward_input(model.weights[2], d3.data(), nullptr, d2.data(), 128, 256, false);
    for (int c = 0; c < 128; ++c)
      if (h2[c] <= 0.0) d2[c] = 0.0;
    dense_backward_input(model.weights[1], d2.data(), nullptr, d1.data(), 64, 128, false);
    for (int c = 0; c < 64; ++c)
      if (h1[c] <= 0.0) d1[c] = 0.0;
    dense_backward_input(model.weights[0], d1.data(), nullptr, dp.data(), 3, 64, false);
    grads[j] = {dp[0], dp[1], dp[2]};
  }
  return grads;
}

struct ParamGrads {
  std::vector<std::vector<double>> dW, db;

  explicit ParamGrads(const ClassifierModel& model) {
    dW.resize(5);
    db.resize(5);
    for (int l = 0; l < 5; ++l) {
      dW[l].assign(model.weights[l].size(), 0.0);
      db[l].assign(model.biases[l].size(), 0.0);
    }
  }
};

}  // namespace

const std::array<int, 6>& ClassifierModel::layer_widths() { return kWidths; }

ClassifierModel ClassifierModel::random_init(int num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("classifier needs at least 2 classes");
  ClassifierModel model;
  model.num_classes = num_classes;
  model.weights.resize(5);
  model.biases.resize(5);
  Rng rng(seed);
  for (int l = 0; l < 5; ++l) {
    int in = in_width(l, num_classes), out = out_width(l, num_classes);
    double limit = std::sqrt(6.0 / in);
    model.weights[l].resize(static_cast<std::size_t>(in) * out);
    for (double& w : model.weights[l]) w = rng.uniform(-limit, limit);
    model.biases[l].assign(out, 0.0);
  }
  return model;
}

std::size_t ClassifierModel::parameter_count() const {
  std::size_t n = 0;
  for (int l = 0; l < 5; ++l) n += weights[l].size() + biases[l].size();
  return n;
}

std::vector<double> forward(const ClassifierModel& model, const PointCloud& cloud) {
  cloud.validate();
  ForwardTrace t;
  run_forward(model, cloud, t);
  return t.logits;
}

int predict(const ClassifierModel& model, const PointCloud& cloud) {
  auto logits = forward(model, cloud);
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

PointCloud normalize_cloud(const PointCloud& cloud) {
  cloud.validate();
  const int m = static_cast<int>(cloud.size());
  Vec3 centroid{};
  for (const Vec3& p : cloud.points) centroid += p;
  centroid *= 1.0 / m;
  double r = 0.0;
  for (const Vec3& p : cloud.points) r = std::max(r, norm(p - centroid));

  if (norm(centroid) <= 1e-9 && std::abs(r - 1.0) <= 1e-9) return cloud;  // exact no-op

  PointCloud out = cloud;
  double scale = r > 1e-12 ? 1.0 / r : 1.0;  // all-coincident: center only
  for (Vec3& p : out.points) p = (p - centroid) * scale;
  return out;
}

GradientReport input_gradient(const ClassifierModel& model, const PointCloud& cloud,
                              const LossSpec& loss) {
  if (!cloud.label) throw std::invalid_argument("input_gradient: cloud has no label");
  ForwardTrace t;
  run_forward(model, cloud, t);
  LossValue lv = eval_loss(loss, t.logits, *cloud.label);
  GradientReport report;
  report.loss = lv.loss;
  report.logits = t.logits;
  report.point_gradients = backprop_to_input(model, t, lv.dlogits);
  return report;
}

GradientReport input_gradient_normalized(const ClassifierModel& model, const PointCloud& raw,
                                         const LossSpec& loss) {
  const int m = static_cast<int>(raw.size());
  Vec3 centroid{};
  for (const Vec3& p : raw.points) centroid += p;
  centroid *= 1.0 / m;
  double r = 0.0;
  int r_arg = 0;
  for (int j = 0; j < m; ++j) {
    double d = norm(raw.points[j] - centroid);
    if (d > r) {
      r = d;
      r_arg = j;
    }
  }
  bool scaled = r > 1e-12;
  double inv_r = scaled ? 1.0 / r : 1.0;

  PointCloud normalized = raw;
  for (Vec3& p : normalized.points) p = (p - centroid) * inv_r;

  GradientReport inner = input_gradient(model, normalized, loss);

  // chain through y_j = (x_j - c) / r:
  //   dL/dx_k = (g_k - mean(g)) / r - (B / r) (1[k = k*] - 1/m) y_{k*}
  // with B = sum_j <g_j, y_j> and k* the farthest point defining r.
  Vec3 gmean{};
  for (const Vec3& g : inner.point_gradients) gmean += g;
  gmean *= 1.0 / m;
  double B = 0.0;
  if (scaled)
    for (int j = 0; j < m; ++j) B += dot(inner.point_gradients[j], normalized.points[j]);

  GradientReport report;
  report.loss = inner.loss;
  report.logits = inner.logits;
  report.point_gradients.resize(m);
  Vec3 ystar = normalized.points[r_arg];
  for (int k = 0; k < m; ++k) {
    Vec3 g = (inner.point_gradients[k] - gmean) * inv_r;
    if (scaled) {
      double coeff = (k == r_arg ? 1.0 : 0.0) - 1.0 / m;
      g -= (B * inv_r * coeff) * ystar;
    }
    report.point_gradients[k] = g;
  }
  return report;
}

namespace {

/// Parameter gradients of the mean cross-entropy over a batch.
void accumulate_cloud_grads(const ClassifierModel& model, const PointCloud& cloud, double scale,
                            ParamGrads& grads, double& loss_acc, int& correct_acc) {
  ForwardTrace t;
  run_forward(model, cloud, t);
  LossValue lv = eval_loss(LossSpec{}, t.logits, *cloud.label);
  loss_acc += lv.loss;
  int pred = static_cast<int>(std::max_element(t.logits.begin(), t.logits.end()) -
                              t.logits.begin());
  if (pred == *cloud.label) ++correct_acc;
  for (double& d : lv.dlogits) d *= scale;

  // inline parameter backprop (needs the per-point inputs, unlike the helper)
  const int C = model.num_classes;
  auto outer_acc = [](std::vector<double>& dW, std::vector<double>& db, const double* d,
                      const double* x, int in, int out) {
    for (int o = 0; o < out; ++o) {
      if (d[o] == 0.0) continue;
      double* row = dW.data() + static_cast<std::size_t>(o) * in;
      double dv = d[o];
      db[o] += dv;
#pragma omp simd
      for (int i = 0; i < in; ++i) row[i] += dv * x[i];
    }
  };

  std::vector<double> dh4(128), dpool(256);
  outer_acc(grads.dW[4], grads.db[4], lv.dlogits.data(), t.h4.data(), 128, C);
  dense_backward_input(model.weights[4], lv.dlogits.data(), nullptr, dh4.data(), 128, C, false);
  for (int i = 0; i < 128; ++i)
    if (t.h4[i] <= 0.0) dh4[i] = 0.0;
  outer_acc(grads.dW[3], grads.db[3], dh4.data(), t.pooled.data(), 256, 128);
  dense_backward_input(model.weights[3], dh4.data(), nullptr, dpool.data(), 256, 128, false);

  std::vector<std::vector<int>> won(t.m);
  for (int c = 0; c < 256; ++c)
    if (dpool[c] != 0.0) won[t.arg[c]].push_back(c);

  std::vector<double> d3(256), d2(128), d1(64);
  for (int j = 0; j < t.m; ++j) {
    if (won[j].empty()) continue;
    std::fill(d3.begin(), d3.end(), 0.0);
    for (int c : won[j]) d3[c] = dpool[c];
    const double* h3 = t.h3.data() + static_cast<std::size_t>(j) * 256;
    const double* h2 = t.h2.data() + static_cast<std::size_t>(j) * 128;
    const double* h1 = t.h1.data() + static_cast<std::size_t>(j) * 64;
    for (int c = 0; c < 256; ++c)
      if (h3[c] <= 0.0) d3[c] = 0.0;
    outer_acc(grads.dW[2], grads.db[2], d3.data(), h2, 128, 256);
    dense_backward_input(model.weights[2], d3.data(), nullptr, d2.data(), 128, 256, false);
    for (int c = 0; c < 128; ++c)
      if (h2[c] <= 0.0) d2[c] = 0.0;
    outer_acc(grads.dW[1], grads.db[1], d2.data(), h1, 64, 128);
    dense_backward_input(model.weights[1], d2.data(), nullptr, d1.data(), 64, 128, false);
    for (int c = 0; c < 64; ++c)
      if (h1[c] <= 0.0) d1[c] = 0.0;
    double pj[3] = {cloud.points[j].x, cloud.points[j].y, cloud.points[j].z};
    outer_acc(grads.dW[0], grads.db[0], d1.data(), pj, 3, 64);
  }
}

void validate_dataset_for_training(const Dataset& dataset) {
  if (dataset.num_classes() < 2) throw std::invalid_argument("training needs at least 2 classes");
  std::vector<int> per_class(dataset.num_classes(), 0);
  for (const auto& cloud : dataset.clouds) {
    if (!cloud.label || *cloud.label < 0 || *cloud.label >= dataset.num_classes())
      throw std::invalid_argument("training cloud with missing or out-of-range label");
    ++per_class[*cloud.label];
  }
  for (int c = 0; c < dataset.num_classes(); ++c)
    if (per_class[c] < 10)
      throw std::invalid_argument("class " + std::to_string(c) + " has only " +
                                  std::to_string(per_class[c]) + " examples (need >= 10)");
}

}  // namespace

PointCloud pgd_l2_perturb(const ClassifierModel& model, const PointCloud& cloud, double budget,
                          int steps) {
  if (budget <= 0.0 || steps <= 0) return cloud;
  const int m = static_cast<int>(cloud.size());
  std::vector<Vec3> delta(m, Vec3{});
  double alpha = 2.0 * budget / steps;

  for (int s = 0; s < steps; ++s) {
    PointCloud current = cloud;
    for (int j = 0; j < m; ++j) current.points[j] += delta[j];
    GradientReport rep = input_gradient(model, current, LossSpec{});
    double gnorm = 0.0;
    for (const Vec3& g : rep.point_gradients) gnorm += norm2(g);
    gnorm = std::sqrt(gnorm);
    if (gnorm <= 1e-12) break;
    for (int j = 0; j < m; ++j) delta[j] += (alpha / gnorm) * rep.point_gradients[j];
    double dnorm = 0.0;
    for (const Vec3& d : delta) dnorm += norm2(d);
    dnorm = std::sqrt(dnorm);
    if (dnorm > budget)
      for (Vec3& d : delta) d *= budget / dnorm;
  }

  PointCloud out = cloud;
  for (int j = 0; j < m; ++j) out.points[j] += delta[j];
  return out;
}

ClassifierModel train(const Dataset& dataset, const TrainOptions& opts, TrainStats* stats) {
  validate_dataset_for_training(dataset);

  ClassifierModel model = ClassifierModel::random_init(dataset.num_classes(), opts.seed);
  ParamGrads velocity(model);
  Rng rng(derive_seed(opts.seed, 1));

  std::vector<int> order(dataset.clouds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  double lr = opts.lr;
  double last_loss = 0.0;
  int last_correct = 0;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    if (epoch > 0 && opts.lr_decay_every > 0 && epoch % opts.lr_decay_every == 0) lr *= 0.5;
    rng.shuffle(order);
    last_loss = 0.0;
    last_correct = 0;

    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      std::size_t end = std::min(order.size(), start + opts.batch_size);
      ParamGrads grads(model);
      double batch_loss = 0.0;
      int batch_correct = 0;
      double scale = 1.0 / static_cast<double>(end - start);

      for (std::size_t i = start; i < end; ++i) {
        const PointCloud& clean = dataset.clouds[order[i]];
        if (opts.adversarial && opts.at_budget > 0.0) {
          PointCloud adv = pgd_l2_perturb(model, clean, opts.at_budget, opts.at_steps);
          adv.label = clean.label;
          accumulate_cloud_grads(model, adv, scale, grads, batch_loss, batch_correct);
        } else {
          accumulate_cloud_grads(model, clean, scale, grads, batch_loss, batch_correct);
        }
      }

      if (!std::isfinite(batch_loss))
        throw std::runtime_error("training diverged: loss=" + std::to_string(batch_loss) +
                                 " at epoch " + std::to_string(epoch));

      for (int l = 0; l < 5; ++l) {
        for (std::size_t i = 0; i < model.weights[l].size(); ++i) {
          velocity.dW[l][i] = opts.momentum * velocity.dW[l][i] - lr * grads.dW[l][i];
          model.weights[l][i] += velocity.dW[l][i];
        }
        for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
          velocity.db[l][i] = opts.momentum * velocity.db[l][i] - lr * grads.db[l][i];
          model.biases[l][i] += velocity.db[l][i];
        }
      }
      last_loss += batch_loss;
      last_correct += batch_correct;
    }

    if (opts.verbose) {
      std::fprintf(stderr, "epoch %d: train loss %.4f acc %.4f\n", epoch,
                   last_loss / dataset.clouds.size(),
                   static_cast<double>(last_correct) / dataset.clouds.size());
    }
  }

  if (stats) {
    stats->final_train_loss = last_loss / static_cast<double>(dataset.clouds.size());
    stats->final_train_accuracy =
        static_cast<double>(last_correct) / static_cast<double>(dataset.clouds.size());
  }
  return model;
}

ClassifierModel adversarial_train(const Dataset& dataset, double budget, int steps, int epochs,
                                  std::uint64_t seed, TrainStats* stats) {
  TrainOptions opts;
  opts.epochs = epochs;
  opts.seed = seed;
  opts.adversarial = true;
  opts.at_budget = budget;
  opts.at_steps = steps;
  return train(dataset, opts, stats);
}

double accuracy(const ClassifierModel& model, const Dataset& dataset) {
  if (dataset.clouds.empty()) return 0.0;
  int correct = 0;
  for (const auto& cloud : dataset.clouds)
    if (cloud.label && predict(model, cloud) == *cloud.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(dataset.clouds.size());
}

std::vector<double> saliency_scores(const ClassifierModel& model, const PointCloud& cloud) {
  if (!cloud.label) throw std::invalid_argument("saliency_scores: cloud has no label");
  const int m = static_cast<int>(cloud.size());

  // coordinate-wise median as the sphere center
  Vec3 median{};
  std::vector<double> coord(m);
  for (int c = 0; c < 3; ++c) {
    for (int j = 0; j < m; ++j) coord[j] = cloud.points[j][c];
    std::sort(coord.begin(), coord.end());
    median[c] = (m % 2 == 1) ? coord[m / 2] : 0.5 * (coord[m / 2 - 1] + coord[m / 2]);
  }

  GradientReport rep = input_gradient(model, cloud, LossSpec{});
  std::vector<double> scores(m);
  for (int j = 0; j < m; ++j) {
    Vec3 radial = cloud.points[j] - median;
    double r = norm(radial);
    // -(dL/dr) * r^(1+alpha_s) with alpha_s = 1 collapses to -<g, p - med> * r
    scores[j] = r > 0.0 ? -dot(rep.point_gradients[j], radial) * r : 0.0;
  }
  return scores;
}

void save_model(const ClassifierModel& model, const std::string& path) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["kind"] = "pointset-mlp";
  j["num_classes"] = model.num_classes;
  j["widths"] = {3, 64, 128, 256, 128, model.num_classes};
  for (int l = 0; l < 5; ++l) {
    j["weights"]["layer" + std::to_string(l)] = model.weights[l];
    j["biases"]["layer" + std::to_string(l)] = model.biases[l];
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump();
  if (!out) throw std::runtime_error("I/O error writing '" + path + "'");
}

ClassifierModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  if (j.value("format_version", 0) != 1)
    throw std::runtime_error(path + ": unsupported checkpoint format version");

  ClassifierModel model;
  model.num_classes = j.at("num_classes").get<int>();
  if (model.num_classes < 2) throw std::runtime_error(path + ": bad class count");
  model.weights.resize(5);
  model.biases.resize(5);
  for (int l = 0; l < 5; ++l) {
    model.weights[l] = j.at("weights").at("layer" + std::to_string(l)).get<std::vector<double>>();
    model.biases[l] = j.at("biases").at("layer" + std::to_string(l)).get<std::vector<double>>();
    std::size_t expect_w = static_cast<std::size_t>(in_width(l, model.num_classes)) *
                           out_width(l, model.num_classes);
    if (model.weights[l].size() != expect_w ||
        model.biases[l].size() != static_cast<std::size_t>(out_width(l, model.num_classes)))
      throw std::runtime_error(path + ": layer " + std::to_string(l) + " has wrong shape");
  }
  return model;
}

}  // namespace hitadv
