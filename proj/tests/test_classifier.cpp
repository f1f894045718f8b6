#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numeric>

#include "hitadv/attack.hpp"
#include "hitadv/classifier.hpp"
#include "hitadv/rng.hpp"
#include "hitadv/shapes.hpp"
#include "oracles.hpp"

using namespace hitadv;

namespace {

double rel_err(double an, double fd) {
  return std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
}

Dataset two_class_set(int per_class, int points, std::uint64_t seed) {
  return gen_dataset({ShapeFamily::Sphere, ShapeFamily::Cube}, per_class, points, 0.005, seed);
}

bool models_equal(const ClassifierModel& a, const ClassifierModel& b) {
  for (int l = 0; l < 5; ++l) {
    if (a.weights[l] != b.weights[l]) return false;
    if (a.biases[l] != b.biases[l]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("zero-parameter model outputs the head bias") {
  ClassifierModel model = ClassifierModel::random_init(3, 1);
  for (auto& w : model.weights) std::fill(w.begin(), w.end(), 0.0);
  model.biases[4] = {0.5, -1.0, 2.0};
  Rng rng(2);
  auto c = oracle::random_cloud(rng, 10);
  auto logits = forward(model, c);
  CHECK(logits == std::vector<double>{0.5, -1.0, 2.0});
}

TEST_CASE("forward is permutation invariant") {
  ClassifierModel model = ClassifierModel::random_init(4, 3);
  Rng rng(4);
  auto c = oracle::random_cloud(rng, 32);
  auto base = forward(model, c);
  for (int trial = 0; trial < 5; ++trial) {
    PointCloud shuffled = c;
    rng.shuffle(shuffled.points);
    CHECK(forward(model, shuffled) == base);  // exactly
  }
}

TEST_CASE("forward matches golden logits") {
  ClassifierModel model = ClassifierModel::random_init(4, 20240801);
  Rng rng(424242);
  PointCloud cloud;
  for (int j = 0; j < 16; ++j) cloud.points.push_back(rng.normal_vec3(0.6));
  auto logits = forward(model, cloud);
  const double golden[4] = {1.2161572000758429, 2.178603408778085, -1.6771313129544676,
                            -1.5603430425273783};
  for (int c = 0; c < 4; ++c) CHECK(logits[c] == doctest::Approx(golden[c]).epsilon(1e-9));
}

TEST_CASE("normalize_cloud contracts") {
  Rng rng(5);

  SUBCASE("unit-sphere-like cloud is a fixed point") {
    PointCloud c;
    for (int i = 0; i < 20; ++i) {
      Vec3 u = normalized(rng.normal_vec3(1.0));
      c.points.push_back(u);
      c.points.push_back(-u);
    }
    auto n = normalize_cloud(c);
    for (std::size_t j = 0; j < c.size(); ++j) CHECK(norm(n.points[j] - c.points[j]) < 1e-9);
  }

  SUBCASE("translation and scale are removed") {
    auto c = oracle::random_cloud(rng, 30);
    auto base = normalize_cloud(c);
    PointCloud shifted = c, scaled = c;
    for (auto& p : shifted.points) p += Vec3{5, 5, 5};
    for (auto& p : scaled.points) p *= 3.0;
    auto ns = normalize_cloud(shifted);
    auto nc = normalize_cloud(scaled);
    for (std::size_t j = 0; j < c.size(); ++j) {
      CHECK(norm(ns.points[j] - base.points[j]) < 1e-12);
      CHECK(norm(nc.points[j] - base.points[j]) < 1e-12);
    }
  }

  SUBCASE("idempotent exactly") {
    auto c = oracle::random_cloud(rng, 25);
    auto once = normalize_cloud(c);
    auto twice = normalize_cloud(once);
    for (std::size_t j = 0; j < c.size(); ++j) {
      CHECK(twice.points[j].x == once.points[j].x);
      CHECK(twice.points[j].y == once.points[j].y);
      CHECK(twice.points[j].z == once.points[j].z);
    }
  }

  SUBCASE("all-coincident cloud is centered, scale untouched") {
    PointCloud c;
    for (int i = 0; i < 5; ++i) c.points.push_back({3, 3, 3});
    auto n = normalize_cloud(c);
    for (const auto& p : n.points) CHECK(norm(p) < 1e-12);
  }
}

TEST_CASE("input gradient matches finite differences on pinned seeds") {
  // seeds chosen in generic position: no max-pool or ReLU switch falls
  // inside the central-difference window
  const int seeds[21] = {0, 1, 3, 5, 7, 9, 10, 11, 12, 13, 15, 16, 17, 18, 19, 20, 22, 23, 24, 28, 32};
  const double h = 1e-4;
  double worst = 0.0;
  for (int seed : seeds) {
    Rng rng(derive_seed(seed, 1));
    ClassifierModel model = ClassifierModel::random_init(5, derive_seed(seed, 2));
    PointCloud cloud;
    for (int j = 0; j < 24; ++j) cloud.points.push_back(rng.normal_vec3(0.5));
    cloud.label = seed % 5;
    for (int lk = 0; lk < 3; ++lk) {
      LossSpec spec;
      if (lk == 0) {
        spec.kind = LossSpec::Kind::CrossEntropy;
      } else {
        spec.kind = LossSpec::Kind::CwMargin;
        spec.kappa = 5.0;
        if (lk == 2) spec.target = (*cloud.label + 1) % 5;
      }
      GradientReport rep = input_gradient(model, cloud, spec);
      for (int j = 0; j < 24; ++j) {
        for (int c = 0; c < 3; ++c) {
          PointCloud p = cloud, q = cloud;
          p.points[j][c] += h;
          q.points[j][c] -= h;
          double fd = (input_gradient(model, p, spec).loss - input_gradient(model, q, spec).loss) /
                      (2 * h);
          worst = std::max(worst, rel_err(rep.point_gradients[j][c], fd));
        }
      }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("points that win no max-pool channel get exactly zero gradient") {
  ClassifierModel model = ClassifierModel::random_init(3, 9);
  Rng rng(10);
  auto c = oracle::random_cloud(rng, 12);
  c.points.push_back(c.points[4]);  // duplicate loses every tie to index 4
  c.label = 1;
  GradientReport rep = input_gradient(model, c, LossSpec{});
  const Vec3& g = rep.point_gradients.back();
  CHECK(g.x == 0.0);
  CHECK(g.y == 0.0);
  CHECK(g.z == 0.0);
}

TEST_CASE("scaling the loss scales the gradients exactly") {
  ClassifierModel model = ClassifierModel::random_init(4, 11);
  Rng rng(12);
  auto c = oracle::random_cloud(rng, 20);
  c.label = 2;
  LossSpec spec;
  spec.kind = LossSpec::Kind::CwMargin;
  spec.kappa = 3.0;
  GradientReport g1 = input_gradient(model, c, spec);
  spec.scale = 2.0;
  GradientReport g2 = input_gradient(model, c, spec);
  CHECK(g2.loss == 2.0 * g1.loss);
  for (std::size_t j = 0; j < c.size(); ++j) {
    CHECK(g2.point_gradients[j].x == 2.0 * g1.point_gradients[j].x);
    CHECK(g2.point_gradients[j].y == 2.0 * g1.point_gradients[j].y);
    CHECK(g2.point_gradients[j].z == 2.0 * g1.point_gradients[j].z);
  }
}

TEST_CASE("one epoch on two separable classes beats chance") {
  Dataset train_set = two_class_set(150, 96, 100);
  TrainOptions opts;
  opts.epochs = 1;
  opts.seed = 3;
  opts.batch_size = 8;
  ClassifierModel model = train(train_set, opts);
  Dataset test_set = two_class_set(15, 96, 200);
  test_set.split = "test";
  CHECK(accuracy(model, test_set) > 0.5);
}

TEST_CASE("training is bit-deterministic under a fixed seed") {
  Dataset ds = two_class_set(12, 64, 300);
  TrainOptions opts;
  opts.epochs = 2;
  opts.seed = 42;
  ClassifierModel a = train(ds, opts);
  ClassifierModel b = train(ds, opts);
  CHECK(models_equal(a, b));
}

TEST_CASE("training validates its dataset") {
  Dataset tiny = two_class_set(4, 64, 400);  // < 10 per class
  TrainOptions opts;
  opts.epochs = 1;
  CHECK_THROWS(train(tiny, opts));
}

TEST_CASE("checkpoint save/load round trips the model") {
  ClassifierModel model = ClassifierModel::random_init(5, 77);
  auto path = (std::filesystem::temp_directory_path() / "hitadv_model.json").string();
  save_model(model, path);
  ClassifierModel back = load_model(path);
  CHECK(back.num_classes == 5);
  CHECK(models_equal(model, back));
}

TEST_CASE("saliency: zero model gives identically zero scores") {
  ClassifierModel model = ClassifierModel::random_init(3, 1);
  for (auto& w : model.weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : model.biases) std::fill(b.begin(), b.end(), 0.0);
  Rng rng(13);
  auto c = oracle::random_cloud(rng, 15);
  c.label = 0;
  for (double s : saliency_scores(model, c)) CHECK(s == 0.0);
}

TEST_CASE("saliency: the point at the median scores zero") {
  ClassifierModel model = ClassifierModel::random_init(3, 14);
  PointCloud c;
  c.points = {{0, 0, 0}, {1, 2, 3}, {-1, -2, -3}, {2, -1, 1}, {-2, 1, -1}};
  c.label = 1;  // coordinate-wise median is (0,0,0) = point 0
  auto s = saliency_scores(model, c);
  CHECK(s[0] == 0.0);
}

TEST_CASE("deleting top-saliency points hurts the true logit more than random") {
  Dataset train_set = two_class_set(30, 1024, 500);
  TrainOptions opts;
  opts.epochs = 8;
  opts.seed = 5;
  ClassifierModel model = train(train_set, opts);

  Rng rng(600);
  double drop_top = 0.0, drop_rand = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < train_set.clouds.size() && used < 20; ++i) {
    const PointCloud& c = train_set.clouds[i];
    if (predict(model, c) != *c.label) continue;
    ++used;
    auto s1 = saliency_scores(model, c);
    std::vector<int> order(c.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return s1[a] > s1[b]; });

    auto drop = [&](const std::vector<int>& kill) {
      std::vector<bool> dead(c.size(), false);
      for (int j : kill) dead[j] = true;
      PointCloud rest;
      rest.label = c.label;
      for (std::size_t j = 0; j < c.size(); ++j)
        if (!dead[j]) rest.points.push_back(c.points[j]);
      return forward(model, rest)[*c.label];
    };

    double base = forward(model, c)[*c.label];
    drop_top += base - drop({order.begin(), order.begin() + 32});
    std::vector<int> rand_kill;
    for (int j = 0; j < 32; ++j) rand_kill.push_back(static_cast<int>(rng.index(c.size())));
    drop_rand += base - drop(rand_kill);
  }
  REQUIRE(used == 20);
  CHECK(drop_top / used > drop_rand / used);
}

TEST_CASE("pgd perturbations respect the l2 budget") {
  ClassifierModel model = ClassifierModel::random_init(2, 21);
  Rng rng(22);
  for (int trial = 0; trial < 5; ++trial) {
    auto c = oracle::random_cloud(rng, 48);
    c.label = trial % 2;
    PointCloud adv = pgd_l2_perturb(model, c, 1.0, 5);
    double n2 = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) n2 += norm2(adv.points[j] - c.points[j]);
    CHECK(std::sqrt(n2) <= 1.0 + 1e-6);
  }
}

TEST_CASE("adversarial training with budget 0 reproduces plain training") {
  Dataset ds = two_class_set(12, 64, 700);
  TrainOptions opts;
  opts.epochs = 2;
  opts.seed = 9;
  ClassifierModel plain = train(ds, opts);
  ClassifierModel at = adversarial_train(ds, 0.0, 5, 2, 9);
  CHECK(models_equal(plain, at));
}

TEST_CASE("adversarial training lowers the ifgm success rate") {
  Dataset train_set = two_class_set(25, 96, 800);
  Dataset test_set = two_class_set(12, 96, 900);

  TrainOptions opts;
  opts.epochs = 6;
  opts.seed = 11;
  ClassifierModel clean_model = train(train_set, opts);
  ClassifierModel at_model = adversarial_train(train_set, 1.0, 5, 6, 11);

  auto asr = [&](const ClassifierModel& model) {
    int attempted = 0, succ = 0;
    for (const auto& c : test_set.clouds) {
      if (predict(model, c) != *c.label) continue;
      ++attempted;
      if (ifgm_baseline(model, c, 1.0, 25).success) ++succ;
    }
    return attempted ? static_cast<double>(succ) / attempted : 0.0;
  };
  CHECK(asr(at_model) < asr(clean_model));
}
