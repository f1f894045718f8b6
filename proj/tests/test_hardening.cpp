#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hitadv/hardening.hpp"
#include "hitadv/classifier.hpp"
#include "hitadv/geometry.hpp"
#include "hitadv/rng.hpp"
#include "hitadv/shapes.hpp"
#include "oracles.hpp"

using namespace hitadv;

namespace {

const ClassifierModel& shared_trained_model() {
  static ClassifierModel model = [] {
    Dataset tr = gen_dataset({ShapeFamily::Sphere, ShapeFamily::Cube}, 80, 96, 0.005, 31);
    TrainOptions opts;
    opts.epochs = 30;
    opts.seed = 13;
    return train(tr, opts);
  }();
  return model;
}

/// Two ellipsoid classes in a canonical pose; this victim is deliberately
/// orientation-sensitive, unlike the augmented shape families.
Dataset oriented_ellipsoids(int per_class, std::uint64_t seed) {
  Dataset ds;
  ds.class_names = {"x_long", "z_long"};
  ds.split = "train";
  Rng rng(seed);
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < per_class; ++i) {
      PointCloud cloud;
      for (int j = 0; j < 48; ++j) {
        Vec3 u = normalized(rng.normal_vec3(1.0));
        if (c == 0) u.x *= 3.0;
        else u.z *= 3.0;
        cloud.points.push_back(u);
      }
      PointCloud n = normalize_cloud(cloud);
      n.label = c;
      ds.clouds.push_back(n);
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("apply_rigid: identity leaves the cloud alone") {
  Rng rng(1);
  auto c = oracle::random_cloud(rng, 20);
  auto out = apply_rigid(RigidTransform::identity(), c);
  for (std::size_t j = 0; j < c.size(); ++j) CHECK(norm(out.points[j] - c.points[j]) == 0.0);
}

TEST_CASE("apply_rigid: 90-degree z rotation maps x to y") {
  RigidTransform t;
  t.rotation = quat_from_rotation_vector({0, 0, 3.14159265358979323846 / 2});
  PointCloud c;
  c.points = {{1, 0, 0}};
  auto out = apply_rigid(t, c);
  CHECK(norm(out.points[0] - Vec3{0, 1, 0}) < 1e-9);
}

TEST_CASE("apply_rigid: inverse round trips") {
  Rng rng(2);
  auto c = oracle::random_cloud(rng, 25);
  for (int trial = 0; trial < 10; ++trial) {
    HardeningConfig cfg;
    RigidTransform t = random_rigid(cfg, 100 + trial);
    auto there = apply_rigid(t, c);
    auto back = apply_rigid(inverse(t), there);
    for (std::size_t j = 0; j < c.size(); ++j) CHECK(norm(back.points[j] - c.points[j]) < 1e-9);
  }
}

TEST_CASE("apply_rigid preserves pairwise distances up to the scale") {
  Rng rng(3);
  auto c = oracle::random_cloud(rng, 16);
  HardeningConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    RigidTransform t = random_rigid(cfg, 200 + trial);
    auto out = apply_rigid(t, c);
    for (int a = 0; a < 16; ++a)
      for (int b = a + 1; b < 16; ++b) {
        double before = norm(c.points[a] - c.points[b]);
        double after = norm(out.points[a] - out.points[b]);
        CHECK(std::abs(after - t.scale * before) < 1e-9);
      }
  }
}

TEST_CASE("apply_rigid validates its transform") {
  Rng rng(4);
  auto c = oracle::random_cloud(rng, 5);
  RigidTransform bad;
  bad.scale = -1.0;
  CHECK_THROWS(apply_rigid(bad, c));
  RigidTransform bad2;
  bad2.rotation = Quat{2, 0, 0, 0};
  CHECK_THROWS(apply_rigid(bad2, c));
}

TEST_CASE("random_rigid respects the config bounds") {
  HardeningConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    RigidTransform t = random_rigid(cfg, trial);
    CHECK(t.scale >= cfg.scale_lo);
    CHECK(t.scale <= cfg.scale_hi);
    CHECK(norm(t.translation) <= cfg.translation_bound + 1e-12);
    CHECK(std::abs(t.rotation.norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("maxot: zero steps returns the identity") {
  const ClassifierModel& model = shared_trained_model();
  Dataset te = gen_dataset({ShapeFamily::Sphere, ShapeFamily::Cube}, 1, 96, 0.005, 5);
  HardeningConfig cfg;
  cfg.maxot_steps = 0;
  RigidTransform t = maxot_search(model, te.clouds[0], cfg, 0, 30.0);
  CHECK(t.scale == 1.0);
  CHECK(norm(t.translation) == 0.0);
  CHECK(t.rotation.w == 1.0);
}

TEST_CASE("maxot never scores below the identity transform") {
  const ClassifierModel& model = shared_trained_model();
  Dataset te = gen_dataset({ShapeFamily::Sphere, ShapeFamily::Cube}, 4, 96, 0.005, 6);
  HardeningConfig cfg;
  cfg.maxot_steps = 6;
  for (const auto& cloud : te.clouds) {
    double id_obj = maxot_objective(model, cloud, RigidTransform::identity(), *cloud.label, 30.0);
    RigidTransform t = maxot_search(model, cloud, cfg, *cloud.label, 30.0);
    CHECK(maxot_objective(model, cloud, t, *cloud.label, 30.0) >= id_obj);
  }
}

TEST_CASE("maxot recovers an orientation-fragile misclassification") {
  Dataset tr = oriented_ellipsoids(40, 7);
  TrainOptions opts;
  opts.epochs = 20;
  opts.seed = 3;
  ClassifierModel model = train(tr, opts);
  Dataset probe = oriented_ellipsoids(10, 8);
  REQUIRE(accuracy(model, probe) > 0.9);

  // rotate an x-long cloud by 90 degrees about y: it now reads as z-long,
  // i.e. adversarial purely through its orientation
  RigidTransform quarter;
  quarter.rotation = quat_from_rotation_vector({0, 3.14159265358979323846 / 2, 0});
  int found = 0, recovered = 0;
  for (const auto& cloud : probe.clouds) {
    if (*cloud.label != 0 || predict(model, cloud) != 0) continue;
    PointCloud rotated = normalize_cloud(apply_rigid(quarter, cloud));
    rotated.label = 0;
    if (predict(model, rotated) == 0) continue;  // needs to be broken by the pose
    ++found;
    // kappa must exceed the misclassification margin or the clamped loss
    // has no gradient to climb
    HardeningConfig cfg;
    cfg.maxot_steps = 40;
    cfg.maxot_lr = 0.5;
    RigidTransform t = maxot_search(model, rotated, cfg, 0, 30.0);
    PointCloud fixed = normalize_cloud(apply_rigid(t, rotated));
    if (predict(model, fixed) == 0) ++recovered;
  }
  REQUIRE(found >= 3);
  CHECK(recovered >= (2 * found) / 3);
}

TEST_CASE("benign_resample: factor 1 permutes the original points") {
  Rng rng(9);
  auto c = oracle::random_cloud(rng, 40);
  auto out = benign_resample(c, 1, 123);
  REQUIRE(out.size() == c.size());
  // multiset equality via sorted distance-to-origin signatures
  std::vector<double> a(c.size()), b(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) {
    a[j] = norm(c.points[j]);
    b[j] = norm(out.points[j]);
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  for (std::size_t j = 0; j < c.size(); ++j) CHECK(a[j] == b[j]);
}

TEST_CASE("benign_resample: output points are originals or midpoints") {
  Rng rng(10);
  auto c = oracle::random_cloud(rng, 48);
  auto out = benign_resample(c, 2, 456);
  REQUIRE(out.size() == c.size());
  for (const Vec3& p : out.points) {
    bool ok = false;
    for (const Vec3& q : c.points)
      if (norm(p - q) < 1e-12) ok = true;
    if (!ok) {
      for (std::size_t a = 0; a < c.size() && !ok; ++a)
        for (std::size_t b2 = a + 1; b2 < c.size() && !ok; ++b2)
          if (norm(p - 0.5 * (c.points[a] + c.points[b2])) < 1e-9) ok = true;
    }
    CHECK(ok);
  }
}

TEST_CASE("benign_resample: small clouds pass through with a warning") {
  PointCloud tiny;
  tiny.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  std::vector<std::string> warnings;
  auto out = benign_resample(tiny, 2, 1, &warnings);
  CHECK(out.size() == 3);
  CHECK(warnings.size() == 1);
}

TEST_CASE("benign_resample: round trip stays Chamfer-close to the original") {
  for (int trial = 0; trial < 8; ++trial) {
    Rng rng(1300 + trial);
    ShapeSpec spec;
    spec.family = static_cast<ShapeFamily>(trial % 8);
    spec.points = 128;
    spec.jitter = 0.0;
    spec.seed = trial;
    PointCloud c = sample_shape(spec);
    auto out = benign_resample(c, 2, trial);

    auto nbr = knn(c, 1);
    double mean_nn = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j)
      mean_nn += norm(c.points[nbr.neighbors[j][0]] - c.points[j]);
    mean_nn /= c.size();
    CHECK(loss_chamfer(c, out) < mean_nn);
  }
}

TEST_CASE("simulate_rescan: noiseless factor-1 rescan is a permutation") {
  Rng rng(11);
  auto c = oracle::random_cloud(rng, 30);
  HardeningConfig cfg;
  cfg.upsample_factor = 1;
  cfg.rescan_noise = 0.0;
  auto out = simulate_rescan(c, cfg, 77);
  REQUIRE(out.size() == c.size());
  std::vector<double> a(c.size()), b(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) {
    a[j] = norm(c.points[j]);
    b[j] = norm(out.points[j]);
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  for (std::size_t j = 0; j < c.size(); ++j) CHECK(a[j] == b[j]);
}

TEST_CASE("simulate_rescan keeps the point count") {
  Rng rng(12);
  auto c = oracle::random_cloud(rng, 50);
  HardeningConfig cfg;
  auto out = simulate_rescan(c, cfg, 99);
  CHECK(out.size() == c.size());
}

TEST_CASE("hardened_attack: degenerate hardening behaves like the plain attack") {
  const ClassifierModel& model = shared_trained_model();
  Dataset te = gen_dataset({ShapeFamily::Sphere, ShapeFamily::Cube}, 1, 96, 0.005, 13);
  const PointCloud& cloud = te.clouds[0];
  REQUIRE(predict(model, cloud) == *cloud.label);

  AttackConfig acfg;
  acfg.binary_search_steps = 3;
  acfg.inner_iters = 30;
  acfg.seed = 21;
  RegionSearchConfig rcfg;
  rcfg.n = 12;
  rcfg.k = 8;
  rcfg.n_tilde = 6;
  rcfg.seed = 22;
  HardeningConfig hcfg;
  hcfg.maxot_steps = 0;
  hcfg.upsample_factor = 1;

  // every iteration must report the identity transform and matching
  // transformed clouds on both sides of the distance loss
  int iterations_seen = 0;
  bool identity_ok = true, clean_side_ok = true;
  PointCloud clean = normalize_cloud(cloud);
  AttackObserver obs = [&](const AttackIterationView& v) {
    ++iterations_seen;
    if (!v.transform || !v.dis_clean || !v.dis_adv) {
      identity_ok = false;
      return;
    }
    if (v.transform->scale != 1.0 || norm(v.transform->translation) != 0.0) identity_ok = false;
    PointCloud expect = apply_rigid(*v.transform, clean);
    if (v.dis_clean->size() != expect.size()) {
      clean_side_ok = false;
      return;
    }
    for (std::size_t j = 0; j < expect.size(); ++j)
      if (norm(v.dis_clean->points[j] - expect.points[j]) > 1e-12) clean_side_ok = false;
  };

  AttackResult r = hardened_attack(model, cloud, acfg, rcfg, hcfg, obs);
  CHECK(iterations_seen > 0);
  CHECK(identity_ok);
  CHECK(clean_side_ok);
  CHECK(r.adversarial.size() == cloud.size());
  if (r.success) {
    CHECK(predict(model, r.adversarial) != *cloud.label);
  }
}

TEST_CASE("hardened_attack transforms both sides of the distance loss") {
  const ClassifierModel& model = shared_trained_model();
  Dataset te = gen_dataset({ShapeFamily::Sphere, ShapeFamily::Cube}, 1, 96, 0.005, 14);
  const PointCloud& cloud = te.clouds[0];

  AttackConfig acfg;
  acfg.binary_search_steps = 1;
  acfg.inner_iters = 4;
  acfg.seed = 23;
  RegionSearchConfig rcfg;
  rcfg.n = 12;
  rcfg.k = 8;
  rcfg.n_tilde = 6;
  rcfg.seed = 24;
  HardeningConfig hcfg;
  hcfg.maxot_steps = 3;
  hcfg.upsample_factor = 2;

  PointCloud clean = normalize_cloud(cloud);
  int checked = 0;
  bool both_transformed = true;
  AttackObserver obs = [&](const AttackIterationView& v) {
    if (!v.transform || !v.dis_clean || !v.dis_adv) {
      both_transformed = false;
      return;
    }
    // clean side: exactly T(clean)
    PointCloud expect = apply_rigid(*v.transform, clean);
    for (std::size_t j = 0; j < expect.size(); ++j)
      if (norm(v.dis_clean->points[j] - expect.points[j]) > 1e-12) both_transformed = false;
    // adv side: upsampled to factor * m and carrying the same transform
    if (v.dis_adv->size() != 2 * clean.size()) both_transformed = false;
    ++checked;
  };
  hardened_attack(model, cloud, acfg, rcfg, hcfg, obs);
  CHECK(checked > 0);
  CHECK(both_transformed);
}
