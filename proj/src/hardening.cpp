#include "hitadv/hardening.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "attack_internal.hpp"
#include "hitadv/geometry.hpp"
#include "hitadv/rng.hpp"

namespace hitadv {

namespace {

double cloud_radius(const PointCloud& cloud) {
  Vec3 centroid{};
  for (const Vec3& p : cloud.points) centroid += p;
  centroid *= 1.0 / cloud.size();
  double r = 0.0;
  for (const Vec3& p : cloud.points) r = std::max(r, norm(p - centroid));
  return r;
}

/// Midpoint upsample with parent bookkeeping so gradients can chain through.
/// Keeps the input points first, then the inserted midpoints.
struct Upsampled {
  PointCloud cloud;
  std::vector<std::pair<int, int>> parents;  // original: (j, -1); midpoint: (a, b)
};

Upsampled midpoint_upsample(const PointCloud& cloud, int target_count, std::uint64_t seed) {
  const int m = static_cast<int>(cloud.size());
  Upsampled out;
  out.cloud.points = cloud.points;
  out.cloud.label = cloud.label;
  out.parents.reserve(std::max(target_count, m));
  for (int j = 0; j < m; ++j) out.parents.push_back({j, -1});
  if (target_count <= m) return out;

  NeighborhoodIndex nbr = knn(cloud, 3);
  Rng rng(seed);
  int j = 0;
  while (static_cast<int>(out.cloud.points.size()) < target_count) {
    int partner = nbr.neighbors[j][rng.index(3)];
    out.cloud.points.push_back(0.5 * (cloud.points[j] + cloud.points[partner]));
    out.parents.push_back({j, partner});
    j = (j + 1) % m;
  }
  return out;
}

}  // namespace

PointCloud apply_rigid(const RigidTransform& t, const PointCloud& cloud) {
  if (t.scale <= 0.0) throw std::invalid_argument("apply_rigid: scale must be positive");
  if (std::abs(t.rotation.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("apply_rigid: rotation quaternion is not unit length");
  Mat3 R = quat_to_matrix(t.rotation);
  PointCloud out = cloud;
  for (Vec3& p : out.points) p = t.scale * (R * p) + t.translation;
  return out;
}

RigidTransform inverse(const RigidTransform& t) {
  RigidTransform inv;
  inv.scale = 1.0 / t.scale;
  inv.rotation = Quat{t.rotation.w, -t.rotation.x, -t.rotation.y, -t.rotation.z}.normalized();
  Mat3 Rinv = quat_to_matrix(inv.rotation);
  inv.translation = -(inv.scale * (Rinv * t.translation));
  return inv;
}

double maxot_objective(const ClassifierModel& model, const PointCloud& adv,
                       const RigidTransform& t, int true_label, double kappa) {
  PointCloud transformed = normalize_cloud(apply_rigid(t, adv));
  auto logits = forward(model, transformed);
  return loss_cls(logits, true_label, kappa);
}

RigidTransform maxot_search(const ClassifierModel& model, const PointCloud& adv,
                            const HardeningConfig& cfg, int true_label, double kappa) {
  RigidTransform best = RigidTransform::identity();
  if (cfg.maxot_steps <= 0) return best;

  double radius = cloud_radius(adv);
  double t_bound = cfg.translation_bound * (radius > 0.0 ? radius : 1.0);
  double best_obj = maxot_objective(model, adv, best, true_label, kappa);
  double step = cfg.maxot_lr;

  LossSpec spec;
  spec.kind = LossSpec::Kind::CwMargin;
  spec.kappa = kappa;

  const std::size_t m = adv.size();
  for (int it = 0; it < cfg.maxot_steps; ++it) {
    Mat3 R = quat_to_matrix(best.rotation);
    PointCloud transformed = apply_rigid(best, adv);
    transformed.label = true_label;
    GradientReport rep = input_gradient_normalized(model, transformed, spec);

    // chain x_j = s R p_j + t through the transform parameters
    double d_scale = 0.0;
    Vec3 d_trans{}, d_rot{};
    for (std::size_t j = 0; j < m; ++j) {
      Vec3 rp = R * adv.points[j];
      const Vec3& g = rep.point_gradients[j];
      d_scale += dot(g, rp);
      d_trans += g;
      d_rot += best.scale * cross(rp, g);  // tangent step of exp([w]x) R at w = 0
    }

    double gn = std::sqrt(d_scale * d_scale + norm2(d_trans) + norm2(d_rot));
    if (gn <= 1e-14) break;
    double s = step / gn;
    RigidTransform cand = best;
    cand.scale = std::clamp(best.scale + s * d_scale, cfg.scale_lo, cfg.scale_hi);
    cand.translation = best.translation + s * d_trans;
    double tn = norm(cand.translation);
    if (tn > t_bound && tn > 0.0) cand.translation *= t_bound / tn;
    cand.rotation = (quat_from_rotation_vector(s * d_rot) * best.rotation).normalized();

    double cand_obj = maxot_objective(model, adv, cand, true_label, kappa);
    if (cand_obj > best_obj) {  // accept-if-improved keeps the objective monotone
      best = cand;
      best_obj = cand_obj;
    } else {
      step *= 0.5;
    }
  }
  return best;
}

PointCloud benign_resample(const PointCloud& cloud, int factor, std::uint64_t seed,
                           std::vector<std::string>* warnings) {
  if (factor < 1) throw std::invalid_argument("benign_resample: factor must be >= 1");
  const int m = static_cast<int>(cloud.size());
  if (m < 4) {
    if (warnings) warnings->push_back("benign_resample: fewer than 4 points, returned unchanged");
    return cloud;
  }
  Upsampled up = midpoint_upsample(cloud, factor * m, derive_seed(seed, 1));
  std::vector<int> keep = fps(up.cloud, m, derive_seed(seed, 2));
  PointCloud out;
  out.label = cloud.label;
  out.points.reserve(m);
  for (int idx : keep) out.points.push_back(up.cloud.points[idx]);
  return out;
}

PointCloud simulate_rescan(const PointCloud& cloud, const HardeningConfig& cfg,
                           std::uint64_t seed) {
  const int m = static_cast<int>(cloud.size());
  if (m < 4) throw std::invalid_argument("simulate_rescan: needs at least 4 points");
  double radius = cloud_radius(cloud);

  // upsample, jitter, then FPS back down: the jitter rides on the dense
  // cloud so the final sampling sees scanner-like noise
  Upsampled up = midpoint_upsample(cloud, cfg.upsample_factor * m, derive_seed(seed, 11));
  if (cfg.rescan_noise > 0.0) {
    Rng rng(derive_seed(seed, 12));
    double s = cfg.rescan_noise * (radius > 0.0 ? radius : 1.0);
    for (Vec3& p : up.cloud.points) p += rng.normal_vec3(s);
  }
  std::vector<int> keep = fps(up.cloud, m, derive_seed(seed, 13));
  PointCloud out;
  out.label = cloud.label;
  out.points.reserve(m);
  for (int idx : keep) out.points.push_back(up.cloud.points[idx]);
  return out;
}

RigidTransform random_rigid(const HardeningConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  RigidTransform t;
  t.scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
  t.rotation = rng.uniform_quat();
  double r = cfg.translation_bound * std::cbrt(rng.uniform());
  t.translation = r * normalized(rng.normal_vec3(1.0));
  return t;
}

AttackResult hardened_attack(const ClassifierModel& model, const PointCloud& cloud,
                             const AttackConfig& acfg, const RegionSearchConfig& rcfg,
                             const HardeningConfig& hcfg, const AttackObserver& observer) {
  detail::validate_attack_config(acfg);
  if (hcfg.upsample_factor < 1)
    throw std::invalid_argument("hardened_attack: upsample factor must be >= 1");
  if (hcfg.scale_lo > hcfg.scale_hi || hcfg.scale_lo <= 0.0)
    throw std::invalid_argument("hardened_attack: bad scale bounds");
  if (!cloud.label) throw std::invalid_argument("hardened_attack: cloud has no label");
  if (acfg.target && *acfg.target == *cloud.label)
    throw std::invalid_argument("hardened_attack: target equals the true label");

  PointCloud clean = normalize_cloud(cloud);
  clean.label = cloud.label;
  const int label = *cloud.label;
  int pred0 = predict(model, clean);
  bool already = acfg.target ? pred0 == *acfg.target : pred0 != label;
  if (already) {
    AttackResult trivial;
    trivial.adversarial = clean;
    trivial.success = true;
    trivial.already_misclassified = true;
    trivial.metrics = compute_attack_metrics(clean, clean, rcfg.k);
    return trivial;
  }

  detail::PreparedAttack prep = detail::prepare_attack(model, clean, acfg, rcfg);
  const PointCloud clean_ref = prep.clean;
  const std::size_t m = clean_ref.size();
  const int up_count = hcfg.upsample_factor * static_cast<int>(m);
  detail::NwCache cache = detail::make_nw_cache(clean_ref, prep.field);

  LossSpec cls_spec;
  cls_spec.kind = LossSpec::Kind::CwMargin;
  cls_spec.kappa = acfg.kappa;
  cls_spec.target = acfg.target;

  auto transform_slot = std::make_shared<RigidTransform>();

  auto evaluator = [&, transform_slot](const DeformationField& field, double lambda, int probe,
                                       int iter, bool instrument) -> detail::IterEvalResult {
    detail::IterEvalResult out;
    const std::size_t nt = field.size();
    out.grad.d_delta.assign(nt, Vec3{});
    out.grad.d_sigma.assign(nt, 0.0);

    // deform, then upsample with a per-iteration insertion stream
    PointCloud adv = detail::nw_deform(clean_ref, field, cache);
    adv.label = clean_ref.label;
    std::uint64_t iter_seed =
        derive_seed(hcfg.seed ^ acfg.seed, (static_cast<std::uint64_t>(probe) << 32) | iter);
    Upsampled up = midpoint_upsample(adv, up_count, iter_seed);
    up.cloud.label = clean_ref.label;

    // worst in-bounds rigid transform for the current adversarial cloud
    RigidTransform worst = maxot_search(model, up.cloud, hcfg, label, acfg.kappa);
    *transform_slot = worst;

    PointCloud adv_t = apply_rigid(worst, up.cloud);
    adv_t.label = clean_ref.label;
    PointCloud clean_t = apply_rigid(worst, clean_ref);

    GradientReport cls = input_gradient_normalized(model, adv_t, cls_spec);
    out.grad.l_cls = cls.loss;
    out.grad.logits = cls.logits;
    int pred = static_cast<int>(std::max_element(cls.logits.begin(), cls.logits.end()) -
                                cls.logits.begin());
    bool transformed_success = acfg.target ? pred == *acfg.target : pred != label;

    detail::ChamferGrad cha = detail::chamfer_with_grad(clean_t, adv_t);
    detail::HideGrad hide = detail::hide_with_grad(field.sigmas, prep.center_cstd);
    detail::KerGrad ker = detail::ker_with_grad(field, acfg.bandwidth_cap);
    out.grad.l_cha = cha.value;
    out.grad.l_hide = hide.value;
    out.grad.l_ker = ker.value;
    out.l_dis = acfg.lambda1 * ker.value + acfg.lambda2 * hide.value + acfg.lambda3 * cha.value;
    out.grad.total = cls.loss + lambda * out.l_dis;

    // per-point gradient on the transformed upsampled cloud, then back
    // through the rigid transform (dL/dp = s R^T dL/dx) and the midpoints
    const double w_cha = lambda * acfg.lambda3;
    std::vector<Vec3> g_up(up.cloud.size());
    for (std::size_t j = 0; j < up.cloud.size(); ++j)
      g_up[j] = cls.point_gradients[j] + w_cha * cha.d_adv[j];
    Mat3 R = quat_to_matrix(worst.rotation);
    for (Vec3& g : g_up) g = worst.scale * mul_transposed(R, g);

    std::vector<Vec3> g_adv(m, Vec3{});
    for (std::size_t j = 0; j < up.parents.size(); ++j) {
      auto [a, b] = up.parents[j];
      if (b < 0) {
        g_adv[a] += g_up[j];
      } else {
        g_adv[a] += 0.5 * g_up[j];
        g_adv[b] += 0.5 * g_up[j];
      }
    }

    detail::nw_chain(clean_ref, field, cache, g_adv, out.grad.d_delta, out.grad.d_sigma);
    const double w_ker = lambda * acfg.lambda1, w_hide = lambda * acfg.lambda2;
    for (std::size_t i = 0; i < nt; ++i) {
      out.grad.d_delta[i] += w_ker * ker.d_delta[i];
      out.grad.d_sigma[i] += w_ker * ker.d_sigma[i] + w_hide * hide.d_sigma[i];
    }

    // success means the worst-case transformed cloud fools the model AND the
    // plain deformed cloud (the one the attack returns) does too
    out.success = transformed_success;
    if (transformed_success) {
      int plain_pred = predict(model, adv);
      out.success = acfg.target ? plain_pred == *acfg.target : plain_pred != label;
    }
    out.adv_plain = std::move(adv);

    if (instrument) {
      out.has_instrumentation = true;
      out.transform = transform_slot.get();
      out.dis_clean = std::move(clean_t);
      out.dis_adv = std::move(adv_t);
    }
    return out;
  };

  return detail::run_cw_search(prep, acfg, evaluator, observer, rcfg.k);
}

}  // namespace hitadv
