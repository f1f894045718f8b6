#include "hitadv/attack.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "attack_internal.hpp"
#include "hitadv/geometry.hpp"
#include "hitadv/metrics.hpp"
#include "hitadv/rng.hpp"

namespace hitadv {

namespace {

constexpr double kWeightFloor = 1e-290;  // below this the NW denominator is treated as underflowed

std::vector<double> minmax_normalize(const std::vector<double>& v) {
  auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(v.size(), 0.0);
  if (hi - lo <= 0.0) return out;  // constant channel -> all zeros
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / (hi - lo);
  return out;
}

/// Squared distances from every point to every center, fixed for the whole
/// optimization because the centers come from the clean cloud.
std::vector<double> center_dist2(const PointCloud& cloud, const DeformationField& field) {
  const std::size_t m = cloud.size(), nt = field.size();
  std::vector<double> d2(m * nt);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < nt; ++i)
      d2[j * nt + i] = norm2(field.centers[i] - cloud.points[j]);
  return d2;
}

std::vector<int> nearest_center_per_point(const std::vector<double>& d2, std::size_t m,
                                          std::size_t nt) {
  std::vector<int> nearest(m, 0);
  for (std::size_t j = 0; j < m; ++j) {
    double best = d2[j * nt];
    for (std::size_t i = 1; i < nt; ++i)
      if (d2[j * nt + i] < best) {
        best = d2[j * nt + i];
        nearest[j] = static_cast<int>(i);
      }
  }
  return nearest;
}

struct NwWeights {
  std::vector<double> w;      // m x nt
  std::vector<double> wsum;   // m
  std::vector<bool> fallback; // underflowed points
};

NwWeights nw_weights(const std::vector<double>& d2, const std::vector<double>& sigmas,
                     std::size_t m) {
  const std::size_t nt = sigmas.size();
  NwWeights nw;
  nw.w.resize(m * nt);
  nw.wsum.assign(m, 0.0);
  nw.fallback.assign(m, false);
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < nt; ++i) {
      double w = std::exp(-d2[j * nt + i] / (2.0 * sigmas[i] * sigmas[i]));
      nw.w[j * nt + i] = w;
      s += w;
    }
    nw.wsum[j] = s;
    if (s <= kWeightFloor) nw.fallback[j] = true;
  }
  return nw;
}

std::vector<Vec3> nw_displacements(const NwWeights& nw, const DeformationField& field,
                                   const std::vector<int>& nearest, std::size_t m) {
  const std::size_t nt = field.size();
  std::vector<Vec3> u(m);
  for (std::size_t j = 0; j < m; ++j) {
    if (nw.fallback[j]) {
      u[j] = field.deltas[nearest[j]];  // sigma -> 0 limit
      continue;
    }
    Vec3 acc{};
    for (std::size_t i = 0; i < nt; ++i) acc += nw.w[j * nt + i] * field.deltas[i];
    u[j] = acc * (1.0 / nw.wsum[j]);
  }
  return u;
}

}  // namespace

namespace detail {

ChamferGrad chamfer_with_grad(const PointCloud& clean, const PointCloud& adv) {
  const std::size_t m = clean.size(), mp = adv.size();
  ChamferGrad out;
  out.d_adv.assign(mp, Vec3{});

  double term1 = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    double best = norm2(clean.points[a] - adv.points[0]);
    std::size_t best_j = 0;
    for (std::size_t j = 1; j < mp; ++j) {
      double d = norm2(clean.points[a] - adv.points[j]);
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    term1 += best;
    out.d_adv[best_j] += (2.0 / m) * (adv.points[best_j] - clean.points[a]);
  }

  double term2 = 0.0;
  for (std::size_t j = 0; j < mp; ++j) {
    double best = norm2(adv.points[j] - clean.points[0]);
    std::size_t best_a = 0;
    for (std::size_t a = 1; a < m; ++a) {
      double d = norm2(adv.points[j] - clean.points[a]);
      if (d < best) {
        best = d;
        best_a = a;
      }
    }
    term2 += best;
    out.d_adv[j] += (2.0 / mp) * (adv.points[j] - clean.points[best_a]);
  }

  out.value = term1 / m + term2 / mp;
  return out;
}

HideGrad hide_with_grad(const std::vector<double>& sigmas, const std::vector<double>& center_cstd) {
  const std::size_t nt = sigmas.size();
  HideGrad out;
  out.d_sigma.assign(nt, 0.0);
  if (nt < 2) return out;

  std::vector<double> chat = minmax_normalize(center_cstd);
  double cnorm = 0.0;
  for (double c : chat) cnorm += c * c;
  cnorm = std::sqrt(cnorm);

  std::size_t A = 0, B = 0;
  for (std::size_t i = 1; i < nt; ++i) {
    if (sigmas[i] < sigmas[A]) A = i;
    if (sigmas[i] > sigmas[B]) B = i;
  }
  double range = sigmas[B] - sigmas[A];
  if (range <= 0.0 || cnorm <= 0.0) return out;  // constant input: excluded from gradients

  std::vector<double> shat(nt);
  for (std::size_t i = 0; i < nt; ++i) shat[i] = (sigmas[i] - sigmas[A]) / range;
  double snorm = 0.0, dotsc = 0.0;
  for (std::size_t i = 0; i < nt; ++i) {
    snorm += shat[i] * shat[i];
    dotsc += shat[i] * chat[i];
  }
  snorm = std::sqrt(snorm);  // >= 1: shat[B] == 1
  out.value = dotsc / (snorm * cnorm);

  // d cos / d shat, then chain through the min-max map with the argmin/argmax
  // indices held locally constant
  std::vector<double> dshat(nt);
  for (std::size_t i = 0; i < nt; ++i)
    dshat[i] = chat[i] / (snorm * cnorm) - dotsc * shat[i] / (snorm * snorm * snorm * cnorm);
  double sum_d = 0.0, sum_ds = 0.0;
  for (std::size_t i = 0; i < nt; ++i) {
    sum_d += dshat[i];
    sum_ds += dshat[i] * shat[i];
  }
  for (std::size_t i = 0; i < nt; ++i) {
    double g = dshat[i];
    if (i == A) g -= sum_d;
    double edge = (i == B ? 1.0 : 0.0) - (i == A ? 1.0 : 0.0);
    g -= edge * sum_ds;
    out.d_sigma[i] = g / range;
  }
  return out;
}

KerGrad ker_with_grad(const DeformationField& field, double cap) {
  const std::size_t nt = field.size();
  KerGrad out;
  out.d_delta.assign(nt, Vec3{});
  out.d_sigma.assign(nt, 0.0);

  double dnorm = 0.0;
  for (const Vec3& d : field.deltas) dnorm += norm2(d);
  dnorm = std::sqrt(dnorm);
  double snorm = 0.0;
  for (double s : field.sigmas) snorm += (cap - s) * (cap - s);
  snorm = std::sqrt(snorm);
  out.value = dnorm + snorm;

  if (dnorm > 0.0)
    for (std::size_t i = 0; i < nt; ++i) out.d_delta[i] = field.deltas[i] * (1.0 / dnorm);
  if (snorm > 0.0)
    for (std::size_t i = 0; i < nt; ++i) out.d_sigma[i] = (field.sigmas[i] - cap) / snorm;
  return out;
}

NwCache make_nw_cache(const PointCloud& clean, const DeformationField& field) {
  NwCache c;
  c.d2 = center_dist2(clean, field);
  c.nearest = nearest_center_per_point(c.d2, clean.size(), field.size());
  return c;
}

PointCloud nw_deform(const PointCloud& clean, const DeformationField& field, const NwCache& c) {
  NwWeights nw = nw_weights(c.d2, field.sigmas, clean.size());
  std::vector<Vec3> u = nw_displacements(nw, field, c.nearest, clean.size());
  PointCloud out = clean;
  for (std::size_t j = 0; j < clean.size(); ++j) out.points[j] += u[j];
  return out;
}

void nw_chain(const PointCloud& clean, const DeformationField& field, const NwCache& c,
              const std::vector<Vec3>& point_grads, std::vector<Vec3>& d_delta,
              std::vector<double>& d_sigma) {
  const std::size_t m = clean.size(), nt = field.size();
  NwWeights nw = nw_weights(c.d2, field.sigmas, m);
  std::vector<Vec3> u = nw_displacements(nw, field, c.nearest, m);
  for (std::size_t j = 0; j < m; ++j) {
    if (nw.fallback[j]) {
      d_delta[c.nearest[j]] += point_grads[j];
      continue;
    }
    double inv = 1.0 / nw.wsum[j];
    for (std::size_t i = 0; i < nt; ++i) {
      double omega = nw.w[j * nt + i] * inv;
      if (omega == 0.0) continue;
      d_delta[i] += omega * point_grads[j];
      double dwds = nw.w[j * nt + i] * c.d2[j * nt + i] /
                    (field.sigmas[i] * field.sigmas[i] * field.sigmas[i]);
      d_sigma[i] += dwds * inv * dot(point_grads[j], field.deltas[i] - u[j]);
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// scores and regions

SIScores si_score(const PointCloud& cloud, const ClassifierModel& model,
                  const RegionSearchConfig& cfg, double alpha) {
  if (!cloud.label) throw std::invalid_argument("si_score: cloud has no label");
  NeighborhoodIndex nbr = knn(cloud, cfg.k);
  NormalField normals = estimate_normals(cloud, nbr);
  std::vector<double> s2 = curvature_std_all(local_curvature_all(cloud, normals, nbr), nbr);
  std::vector<double> s1 = saliency_scores(model, cloud);

  SIScores si;
  si.alpha = alpha;
  si.s1 = minmax_normalize(s1);
  si.s2 = minmax_normalize(s2);
  si.combined.resize(cloud.size());
  for (std::size_t j = 0; j < cloud.size(); ++j) si.combined[j] = si.s1[j] + alpha * si.s2[j];
  return si;
}

std::vector<int> search_regions(const PointCloud& cloud, const SIScores& si,
                                const RegionSearchConfig& cfg,
                                std::vector<std::string>* warnings) {
  const int m = static_cast<int>(cloud.size());
  if (cfg.n < 1 || cfg.n > m) throw std::invalid_argument("search_regions: n out of range");
  if (cfg.n_tilde < 1 || cfg.n_tilde > cfg.n)
    throw std::invalid_argument("search_regions: n_tilde must be in [1, n]");
  if (si.combined.size() != cloud.size())
    throw std::invalid_argument("search_regions: SI scores do not match the cloud");
  long nk = static_cast<long>(cfg.n) * cfg.k;
  if (warnings && (nk < m / 2 || nk > 2l * m))
    warnings->push_back("region search: n*k=" + std::to_string(nk) +
                        " is far from the point count m=" + std::to_string(m));

  NeighborhoodIndex nbr = knn(cloud, cfg.k);
  std::vector<int> seeds = fps(cloud, cfg.n, cfg.seed);

  // stage 1: every region (seed + its k neighbors) nominates its max-SI point
  std::set<int> unique_candidates;
  for (int s : seeds) {
    int best = s;
    for (int q : nbr.neighbors[s])
      if (si.combined[q] > si.combined[best] ||
          (si.combined[q] == si.combined[best] && q < best))
        best = q;
    unique_candidates.insert(best);
  }

  // stage 2: highest-SI candidates win, ties to the lower index
  std::vector<int> candidates(unique_candidates.begin(), unique_candidates.end());
  std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    if (si.combined[a] != si.combined[b]) return si.combined[a] > si.combined[b];
    return a < b;
  });
  if (static_cast<int>(candidates.size()) < cfg.n_tilde) {
    if (warnings)
      warnings->push_back("region search: only " + std::to_string(candidates.size()) +
                          " distinct candidates for n_tilde=" + std::to_string(cfg.n_tilde));
    return candidates;
  }
  candidates.resize(cfg.n_tilde);
  return candidates;
}

// ---------------------------------------------------------------------------
// deformation and losses

double gauss_weight(const Vec3& center, const Vec3& point, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("gauss_weight: sigma must be positive");
  return std::exp(-norm2(center - point) / (2.0 * sigma * sigma));
}

PointCloud deform(const PointCloud& cloud, const DeformationField& field) {
  if (field.size() == 0) throw std::invalid_argument("deform: empty field");
  if (field.deltas.size() != field.size() || field.sigmas.size() != field.size())
    throw std::invalid_argument("deform: field arrays disagree in length");
  const std::size_t m = cloud.size();
  std::vector<double> d2 = center_dist2(cloud, field);
  std::vector<int> nearest = nearest_center_per_point(d2, m, field.size());
  NwWeights nw = nw_weights(d2, field.sigmas, m);
  std::vector<Vec3> u = nw_displacements(nw, field, nearest, m);

  PointCloud out = cloud;
  for (std::size_t j = 0; j < m; ++j) out.points[j] += u[j];
  return out;
}

double loss_cls(const std::vector<double>& logits, int true_label, double kappa,
                std::optional<int> target) {
  if (kappa < 0.0) throw std::invalid_argument("loss_cls: kappa must be >= 0");
  if (target && *target == true_label)
    throw std::invalid_argument("loss_cls: target equals the true label");
  int t = target ? *target : true_label;
  double other = -1e300;
  for (int c = 0; c < static_cast<int>(logits.size()); ++c)
    if (c != t) other = std::max(other, logits[c]);
  double margin = target ? other - logits[t] : logits[t] - other;
  return std::max(-kappa, margin);
}

double loss_ker(const DeformationField& field, double bandwidth_cap) {
  return detail::ker_with_grad(field, bandwidth_cap).value;
}

double loss_hide(const DeformationField& field, const std::vector<double>& center_cstd) {
  if (center_cstd.size() != field.size())
    throw std::invalid_argument("loss_hide: curvature vector does not match the field");
  return detail::hide_with_grad(field.sigmas, center_cstd).value;
}

double loss_chamfer(const PointCloud& clean, const PointCloud& adv) {
  if (clean.size() == 0 || adv.size() == 0)
    throw std::invalid_argument("loss_chamfer: empty cloud");
  return detail::chamfer_with_grad(clean, adv).value;
}

double loss_dis(const DeformationField& field, const PointCloud& clean, const PointCloud& adv,
                const std::vector<double>& center_cstd, double bandwidth_cap, double lambda1,
                double lambda2, double lambda3) {
  return lambda1 * loss_ker(field, bandwidth_cap) + lambda2 * loss_hide(field, center_cstd) +
         lambda3 * loss_chamfer(clean, adv);
}

// ---------------------------------------------------------------------------
// gradient of the full objective

namespace {

struct ObjectiveEval {
  AttackGradient grad;
  PointCloud adv;
  bool success = false;
};

ObjectiveEval eval_objective(const ClassifierModel& model, const PointCloud& clean,
                             const DeformationField& field, const AttackConfig& cfg,
                             const std::vector<double>& center_cstd, double lambda,
                             const std::vector<double>& d2, const std::vector<int>& nearest) {
  const std::size_t m = clean.size(), nt = field.size();
  ObjectiveEval out;
  out.grad.d_delta.assign(nt, Vec3{});
  out.grad.d_sigma.assign(nt, 0.0);

  NwWeights nw = nw_weights(d2, field.sigmas, m);
  std::vector<Vec3> u = nw_displacements(nw, field, nearest, m);
  out.adv = clean;
  for (std::size_t j = 0; j < m; ++j) out.adv.points[j] += u[j];

  // classification margin loss and its input gradient
  LossSpec spec;
  spec.kind = LossSpec::Kind::CwMargin;
  spec.kappa = cfg.kappa;
  spec.target = cfg.target;
  GradientReport cls = input_gradient(model, out.adv, spec);
  out.grad.l_cls = cls.loss;
  out.grad.logits = cls.logits;
  int pred = static_cast<int>(std::max_element(cls.logits.begin(), cls.logits.end()) -
                              cls.logits.begin());
  out.success = cfg.target ? pred == *cfg.target : pred != *clean.label;

  // distance losses
  detail::ChamferGrad cha = detail::chamfer_with_grad(clean, out.adv);
  detail::HideGrad hide = detail::hide_with_grad(field.sigmas, center_cstd);
  detail::KerGrad ker = detail::ker_with_grad(field, cfg.bandwidth_cap);
  out.grad.l_cha = cha.value;
  out.grad.l_hide = hide.value;
  out.grad.l_ker = ker.value;
  out.grad.total = cls.loss + lambda * (cfg.lambda1 * ker.value + cfg.lambda2 * hide.value +
                                        cfg.lambda3 * cha.value);

  // combined per-point gradient flowing through the deformation
  std::vector<Vec3> g(m);
  double w_cha = lambda * cfg.lambda3;
  for (std::size_t j = 0; j < m; ++j) g[j] = cls.point_gradients[j] + w_cha * cha.d_adv[j];

  for (std::size_t j = 0; j < m; ++j) {
    if (nw.fallback[j]) {
      out.grad.d_delta[nearest[j]] += g[j];  // limit map: identity through the nearest delta
      continue;
    }
    double inv_wsum = 1.0 / nw.wsum[j];
    for (std::size_t i = 0; i < nt; ++i) {
      double omega = nw.w[j * nt + i] * inv_wsum;
      if (omega == 0.0) continue;
      out.grad.d_delta[i] += omega * g[j];
      // dw/dsigma = w * d^2 / sigma^3 flows through numerator and denominator
      double dwds = nw.w[j * nt + i] * d2[j * nt + i] /
                    (field.sigmas[i] * field.sigmas[i] * field.sigmas[i]);
      out.grad.d_sigma[i] += dwds * inv_wsum * dot(g[j], field.deltas[i] - u[j]);
    }
  }

  double w_ker = lambda * cfg.lambda1, w_hide = lambda * cfg.lambda2;
  for (std::size_t i = 0; i < nt; ++i) {
    out.grad.d_delta[i] += w_ker * ker.d_delta[i];
    out.grad.d_sigma[i] += w_ker * ker.d_sigma[i] + w_hide * hide.d_sigma[i];
  }
  return out;
}

}  // namespace

AttackGradient attack_gradient(const ClassifierModel& model, const PointCloud& cloud,
                               const DeformationField& field, const AttackConfig& cfg,
                               const std::vector<double>& center_cstd, double lambda) {
  if (!cloud.label) throw std::invalid_argument("attack_gradient: cloud has no label");
  std::vector<double> d2 = center_dist2(cloud, field);
  std::vector<int> nearest = nearest_center_per_point(d2, cloud.size(), field.size());
  return eval_objective(model, cloud, field, cfg, center_cstd, lambda, d2, nearest).grad;
}

double attack_objective(const ClassifierModel& model, const PointCloud& cloud,
                        const DeformationField& field, const AttackConfig& cfg,
                        const std::vector<double>& center_cstd, double lambda) {
  PointCloud adv = deform(cloud, field);
  adv.label = cloud.label;
  LossSpec spec;
  spec.kind = LossSpec::Kind::CwMargin;
  spec.kappa = cfg.kappa;
  spec.target = cfg.target;
  GradientReport cls = input_gradient(model, adv, spec);
  double l_dis = cfg.lambda1 * loss_ker(field, cfg.bandwidth_cap) +
                 cfg.lambda2 * loss_hide(field, center_cstd) +
                 cfg.lambda3 * loss_chamfer(cloud, adv);
  return cls.loss + lambda * l_dis;
}

// ---------------------------------------------------------------------------
// shared C&W engine

namespace detail {

void validate_attack_config(const AttackConfig& cfg) {
  if (cfg.kappa < 0.0) throw std::invalid_argument("attack config: kappa must be >= 0");
  if (cfg.bandwidth_cap <= 0.0) throw std::invalid_argument("attack config: a must be > 0");
  if (cfg.sigma_min <= 0.0 || cfg.sigma_min > cfg.bandwidth_cap)
    throw std::invalid_argument("attack config: sigma_min must be in (0, a]");
  if (!(cfg.lambda_min <= cfg.lambda_init && cfg.lambda_init <= cfg.lambda_max))
    throw std::invalid_argument("attack config: lambda bounds must be ordered");
  if (cfg.binary_search_steps < 1 || cfg.inner_iters < 1)
    throw std::invalid_argument("attack config: step counts must be >= 1");
  if (cfg.lr <= 0.0) throw std::invalid_argument("attack config: lr must be > 0");
}

PreparedAttack prepare_attack(const ClassifierModel& model, const PointCloud& cloud,
                              const AttackConfig& cfg, const RegionSearchConfig& rcfg) {
  if (!cloud.label) throw std::invalid_argument("attack: cloud has no label");
  PreparedAttack prep;
  prep.clean = normalize_cloud(cloud);
  prep.clean.label = cloud.label;
  prep.label = *cloud.label;

  // SI once on the clean cloud, then both search stages
  prep.si = si_score(prep.clean, model, rcfg, cfg.alpha);
  prep.center_indices = search_regions(prep.clean, prep.si, rcfg, &prep.warnings);

  NeighborhoodIndex nbr = knn(prep.clean, rcfg.k);
  NormalField normals = estimate_normals(prep.clean, nbr);
  std::vector<double> s2 = curvature_std_all(local_curvature_all(prep.clean, normals, nbr), nbr);

  const std::size_t nt = prep.center_indices.size();
  prep.field.centers.resize(nt);
  prep.field.deltas.resize(nt);
  prep.field.sigmas.assign(nt, 0.5 * cfg.bandwidth_cap);
  prep.center_cstd.resize(nt);

  double radius = 0.0;
  for (const Vec3& p : prep.clean.points) radius = std::max(radius, norm(p));
  double eps0 = cfg.delta_init_scale * (radius > 0.0 ? radius : 1.0);

  Rng rng(derive_seed(cfg.seed, 0x5eedu));
  for (std::size_t i = 0; i < nt; ++i) {
    int idx = prep.center_indices[i];
    prep.field.centers[i] = prep.clean.points[idx];
    prep.center_cstd[i] = s2[idx];
    prep.field.deltas[i] = {rng.uniform(-eps0, eps0), rng.uniform(-eps0, eps0),
                            rng.uniform(-eps0, eps0)};
  }
  return prep;
}

AttackResult run_cw_search(const PreparedAttack& prep, const AttackConfig& cfg,
                           const IterEvaluator& evaluate, const AttackObserver& observer,
                           int metric_k) {
  const std::size_t nt = prep.field.size();
  const std::size_t dim = 4 * nt;  // deltas then sigmas

  AttackResult result;
  result.adversarial = prep.clean;

  DeformationField field = prep.field;
  bool have_best = false;
  double best_l_dis = 0.0;
  DeformationField best_field;
  PointCloud best_cloud;
  double best_lambda = 0.0;

  double lo = cfg.lambda_min, hi = cfg.lambda_max;
  double lambda = cfg.lambda_init;
  int total_iters = 0;
  PointCloud last_adv = prep.clean;

  std::vector<double> m1(dim), m2(dim), x(dim);
  auto pack = [&](const DeformationField& f) {
    for (std::size_t i = 0; i < nt; ++i) {
      x[3 * i + 0] = f.deltas[i].x;
      x[3 * i + 1] = f.deltas[i].y;
      x[3 * i + 2] = f.deltas[i].z;
      x[3 * nt + i] = f.sigmas[i];
    }
  };
  auto unpack = [&](DeformationField& f) {
    for (std::size_t i = 0; i < nt; ++i) {
      f.deltas[i] = {x[3 * i + 0], x[3 * i + 1], x[3 * i + 2]};
      f.sigmas[i] = std::clamp(x[3 * nt + i], cfg.sigma_min, cfg.bandwidth_cap);
    }
  };

  for (int probe = 0; probe < cfg.binary_search_steps; ++probe) {
    DeformationField snapshot = field;  // restored if this branch goes NaN
    std::fill(m1.begin(), m1.end(), 0.0);
    std::fill(m2.begin(), m2.end(), 0.0);
    LambdaProbe trace;
    trace.lambda = lambda;
    trace.best_l_dis = 1e300;
    bool aborted = false;

    for (int iter = 0; iter <= cfg.inner_iters; ++iter) {
      IterEvalResult ev = evaluate(field, lambda, probe, iter, static_cast<bool>(observer));
      bool finite = std::isfinite(ev.grad.total);
      for (std::size_t i = 0; finite && i < nt; ++i)
        finite = std::isfinite(ev.grad.d_sigma[i]) && std::isfinite(ev.grad.d_delta[i].x) &&
                 std::isfinite(ev.grad.d_delta[i].y) && std::isfinite(ev.grad.d_delta[i].z);
      if (!finite) {  // abort this lambda branch, count it as a failure
        aborted = true;
        field = snapshot;
        break;
      }

      trace.final_l_cls = ev.grad.l_cls;
      last_adv = ev.adv_plain;
      if (ev.success) {
        trace.success = true;
        trace.best_l_dis = std::min(trace.best_l_dis, ev.l_dis);
        if (!have_best || ev.l_dis < best_l_dis) {
          have_best = true;
          best_l_dis = ev.l_dis;
          best_field = field;
          best_cloud = ev.adv_plain;
          best_lambda = lambda;
        }
      }

      if (observer) {
        AttackIterationView view;
        view.probe = probe;
        view.iter = iter;
        view.lambda = lambda;
        view.sigmas = &field.sigmas;
        view.l_cls = ev.grad.l_cls;
        view.l_ker = ev.grad.l_ker;
        view.l_hide = ev.grad.l_hide;
        view.l_cha = ev.grad.l_cha;
        view.success = ev.success;
        view.transform = ev.transform;
        view.dis_clean = ev.has_instrumentation ? &ev.dis_clean : nullptr;
        view.dis_adv = ev.has_instrumentation ? &ev.dis_adv : nullptr;
        observer(view);
      }

      if (iter == cfg.inner_iters) break;
      ++total_iters;

      // Adam on (delta, sigma), sigma clipped after every step
      pack(field);
      std::vector<double> grad(dim);
      for (std::size_t i = 0; i < nt; ++i) {
        grad[3 * i + 0] = ev.grad.d_delta[i].x;
        grad[3 * i + 1] = ev.grad.d_delta[i].y;
        grad[3 * i + 2] = ev.grad.d_delta[i].z;
        grad[3 * nt + i] = ev.grad.d_sigma[i];
      }
      double t = iter + 1;
      double c1 = 1.0 - std::pow(0.9, t), c2 = 1.0 - std::pow(0.999, t);
      for (std::size_t d = 0; d < dim; ++d) {
        m1[d] = 0.9 * m1[d] + 0.1 * grad[d];
        m2[d] = 0.999 * m2[d] + 0.001 * grad[d] * grad[d];
        x[d] -= cfg.lr * (m1[d] / c1) / (std::sqrt(m2[d] / c2) + 1e-8);
      }
      unpack(field);
    }

    if (trace.best_l_dis == 1e300) trace.best_l_dis = 0.0;
    result.trace.push_back(trace);

    bool probe_success = trace.success && !aborted;
    if (probe_success) {
      lo = lambda;
      lambda = 0.5 * (lambda + hi);
    } else {
      hi = lambda;
      lambda = 0.5 * (lo + lambda);
    }
  }

  result.iterations = total_iters;
  if (have_best) {
    result.success = true;
    result.adversarial = best_cloud;
    result.final_lambda = best_lambda;
    result.field = best_field;
  } else {
    result.success = false;
    result.adversarial = last_adv;
    result.final_lambda = lambda;
    result.field = field;
  }
  result.adversarial.label = prep.clean.label;
  result.metrics = compute_attack_metrics(prep.clean, result.adversarial, metric_k);
  return result;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// drivers

AttackResult run_attack(const ClassifierModel& model, const PointCloud& cloud,
                        const AttackConfig& cfg, const RegionSearchConfig& rcfg,
                        const AttackObserver& observer) {
  detail::validate_attack_config(cfg);
  if (!cloud.label) throw std::invalid_argument("run_attack: cloud has no label");
  if (cfg.target && *cfg.target == *cloud.label)
    throw std::invalid_argument("run_attack: target equals the true label");

  PointCloud clean = normalize_cloud(cloud);
  clean.label = cloud.label;
  int pred0 = predict(model, clean);
  bool already = cfg.target ? pred0 == *cfg.target : pred0 != *cloud.label;
  if (already) {
    AttackResult trivial;
    trivial.adversarial = clean;
    trivial.success = true;
    trivial.already_misclassified = true;
    trivial.metrics = compute_attack_metrics(clean, clean, rcfg.k);
    return trivial;
  }

  detail::PreparedAttack prep = detail::prepare_attack(model, clean, cfg, rcfg);
  std::vector<double> d2 = center_dist2(prep.clean, prep.field);
  std::vector<int> nearest = nearest_center_per_point(d2, prep.clean.size(), prep.field.size());

  auto evaluator = [&](const DeformationField& field, double lambda, int, int,
                       bool) -> detail::IterEvalResult {
    ObjectiveEval ev =
        eval_objective(model, prep.clean, field, cfg, prep.center_cstd, lambda, d2, nearest);
    detail::IterEvalResult out;
    out.grad = std::move(ev.grad);
    out.success = ev.success;
    out.l_dis = cfg.lambda1 * out.grad.l_ker + cfg.lambda2 * out.grad.l_hide +
                cfg.lambda3 * out.grad.l_cha;
    out.adv_plain = std::move(ev.adv);
    return out;
  };

  return detail::run_cw_search(prep, cfg, evaluator, observer, rcfg.k);
}

AttackResult ifgm_baseline(const ClassifierModel& model, const PointCloud& cloud, double budget,
                           int steps) {
  if (!cloud.label) throw std::invalid_argument("ifgm_baseline: cloud has no label");
  if (budget < 0.0) throw std::invalid_argument("ifgm_baseline: budget must be >= 0");

  PointCloud clean = normalize_cloud(cloud);
  clean.label = cloud.label;
  const std::size_t m = clean.size();

  AttackResult result;
  if (predict(model, clean) != *cloud.label) {
    result.adversarial = clean;
    result.success = true;
    result.already_misclassified = true;
    result.metrics = compute_attack_metrics(clean, clean, 10);
    return result;
  }

  std::vector<Vec3> delta(m, Vec3{});
  double alpha = steps > 0 ? 2.5 * budget / steps : 0.0;
  for (int s = 0; s < steps && budget > 0.0; ++s) {
    PointCloud current = clean;
    for (std::size_t j = 0; j < m; ++j) current.points[j] += delta[j];
    GradientReport rep = input_gradient(model, current, LossSpec{});
    double gnorm = 0.0;
    for (const Vec3& g : rep.point_gradients) gnorm += norm2(g);
    gnorm = std::sqrt(gnorm);
    if (gnorm <= 1e-12) break;
    for (std::size_t j = 0; j < m; ++j) delta[j] += (alpha / gnorm) * rep.point_gradients[j];
    double dnorm = 0.0;
    for (const Vec3& d : delta) dnorm += norm2(d);
    dnorm = std::sqrt(dnorm);
    if (dnorm > budget)
      for (Vec3& d : delta) d *= budget / dnorm;
    ++result.iterations;
  }

  result.adversarial = clean;
  for (std::size_t j = 0; j < m; ++j) result.adversarial.points[j] += delta[j];
  result.adversarial.label = cloud.label;
  result.success = predict(model, result.adversarial) != *cloud.label;
  result.metrics = compute_attack_metrics(clean, result.adversarial, 10);
  return result;
}

AttackMetrics compute_attack_metrics(const PointCloud& clean, const PointCloud& adv,
                                     int metric_k) {
  AttackMetrics metrics;
  metrics.csd = csd_metric(clean, adv, metric_k);
  metrics.chamfer = loss_chamfer(clean, adv);
  metrics.knn_dist = knn_dist_metric(adv, metric_k);
  return metrics;
}

}  // namespace hitadv
