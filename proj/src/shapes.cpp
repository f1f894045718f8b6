#include "hitadv/shapes.hpp"

#include <cmath>
#include <stdexcept>

#include "hitadv/rng.hpp"

namespace hitadv {

const std::vector<std::string> kShapeFamilyNames = {
    "sphere", "cube", "cylinder", "cone", "torus", "pyramid", "star", "composite"};

ShapeFamily parse_shape_family(const std::string& name) {
  for (std::size_t i = 0; i < kShapeFamilyNames.size(); ++i)
    if (kShapeFamilyNames[i] == name) return static_cast<ShapeFamily>(i);
  throw std::invalid_argument("unknown shape family '" + name + "'");
}

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec3 unit_dir(Rng& rng) {
  for (;;) {
    Vec3 v = rng.normal_vec3(1.0);
    double n = norm(v);
    if (n > 1e-9) return v * (1.0 / n);
  }
}

/// Antithetic pairs keep the centroid exactly at the origin, so after
/// normalization every sphere point sits at radius 1.
void sample_sphere(std::vector<Vec3>& pts, int m, Rng& rng) {
  for (int i = 0; i < m / 2; ++i) {
    Vec3 u = unit_dir(rng);
    pts.push_back(u);
    pts.push_back(-u);
  }
  if (m % 2) pts.push_back(Vec3{0, 0, 1});
}

void sample_cube(std::vector<Vec3>& pts, int m, Rng& rng) {
  for (int i = 0; i < m; ++i) {
    int face = static_cast<int>(rng.index(6));
    double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
    double s = face % 2 ? 1.0 : -1.0;
    switch (face / 2) {
      case 0: pts.push_back({s, a, b}); break;
      case 1: pts.push_back({a, s, b}); break;
      default: pts.push_back({a, b, s}); break;
    }
  }
}

void sample_cylinder(std::vector<Vec3>& pts, int m, Rng& rng) {
  const double r = 0.5, h = 1.6;
  double lateral = 2 * kPi * r * h, caps = 2 * kPi * r * r;
  for (int i = 0; i < m; ++i) {
    if (rng.uniform() * (lateral + caps) < lateral) {
      double a = rng.uniform(0.0, 2 * kPi);
      pts.push_back({r * std::cos(a), r * std::sin(a), rng.uniform(-h / 2, h / 2)});
    } else {
      double a = rng.uniform(0.0, 2 * kPi), rr = r * std::sqrt(rng.uniform());
      double z = rng.uniform() < 0.5 ? -h / 2 : h / 2;
      pts.push_back({rr * std::cos(a), rr * std::sin(a), z});
    }
  }
}

void sample_cone(std::vector<Vec3>& pts, int m, Rng& rng) {
  const double r = 0.7, h = 1.4, z0 = -0.5;
  double slant = std::sqrt(r * r + h * h);
  double lateral = kPi * r * slant, base = kPi * r * r;
  for (int i = 0; i < m; ++i) {
    if (rng.uniform() * (lateral + base) < lateral) {
      double t = std::sqrt(rng.uniform());  // area-uniform along the slant
      double a = rng.uniform(0.0, 2 * kPi);
      pts.push_back({t * r * std::cos(a), t * r * std::sin(a), z0 + h * (1.0 - t)});
    } else {
      double a = rng.uniform(0.0, 2 * kPi), rr = r * std::sqrt(rng.uniform());
      pts.push_back({rr * std::cos(a), rr * std::sin(a), z0});
    }
  }
}

void sample_torus(std::vector<Vec3>& pts, int m, Rng& rng) {
  const double R = 0.65, r = 0.28;
  for (int i = 0; i < m; ++i) {
    double theta;
    for (;;) {  // reject on the area element (R + r cos) / (R + r)
      theta = rng.uniform(0.0, 2 * kPi);
      if (rng.uniform() <= (R + r * std::cos(theta)) / (R + r)) break;
    }
    double phi = rng.uniform(0.0, 2 * kPi);
    double w = R + r * std::cos(theta);
    pts.push_back({w * std::cos(phi), w * std::sin(phi), r * std::sin(theta)});
  }
}

void sample_pyramid(std::vector<Vec3>& pts, int m, Rng& rng) {
  const double half = 0.7, z0 = -0.5, h = 1.3;
  const Vec3 apex{0, 0, z0 + h};
  const Vec3 corners[4] = {{-half, -half, z0}, {half, -half, z0}, {half, half, z0},
                           {-half, half, z0}};
  double base = 4 * half * half;
  double tri = 0.5 * norm(cross(corners[1] - corners[0], apex - corners[0]));
  double total = base + 4 * tri;
  for (int i = 0; i < m; ++i) {
    if (rng.uniform() * total < base) {
      pts.push_back({rng.uniform(-half, half), rng.uniform(-half, half), z0});
    } else {
      int f = static_cast<int>(rng.index(4));
      const Vec3& a = corners[f];
      const Vec3& b = corners[(f + 1) % 4];
      double u = rng.uniform(), v = rng.uniform();
      if (u + v > 1.0) {
        u = 1.0 - u;
        v = 1.0 - v;
      }
      pts.push_back(a + u * (b - a) + v * (apex - a));
    }
  }
}

/// Spiky sphere: smooth base with sharp radial bumps along fixed axes, the
/// high-curvature-variance family.
void sample_star(std::vector<Vec3>& pts, int m, Rng& rng) {
  static const std::vector<Vec3> axes = [] {
    // icosahedron vertices
    const double g = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> a = {{0, 1, g},  {0, -1, g},  {0, 1, -g},  {0, -1, -g},
                           {1, g, 0},  {-1, g, 0},  {1, -g, 0},  {-1, -g, 0},
                           {g, 0, 1},  {-g, 0, 1},  {g, 0, -1},  {-g, 0, -1}};
    for (Vec3& v : a) v = normalized(v);
    return a;
  }();
  for (int i = 0; i < m; ++i) {
    Vec3 u = unit_dir(rng);
    double best = 0.0;
    for (const Vec3& a : axes) best = std::max(best, dot(u, a));
    double r = 0.7 + 0.65 * std::pow(std::max(0.0, best), 24.0);
    pts.push_back(r * u);
  }
}

/// Box body with a sphere cap and a cone nose, mixed by surface share.
void sample_composite(std::vector<Vec3>& pts, int m, Rng& rng) {
  const double bh = 0.45;             // box half-size
  const Vec3 sphere_c{0, 0, 0.75};    // cap sphere
  const double sr = 0.4;
  const Vec3 nose_base{0, 0.45, 0};   // cone sticking out of +y face
  const double nr = 0.3, nh = 0.8;

  double box_area = 24 * bh * bh;
  double sphere_area = 4 * kPi * sr * sr;
  double cone_area = kPi * nr * std::sqrt(nr * nr + nh * nh);
  double total = box_area + sphere_area + cone_area;

  for (int i = 0; i < m; ++i) {
    double pick = rng.uniform() * total;
    if (pick < box_area) {
      int face = static_cast<int>(rng.index(6));
      double a = rng.uniform(-bh, bh), b = rng.uniform(-bh, bh);
      double s = face % 2 ? bh : -bh;
      switch (face / 2) {
        case 0: pts.push_back({s, a, b}); break;
        case 1: pts.push_back({a, s, b}); break;
        default: pts.push_back({a, b, s}); break;
      }
    } else if (pick < box_area + sphere_area) {
      pts.push_back(sphere_c + sr * unit_dir(rng));
    } else {
      double t = std::sqrt(rng.uniform());
      double a = rng.uniform(0.0, 2 * kPi);
      Vec3 local{t * nr * std::cos(a), nh * (1.0 - t), t * nr * std::sin(a)};
      pts.push_back(nose_base + local);
    }
  }
}

}  // namespace

PointCloud sample_shape(const ShapeSpec& spec) {
  if (spec.points < 64) throw std::invalid_argument("sample_shape: needs at least 64 points");
  Rng rng(spec.seed);

  PointCloud cloud;
  cloud.points.reserve(spec.points);
  switch (spec.family) {
    case ShapeFamily::Sphere: sample_sphere(cloud.points, spec.points, rng); break;
    case ShapeFamily::Cube: sample_cube(cloud.points, spec.points, rng); break;
    case ShapeFamily::Cylinder: sample_cylinder(cloud.points, spec.points, rng); break;
    case ShapeFamily::Cone: sample_cone(cloud.points, spec.points, rng); break;
    case ShapeFamily::Torus: sample_torus(cloud.points, spec.points, rng); break;
    case ShapeFamily::Pyramid: sample_pyramid(cloud.points, spec.points, rng); break;
    case ShapeFamily::Star: sample_star(cloud.points, spec.points, rng); break;
    case ShapeFamily::Composite: sample_composite(cloud.points, spec.points, rng); break;
  }

  if (spec.jitter > 0.0)
    for (Vec3& p : cloud.points) p += rng.normal_vec3(spec.jitter);

  // random orientation per sample; the classifier must not lean on a
  // canonical pose, otherwise any rigid-transform evaluation is meaningless
  Mat3 R = quat_to_matrix(rng.uniform_quat());
  for (Vec3& p : cloud.points) p = R * p;

  cloud.label = static_cast<int>(spec.family);
  PointCloud normalized = normalize_cloud(cloud);
  normalized.label = cloud.label;
  return normalized;
}

Dataset gen_dataset(const std::vector<ShapeFamily>& families, int per_class, int points,
                    double jitter, std::uint64_t seed, const std::string& split) {
  if (families.empty()) throw std::invalid_argument("gen_dataset: no families given");
  Dataset ds;
  ds.split = split;
  for (ShapeFamily f : families) ds.class_names.push_back(kShapeFamilyNames[static_cast<int>(f)]);

  for (std::size_t c = 0; c < families.size(); ++c) {
    for (int i = 0; i < per_class; ++i) {
      ShapeSpec spec;
      spec.family = families[c];
      spec.points = points;
      spec.jitter = jitter;
      spec.seed = derive_seed(seed, (static_cast<std::uint64_t>(c) << 32) | i);
      PointCloud cloud = sample_shape(spec);
      cloud.label = static_cast<int>(c);  // label = family position in the config
      ds.clouds.push_back(std::move(cloud));
    }
  }
  return ds;
}

}  // namespace hitadv
