#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hitadv/classifier.hpp"

namespace hitadv {

/// Procedural surface families, smooth through spiky, one label each.
enum class ShapeFamily { Sphere, Cube, Cylinder, Cone, Torus, Pyramid, Star, Composite };

extern const std::vector<std::string> kShapeFamilyNames;

ShapeFamily parse_shape_family(const std::string& name);

struct ShapeSpec {
  ShapeFamily family = ShapeFamily::Sphere;
  int points = 1024;
  double jitter = 0.005;  // surface noise, fraction of the shape scale
  std::uint64_t seed = 0;
};

/// One surface-sampled cloud: jittered, randomly oriented, normalized.
PointCloud sample_shape(const ShapeSpec& spec);

/// Balanced dataset over the given families; per-cloud seeds derive from the
/// dataset seed, so generation is reproducible and order-stable.
Dataset gen_dataset(const std::vector<ShapeFamily>& families, int per_class, int points,
                    double jitter, std::uint64_t seed, const std::string& split = "train");

}  // namespace hitadv
