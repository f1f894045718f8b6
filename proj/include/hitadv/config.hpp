#pragma once

#include <string>
#include <vector>

#include "hitadv/attack.hpp"
#include "hitadv/defense.hpp"
#include "hitadv/evaluate.hpp"
#include "hitadv/hardening.hpp"
#include "hitadv/shapes.hpp"

namespace hitadv {

struct DatasetConfig {
  std::vector<ShapeFamily> families;  // defaults to all eight
  int per_class = 40;
  int test_per_class = 15;
  int points = 1024;
  double jitter = 0.005;
  std::uint64_t seed = 1;
};

struct TrainConfig {
  int epochs = 30;
  double lr = 0.01;
  int batch_size = 16;
  std::uint64_t seed = 7;
  bool adversarial = false;
  double at_budget = 1.0;
  int at_steps = 5;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  TrainConfig train;
  AttackConfig attack;
  RegionSearchConfig region;
  HardeningConfig hardening;
  std::vector<DefenseSpec> defenses;   // defaults to {none}
  std::vector<AttackKind> attacks;     // defaults to {hit_adv}
  double ifgm_budget = 1.0;
  int ifgm_steps = 50;
  int metric_k = 10;
  int max_examples = 0;
  std::string output_dir = "out";
};

/// Parses the key-value config format: [section] headers, "key = value"
/// lines, '#' comments. Unknown sections or keys are all collected and
/// reported in one error.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

}  // namespace hitadv
