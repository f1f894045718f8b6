#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hitadv/attack.hpp"
#include "hitadv/classifier.hpp"
#include "hitadv/defense.hpp"
#include "hitadv/hardening.hpp"

namespace hitadv {

enum class AttackKind { HitAdv, Ifgm, HitAdvHardened };

std::string attack_kind_name(AttackKind kind);
AttackKind parse_attack_kind(const std::string& name);

struct EvaluateOptions {
  AttackKind attack = AttackKind::HitAdv;
  DefenseSpec defense;
  AttackConfig attack_cfg;
  RegionSearchConfig region_cfg;
  HardeningConfig hardening_cfg;
  double ifgm_budget = 1.0;
  int ifgm_steps = 50;
  int metric_k = 10;
  int max_examples = 0;  // 0 = no cap; else stop after this many attempted
  std::uint64_t seed = 0;
};

struct ExampleRecord {
  int cloud_id = 0;
  int label = 0;
  bool success = false;
  double csd = 0.0;
  double chamfer = 0.0;
  double knn_dist = 0.0;
  std::string defense;
};

struct MetricReport {
  double asr = 0.0;
  double csd_mean = 0.0;
  double chamfer_mean = 0.0;
  double knn_dist_mean = 0.0;
  int attempted = 0;
  int successes = 0;
  int skipped_misclassified = 0;
  std::string attack;
  std::string defense;
  std::vector<ExampleRecord> examples;
};

/// The attack-vs-defense protocol: attack every correctly classified test
/// cloud on the undefended model, defense-preprocess the adversarial cloud,
/// and score success on the defended prediction. When an adversarially
/// trained model is supplied, the defended prediction runs on it instead.
/// Per-example failures are recorded, never fatal.
MetricReport evaluate_suite(const ClassifierModel& model, const ClassifierModel* model_at,
                            const Dataset& testset, const EvaluateOptions& opts);

/// Byte-deterministic JSON serialization (schema in docs/).
std::string report_to_json(const MetricReport& report, const EvaluateOptions& opts);

MetricReport report_from_json(const std::string& json_text);

/// Recomputes a report's summary from its example records; used by merge and
/// by the self-consistency tests.
void recompute_summary(MetricReport& report);

/// Merges reports; records with the same (attack, defense) pool their
/// examples and the summary is recomputed, so merging is associative.
std::vector<MetricReport> merge_reports(const std::vector<MetricReport>& reports);

/// Minimal structural validation against the shipped report schema.
void validate_report_json(const std::string& json_text);

}  // namespace hitadv
