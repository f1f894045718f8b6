#include "hitadv/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "hitadv/metrics.hpp"
#include "hitadv/rng.hpp"
#include "json.hpp"

namespace hitadv {

std::string attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::HitAdv: return "hit_adv";
    case AttackKind::Ifgm: return "ifgm";
    case AttackKind::HitAdvHardened: return "hit_adv_hardened";
  }
  return "hit_adv";
}

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "hit_adv") return AttackKind::HitAdv;
  if (name == "ifgm") return AttackKind::Ifgm;
  if (name == "hit_adv_hardened") return AttackKind::HitAdvHardened;
  throw std::invalid_argument("unknown attack '" + name + "'");
}

void recompute_summary(MetricReport& report) {
  report.attempted = static_cast<int>(report.examples.size());
  report.successes = 0;
  double csd = 0.0, cha = 0.0, knn = 0.0;
  for (const auto& ex : report.examples) {
    if (ex.success) ++report.successes;
    csd += ex.csd;
    cha += ex.chamfer;
    knn += ex.knn_dist;
  }
  int n = std::max(1, report.attempted);
  report.asr = report.attempted > 0
                   ? static_cast<double>(report.successes) / report.attempted
                   : 0.0;
  report.csd_mean = csd / n;
  report.chamfer_mean = cha / n;
  report.knn_dist_mean = knn / n;
}

MetricReport evaluate_suite(const ClassifierModel& model, const ClassifierModel* model_at,
                            const Dataset& testset, const EvaluateOptions& opts) {
  if (testset.clouds.empty()) throw std::invalid_argument("evaluate_suite: empty test set");
  const ClassifierModel& defended_model = model_at ? *model_at : model;

  MetricReport report;
  report.attack = attack_kind_name(opts.attack);
  report.defense = opts.defense.name();

  for (std::size_t idx = 0; idx < testset.clouds.size(); ++idx) {
    if (opts.max_examples > 0 && report.attempted >= opts.max_examples) break;
    const PointCloud& cloud = testset.clouds[idx];
    if (!cloud.label) continue;

    PointCloud clean = normalize_cloud(cloud);
    clean.label = cloud.label;
    if (predict(model, clean) != *cloud.label) {
      ++report.skipped_misclassified;
      continue;
    }

    std::uint64_t ex_seed = derive_seed(opts.seed, idx);
    ExampleRecord rec;
    rec.cloud_id = static_cast<int>(idx);
    rec.label = *cloud.label;
    rec.defense = opts.defense.name();

    try {
      AttackResult result;
      switch (opts.attack) {
        case AttackKind::HitAdv: {
          AttackConfig acfg = opts.attack_cfg;
          acfg.seed = ex_seed;
          RegionSearchConfig rcfg = opts.region_cfg;
          rcfg.seed = derive_seed(ex_seed, 2);
          result = run_attack(model, clean, acfg, rcfg);
          break;
        }
        case AttackKind::Ifgm:
          result = ifgm_baseline(model, clean, opts.ifgm_budget, opts.ifgm_steps);
          break;
        case AttackKind::HitAdvHardened: {
          AttackConfig acfg = opts.attack_cfg;
          acfg.seed = ex_seed;
          RegionSearchConfig rcfg = opts.region_cfg;
          rcfg.seed = derive_seed(ex_seed, 2);
          HardeningConfig hcfg = opts.hardening_cfg;
          hcfg.seed = derive_seed(ex_seed, 3);
          result = hardened_attack(model, clean, acfg, rcfg, hcfg);
          break;
        }
      }

      PointCloud defended = apply_defense(result.adversarial, opts.defense,
                                          derive_seed(ex_seed, 4));
      rec.success = predict(defended_model, defended) != *cloud.label;
      AttackMetrics metrics = compute_attack_metrics(clean, result.adversarial, opts.metric_k);
      rec.csd = metrics.csd;
      rec.chamfer = metrics.chamfer;
      rec.knn_dist = metrics.knn_dist;
    } catch (const std::exception&) {
      rec.success = false;  // recorded, never fatal for the batch
    }

    report.examples.push_back(rec);
    ++report.attempted;
  }

  recompute_summary(report);
  return report;
}

std::string report_to_json(const MetricReport& report, const EvaluateOptions& opts) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;

  nlohmann::ordered_json cfg;
  cfg["attack"] = report.attack;
  cfg["defense"]["kind"] = report.defense;
  cfg["defense"]["srs_drop_ratio"] = opts.defense.srs_drop_ratio;
  cfg["defense"]["sor_k"] = opts.defense.sor_k;
  cfg["defense"]["sor_std_mult"] = opts.defense.sor_std_mult;
  cfg["defense"]["params_source"] = "tool defaults";
  cfg["attack_config"]["kappa"] = opts.attack_cfg.kappa;
  cfg["attack_config"]["bandwidth_cap"] = opts.attack_cfg.bandwidth_cap;
  cfg["attack_config"]["alpha"] = opts.attack_cfg.alpha;
  cfg["attack_config"]["lambda1"] = opts.attack_cfg.lambda1;
  cfg["attack_config"]["lambda2"] = opts.attack_cfg.lambda2;
  cfg["attack_config"]["lambda3"] = opts.attack_cfg.lambda3;
  cfg["attack_config"]["lambda_init"] = opts.attack_cfg.lambda_init;
  cfg["attack_config"]["lambda_max"] = opts.attack_cfg.lambda_max;
  cfg["attack_config"]["lambda_min"] = opts.attack_cfg.lambda_min;
  cfg["attack_config"]["binary_search_steps"] = opts.attack_cfg.binary_search_steps;
  cfg["attack_config"]["inner_iters"] = opts.attack_cfg.inner_iters;
  cfg["attack_config"]["lr"] = opts.attack_cfg.lr;
  cfg["region"]["n"] = opts.region_cfg.n;
  cfg["region"]["k"] = opts.region_cfg.k;
  cfg["region"]["n_tilde"] = opts.region_cfg.n_tilde;
  cfg["ifgm"]["budget"] = opts.ifgm_budget;
  cfg["ifgm"]["steps"] = opts.ifgm_steps;
  cfg["metric_k"] = opts.metric_k;
  cfg["seed"] = opts.seed;
  j["config_echo"] = cfg;

  nlohmann::ordered_json summary;
  summary["asr"] = report.asr;
  summary["csd_mean"] = report.csd_mean;
  summary["chamfer_mean"] = report.chamfer_mean;
  summary["knn_dist_mean"] = report.knn_dist_mean;
  summary["attempted"] = report.attempted;
  summary["successes"] = report.successes;
  summary["skipped_misclassified"] = report.skipped_misclassified;
  j["summary"] = summary;

  j["examples"] = nlohmann::ordered_json::array();
  for (const auto& ex : report.examples) {
    nlohmann::ordered_json e;
    e["id"] = ex.cloud_id;
    e["label"] = ex.label;
    e["success"] = ex.success;
    e["csd"] = ex.csd;
    e["chamfer"] = ex.chamfer;
    e["knn_dist"] = ex.knn_dist;
    e["defense"] = ex.defense;
    j["examples"].push_back(e);
  }
  return j.dump(2) + "\n";
}

MetricReport report_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  if (j.value("schema_version", 0) != 1)
    throw std::runtime_error("report: unsupported schema version");
  MetricReport report;
  report.attack = j.at("config_echo").at("attack").get<std::string>();
  report.defense = j.at("config_echo").at("defense").at("kind").get<std::string>();
  report.skipped_misclassified = j.at("summary").value("skipped_misclassified", 0);
  for (const auto& e : j.at("examples")) {
    ExampleRecord rec;
    rec.cloud_id = e.at("id").get<int>();
    rec.label = e.at("label").get<int>();
    rec.success = e.at("success").get<bool>();
    rec.csd = e.at("csd").get<double>();
    rec.chamfer = e.at("chamfer").get<double>();
    rec.knn_dist = e.at("knn_dist").get<double>();
    rec.defense = e.at("defense").get<std::string>();
    report.examples.push_back(rec);
  }
  recompute_summary(report);
  return report;
}

std::vector<MetricReport> merge_reports(const std::vector<MetricReport>& reports) {
  std::map<std::pair<std::string, std::string>, MetricReport> grouped;
  for (const auto& r : reports) {
    auto key = std::make_pair(r.attack, r.defense);
    auto it = grouped.find(key);
    if (it == grouped.end()) {
      grouped[key] = r;
    } else {
      auto& dst = it->second;
      dst.examples.insert(dst.examples.end(), r.examples.begin(), r.examples.end());
      dst.skipped_misclassified += r.skipped_misclassified;
    }
  }
  std::vector<MetricReport> out;
  for (auto& [key, r] : grouped) {
    recompute_summary(r);
    out.push_back(std::move(r));
  }
  return out;
}

void validate_report_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  auto require = [&](bool cond, const std::string& what) {
    if (!cond) throw std::runtime_error("report schema violation: " + what);
  };
  require(j.is_object(), "top level must be an object");
  require(j.contains("schema_version") && j["schema_version"].is_number_integer(),
          "schema_version missing");
  require(j.contains("config_echo") && j["config_echo"].is_object(), "config_echo missing");
  require(j.contains("summary") && j["summary"].is_object(), "summary missing");
  for (const char* key : {"asr", "csd_mean", "chamfer_mean", "knn_dist_mean"})
    require(j["summary"].contains(key) && j["summary"][key].is_number(),
            std::string("summary.") + key + " missing");
  require(j.contains("examples") && j["examples"].is_array(), "examples missing");
  for (const auto& e : j["examples"]) {
    require(e.is_object(), "example must be an object");
    require(e.contains("id") && e["id"].is_number_integer(), "example.id missing");
    require(e.contains("success") && e["success"].is_boolean(), "example.success missing");
    for (const char* key : {"csd", "chamfer", "knn_dist"})
      require(e.contains(key) && e[key].is_number(), std::string("example.") + key + " missing");
    require(e.contains("defense") && e["defense"].is_string(), "example.defense missing");
  }
  // summary must agree with its own records
  int successes = 0;
  for (const auto& e : j["examples"])
    if (e["success"].get<bool>()) ++successes;
  int attempted = static_cast<int>(j["examples"].size());
  if (attempted > 0) {
    double asr = static_cast<double>(successes) / attempted;
    if (std::abs(asr - j["summary"]["asr"].get<double>()) > 1e-9)
      throw std::runtime_error("report schema violation: summary.asr disagrees with examples");
  }
}

}  // namespace hitadv
