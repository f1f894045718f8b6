// hitadv command line: gen-data, train, attack, defend, evaluate, report.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hitadv/config.hpp"
#include "hitadv/evaluate.hpp"
#include "hitadv/io.hpp"
#include "hitadv/metrics.hpp"
#include "hitadv/rng.hpp"
#include "hitadv/shapes.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string default_output_dir() {
  if (const char* env = std::getenv("HITADV_OUTPUT_DIR")) return env;
  return "out";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

hitadv::Dataset dataset_from_config(const hitadv::DatasetConfig& dc, bool test_split) {
  return hitadv::gen_dataset(dc.families, test_split ? dc.test_per_class : dc.per_class,
                             dc.points, dc.jitter,
                             test_split ? hitadv::derive_seed(dc.seed, 0x7e57) : dc.seed,
                             test_split ? "test" : "train");
}

int cmd_gen_data(const hitadv::ExperimentConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["points"] = cfg.dataset.points;
  manifest["jitter"] = cfg.dataset.jitter;
  manifest["seed"] = cfg.dataset.seed;
  manifest["families"] = ordered_json::array();
  for (auto f : cfg.dataset.families)
    manifest["families"].push_back(hitadv::kShapeFamilyNames[static_cast<int>(f)]);

  for (const char* split : {"train", "test"}) {
    bool is_test = std::string(split) == "test";
    hitadv::Dataset ds = dataset_from_config(cfg.dataset, is_test);
    ordered_json entries = ordered_json::array();
    fs::create_directories(fs::path(out_dir) / split);
    for (std::size_t i = 0; i < ds.clouds.size(); ++i) {
      std::string name = std::string(split) + "/" +
                         ds.class_names[*ds.clouds[i].label] + "_" + std::to_string(i) + ".xyz";
      hitadv::save_cloud(ds.clouds[i], (fs::path(out_dir) / name).string(),
                         hitadv::CloudFormat::XYZ);
      ordered_json e;
      e["file"] = name;
      e["label"] = *ds.clouds[i].label;
      e["family"] = ds.class_names[*ds.clouds[i].label];
      entries.push_back(e);
    }
    manifest[split] = entries;
  }
  write_text(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote dataset with manifest to " << out_dir << "\n";
  return 0;
}

hitadv::Dataset load_dataset_dir(const std::string& dir, const std::string& split) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw std::runtime_error("no manifest.json in '" + dir + "'");
  nlohmann::json manifest;
  in >> manifest;
  hitadv::Dataset ds;
  ds.split = split;
  for (const auto& f : manifest.at("families")) ds.class_names.push_back(f.get<std::string>());
  for (const auto& e : manifest.at(split)) {
    hitadv::PointCloud cloud = hitadv::load_cloud(
        (fs::path(dir) / e.at("file").get<std::string>()).string(), hitadv::CloudFormat::XYZ);
    cloud.label = e.at("label").get<int>();
    ds.clouds.push_back(std::move(cloud));
  }
  return ds;
}

int cmd_train(const hitadv::ExperimentConfig& cfg, const std::string& data_dir,
              const std::string& out_path) {
  hitadv::Dataset train_set = data_dir.empty() ? dataset_from_config(cfg.dataset, false)
                                               : load_dataset_dir(data_dir, "train");
  hitadv::Dataset test_set = data_dir.empty() ? dataset_from_config(cfg.dataset, true)
                                              : load_dataset_dir(data_dir, "test");

  hitadv::TrainOptions opts;
  opts.epochs = cfg.train.epochs;
  opts.lr = cfg.train.lr;
  opts.batch_size = cfg.train.batch_size;
  opts.seed = cfg.train.seed;
  opts.adversarial = cfg.train.adversarial;
  opts.at_budget = cfg.train.at_budget;
  opts.at_steps = cfg.train.at_steps;
  opts.verbose = true;

  hitadv::TrainStats stats;
  hitadv::ClassifierModel model = hitadv::train(train_set, opts, &stats);
  double test_acc = hitadv::accuracy(model, test_set);
  std::cout << "train accuracy " << stats.final_train_accuracy << ", test accuracy " << test_acc
            << "\n";
  hitadv::save_model(model, out_path);
  std::cout << "checkpoint written to " << out_path << "\n";
  return 0;
}

int cmd_attack(const hitadv::ExperimentConfig& cfg, const std::string& model_path,
               const std::string& input, int label, const std::string& out_dir) {
  hitadv::ClassifierModel model = hitadv::load_model(model_path);
  fs::create_directories(out_dir);

  std::vector<fs::path> inputs;
  if (fs::is_directory(input)) {
    for (const auto& entry : fs::directory_iterator(input))
      if (entry.path().extension() == ".xyz" || entry.path().extension() == ".off" ||
          entry.path().extension() == ".ply")
        inputs.push_back(entry.path());
    std::sort(inputs.begin(), inputs.end());
  } else {
    inputs.push_back(input);
  }

  int exit_code = 0;
  for (const auto& path : inputs) {
    hitadv::PointCloud cloud =
        hitadv::load_cloud(path.string(), hitadv::format_from_extension(path.string()));
    cloud.label = label >= 0 ? label : hitadv::predict(model, hitadv::normalize_cloud(cloud));

    hitadv::AttackResult result = hitadv::run_attack(model, cloud, cfg.attack, cfg.region);

    std::string stem = path.stem().string();
    fs::path ply_path = fs::path(out_dir) / (stem + "_adv.ply");
    fs::path json_path = fs::path(out_dir) / (stem + "_adv.json");

    hitadv::PointCloud annotated = result.adversarial;
    hitadv::SIScores si =
        hitadv::si_score(hitadv::normalize_cloud(cloud), model, cfg.region, cfg.attack.alpha);
    annotated.attrs["si_score"] = si.combined;
    std::vector<double> displacement(annotated.size());
    hitadv::PointCloud normalized = hitadv::normalize_cloud(cloud);
    for (std::size_t j = 0; j < annotated.size(); ++j)
      displacement[j] = hitadv::norm(annotated.points[j] - normalized.points[j]);
    annotated.attrs["displacement"] = displacement;
    hitadv::save_cloud(annotated, ply_path.string(), hitadv::CloudFormat::PLY);

    ordered_json j;
    j["input"] = path.string();
    j["label"] = *cloud.label;
    j["success"] = result.success;
    j["already_misclassified"] = result.already_misclassified;
    j["final_lambda"] = result.final_lambda;
    j["iterations"] = result.iterations;
    j["metrics"]["csd"] = result.metrics.csd;
    j["metrics"]["chamfer"] = result.metrics.chamfer;
    j["metrics"]["knn_dist"] = result.metrics.knn_dist;
    j["adversarial_ply"] = ply_path.string();
    j["trace"] = ordered_json::array();
    for (const auto& probe : result.trace) {
      ordered_json p;
      p["lambda"] = probe.lambda;
      p["success"] = probe.success;
      p["best_l_dis"] = probe.best_l_dis;
      p["final_l_cls"] = probe.final_l_cls;
      j["trace"].push_back(p);
    }
    write_text(json_path, j.dump(2) + "\n");
    std::cout << path.string() << ": " << (result.success ? "success" : "failed")
              << " (csd " << result.metrics.csd << ")\n";
    if (!result.success) exit_code = 0;  // failed attacks are a result, not an error
  }
  return exit_code;
}

int cmd_defend(const hitadv::ExperimentConfig& cfg, const std::string& input,
               const std::string& defense_name, const std::string& out_dir) {
  hitadv::DefenseSpec spec = hitadv::DefenseSpec::parse(defense_name);
  for (const auto& d : cfg.defenses)
    if (d.name() == defense_name) spec = d;
  fs::create_directories(out_dir);

  std::vector<fs::path> inputs;
  if (fs::is_directory(input)) {
    for (const auto& entry : fs::directory_iterator(input))
      if (entry.path().extension() == ".xyz" || entry.path().extension() == ".ply")
        inputs.push_back(entry.path());
    std::sort(inputs.begin(), inputs.end());
  } else {
    inputs.push_back(input);
  }

  for (const auto& path : inputs) {
    hitadv::PointCloud cloud =
        hitadv::load_cloud(path.string(), hitadv::format_from_extension(path.string()));
    hitadv::PointCloud defended = hitadv::apply_defense(cloud, spec, cfg.attack.seed);
    fs::path out = fs::path(out_dir) / (path.stem().string() + "_" + defense_name + ".xyz");
    hitadv::save_cloud(defended, out.string(), hitadv::CloudFormat::XYZ);
    std::cout << path.string() << " -> " << out.string() << " (" << defended.size()
              << " points)\n";
  }
  return 0;
}

int cmd_evaluate(const hitadv::ExperimentConfig& cfg, const std::string& model_path,
                 const std::string& model_at_path, const std::string& data_dir,
                 const std::string& out_dir) {
  hitadv::ClassifierModel model = hitadv::load_model(model_path);
  std::optional<hitadv::ClassifierModel> model_at;
  if (!model_at_path.empty()) model_at = hitadv::load_model(model_at_path);

  hitadv::Dataset test_set = data_dir.empty() ? dataset_from_config(cfg.dataset, true)
                                              : load_dataset_dir(data_dir, "test");
  fs::create_directories(out_dir);

  for (hitadv::AttackKind attack : cfg.attacks) {
    for (const hitadv::DefenseSpec& defense : cfg.defenses) {
      hitadv::EvaluateOptions opts;
      opts.attack = attack;
      opts.defense = defense;
      opts.attack_cfg = cfg.attack;
      opts.region_cfg = cfg.region;
      opts.hardening_cfg = cfg.hardening;
      opts.ifgm_budget = cfg.ifgm_budget;
      opts.ifgm_steps = cfg.ifgm_steps;
      opts.metric_k = cfg.metric_k;
      opts.max_examples = cfg.max_examples;
      opts.seed = cfg.attack.seed;

      hitadv::MetricReport report =
          hitadv::evaluate_suite(model, model_at ? &*model_at : nullptr, test_set, opts);
      std::string json = hitadv::report_to_json(report, opts);
      hitadv::validate_report_json(json);
      fs::path out = fs::path(out_dir) /
                     ("report_" + report.attack + "_" + report.defense + ".json");
      write_text(out, json);
      std::cout << report.attack << " vs " << report.defense << ": asr " << report.asr
                << ", csd " << report.csd_mean << " -> " << out.string() << "\n";
    }
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_csv) {
  std::vector<hitadv::MetricReport> reports;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    hitadv::validate_report_json(ss.str());
    reports.push_back(hitadv::report_from_json(ss.str()));
  }
  std::vector<hitadv::MetricReport> merged = hitadv::merge_reports(reports);

  std::ostringstream csv;
  csv << "attack,defense,attempted,asr,csd_mean,chamfer_mean,knn_dist_mean\n";
  for (const auto& r : merged) {
    csv << r.attack << ',' << r.defense << ',' << r.attempted << ',' << r.asr << ','
        << r.csd_mean << ',' << r.chamfer_mean << ',' << r.knn_dist_mean << '\n';
  }
  if (out_csv.empty()) {
    std::cout << csv.str();
  } else {
    write_text(out_csv, csv.str());
    std::cout << "wrote " << out_csv << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shape-based adversarial point cloud toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = default_output_dir();
  std::string model_path, model_at_path, data_dir, input_path, defense_name = "none";
  std::string out_path = "model.json", out_csv;
  int label = -1;
  std::vector<std::string> report_inputs;

  auto add_config = [&](CLI::App* cmd, bool required) {
    auto* opt = cmd->add_option("--config", config_path, "experiment config file");
    if (required) opt->required();
  };

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  add_config(gen, false);
  gen->add_option("--out", out_dir, "output directory");

  auto* train = app.add_subcommand("train", "train the victim classifier");
  add_config(train, false);
  train->add_option("--data", data_dir, "dataset directory (from gen-data)");
  train->add_option("--out", out_path, "checkpoint path");

  auto* attack = app.add_subcommand("attack", "attack one cloud or a directory");
  add_config(attack, false);
  attack->add_option("--model", model_path, "victim checkpoint")->required();
  attack->add_option("--input", input_path, "cloud file or directory")->required();
  attack->add_option("--label", label, "true label (default: model prediction)");
  attack->add_option("--out", out_dir, "output directory");

  auto* defend = app.add_subcommand("defend", "apply a preprocessing defense");
  add_config(defend, false);
  defend->add_option("--input", input_path, "cloud file or directory")->required();
  defend->add_option("--defense", defense_name, "none|srs|sor")->required();
  defend->add_option("--out", out_dir, "output directory");

  auto* evaluate = app.add_subcommand("evaluate", "run the attack-vs-defense protocol");
  add_config(evaluate, false);
  evaluate->add_option("--model", model_path, "victim checkpoint")->required();
  evaluate->add_option("--model-at", model_at_path, "adversarially trained checkpoint");
  evaluate->add_option("--data", data_dir, "dataset directory (from gen-data)");
  evaluate->add_option("--out", out_dir, "output directory");

  auto* report = app.add_subcommand("report", "merge reports into a comparison CSV");
  report->add_option("--inputs", report_inputs, "report JSON files")->required();
  report->add_option("--out", out_csv, "CSV path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    hitadv::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = hitadv::load_config(config_path);
    if (out_dir == "out") out_dir = cfg.output_dir.empty() ? out_dir : cfg.output_dir;

    if (gen->parsed()) return cmd_gen_data(cfg, out_dir);
    if (train->parsed()) return cmd_train(cfg, data_dir, out_path);
    if (attack->parsed()) return cmd_attack(cfg, model_path, input_path, label, out_dir);
    if (defend->parsed()) return cmd_defend(cfg, input_path, defense_name, out_dir);
    if (evaluate->parsed()) return cmd_evaluate(cfg, model_path, model_at_path, data_dir, out_dir);
    if (report->parsed()) return cmd_report(report_inputs, out_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
