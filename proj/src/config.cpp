#include "hitadv/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hitadv {

namespace {

struct KeyValue {
  std::string section, key, value;
  int line = 0;
};

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<KeyValue> tokenize(const std::string& text) {
  std::vector<KeyValue> items;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("config line " + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
    items.push_back({section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno});
  }
  return items;
}

class Assigner {
 public:
  explicit Assigner(ExperimentConfig& cfg) : cfg_(cfg) {}

  void apply(const KeyValue& kv) {
    const std::string full = kv.section.empty() ? kv.key : kv.section + "." + kv.key;
    try {
      if (!dispatch(kv.section, kv.key, kv.value)) {
        bad_keys_.push_back(full + " (line " + std::to_string(kv.line) + ")");
      }
    } catch (const std::exception& e) {
      bad_values_.push_back(full + ": " + e.what());
    }
  }

  void finish() const {
    std::string msg;
    if (!bad_keys_.empty()) {
      msg += "unknown config keys:";
      for (const auto& k : bad_keys_) msg += "\n  " + k;
    }
    if (!bad_values_.empty()) {
      if (!msg.empty()) msg += "\n";
      msg += "invalid config values:";
      for (const auto& k : bad_values_) msg += "\n  " + k;
    }
    if (!msg.empty()) throw std::runtime_error(msg);
  }

 private:
  static double num(const std::string& v) {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("not a number: '" + v + "'");
    return d;
  }
  static int integer(const std::string& v) { return static_cast<int>(num(v)); }
  static std::uint64_t seed(const std::string& v) { return static_cast<std::uint64_t>(num(v)); }
  static bool boolean(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("not a boolean: '" + v + "'");
  }
  static std::vector<std::string> list(const std::string& v) {
    std::vector<std::string> out;
    std::istringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  bool dispatch(const std::string& s, const std::string& k, const std::string& v) {
    auto& c = cfg_;
    if (s == "dataset") {
      if (k == "families") {
        c.dataset.families.clear();
        for (const auto& f : list(v)) c.dataset.families.push_back(parse_shape_family(f));
        return true;
      }
      if (k == "per_class") return c.dataset.per_class = integer(v), true;
      if (k == "test_per_class") return c.dataset.test_per_class = integer(v), true;
      if (k == "points") return c.dataset.points = integer(v), true;
      if (k == "jitter") return c.dataset.jitter = num(v), true;
      if (k == "seed") return c.dataset.seed = seed(v), true;
      return false;
    }
    if (s == "train") {
      if (k == "epochs") return c.train.epochs = integer(v), true;
      if (k == "lr") return c.train.lr = num(v), true;
      if (k == "batch_size") return c.train.batch_size = integer(v), true;
      if (k == "seed") return c.train.seed = seed(v), true;
      if (k == "adversarial") return c.train.adversarial = boolean(v), true;
      if (k == "at_budget") return c.train.at_budget = num(v), true;
      if (k == "at_steps") return c.train.at_steps = integer(v), true;
      return false;
    }
    if (s == "attack") {
      if (k == "kappa") return c.attack.kappa = num(v), true;
      if (k == "a") return c.attack.bandwidth_cap = num(v), true;
      if (k == "sigma_min") return c.attack.sigma_min = num(v), true;
      if (k == "alpha") return c.attack.alpha = num(v), true;
      if (k == "lambda1") return c.attack.lambda1 = num(v), true;
      if (k == "lambda2") return c.attack.lambda2 = num(v), true;
      if (k == "lambda3") return c.attack.lambda3 = num(v), true;
      if (k == "lambda_init") return c.attack.lambda_init = num(v), true;
      if (k == "lambda_max") return c.attack.lambda_max = num(v), true;
      if (k == "lambda_min") return c.attack.lambda_min = num(v), true;
      if (k == "binary_search_steps") return c.attack.binary_search_steps = integer(v), true;
      if (k == "inner_iters") return c.attack.inner_iters = integer(v), true;
      if (k == "lr") return c.attack.lr = num(v), true;
      if (k == "delta_init_scale") return c.attack.delta_init_scale = num(v), true;
      if (k == "target") {
        c.attack.target = integer(v);
        return true;
      }
      if (k == "seed") return c.attack.seed = seed(v), true;
      return false;
    }
    if (s == "region") {
      if (k == "n") return c.region.n = integer(v), true;
      if (k == "k") return c.region.k = integer(v), true;
      if (k == "n_tilde") return c.region.n_tilde = integer(v), true;
      if (k == "seed") return c.region.seed = seed(v), true;
      return false;
    }
    if (s == "hardening") {
      if (k == "maxot_steps") return c.hardening.maxot_steps = integer(v), true;
      if (k == "maxot_lr") return c.hardening.maxot_lr = num(v), true;
      if (k == "scale_lo") return c.hardening.scale_lo = num(v), true;
      if (k == "scale_hi") return c.hardening.scale_hi = num(v), true;
      if (k == "translation_bound") return c.hardening.translation_bound = num(v), true;
      if (k == "upsample_factor") return c.hardening.upsample_factor = integer(v), true;
      if (k == "rescan_noise") return c.hardening.rescan_noise = num(v), true;
      if (k == "seed") return c.hardening.seed = seed(v), true;
      return false;
    }
    if (s == "defense") {
      if (k == "kinds") {
        c.defenses.clear();
        for (const auto& name : list(v)) c.defenses.push_back(DefenseSpec::parse(name));
        return true;
      }
      if (k == "srs_drop_ratio" || k == "sor_k" || k == "sor_std_mult") {
        for (auto& d : c.defenses) {
          if (k == "srs_drop_ratio") d.srs_drop_ratio = num(v);
          if (k == "sor_k") d.sor_k = integer(v);
          if (k == "sor_std_mult") d.sor_std_mult = num(v);
        }
        return true;
      }
      return false;
    }
    if (s == "evaluate") {
      if (k == "attacks") {
        c.attacks.clear();
        for (const auto& name : list(v)) c.attacks.push_back(parse_attack_kind(name));
        return true;
      }
      if (k == "ifgm_budget") return c.ifgm_budget = num(v), true;
      if (k == "ifgm_steps") return c.ifgm_steps = integer(v), true;
      if (k == "metric_k") return c.metric_k = integer(v), true;
      if (k == "max_examples") return c.max_examples = integer(v), true;
      return false;
    }
    if (s == "output") {
      if (k == "dir") return c.output_dir = v, true;
      return false;
    }
    return false;
  }

  ExperimentConfig& cfg_;
  std::vector<std::string> bad_keys_, bad_values_;
};

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  cfg.dataset.families = {ShapeFamily::Sphere, ShapeFamily::Cube, ShapeFamily::Cylinder,
                          ShapeFamily::Cone, ShapeFamily::Torus, ShapeFamily::Pyramid,
                          ShapeFamily::Star, ShapeFamily::Composite};
  cfg.defenses = {DefenseSpec{}};
  cfg.attacks = {AttackKind::HitAdv};

  // defense params may precede the kinds list; apply kinds first
  auto items = tokenize(text);
  std::stable_sort(items.begin(), items.end(), [](const KeyValue& a, const KeyValue& b) {
    auto rank = [](const KeyValue& kv) { return kv.section == "defense" && kv.key != "kinds"; };
    return rank(a) < rank(b);
  });

  Assigner assigner(cfg);
  for (const auto& kv : items) assigner.apply(kv);
  assigner.finish();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace hitadv
