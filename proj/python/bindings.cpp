// Python bindings for the core operations: dataset generation, the victim
// classifier, the deformation attack and baseline, defenses and metrics.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "hitadv/attack.hpp"
#include "hitadv/classifier.hpp"
#include "hitadv/defense.hpp"
#include "hitadv/geometry.hpp"
#include "hitadv/hardening.hpp"
#include "hitadv/io.hpp"
#include "hitadv/metrics.hpp"
#include "hitadv/shapes.hpp"

namespace py = pybind11;
using namespace hitadv;

namespace {

PointCloud cloud_from_numpy(py::array_t<double, py::array::c_style | py::array::forcecast> pts,
                            std::optional<int> label = std::nullopt) {
  auto buf = pts.request();
  if (buf.ndim != 2 || buf.shape[1] != 3)
    throw std::invalid_argument("points must be an (m, 3) array");
  PointCloud cloud;
  cloud.label = label;
  const double* p = static_cast<const double*>(buf.ptr);
  cloud.points.reserve(buf.shape[0]);
  for (ssize_t j = 0; j < buf.shape[0]; ++j)
    cloud.points.push_back({p[3 * j], p[3 * j + 1], p[3 * j + 2]});
  return cloud;
}

py::array_t<double> cloud_to_numpy(const PointCloud& cloud) {
  py::array_t<double> out({static_cast<ssize_t>(cloud.size()), static_cast<ssize_t>(3)});
  double* p = static_cast<double*>(out.request().ptr);
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    p[3 * j] = cloud.points[j].x;
    p[3 * j + 1] = cloud.points[j].y;
    p[3 * j + 2] = cloud.points[j].z;
  }
  return out;
}

py::array_t<double> grads_to_numpy(const std::vector<Vec3>& grads) {
  py::array_t<double> out({static_cast<ssize_t>(grads.size()), static_cast<ssize_t>(3)});
  double* p = static_cast<double*>(out.request().ptr);
  for (std::size_t j = 0; j < grads.size(); ++j) {
    p[3 * j] = grads[j].x;
    p[3 * j + 1] = grads[j].y;
    p[3 * j + 2] = grads[j].z;
  }
  return out;
}

std::vector<ShapeFamily> parse_families(const std::vector<std::string>& names) {
  std::vector<ShapeFamily> out;
  for (const auto& n : names) out.push_back(parse_shape_family(n));
  return out;
}

py::dict result_to_dict(const AttackResult& r) {
  py::dict d;
  d["adversarial"] = cloud_to_numpy(r.adversarial);
  d["success"] = r.success;
  d["already_misclassified"] = r.already_misclassified;
  d["final_lambda"] = r.final_lambda;
  d["iterations"] = r.iterations;
  py::dict metrics;
  metrics["csd"] = r.metrics.csd;
  metrics["chamfer"] = r.metrics.chamfer;
  metrics["knn_dist"] = r.metrics.knn_dist;
  d["metrics"] = metrics;
  py::list deltas, sigmas, centers;
  for (const auto& v : r.field.deltas) deltas.append(py::make_tuple(v.x, v.y, v.z));
  for (double s : r.field.sigmas) sigmas.append(s);
  for (const auto& v : r.field.centers) centers.append(py::make_tuple(v.x, v.y, v.z));
  d["deltas"] = deltas;
  d["sigmas"] = sigmas;
  d["centers"] = centers;
  return d;
}

}  // namespace

PYBIND11_MODULE(_hitadv, m) {
  m.doc() = "shape-based adversarial point cloud toolkit";

  py::class_<AttackConfig>(m, "AttackConfig")
      .def(py::init<>())
      .def_readwrite("kappa", &AttackConfig::kappa)
      .def_readwrite("bandwidth_cap", &AttackConfig::bandwidth_cap)
      .def_readwrite("sigma_min", &AttackConfig::sigma_min)
      .def_readwrite("alpha", &AttackConfig::alpha)
      .def_readwrite("lambda1", &AttackConfig::lambda1)
      .def_readwrite("lambda2", &AttackConfig::lambda2)
      .def_readwrite("lambda3", &AttackConfig::lambda3)
      .def_readwrite("lambda_init", &AttackConfig::lambda_init)
      .def_readwrite("lambda_max", &AttackConfig::lambda_max)
      .def_readwrite("lambda_min", &AttackConfig::lambda_min)
      .def_readwrite("binary_search_steps", &AttackConfig::binary_search_steps)
      .def_readwrite("inner_iters", &AttackConfig::inner_iters)
      .def_readwrite("lr", &AttackConfig::lr)
      .def_readwrite("target", &AttackConfig::target)
      .def_readwrite("seed", &AttackConfig::seed);

  py::class_<RegionSearchConfig>(m, "RegionSearchConfig")
      .def(py::init<>())
      .def_readwrite("n", &RegionSearchConfig::n)
      .def_readwrite("k", &RegionSearchConfig::k)
      .def_readwrite("n_tilde", &RegionSearchConfig::n_tilde)
      .def_readwrite("seed", &RegionSearchConfig::seed);

  py::class_<HardeningConfig>(m, "HardeningConfig")
      .def(py::init<>())
      .def_readwrite("maxot_steps", &HardeningConfig::maxot_steps)
      .def_readwrite("maxot_lr", &HardeningConfig::maxot_lr)
      .def_readwrite("scale_lo", &HardeningConfig::scale_lo)
      .def_readwrite("scale_hi", &HardeningConfig::scale_hi)
      .def_readwrite("translation_bound", &HardeningConfig::translation_bound)
      .def_readwrite("upsample_factor", &HardeningConfig::upsample_factor)
      .def_readwrite("rescan_noise", &HardeningConfig::rescan_noise)
      .def_readwrite("seed", &HardeningConfig::seed);

  py::class_<ClassifierModel>(m, "ClassifierModel")
      .def_property_readonly("num_classes",
                             [](const ClassifierModel& mdl) { return mdl.num_classes; })
      .def("parameter_count", &ClassifierModel::parameter_count);

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("size", [](const Dataset& ds) { return ds.clouds.size(); })
      .def_property_readonly("class_names", [](const Dataset& ds) { return ds.class_names; })
      .def("cloud",
           [](const Dataset& ds, std::size_t i) { return cloud_to_numpy(ds.clouds.at(i)); })
      .def("label", [](const Dataset& ds, std::size_t i) { return *ds.clouds.at(i).label; });

  m.def(
      "gen_dataset",
      [](const std::vector<std::string>& families, int per_class, int points, double jitter,
         std::uint64_t seed) {
        return gen_dataset(parse_families(families), per_class, points, jitter, seed);
      },
      py::arg("families"), py::arg("per_class"), py::arg("points") = 1024,
      py::arg("jitter") = 0.005, py::arg("seed") = 0);

  m.def(
      "train",
      [](const Dataset& ds, int epochs, double lr, std::uint64_t seed, int batch_size) {
        TrainOptions opts;
        opts.epochs = epochs;
        opts.lr = lr;
        opts.seed = seed;
        opts.batch_size = batch_size;
        return train(ds, opts);
      },
      py::arg("dataset"), py::arg("epochs") = 30, py::arg("lr") = 0.01, py::arg("seed") = 0,
      py::arg("batch_size") = 16);

  m.def(
      "adversarial_train",
      [](const Dataset& ds, double budget, int steps, int epochs, std::uint64_t seed) {
        return adversarial_train(ds, budget, steps, epochs, seed);
      },
      py::arg("dataset"), py::arg("budget") = 1.0, py::arg("steps") = 5, py::arg("epochs") = 30,
      py::arg("seed") = 0);

  m.def("accuracy", &accuracy, py::arg("model"), py::arg("dataset"));
  m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
  m.def("load_model", &load_model, py::arg("path"));

  m.def(
      "forward",
      [](const ClassifierModel& model, py::array_t<double> pts) {
        return forward(model, cloud_from_numpy(pts));
      },
      py::arg("model"), py::arg("points"));

  m.def(
      "predict",
      [](const ClassifierModel& model, py::array_t<double> pts) {
        return predict(model, cloud_from_numpy(pts));
      },
      py::arg("model"), py::arg("points"));

  m.def(
      "normalize",
      [](py::array_t<double> pts) {
        return cloud_to_numpy(normalize_cloud(cloud_from_numpy(pts)));
      },
      py::arg("points"));

  m.def(
      "input_gradient",
      [](const ClassifierModel& model, py::array_t<double> pts, int label,
         const std::string& loss, double kappa, std::optional<int> target) {
        PointCloud cloud = cloud_from_numpy(pts, label);
        LossSpec spec;
        if (loss == "cross_entropy") {
          spec.kind = LossSpec::Kind::CrossEntropy;
        } else if (loss == "cw_margin") {
          spec.kind = LossSpec::Kind::CwMargin;
          spec.kappa = kappa;
          spec.target = target;
        } else {
          throw std::invalid_argument("loss must be cross_entropy or cw_margin");
        }
        GradientReport rep = input_gradient(model, cloud, spec);
        return py::make_tuple(rep.loss, grads_to_numpy(rep.point_gradients), rep.logits);
      },
      py::arg("model"), py::arg("points"), py::arg("label"), py::arg("loss") = "cross_entropy",
      py::arg("kappa") = 0.0, py::arg("target") = std::nullopt);

  m.def(
      "saliency_scores",
      [](const ClassifierModel& model, py::array_t<double> pts, int label) {
        return saliency_scores(model, cloud_from_numpy(pts, label));
      },
      py::arg("model"), py::arg("points"), py::arg("label"));

  m.def(
      "si_score",
      [](const ClassifierModel& model, py::array_t<double> pts, int label,
         const RegionSearchConfig& rcfg, double alpha) {
        SIScores si = si_score(cloud_from_numpy(pts, label), model, rcfg, alpha);
        return py::make_tuple(si.s1, si.s2, si.combined);
      },
      py::arg("model"), py::arg("points"), py::arg("label"), py::arg("region_cfg"),
      py::arg("alpha") = 1.0);

  m.def(
      "run_attack",
      [](const ClassifierModel& model, py::array_t<double> pts, int label,
         const AttackConfig& cfg, const RegionSearchConfig& rcfg) {
        return result_to_dict(run_attack(model, cloud_from_numpy(pts, label), cfg, rcfg));
      },
      py::arg("model"), py::arg("points"), py::arg("label"), py::arg("config"),
      py::arg("region_cfg"));

  m.def(
      "hardened_attack",
      [](const ClassifierModel& model, py::array_t<double> pts, int label,
         const AttackConfig& cfg, const RegionSearchConfig& rcfg, const HardeningConfig& hcfg) {
        return result_to_dict(
            hardened_attack(model, cloud_from_numpy(pts, label), cfg, rcfg, hcfg));
      },
      py::arg("model"), py::arg("points"), py::arg("label"), py::arg("config"),
      py::arg("region_cfg"), py::arg("hardening_cfg"));

  m.def(
      "ifgm_baseline",
      [](const ClassifierModel& model, py::array_t<double> pts, int label, double budget,
         int steps) {
        return result_to_dict(ifgm_baseline(model, cloud_from_numpy(pts, label), budget, steps));
      },
      py::arg("model"), py::arg("points"), py::arg("label"), py::arg("budget") = 1.0,
      py::arg("steps") = 50);

  m.def(
      "srs",
      [](py::array_t<double> pts, double drop_ratio, std::uint64_t seed) {
        return cloud_to_numpy(srs(cloud_from_numpy(pts), drop_ratio, seed));
      },
      py::arg("points"), py::arg("drop_ratio") = 0.5, py::arg("seed") = 0);

  m.def(
      "sor",
      [](py::array_t<double> pts, int k, double std_mult) {
        return cloud_to_numpy(sor(cloud_from_numpy(pts), k, std_mult));
      },
      py::arg("points"), py::arg("k") = 2, py::arg("std_mult") = 1.1);

  m.def(
      "simulate_rescan",
      [](py::array_t<double> pts, const HardeningConfig& cfg, std::uint64_t seed) {
        return cloud_to_numpy(simulate_rescan(cloud_from_numpy(pts), cfg, seed));
      },
      py::arg("points"), py::arg("hardening_cfg"), py::arg("seed") = 0);

  m.def(
      "chamfer",
      [](py::array_t<double> a, py::array_t<double> b) {
        return chamfer_metric(cloud_from_numpy(a), cloud_from_numpy(b));
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "csd",
      [](py::array_t<double> clean, py::array_t<double> adv, int k) {
        return csd_metric(cloud_from_numpy(clean), cloud_from_numpy(adv), k);
      },
      py::arg("clean"), py::arg("adv"), py::arg("k") = 10);

  m.def(
      "knn_dist",
      [](py::array_t<double> pts, int k) { return knn_dist_metric(cloud_from_numpy(pts), k); },
      py::arg("points"), py::arg("k") = 10);

  m.def(
      "curvature_std_profile",
      [](py::array_t<double> pts, int k) {
        return curvature_std_profile(cloud_from_numpy(pts), k);
      },
      py::arg("points"), py::arg("k") = 10);

  m.def(
      "save_cloud",
      [](py::array_t<double> pts, const std::string& path) {
        save_cloud(cloud_from_numpy(pts), path, format_from_extension(path));
      },
      py::arg("points"), py::arg("path"));

  m.def(
      "load_cloud",
      [](const std::string& path) {
        return cloud_to_numpy(load_cloud(path, format_from_extension(path)));
      },
      py::arg("path"));

  m.attr("__version__") = "0.1.0";
  m.attr("SHAPE_FAMILIES") = kShapeFamilyNames;
}
