// Python bindings for the main operations: data simulation and IO, the
// nuisance-plus-proportions fit, target scoring, risk estimation and the
// replicated benchmark. Arrays cross the boundary as numpy; model files
// use the same JSON layout as the command-line tool, so the two sides can
// exchange models freely.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "subpop/adapt.hpp"
#include "subpop/dataset.hpp"
#include "subpop/errors.hpp"
#include "subpop/experiment.hpp"
#include "subpop/logistic.hpp"
#include "subpop/metrics.hpp"
#include "subpop/proportions.hpp"
#include "subpop/reweight.hpp"
#include "subpop/synthetic.hpp"

namespace py = pybind11;
using namespace subpop;

namespace {

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

Dataset dataset_from_arrays(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
    const py::array_t<std::int64_t,
                      py::array::c_style | py::array::forcecast>& r,
    const py::array_t<double, py::array::c_style | py::array::forcecast>& y,
    const py::array_t<std::int64_t,
                      py::array::c_style | py::array::forcecast>& a) {
  if (x.ndim() != 2) throw ValidationError("x must be a 2-d array");
  const auto n = x.shape(0);
  const auto q = x.shape(1);
  if (r.ndim() != 1 || y.ndim() != 1 || a.ndim() != 1 || r.shape(0) != n ||
      y.shape(0) != n || a.shape(0) != n) {
    throw ValidationError("r, y and a must be 1-d arrays of length len(x)");
  }
  auto xv = x.unchecked<2>();
  auto rv = r.unchecked<1>();
  auto yv = y.unchecked<1>();
  auto av = a.unchecked<1>();
  std::vector<Sample> rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (py::ssize_t i = 0; i < n; ++i) {
    Sample s;
    s.features.reserve(static_cast<std::size_t>(q));
    for (py::ssize_t j = 0; j < q; ++j) s.features.push_back(xv(i, j));
    s.r = static_cast<int>(rv(i));
    s.a = static_cast<int>(av(i));
    if (!std::isnan(yv(i))) s.y = static_cast<int>(yv(i));
    rows.push_back(std::move(s));
  }
  return Dataset(std::move(rows), static_cast<int>(q));
}

py::tuple dataset_to_arrays(const Dataset& ds) {
  const auto n = static_cast<py::ssize_t>(ds.size());
  const auto q = static_cast<py::ssize_t>(ds.q());
  py::array_t<double> x({n, q});
  py::array_t<std::int64_t> r(n);
  py::array_t<double> y(n);
  py::array_t<std::int64_t> a(n);
  auto xv = x.mutable_unchecked<2>();
  auto rv = r.mutable_unchecked<1>();
  auto yv = y.mutable_unchecked<1>();
  auto av = a.mutable_unchecked<1>();
  for (py::ssize_t i = 0; i < n; ++i) {
    const Sample& s = ds[static_cast<std::size_t>(i)];
    for (py::ssize_t j = 0; j < q; ++j) {
      xv(i, j) = s.features[static_cast<std::size_t>(j)];
    }
    rv(i) = s.r;
    av(i) = s.a;
    yv(i) = s.y.has_value() ? static_cast<double>(*s.y)
                            : std::numeric_limits<double>::quiet_NaN();
  }
  return py::make_tuple(x, r, y, a);
}

py::array_t<double> predict_proba_matrix(const ProbModel& m,
                                         const py::array_t<double>& x_in) {
  py::array_t<double, py::array::c_style | py::array::forcecast> x(x_in);
  if (x.ndim() != 2) throw ValidationError("x must be a 2-d array");
  const auto n = x.shape(0);
  const auto q = x.shape(1);
  py::array_t<double> out(n);
  auto xv = x.unchecked<2>();
  auto ov = out.mutable_unchecked<1>();
  std::vector<double> row(static_cast<std::size_t>(q));
  for (py::ssize_t i = 0; i < n; ++i) {
    for (py::ssize_t j = 0; j < q; ++j) {
      row[static_cast<std::size_t>(j)] = xv(i, j);
    }
    ov(i) = m.predict_proba(row);
  }
  return out;
}

// Mirrors the command-line `fit`: plug-in cell rates, the five nuisance
// fits, then the chosen split estimators for the target rates.
struct FittedModel {
  NuisanceBundle nb;
  SourceProportions sp;
  TargetProportions tp;
  std::string method;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["nuisance"] = nb.to_json();
    j["proportions"] = proportions_to_json(sp, tp, method, warnings);
    return j;
  }

  static FittedModel from_json(const nlohmann::json& j) {
    FittedModel m;
    m.nb = NuisanceBundle::from_json(j.at("nuisance"));
    const ProportionsFile pf = proportions_from_json(j.at("proportions"));
    m.sp = pf.source;
    m.tp = pf.target;
    m.method = pf.method;
    m.warnings = pf.warnings;
    return m;
  }
};

FittedModel fit_pipeline(const Dataset& ds, double lambda,
                         const std::string& beta_method, double beta10,
                         const std::string& beta01_method, double beta01,
                         double quantile, int moment_coordinate) {
  validate_or_throw(ds);
  const CellCounts counts = cell_counts(ds);
  const SourceProportions sp = estimate_source_proportions(counts);
  const RhoB1 rb = estimate_rho_b1(counts);

  FitOptions fopts;
  fopts.lambda = lambda;
  FittedModel out;
  out.nb = fit_nuisance(ds, fopts);
  out.sp = sp;
  out.tp.rho = rb.rho;
  out.tp.b1 = rb.b1;
  out.method = beta_method + "+" + beta01_method;

  if (beta_method == "kl") {
    const BetaEstimate est =
        estimate_beta_kl(out.nb.xi0, target_a0(ds), rb.b1, rb.rho);
    out.tp.beta10 = est.beta10;
    out.tp.beta00 = est.beta00;
    out.warnings.insert(out.warnings.end(), est.warnings.begin(),
                        est.warnings.end());
  } else if (beta_method == "moment") {
    MomentSpec ms;
    ms.coordinate = moment_coordinate;
    const BetaEstimate est = estimate_beta_moment(ds, rb.rho, ms);
    out.tp.beta10 = est.beta10;
    out.tp.beta00 = est.beta00;
    out.warnings.insert(out.warnings.end(), est.warnings.begin(),
                        est.warnings.end());
  } else if (beta_method == "user") {
    if (beta10 < 0.0 || beta10 > rb.rho) {
      throw ConfigError("beta10 must lie in [0, rho]");
    }
    auto [b10, b00] = split_exact(rb.rho, beta10);
    out.tp.beta10 = b10;
    out.tp.beta00 = b00;
  } else {
    throw ConfigError("beta_method must be kl, moment or user");
  }

  if (beta01_method == "anchor") {
    const Dataset tgt_a1 = target_a1(ds);
    std::vector<double> kvals;
    kvals.reserve(tgt_a1.size());
    for (const Sample& s : tgt_a1) {
      kvals.push_back(out.nb.kappa.predict_proba(s.features));
    }
    const Beta01Estimate est = estimate_beta01_anchor_values(
        kvals, sp.alpha01, sp.pi, out.tp.rho, quantile,
        out.nb.kappa.clamp_eps);
    out.tp.beta01 = est.beta01;
    out.tp.beta11 = est.beta11;
    out.warnings.insert(out.warnings.end(), est.warnings.begin(),
                        est.warnings.end());
  } else if (beta01_method == "user") {
    if (beta01 < 0.0 || beta01 > 1.0 - out.tp.rho) {
      throw ConfigError("beta01 must lie in [0, 1 - rho]");
    }
    auto [b01, b11] = split_exact(1.0 - out.tp.rho, beta01);
    out.tp.beta01 = b01;
    out.tp.beta11 = b11;
  } else {
    throw ConfigError("beta01_method must be anchor or user");
  }
  return out;
}

py::dict predictions_to_dict(const std::vector<PredictionRow>& rows) {
  const auto n = static_cast<py::ssize_t>(rows.size());
  py::array_t<std::int64_t> idx(n);
  py::array_t<double> eta1(n), eta0(n), tau0(n), eta(n), xi(n), xi0(n),
      xi1(n);
  py::array_t<std::int64_t> label_eta(n), label_xi(n);
  auto iv = idx.mutable_unchecked<1>();
  auto e1 = eta1.mutable_unchecked<1>();
  auto e0 = eta0.mutable_unchecked<1>();
  auto t0 = tau0.mutable_unchecked<1>();
  auto ev = eta.mutable_unchecked<1>();
  auto xv = xi.mutable_unchecked<1>();
  auto x0 = xi0.mutable_unchecked<1>();
  auto x1 = xi1.mutable_unchecked<1>();
  auto le = label_eta.mutable_unchecked<1>();
  auto lx = label_xi.mutable_unchecked<1>();
  for (py::ssize_t i = 0; i < n; ++i) {
    const PredictionRow& r = rows[static_cast<std::size_t>(i)];
    iv(i) = static_cast<std::int64_t>(r.row_index);
    e1(i) = r.eval.eta1;
    e0(i) = r.eval.eta0;
    t0(i) = r.eval.tau0;
    ev(i) = r.eval.eta;
    xv(i) = r.eval.xi;
    x0(i) = r.eval.xi0;
    x1(i) = r.eval.xi1;
    le(i) = r.eval.label_eta;
    lx(i) = r.eval.label_xi;
  }
  py::dict out;
  out["row_index"] = idx;
  out["eta1"] = eta1;
  out["eta0"] = eta0;
  out["tau0"] = tau0;
  out["eta"] = eta;
  out["xi"] = xi;
  out["xi0"] = xi0;
  out["xi1"] = xi1;
  out["label_eta"] = label_eta;
  out["label_xi"] = label_xi;
  return out;
}

py::dict truth_to_dict(const TruthTable& truth) {
  py::dict out;
  for (const auto& [idx, y] : truth) out[py::int_(idx)] = y;
  return out;
}

}  // namespace

PYBIND11_MODULE(_subpop, m) {
  m.doc() = "domain adaptation with a structurally missing outcome cell";

  py::register_exception<Error>(m, "Error");

  py::class_<Dataset>(m, "Dataset")
      .def_static("from_arrays", &dataset_from_arrays, py::arg("x"),
                  py::arg("r"), py::arg("y"), py::arg("a"),
                  "Build a dataset from numpy arrays; NaN in y marks an "
                  "unlabeled row.")
      .def("to_arrays", &dataset_to_arrays,
           "Return (x, r, y, a); y is float with NaN for unlabeled rows.")
      .def_static(
          "load_csv",
          [](const std::string& path, bool allow_forbidden_cell) {
            LoadOptions opts;
            opts.allow_forbidden_cell = allow_forbidden_cell;
            return load_csv(path, opts);
          },
          py::arg("path"), py::arg("allow_forbidden_cell") = false)
      .def("save_csv",
           [](const Dataset& ds, const std::string& path) {
             write_csv(ds, path);
           },
           py::arg("path"))
      .def("validate",
           [](const Dataset& ds, bool allow_forbidden_cell) {
             return validate(ds, allow_forbidden_cell).warnings;
           },
           py::arg("allow_forbidden_cell") = false,
           "Throws on structural problems; returns any warnings.")
      .def("counts",
           [](const Dataset& ds) {
             const CellCounts c = cell_counts(ds);
             py::dict d;
             d["n110"] = c.n110;
             d["n101"] = c.n101;
             d["n100"] = c.n100;
             d["n111"] = c.n111;
             d["n1"] = c.n1;
             d["n0a1"] = c.n0a1;
             d["n0a0"] = c.n0a0;
             d["n0"] = c.n0;
             d["n"] = c.n;
             return d;
           })
      .def_property_readonly("q", &Dataset::q)
      .def("__len__", &Dataset::size);

  m.def(
      "simulate",
      [](long n1, long n0, std::uint64_t seed,
         const std::optional<std::vector<std::vector<double>>>& means) {
        SyntheticSpec spec;
        spec.n1 = n1;
        spec.n0 = n0;
        spec.seed = seed;
        if (means.has_value()) {
          if (means->size() != 4) {
            throw ConfigError("means must hold four cell vectors");
          }
          spec.mu00 = (*means)[0];
          spec.mu01 = (*means)[1];
          spec.mu10 = (*means)[2];
          spec.mu11 = (*means)[3];
        }
        GeneratedData gd = generate(spec);
        return py::make_tuple(std::move(gd.data), truth_to_dict(gd.truth));
      },
      py::arg("n1") = 4000, py::arg("n0") = 4000, py::arg("seed") = 0,
      py::arg("means") = py::none(),
      "Draw the four-Gaussian benchmark; returns (dataset, truth) with "
      "truth keyed by target row index. Cell order for means: y0a0, y0a1, "
      "y1a0, y1a1.");

  m.def(
      "partition",
      [](const Dataset& pool, double rate_a, double rate_b, double rate_c,
         std::uint64_t seed) {
        PartitionSpec ps;
        ps.rate_a = rate_a;
        ps.rate_b = rate_b;
        ps.rate_c = rate_c;
        ps.seed = seed;
        GeneratedData gd = partition_pool(pool, ps);
        return py::make_tuple(std::move(gd.data), truth_to_dict(gd.truth));
      },
      py::arg("pool"), py::arg("rate_a") = 0.5, py::arg("rate_b") = 0.5,
      py::arg("rate_c") = 0.5, py::arg("seed") = 0,
      "Split a fully labeled pool into source and unlabeled target; rows "
      "with y=1, a=1 always land in the target.");

  py::class_<ProbModel>(m, "ProbModel")
      .def("predict_proba", &predict_proba_matrix, py::arg("x"))
      .def_property_readonly("raw_weights",
                             [](const ProbModel& m2) {
                               return Eigen::VectorXd(m2.raw_weights());
                             })
      .def_property_readonly("raw_intercept", &ProbModel::raw_intercept)
      .def("to_json", [](const ProbModel& m2) { return m2.to_json().dump(); })
      .def_static("from_json", [](const std::string& text) {
        return ProbModel::from_json(nlohmann::json::parse(text));
      });

  m.def(
      "fit_logistic",
      [](const Eigen::MatrixXd& x, const std::vector<int>& y, double lam,
         const std::optional<std::vector<double>>& weights) {
        FitOptions opts;
        opts.lambda = lam;
        return fit_logistic(x, y, opts,
                            weights.has_value() ? &*weights : nullptr);
      },
      py::arg("x"), py::arg("y"), py::arg("lam") = 1e-2,
      py::arg("weights") = py::none(),
      "Ridge-penalized logistic fit on standardized features.");

  py::class_<FittedModel>(m, "Model")
      .def("predict",
           [](const FittedModel& fm, const Dataset& ds, double threshold) {
             const TargetPredictor pred =
                 make_predictor(fm.nb, fm.sp, fm.tp, threshold);
             return predictions_to_dict(predict_target_rows(pred, ds));
           },
           py::arg("data"), py::arg("threshold") = 0.5,
           "Score every target row; returns a dict of aligned arrays.")
      .def_property_readonly(
          "proportions",
          [](const FittedModel& fm) {
            return json_to_py(
                proportions_to_json(fm.sp, fm.tp, fm.method, fm.warnings));
          })
      .def_property_readonly(
          "warnings", [](const FittedModel& fm) { return fm.warnings; })
      .def("save",
           [](const FittedModel& fm, const std::string& path) {
             std::ofstream out(path);
             if (!out) throw ParseError("cannot open '" + path + "'");
             out << fm.to_json().dump(2) << '\n';
             if (!out) throw ParseError("write failed for '" + path + "'");
           },
           py::arg("path"),
           "Write the model JSON; the file is interchangeable with the "
           "command-line tool's.")
      .def_static("load", [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open '" + path + "'");
        nlohmann::json j;
        try {
          in >> j;
        } catch (const nlohmann::json::exception& e) {
          throw ParseError("'" + path + "': " + e.what());
        }
        return FittedModel::from_json(j);
      });

  m.def("fit", &fit_pipeline, py::arg("data"), py::arg("lam") = 1e-2,
        py::arg("beta_method") = "kl", py::arg("beta10") = -1.0,
        py::arg("beta01_method") = "anchor", py::arg("beta01") = -1.0,
        py::arg("quantile") = 0.01, py::arg("moment_coordinate") = -1,
        "Fit the five nuisance models and estimate the target cell rates.");

  m.def(
      "risk_report",
      [](const FittedModel& fm, const Dataset& ds, const std::string& loss,
         const std::string& h, double threshold) {
        const LossSpec spec = LossSpec::from_name(loss, threshold);
        ProbFn fn;
        if (h == "eta") {
          const TargetPredictor pred =
              make_predictor(fm.nb, fm.sp, fm.tp, threshold);
          fn = [pred](std::span<const double> x) { return pred.eta(x); };
        } else if (h == "xi") {
          fn = fm.nb.xi.fn();
        } else {
          throw ConfigError("h must be eta or xi");
        }
        return json_to_py(risk_report(fn, spec, ds, fm.sp, fm.tp).to_json());
      },
      py::arg("model"), py::arg("data"), py::arg("loss") = "zero_one",
      py::arg("h") = "eta", py::arg("threshold") = 0.5,
      "Target-domain risk estimates for the adapted or source-only "
      "posterior.");

  m.def(
      "accuracy",
      [](const std::vector<int>& pred, const std::vector<int>& truth) {
        return metric_accuracy(pred, truth);
      },
      py::arg("pred"), py::arg("truth"));
  m.def(
      "f1",
      [](const std::vector<int>& pred, const std::vector<int>& truth) {
        return metric_f1(pred, truth);
      },
      py::arg("pred"), py::arg("truth"));

  m.def(
      "experiment",
      [](const py::dict& config) {
        ExperimentConfig cfg;
        for (const auto& item : config) {
          apply_config_kv(cfg, py::str(item.first),
                          py::str(item.second));
        }
        check_config(cfg);
        const ExperimentResult res = run_experiment(cfg);
        py::list rows;
        for (const MetricsRow& r : res.rows) {
          py::dict d;
          d["rep"] = r.rep;
          d["tag"] = r.tag;
          d["n_eval"] = r.n_eval;
          d["accuracy"] = r.accuracy;
          d["f1"] = r.f1;
          d["clamp_rate"] = r.clamp_rate;
          d["beta10_hat"] = r.beta10_hat;
          d["beta00_hat"] = r.beta00_hat;
          d["beta01_hat"] = r.beta01_hat;
          d["beta11_hat"] = r.beta11_hat;
          d["failed"] = r.failed;
          rows.append(d);
        }
        return py::make_tuple(rows, json_to_py(summarize(res)));
      },
      py::arg("config"),
      "Run the replicated benchmark from a config mapping (values as in "
      "the config file); returns (rows, summary).");
}
