// Command-line front end: simulate / split / fit / predict / evaluate /
// experiment / risk. Exit codes: 0 success, 1 usage or configuration,
// 2 data, 3 estimation.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "subpop/adapt.hpp"
#include "subpop/dataset.hpp"
#include "subpop/errors.hpp"
#include "subpop/experiment.hpp"
#include "subpop/metrics.hpp"
#include "subpop/proportions.hpp"
#include "subpop/reweight.hpp"
#include "subpop/synthetic.hpp"

namespace {

using nlohmann::json;

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw subpop::ParseError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw subpop::ParseError("write failed for '" + path + "'");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw subpop::ParseError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw subpop::ParseError("'" + path + "': " + e.what());
  }
  return j;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
}

// ---- fit -------------------------------------------------------------

struct FitArgs {
  std::string data_path;
  std::string out_path = "model.json";
  double lambda = 1e-2;
  std::string beta_method = "kl";
  double beta10 = -1.0;
  std::string beta01_method = "anchor";
  double beta01 = -1.0;
  double quantile = 0.01;
  int moment_coordinate = -1;
};

void run_fit(const FitArgs& args) {
  const subpop::Dataset ds = subpop::load_csv(args.data_path);
  const subpop::ValidationReport vrep = subpop::validate(ds);
  print_warnings(vrep.warnings);

  const subpop::CellCounts counts = subpop::cell_counts(ds);
  const subpop::SourceProportions sp =
      subpop::estimate_source_proportions(counts);
  const subpop::RhoB1 rb = subpop::estimate_rho_b1(counts);

  subpop::FitOptions fopts;
  fopts.lambda = args.lambda;
  const subpop::NuisanceBundle nb = subpop::fit_nuisance(ds, fopts);

  std::vector<std::string> warnings;
  subpop::TargetProportions tp;
  tp.rho = rb.rho;
  tp.b1 = rb.b1;
  if (args.beta_method == "kl") {
    const subpop::BetaEstimate est = subpop::estimate_beta_kl(
        nb.xi0, subpop::target_a0(ds), rb.b1, rb.rho);
    tp.beta10 = est.beta10;
    tp.beta00 = est.beta00;
    warnings.insert(warnings.end(), est.warnings.begin(), est.warnings.end());
  } else if (args.beta_method == "moment") {
    subpop::MomentSpec ms;
    ms.coordinate = args.moment_coordinate;
    const subpop::BetaEstimate est =
        subpop::estimate_beta_moment(ds, rb.rho, ms);
    tp.beta10 = est.beta10;
    tp.beta00 = est.beta00;
    warnings.insert(warnings.end(), est.warnings.begin(), est.warnings.end());
  } else if (args.beta_method == "user") {
    if (args.beta10 < 0.0 || args.beta10 > rb.rho) {
      throw subpop::ConfigError("--beta10 must lie in [0, rho]");
    }
    auto [b10, b00] = subpop::split_exact(rb.rho, args.beta10);
    tp.beta10 = b10;
    tp.beta00 = b00;
  } else {
    throw subpop::ConfigError("--beta-method must be kl, moment or user");
  }

  if (args.beta01_method == "anchor") {
    const subpop::Dataset tgt_a1 = subpop::target_a1(ds);
    std::vector<double> kvals;
    kvals.reserve(tgt_a1.size());
    for (const subpop::Sample& s : tgt_a1) {
      kvals.push_back(nb.kappa.predict_proba(s.features));
    }
    const subpop::Beta01Estimate est = subpop::estimate_beta01_anchor_values(
        kvals, sp.alpha01, sp.pi, tp.rho, args.quantile, nb.kappa.clamp_eps);
    tp.beta01 = est.beta01;
    tp.beta11 = est.beta11;
    warnings.insert(warnings.end(), est.warnings.begin(), est.warnings.end());
  } else if (args.beta01_method == "user") {
    if (args.beta01 < 0.0 || args.beta01 > 1.0 - tp.rho) {
      throw subpop::ConfigError("--beta01 must lie in [0, 1 - rho]");
    }
    auto [b01, b11] = subpop::split_exact(1.0 - tp.rho, args.beta01);
    tp.beta01 = b01;
    tp.beta11 = b11;
  } else {
    throw subpop::ConfigError("--beta01-method must be anchor or user");
  }

  print_warnings(warnings);
  json out;
  out["nuisance"] = nb.to_json();
  out["proportions"] = subpop::proportions_to_json(
      sp, tp, args.beta_method + "+" + args.beta01_method, warnings);
  write_json_file(out, args.out_path);
  std::cout << "wrote " << args.out_path << '\n';
}

// ---- predict ----------------------------------------------------------

void run_predict(const std::string& model_path, const std::string& data_path,
                 const std::string& out_path, double threshold) {
  const json mj = read_json_file(model_path);
  const subpop::NuisanceBundle nb =
      subpop::NuisanceBundle::from_json(mj.at("nuisance"));
  const subpop::ProportionsFile pf =
      subpop::proportions_from_json(mj.at("proportions"));
  subpop::check_proportions(pf.source, pf.target);

  const subpop::Dataset ds = subpop::load_csv(data_path);
  const subpop::TargetPredictor pred =
      subpop::make_predictor(nb, pf.source, pf.target, threshold);
  const std::vector<subpop::PredictionRow> rows =
      subpop::predict_target_rows(pred, ds);
  if (rows.empty()) {
    throw subpop::ValidationError("'" + data_path + "' has no target rows");
  }
  subpop::write_predictions_csv(rows, out_path);
  std::cout << "wrote " << out_path << " (" << rows.size() << " rows)\n";
}

// ---- evaluate ---------------------------------------------------------

struct PredFileRow {
  double eta1 = 0, eta0 = 0, eta = 0, xi = 0, xi0 = 0, xi1 = 0;
  int label_eta = 0, label_xi = 0;
};

std::map<std::size_t, PredFileRow> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw subpop::ParseError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) {
    throw subpop::ParseError("'" + path + "': empty prediction file");
  }
  const std::string expected =
      "row_index,eta1,eta0,tau0,eta,xi,xi0,xi1,label_eta,label_xi";
  if (line.rfind(expected, 0) != 0) {
    throw subpop::ParseError("'" + path + "': unexpected prediction header");
  }
  std::map<std::size_t, PredFileRow> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 10) {
      throw subpop::ParseError("line " + std::to_string(line_no) +
                               ": expected 10 columns");
    }
    try {
      const std::size_t idx = std::stoull(fields[0]);
      PredFileRow r;
      r.eta1 = std::stod(fields[1]);
      r.eta0 = std::stod(fields[2]);
      r.eta = std::stod(fields[4]);
      r.xi = std::stod(fields[5]);
      r.xi0 = std::stod(fields[6]);
      r.xi1 = std::stod(fields[7]);
      r.label_eta = std::stoi(fields[8]);
      r.label_xi = std::stoi(fields[9]);
      rows[idx] = r;
    } catch (const std::exception&) {
      throw subpop::ParseError("line " + std::to_string(line_no) +
                               ": bad prediction row");
    }
  }
  if (rows.empty()) {
    throw subpop::ParseError("'" + path + "': no prediction rows");
  }
  return rows;
}

struct EvalArgs {
  std::string pred_path;
  std::string truth_path;
  std::string data_path;  // optional; enables the per-group tags
  std::string out_path = "eval.json";
  double threshold = 0.5;
  bool threshold_given = false;
};

void run_evaluate(const EvalArgs& args) {
  const auto preds = read_predictions(args.pred_path);
  const subpop::TruthTable truth = subpop::load_truth_csv(args.truth_path);

  std::optional<subpop::Dataset> data;
  if (!args.data_path.empty()) data = subpop::load_csv(args.data_path);

  struct Acc {
    std::vector<int> pred, truth;
  };
  std::map<std::string, Acc> tags;

  for (const auto& [idx, y] : truth) {
    const auto it = preds.find(idx);
    if (it == preds.end()) {
      throw subpop::ValidationError("truth row " + std::to_string(idx) +
                                    " missing from predictions");
    }
    const PredFileRow& r = it->second;
    const int label_eta = args.threshold_given
                              ? subpop::classify_label(r.eta, args.threshold)
                              : r.label_eta;
    const int label_xi = args.threshold_given
                             ? subpop::classify_label(r.xi, args.threshold)
                             : r.label_xi;
    tags["eta"].pred.push_back(label_eta);
    tags["eta"].truth.push_back(y);
    tags["xi"].pred.push_back(label_xi);
    tags["xi"].truth.push_back(y);

    if (data.has_value()) {
      if (idx >= data->size()) {
        throw subpop::ValidationError("truth row " + std::to_string(idx) +
                                      " outside the data file");
      }
      const double t = args.threshold;
      if ((*data)[idx].a == 1) {
        tags["eta1"].pred.push_back(subpop::classify_label(r.eta1, t));
        tags["eta1"].truth.push_back(y);
        tags["xi1"].pred.push_back(subpop::classify_label(r.xi1, t));
        tags["xi1"].truth.push_back(y);
      } else {
        tags["eta0"].pred.push_back(subpop::classify_label(r.eta0, t));
        tags["eta0"].truth.push_back(y);
        tags["xi0"].pred.push_back(subpop::classify_label(r.xi0, t));
        tags["xi0"].truth.push_back(y);
      }
    }
  }

  json out;
  out["threshold"] = args.threshold;
  json jt;
  for (const auto& [tag, acc] : tags) {
    json one;
    one["n_eval"] = acc.pred.size();
    one["accuracy"] = subpop::metric_accuracy(acc.pred, acc.truth);
    one["f1"] = subpop::metric_f1(acc.pred, acc.truth);
    jt[tag] = one;
  }
  out["tags"] = jt;
  write_json_file(out, args.out_path);
  std::cout << "wrote " << args.out_path << '\n';
}

// ---- risk --------------------------------------------------------------

void run_risk(const std::string& model_path, const std::string& data_path,
              const std::string& loss_name, const std::string& h_name,
              double threshold, const std::string& out_path) {
  const json mj = read_json_file(model_path);
  const subpop::NuisanceBundle nb =
      subpop::NuisanceBundle::from_json(mj.at("nuisance"));
  const subpop::ProportionsFile pf =
      subpop::proportions_from_json(mj.at("proportions"));
  subpop::check_proportions(pf.source, pf.target);

  const subpop::Dataset ds = subpop::load_csv(data_path);
  const subpop::LossSpec loss = subpop::LossSpec::from_name(loss_name, threshold);

  subpop::ProbFn h;
  if (h_name == "eta") {
    const subpop::TargetPredictor pred =
        subpop::make_predictor(nb, pf.source, pf.target, threshold);
    h = [pred](std::span<const double> x) { return pred.eta(x); };
  } else if (h_name == "xi") {
    h = nb.xi.fn();
  } else if (h_name == "erm") {
    const subpop::LabelWeights w =
        subpop::label_weights(pf.source, pf.target);
    const subpop::ProbModel m =
        subpop::reweighted_erm(subpop::source_a0(ds), w);
    h = m.fn();
  } else {
    throw subpop::ConfigError("--predictor must be eta, xi or erm");
  }

  const subpop::RiskReport rep =
      subpop::risk_report(h, loss, ds, pf.source, pf.target);
  write_json_file(rep.to_json(), out_path);
  std::cout << "wrote " << out_path << '\n';
}

// ---- experiment ---------------------------------------------------------

struct ExperimentArgs {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::string out_metrics = "metrics.csv";
  std::string out_summary = "summary.json";
};

// "data.csv" -> "data.truth.csv"; keeps the two files side by side when the
// caller names only the data file.
std::string default_truth_path(const std::string& out_path) {
  const std::string suffix = ".csv";
  if (out_path.size() > suffix.size() &&
      out_path.compare(out_path.size() - suffix.size(), suffix.size(),
                       suffix) == 0) {
    return out_path.substr(0, out_path.size() - suffix.size()) + ".truth.csv";
  }
  return out_path + ".truth.csv";
}

void run_experiment_cmd(const ExperimentArgs& args) {
  subpop::ExperimentConfig cfg;
  if (!args.config_path.empty()) {
    cfg = subpop::parse_config_file(args.config_path);
  }
  for (const auto& [key, value] : args.overrides) {
    subpop::apply_config_kv(cfg, key, value);
  }
  const subpop::ExperimentResult result = subpop::run_experiment(cfg);
  subpop::write_metrics_csv(result.rows, args.out_metrics);
  write_json_file(subpop::summarize(result), args.out_summary);
  if (result.n_failed > 0) {
    std::cerr << result.n_failed << " of " << result.n_replications
              << " replications failed\n";
  }
  std::cout << "wrote " << args.out_metrics << " and " << args.out_summary
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subpopulation-shift adaptation toolkit"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "draw a benchmark dataset");
  subpop::SyntheticSpec sim_spec;
  std::string sim_means, sim_out = "data.csv", sim_truth;
  sim->add_option("--n1", sim_spec.n1, "source rows");
  sim->add_option("--n0", sim_spec.n0, "target rows");
  sim->add_option("--seed", sim_spec.seed, "random seed");
  sim->add_option("--means", sim_means,
                  "four ';'-separated cell means (y0a0; y0a1; y1a0; y1a1)");
  sim->add_option("--out", sim_out, "output data CSV");
  sim->add_option("--truth", sim_truth,
                  "output truth CSV (default: <out>.truth.csv)");
  sim->callback([&]() {
    if (!sim_means.empty()) subpop::parse_means(sim_means, sim_spec);
    if (sim_truth.empty()) sim_truth = default_truth_path(sim_out);
    const subpop::GeneratedData gd = subpop::generate(sim_spec);
    subpop::write_csv(gd.data, sim_out);
    subpop::write_truth_csv(gd.truth, sim_truth);
    std::cout << "wrote " << sim_out << " and " << sim_truth << '\n';
  });

  // split
  auto* split = app.add_subcommand("split", "partition a labeled pool");
  std::string split_pool, split_out = "data.csv", split_truth;
  subpop::PartitionSpec split_spec;
  split->add_option("--pool", split_pool, "labeled pool CSV")->required();
  split->add_option("--rate-a", split_spec.rate_a,
                    "source rate for the (y=0, a=1) cell");
  split->add_option("--rate-b", split_spec.rate_b,
                    "source rate for the (y=1, a=0) cell");
  split->add_option("--rate-c", split_spec.rate_c,
                    "source rate for the (y=0, a=0) cell");
  split->add_option("--seed", split_spec.seed, "random seed");
  split->add_option("--out", split_out, "output data CSV");
  split->add_option("--truth", split_truth,
                    "output truth CSV (default: <out>.truth.csv)");
  split->callback([&]() {
    subpop::LoadOptions opts;
    opts.allow_forbidden_cell = true;
    if (split_truth.empty()) split_truth = default_truth_path(split_out);
    const subpop::Dataset pool = subpop::load_csv(split_pool, opts);
    const subpop::GeneratedData gd = subpop::partition_pool(pool, split_spec);
    subpop::write_csv(gd.data, split_out);
    subpop::write_truth_csv(gd.truth, split_truth);
    std::cout << "wrote " << split_out << " and " << split_truth << '\n';
  });

  // fit
  auto* fit = app.add_subcommand("fit", "fit nuisances and proportions");
  FitArgs fit_args;
  fit->add_option("--data", fit_args.data_path, "training data CSV")
      ->required();
  fit->add_option("--lambda", fit_args.lambda, "ridge strength");
  fit->add_option("--beta-method", fit_args.beta_method, "kl | moment | user");
  fit->add_option("--beta10", fit_args.beta10, "user value for beta10");
  fit->add_option("--beta01-method", fit_args.beta01_method,
                  "anchor | user");
  fit->add_option("--beta01", fit_args.beta01, "user value for beta01");
  fit->add_option("--quantile", fit_args.quantile, "anchor quantile");
  fit->add_option("--moment-coordinate", fit_args.moment_coordinate,
                  "feature index for the moment method (-1: principal axis)");
  fit->add_option("--out", fit_args.out_path, "output model JSON");
  fit->callback([&]() { run_fit(fit_args); });

  // predict
  auto* pred = app.add_subcommand("predict", "score target rows");
  std::string pred_model, pred_data, pred_out = "pred.csv";
  double pred_threshold = 0.5;
  pred->add_option("--model", pred_model, "model JSON from fit")->required();
  pred->add_option("--data", pred_data, "data CSV with target rows")
      ->required();
  pred->add_option("--threshold", pred_threshold, "label threshold");
  pred->add_option("--out", pred_out, "output prediction CSV");
  pred->callback(
      [&]() { run_predict(pred_model, pred_data, pred_out, pred_threshold); });

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "score predictions against truth");
  EvalArgs eval_args;
  eval->add_option("--pred", eval_args.pred_path, "prediction CSV")
      ->required();
  eval->add_option("--truth", eval_args.truth_path, "truth CSV")->required();
  eval->add_option("--data", eval_args.data_path,
                   "data CSV (enables per-group tags)");
  auto* eval_thr =
      eval->add_option("--threshold", eval_args.threshold, "label threshold");
  eval->add_option("--out", eval_args.out_path, "output JSON");
  eval->callback([&]() {
    eval_args.threshold_given = eval_thr->count() > 0;
    run_evaluate(eval_args);
  });

  // experiment
  auto* exp = app.add_subcommand("experiment", "replicated benchmark run");
  ExperimentArgs exp_args;
  exp->add_option("--config", exp_args.config_path, "key = value config file");
  exp->add_option("--out-metrics", exp_args.out_metrics, "metrics CSV path");
  exp->add_option("--out-summary", exp_args.out_summary, "summary JSON path");
  // Flag overrides share the config vocabulary; values are parsed the same
  // way a config line would be.
  static const std::vector<std::pair<std::string, std::string>> kOverrideKeys =
      {{"--source", "source"},
       {"--n1", "n1"},
       {"--n0", "n0"},
       {"--seed", "seed"},
       {"--replications", "replications"},
       {"--lambda", "lambda"},
       {"--threshold", "threshold"},
       {"--beta-method", "beta_method"},
       {"--beta10", "beta10"},
       {"--beta01-method", "beta01_method"},
       {"--beta01", "beta01"},
       {"--anchor-quantile", "anchor_quantile"},
       {"--moment-coordinate", "moment_coordinate"},
       {"--pool", "pool"},
       {"--rate-a", "rate_a"},
       {"--rate-b", "rate_b"},
       {"--rate-c", "rate_c"},
       {"--threads", "threads"},
       {"--means", "means"}};
  auto exp_values =
      std::make_shared<std::map<std::string, std::string>>();
  for (const auto& [flag, key] : kOverrideKeys) {
    exp->add_option_function<std::string>(
        flag,
        [exp_values, key = key](const std::string& v) {
          (*exp_values)[key] = v;
        },
        "overrides config key '" + key + "'");
  }
  exp->callback([&, exp_values]() {
    for (const auto& [flag, key] : kOverrideKeys) {
      const auto it = exp_values->find(key);
      if (it != exp_values->end()) {
        exp_args.overrides.emplace_back(key, it->second);
      }
    }
    run_experiment_cmd(exp_args);
  });

  // risk
  auto* risk = app.add_subcommand("risk", "target risk report for a predictor");
  std::string risk_model, risk_data, risk_out = "risk.json";
  std::string risk_loss = "zero_one", risk_h = "eta";
  double risk_threshold = 0.5;
  risk->add_option("--model", risk_model, "model JSON from fit")->required();
  risk->add_option("--data", risk_data, "data CSV")->required();
  risk->add_option("--loss", risk_loss, "zero_one | logistic");
  risk->add_option("--predictor", risk_h, "predictor: eta | xi | erm");
  risk->add_option("--threshold", risk_threshold, "zero-one cut");
  risk->add_option("--out", risk_out, "output JSON");
  risk->callback([&]() {
    run_risk(risk_model, risk_data, risk_loss, risk_h, risk_threshold,
             risk_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const subpop::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const subpop::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const subpop::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const subpop::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
