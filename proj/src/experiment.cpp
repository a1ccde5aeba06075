#include "subpop/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "subpop/adapt.hpp"
#include "subpop/errors.hpp"
#include "subpop/metrics.hpp"
#include "subpop/rng.hpp"

namespace subpop {

namespace {

constexpr const char* kTags[6] = {"eta", "eta1", "eta0", "xi", "xi1", "xi0"};

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size() || !std::isfinite(v)) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": bad numeric value '" + value + "'");
  }
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": bad integer value '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(key);
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": bad integer value '" + value + "'");
  }
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  double v;
  while (in >> v) out.push_back(v);
  if (!in.eof()) throw ConfigError("bad mean vector '" + text + "'");
  return out;
}

}  // namespace

void parse_means(const std::string& text, SyntheticSpec& spec) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : text) {
    if (ch == ';') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  if (parts.size() != 4) {
    throw ConfigError("means must hold four ';'-separated vectors "
                      "(y0a0; y0a1; y1a0; y1a1)");
  }
  spec.mu00 = parse_vector(parts[0]);
  spec.mu01 = parse_vector(parts[1]);
  spec.mu10 = parse_vector(parts[2]);
  spec.mu11 = parse_vector(parts[3]);
  const std::size_t q = spec.mu00.size();
  if (q == 0 || spec.mu01.size() != q || spec.mu10.size() != q ||
      spec.mu11.size() != q) {
    throw ConfigError("means must share one nonzero dimension");
  }
}

void apply_config_kv(ExperimentConfig& cfg, const std::string& key,
                     const std::string& value) {
  if (key == "source") {
    if (value == "synthetic") cfg.source = ExperimentConfig::Source::synthetic;
    else if (value == "pool") cfg.source = ExperimentConfig::Source::pool;
    else throw ConfigError("source must be 'synthetic' or 'pool'");
  } else if (key == "n1") {
    cfg.synth.n1 = parse_long(key, value);
  } else if (key == "n0") {
    cfg.synth.n0 = parse_long(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "replications") {
    cfg.replications = static_cast<int>(parse_long(key, value));
  } else if (key == "lambda") {
    cfg.lambda = parse_double(key, value);
  } else if (key == "threshold") {
    cfg.threshold = parse_double(key, value);
  } else if (key == "beta_method") {
    cfg.beta_method = value;
  } else if (key == "beta10") {
    cfg.user_beta10 = parse_double(key, value);
  } else if (key == "beta01_method") {
    cfg.beta01_method = value;
  } else if (key == "beta01") {
    cfg.user_beta01 = parse_double(key, value);
  } else if (key == "anchor_quantile") {
    cfg.anchor_quantile = parse_double(key, value);
  } else if (key == "moment_coordinate") {
    cfg.moment_coordinate = static_cast<int>(parse_long(key, value));
  } else if (key == "pool") {
    cfg.pool_path = value;
  } else if (key == "rate_a") {
    cfg.partition.rate_a = parse_double(key, value);
  } else if (key == "rate_b") {
    cfg.partition.rate_b = parse_double(key, value);
  } else if (key == "rate_c") {
    cfg.partition.rate_c = parse_double(key, value);
  } else if (key == "threads") {
    cfg.threads = static_cast<int>(parse_long(key, value));
  } else if (key == "means") {
    parse_means(value, cfg.synth);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  ExperimentConfig cfg;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    try {
      apply_config_kv(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  return cfg;
}

void check_config(const ExperimentConfig& cfg) {
  if (cfg.replications < 1) {
    throw ConfigError("replications must be at least 1");
  }
  if (cfg.threads < 0) throw ConfigError("threads must be nonnegative");
  if (!(cfg.lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  if (!(cfg.threshold >= 0.0) || !(cfg.threshold <= 1.0)) {
    throw ConfigError("threshold must lie in [0, 1]");
  }
  if (!(cfg.anchor_quantile >= 0.0) || !(cfg.anchor_quantile <= 1.0)) {
    throw ConfigError("anchor_quantile must lie in [0, 1]");
  }
  const bool known_beta =
      cfg.beta_method == "kl" || cfg.beta_method == "moment" ||
      cfg.beta_method == "oracle" || cfg.beta_method == "user";
  if (!known_beta) {
    throw ConfigError("beta_method must be kl, moment, oracle or user");
  }
  const bool known_beta01 = cfg.beta01_method == "anchor" ||
                            cfg.beta01_method == "oracle" ||
                            cfg.beta01_method == "user";
  if (!known_beta01) {
    throw ConfigError("beta01_method must be anchor, oracle or user");
  }
  if (cfg.beta_method == "user" && cfg.user_beta10 < 0.0) {
    throw ConfigError("beta_method 'user' requires beta10");
  }
  if (cfg.beta01_method == "user" && cfg.user_beta01 < 0.0) {
    throw ConfigError("beta01_method 'user' requires beta01");
  }
  const bool synthetic = cfg.source == ExperimentConfig::Source::synthetic;
  if (!synthetic && cfg.pool_path.empty()) {
    throw ConfigError("pool source requires a pool path");
  }
  if (!synthetic &&
      (cfg.beta_method == "oracle" || cfg.beta01_method == "oracle")) {
    throw ConfigError("oracle proportions are only defined for the "
                      "synthetic source");
  }
}

namespace {

struct TagAccum {
  std::vector<int> pred;
  std::vector<int> truth;
  long clamped = 0;
};

std::vector<MetricsRow> run_replication(const ExperimentConfig& cfg,
                                        const Dataset* pool, int rep) {
  const std::uint64_t seed_r =
      derive_seed(cfg.seed, static_cast<std::uint64_t>(rep));

  GeneratedData gd;
  if (cfg.source == ExperimentConfig::Source::synthetic) {
    SyntheticSpec spec = cfg.synth;
    spec.seed = seed_r;
    gd = generate(spec);
  } else {
    PartitionSpec ps = cfg.partition;
    ps.seed = seed_r;
    gd = partition_pool(*pool, ps);
  }

  const CellCounts counts = cell_counts(gd.data);
  const SourceProportions sp = estimate_source_proportions(counts);
  const RhoB1 rb = estimate_rho_b1(counts);

  FitOptions fopts;
  fopts.lambda = cfg.lambda;
  const NuisanceBundle nb = fit_nuisance(gd.data, fopts);

  TargetProportions tp;
  tp.rho = rb.rho;
  tp.b1 = rb.b1;
  if (cfg.beta_method == "kl") {
    const BetaEstimate est =
        estimate_beta_kl(nb.xi0, target_a0(gd.data), rb.b1, rb.rho);
    tp.beta10 = est.beta10;
    tp.beta00 = est.beta00;
  } else if (cfg.beta_method == "moment") {
    MomentSpec ms;
    ms.coordinate = cfg.moment_coordinate;
    const BetaEstimate est = estimate_beta_moment(gd.data, rb.rho, ms);
    tp.beta10 = est.beta10;
    tp.beta00 = est.beta00;
  } else if (cfg.beta_method == "oracle") {
    const OracleModels om{cfg.synth};
    tp = om.target_props();
  } else {  // user
    if (cfg.user_beta10 > rb.rho) {
      throw ConfigError("beta10 exceeds the target a=0 mass rho");
    }
    auto [b10, b00] = split_exact(rb.rho, cfg.user_beta10);
    tp.beta10 = b10;
    tp.beta00 = b00;
  }

  if (cfg.beta01_method == "anchor") {
    std::vector<double> kvals;
    const Dataset tgt_a1 = target_a1(gd.data);
    kvals.reserve(tgt_a1.size());
    for (const Sample& s : tgt_a1) {
      kvals.push_back(nb.kappa.predict_proba(s.features));
    }
    const Beta01Estimate est = estimate_beta01_anchor_values(
        kvals, sp.alpha01, sp.pi, tp.rho, cfg.anchor_quantile,
        nb.kappa.clamp_eps);
    tp.beta01 = est.beta01;
    tp.beta11 = est.beta11;
  } else if (cfg.beta01_method == "oracle") {
    const OracleModels om{cfg.synth};
    tp.beta01 = om.target_props().beta01;
    tp.beta11 = (1.0 - tp.rho) - tp.beta01;
  } else {  // user
    if (cfg.user_beta01 > 1.0 - tp.rho) {
      throw ConfigError("beta01 exceeds the target a=1 mass 1 - rho");
    }
    auto [b01, b11] = split_exact(1.0 - tp.rho, cfg.user_beta01);
    tp.beta01 = b01;
    tp.beta11 = b11;
  }

  const TargetPredictor pred = make_predictor(nb, sp, tp, cfg.threshold);

  // Tag order: eta, eta1, eta0, xi, xi1, xi0.
  TagAccum acc[6];
  for (const auto& [idx, y] : gd.truth) {
    const Sample& s = gd.data[idx];
    const PointwiseEval ev = pred.evaluate(s.features);

    acc[0].pred.push_back(classify_label(ev.eta, cfg.threshold));
    acc[0].truth.push_back(y);
    if (ev.eta_raw < 0.0 || ev.eta_raw > 1.0) ++acc[0].clamped;

    acc[3].pred.push_back(classify_label(ev.xi, cfg.threshold));
    acc[3].truth.push_back(y);

    if (s.a == 1) {
      acc[1].pred.push_back(classify_label(ev.eta1, cfg.threshold));
      acc[1].truth.push_back(y);
      if (ev.eta1_raw < 0.0 || ev.eta1_raw > 1.0) ++acc[1].clamped;

      acc[4].pred.push_back(classify_label(ev.xi1, cfg.threshold));
      acc[4].truth.push_back(y);
      if (ev.xi1_raw < 0.0 || ev.xi1_raw > 1.0) ++acc[4].clamped;
    } else {
      acc[2].pred.push_back(classify_label(ev.eta0, cfg.threshold));
      acc[2].truth.push_back(y);

      acc[5].pred.push_back(classify_label(ev.xi0, cfg.threshold));
      acc[5].truth.push_back(y);
    }
  }

  std::vector<MetricsRow> rows;
  rows.reserve(6);
  for (int t = 0; t < 6; ++t) {
    if (acc[t].pred.empty()) {
      throw EstimationError(std::string("no target rows to evaluate tag '") +
                            kTags[t] + "'");
    }
    MetricsRow row;
    row.rep = rep;
    row.tag = kTags[t];
    row.n_eval = static_cast<long>(acc[t].pred.size());
    row.accuracy = metric_accuracy(acc[t].pred, acc[t].truth);
    row.f1 = metric_f1(acc[t].pred, acc[t].truth);
    row.clamp_rate = static_cast<double>(acc[t].clamped) /
                     static_cast<double>(acc[t].pred.size());
    row.beta10_hat = tp.beta10;
    row.beta00_hat = tp.beta00;
    row.beta01_hat = tp.beta01;
    row.beta11_hat = tp.beta11;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  check_config(cfg);

  Dataset pool;
  if (cfg.source == ExperimentConfig::Source::pool) {
    LoadOptions opts;
    opts.allow_forbidden_cell = true;  // pools carry all four labeled cells
    pool = load_csv(cfg.pool_path, opts);
  }

  const int R = cfg.replications;
  std::vector<std::vector<MetricsRow>> by_rep(R);

  auto work = [&](int rep) {
    try {
      by_rep[rep] = run_replication(cfg, &pool, rep);
    } catch (const std::exception& e) {
      MetricsRow row;
      row.rep = rep;
      row.tag = "none";
      row.failed = true;
      row.error = e.what();
      by_rep[rep] = {row};
    }
  };

  int threads = cfg.threads;
  if (threads == 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
  }
  threads = std::min(threads, R);

  if (threads <= 1) {
    for (int rep = 0; rep < R; ++rep) work(rep);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (int t = 0; t < threads; ++t) {
      workers.emplace_back([&]() {
        for (int rep = next.fetch_add(1); rep < R; rep = next.fetch_add(1)) {
          work(rep);
        }
      });
    }
    for (std::thread& w : workers) w.join();
  }

  ExperimentResult result;
  result.n_replications = R;
  for (int rep = 0; rep < R; ++rep) {
    for (MetricsRow& row : by_rep[rep]) {
      if (row.failed) ++result.n_failed;
      result.rows.push_back(std::move(row));
    }
  }
  if (result.n_failed * 5 > R) {
    throw EstimationError(
        "more than 20% of replications failed (" +
        std::to_string(result.n_failed) + " of " + std::to_string(R) + ")");
  }
  return result;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "rep,tag,n_eval,accuracy,f1,clamp_rate,beta10_hat,beta00_hat,"
         "beta01_hat,beta11_hat,failed\n";
  for (const MetricsRow& r : rows) {
    if (r.failed) {
      out << r.rep << ",none,0,,,,,,,,1\n";
      continue;
    }
    out << r.rep << ',' << r.tag << ',' << r.n_eval << ','
        << format_double(r.accuracy) << ',' << format_double(r.f1) << ','
        << format_double(r.clamp_rate) << ',' << format_double(r.beta10_hat)
        << ',' << format_double(r.beta00_hat) << ','
        << format_double(r.beta01_hat) << ',' << format_double(r.beta11_hat)
        << ",0\n";
  }
  if (!out) throw ParseError("write failed for '" + path + "'");
}

namespace {

nlohmann::json stats_of(std::vector<double> v) {
  nlohmann::json j;
  const std::size_t n = v.size();
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(n);
  double sd = 0.0;
  if (n > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / static_cast<double>(n - 1));
  }
  std::sort(v.begin(), v.end());
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= n) return v[n - 1];
    return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
  };
  j["mean"] = mean;
  j["sd"] = sd;
  j["median"] = quantile(0.5);
  j["q1"] = quantile(0.25);
  j["q3"] = quantile(0.75);
  return j;
}

}  // namespace

nlohmann::json summarize(const ExperimentResult& result) {
  nlohmann::json j;
  j["n_replications"] = result.n_replications;
  j["n_failed"] = result.n_failed;
  nlohmann::json tags;
  for (const char* tag : kTags) {
    std::vector<double> acc, f1, clamp;
    for (const MetricsRow& r : result.rows) {
      if (r.failed || r.tag != tag) continue;
      acc.push_back(r.accuracy);
      f1.push_back(r.f1);
      clamp.push_back(r.clamp_rate);
    }
    if (acc.empty()) continue;
    nlohmann::json t;
    t["accuracy"] = stats_of(acc);
    t["f1"] = stats_of(f1);
    t["clamp_rate"] = stats_of(clamp);
    tags[tag] = t;
  }
  j["tags"] = tags;
  return j;
}

}  // namespace subpop
