#include "subpop/synthetic.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include "subpop/errors.hpp"
#include "subpop/rng.hpp"

namespace subpop {

namespace {

// Cell order used throughout: 0 = (y=0,a=0), 1 = (y=0,a=1), 2 = (y=1,a=0),
// 3 = (y=1,a=1).
constexpr int kCellY[4] = {0, 0, 1, 1};
constexpr int kCellA[4] = {0, 1, 0, 1};

const std::vector<double>& cell_mean(const SyntheticSpec& spec, int cell) {
  switch (cell) {
    case 0: return spec.mu00;
    case 1: return spec.mu01;
    case 2: return spec.mu10;
    default: return spec.mu11;
  }
}

void check_spec(const SyntheticSpec& spec) {
  if (spec.n1 <= 0 || spec.n0 <= 0) {
    throw ConfigError("sample sizes must be positive");
  }
  const std::size_t q = spec.mu00.size();
  if (q == 0) throw ConfigError("cell means must be nonempty");
  if (spec.mu01.size() != q || spec.mu10.size() != q ||
      spec.mu11.size() != q) {
    throw ConfigError("cell means must share one dimension");
  }
}

// Stream tags. Cell assignment and feature draws are separated so that a
// row's features depend only on (domain, cell, draw index within the cell).
constexpr std::uint64_t kTagSourceCells = 0;
constexpr std::uint64_t kTagTargetCells = 1;
constexpr std::uint64_t kTagDraws = 2;  // + domain * 4 + cell

std::vector<double> draw_point(RandomStream& rs,
                               const std::vector<double>& mu) {
  std::vector<double> x(mu.size());
  for (std::size_t j = 0; j < mu.size(); ++j) x[j] = mu[j] + rs.normal();
  return x;
}

}  // namespace

GeneratedData generate(const SyntheticSpec& spec) {
  check_spec(spec);

  RandomStream src_cells(derive_seed(spec.seed, kTagSourceCells));
  RandomStream tgt_cells(derive_seed(spec.seed, kTagTargetCells));
  std::array<RandomStream, 8> draws = {
      RandomStream(derive_seed(spec.seed, kTagDraws + 0)),
      RandomStream(derive_seed(spec.seed, kTagDraws + 1)),
      RandomStream(derive_seed(spec.seed, kTagDraws + 2)),
      RandomStream(derive_seed(spec.seed, kTagDraws + 3)),
      RandomStream(derive_seed(spec.seed, kTagDraws + 4)),
      RandomStream(derive_seed(spec.seed, kTagDraws + 5)),
      RandomStream(derive_seed(spec.seed, kTagDraws + 6)),
      RandomStream(derive_seed(spec.seed, kTagDraws + 7))};

  std::vector<Sample> samples;
  samples.reserve(spec.n1 + spec.n0);
  GeneratedData out;

  // Source rows: the three observable cells with equal probability.
  constexpr int kSourceCells[3] = {0, 1, 2};
  for (long i = 0; i < spec.n1; ++i) {
    const int cell = kSourceCells[src_cells.below(3)];
    Sample s;
    s.r = 1;
    s.y = kCellY[cell];
    s.a = kCellA[cell];
    s.features = draw_point(draws[cell], cell_mean(spec, cell));
    samples.push_back(std::move(s));
  }
  // Target rows: all four cells equally; labels go to the truth table.
  for (long i = 0; i < spec.n0; ++i) {
    const int cell = static_cast<int>(tgt_cells.below(4));
    Sample s;
    s.r = 0;
    s.a = kCellA[cell];
    s.features = draw_point(draws[4 + cell], cell_mean(spec, cell));
    out.truth.emplace_back(samples.size(), kCellY[cell]);
    samples.push_back(std::move(s));
  }

  out.data = Dataset(std::move(samples), spec.q());
  return out;
}

OracleModels::OracleModels(SyntheticSpec spec) : spec_(std::move(spec)) {
  check_spec(spec_);
}

std::array<double, 4> OracleModels::cell_densities(
    std::span<const double> x) const {
  if (static_cast<int>(x.size()) != spec_.q()) {
    throw NumericError("oracle evaluated at the wrong dimension");
  }
  std::array<double, 4> expo{};
  for (int c = 0; c < 4; ++c) {
    const std::vector<double>& mu = cell_mean(spec_, c);
    double d2 = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      const double d = x[j] - mu[j];
      d2 += d * d;
    }
    expo[c] = -0.5 * d2;
  }
  const double m = std::max({expo[0], expo[1], expo[2], expo[3]});
  std::array<double, 4> g{};
  for (int c = 0; c < 4; ++c) g[c] = std::exp(expo[c] - m);
  return g;
}

double OracleModels::xi(std::span<const double> x) const {
  const auto g = cell_densities(x);
  return g[2] / (g[0] + g[1] + g[2]);
}

double OracleModels::xi0(std::span<const double> x) const {
  const auto g = cell_densities(x);
  return g[2] / (g[0] + g[2]);
}

double OracleModels::tau1(std::span<const double> x) const {
  const auto g = cell_densities(x);
  return g[1] / (g[0] + g[1] + g[2]);
}

double OracleModels::tau0(std::span<const double> x) const {
  const auto g = cell_densities(x);
  return (g[1] + g[3]) / (g[0] + g[1] + g[2] + g[3]);
}

double OracleModels::kappa(std::span<const double> x) const {
  const auto g = cell_densities(x);
  const double pi = spec_.pi();
  // Source a=1 mass is alpha01 * g01; target a=1 mass splits over both
  // a=1 cells at rate 1/4 each.
  const double src = pi * (1.0 / 3.0) * g[1];
  const double tgt = (1.0 - pi) * 0.25 * (g[1] + g[3]);
  return src / (src + tgt);
}

double OracleModels::bayes(std::span<const double> x) const {
  const auto g = cell_densities(x);
  return (g[2] + g[3]) / (g[0] + g[1] + g[2] + g[3]);
}

ProbFn OracleModels::xi_fn() const {
  return [om = *this](std::span<const double> x) { return om.xi(x); };
}
ProbFn OracleModels::xi0_fn() const {
  return [om = *this](std::span<const double> x) { return om.xi0(x); };
}
ProbFn OracleModels::tau1_fn() const {
  return [om = *this](std::span<const double> x) { return om.tau1(x); };
}
ProbFn OracleModels::tau0_fn() const {
  return [om = *this](std::span<const double> x) { return om.tau0(x); };
}
ProbFn OracleModels::kappa_fn() const {
  return [om = *this](std::span<const double> x) { return om.kappa(x); };
}
ProbFn OracleModels::bayes_fn() const {
  return [om = *this](std::span<const double> x) { return om.bayes(x); };
}

SourceProportions OracleModels::source_props() const {
  SourceProportions sp;
  sp.alpha10 = 1.0 / 3.0;
  sp.alpha01 = 1.0 / 3.0;
  sp.alpha00 = 1.0 / 3.0;
  sp.pi = spec_.pi();
  return sp;
}

TargetProportions OracleModels::target_props() const {
  TargetProportions tp;
  tp.beta11 = 0.25;
  tp.beta10 = 0.25;
  tp.beta01 = 0.25;
  tp.beta00 = 0.25;
  tp.rho = 0.5;
  tp.b1 = 0.5;
  return tp;
}

GeneratedData partition_pool(const Dataset& pool, const PartitionSpec& spec) {
  if (pool.empty()) throw ValidationError("empty pool");
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(spec.rate_a) || !in01(spec.rate_b) || !in01(spec.rate_c)) {
    throw ConfigError("partition rates must lie in [0, 1]");
  }
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!pool[i].y.has_value()) {
      throw ValidationError("pool row " + std::to_string(i) +
                            " carries no label");
    }
  }

  RandomStream rs(derive_seed(spec.seed, 0));
  std::vector<Sample> samples;
  samples.reserve(pool.size());
  GeneratedData out;

  for (std::size_t i = 0; i < pool.size(); ++i) {
    const Sample& p = pool[i];
    const int y = *p.y;
    double rate;
    if (y == 1 && p.a == 1) {
      rate = 0.0;  // the excluded cell never enters the source
    } else if (y == 0 && p.a == 1) {
      rate = spec.rate_a;
    } else if (y == 1 && p.a == 0) {
      rate = spec.rate_b;
    } else {
      rate = spec.rate_c;
    }
    Sample s;
    s.features = p.features;
    s.a = p.a;
    if (rate > 0.0 && rs.bernoulli(rate)) {
      s.r = 1;
      s.y = y;
    } else {
      s.r = 0;
      out.truth.emplace_back(i, y);
    }
    samples.push_back(std::move(s));
  }

  out.data = Dataset(std::move(samples), pool.q());
  return out;
}

void write_truth_csv(const TruthTable& truth, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "row_index,y_true\n";
  for (const auto& [idx, y] : truth) out << idx << ',' << y << '\n';
  if (!out) throw ParseError("write failed for '" + path + "'");
}

TruthTable load_truth_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  TruthTable truth;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line_no == 1) {
      if (line.rfind("row_index,y_true", 0) != 0) {
        throw ParseError("line 1: expected header 'row_index,y_true'");
      }
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 'row_index,y_true'");
    }
    try {
      const std::size_t idx = std::stoull(line.substr(0, comma));
      const std::string yf = line.substr(comma + 1);
      const int y = std::stoi(yf);
      if (y != 0 && y != 1) throw std::invalid_argument("y");
      truth.emplace_back(idx, y);
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": bad truth row '" + line + "'");
    }
  }
  if (truth.empty()) throw ParseError("'" + path + "': empty truth table");
  return truth;
}

}  // namespace subpop
