#include "subpop/dataset.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "subpop/errors.hpp"

namespace subpop {

Dataset::Dataset(std::vector<Sample> samples, int q)
    : samples_(std::move(samples)), q_(q) {
  if (q_ < 0) throw ValidationError("feature dimension must be nonnegative");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const Sample& s = samples_[i];
    if (static_cast<int>(s.features.size()) != q_) {
      throw ValidationError("row " + std::to_string(i) + ": expected " +
                            std::to_string(q_) + " features, got " +
                            std::to_string(s.features.size()));
    }
    if (s.r != 0 && s.r != 1) {
      throw ValidationError("row " + std::to_string(i) +
                            ": r must be 0 or 1");
    }
    if (s.a != 0 && s.a != 1) {
      throw ValidationError("row " + std::to_string(i) +
                            ": a must be 0 or 1");
    }
    if (s.r == 1) {
      if (!s.y.has_value()) {
        throw ValidationError("row " + std::to_string(i) +
                              ": source row without a label");
      }
      if (*s.y != 0 && *s.y != 1) {
        throw ValidationError("row " + std::to_string(i) +
                              ": y must be 0 or 1");
      }
    } else if (s.y.has_value()) {
      throw ValidationError("row " + std::to_string(i) +
                            ": target row carries a label");
    }
  }
}

Dataset Dataset::from_samples(std::vector<Sample> samples) {
  const int q =
      samples.empty() ? 0 : static_cast<int>(samples.front().features.size());
  return Dataset(std::move(samples), q);
}

CellCounts cell_counts(const Dataset& ds) {
  CellCounts c;
  for (const Sample& s : ds) {
    if (s.r == 1) {
      ++c.n1;
      const int y = *s.y;
      if (y == 1 && s.a == 0) ++c.n110;
      if (y == 0 && s.a == 1) ++c.n101;
      if (y == 0 && s.a == 0) ++c.n100;
      if (y == 1 && s.a == 1) ++c.n111;
    } else {
      ++c.n0;
      if (s.a == 1) ++c.n0a1;
      else ++c.n0a0;
    }
  }
  c.n = c.n1 + c.n0;
  return c;
}

ValidationReport validate(const Dataset& ds, bool allow_forbidden_cell) {
  ValidationReport rep;
  rep.counts = cell_counts(ds);
  if (!allow_forbidden_cell) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const Sample& s = ds[i];
      if (s.r == 1 && s.a == 1 && s.y.has_value() && *s.y == 1) {
        rep.violations.push_back(i);
      }
    }
    rep.ok = rep.violations.empty();
  }
  const CellCounts& c = rep.counts;
  if (c.n110 == 0) rep.warnings.push_back("empty cell: source y=1, a=0");
  if (c.n101 == 0) rep.warnings.push_back("empty cell: source y=0, a=1");
  if (c.n100 == 0) rep.warnings.push_back("empty cell: source y=0, a=0");
  if (c.n0a1 == 0) rep.warnings.push_back("empty cell: target a=1");
  if (c.n0a0 == 0) rep.warnings.push_back("empty cell: target a=0");
  return rep;
}

void validate_or_throw(const Dataset& ds, bool allow_forbidden_cell) {
  const ValidationReport rep = validate(ds, allow_forbidden_cell);
  if (rep.ok) return;
  std::ostringstream msg;
  msg << "source rows in the excluded (y=1, a=1) cell at indices:";
  for (std::size_t i = 0; i < rep.violations.size() && i < 10; ++i) {
    msg << ' ' << rep.violations[i];
  }
  if (rep.violations.size() > 10) {
    msg << " ... (" << rep.violations.size() << " total)";
  }
  throw ValidationError(msg.str());
}

namespace {

// Splits one CSV line on commas. No quoting: the format carries only
// numbers and blanks.
std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
    --e;
  return s.substr(b, e - b);
}

int parse_binary(const std::string& field, const char* name, long line_no) {
  const std::string f = strip(field);
  if (f == "0") return 0;
  if (f == "1") return 1;
  throw ParseError("line " + std::to_string(line_no) + ": " + name +
                   " must be 0 or 1, got '" + f + "'");
}

double parse_feature(const std::string& field, long line_no) {
  const std::string f = strip(field);
  if (f.empty()) {
    throw ParseError("line " + std::to_string(line_no) + ": empty feature");
  }
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(f.c_str(), &end);
  if (end != f.c_str() + f.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": bad feature value '" + f + "'");
  }
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");

  std::vector<Sample> samples;
  std::string line;
  long line_no = 0;
  int q = -1;
  bool saw_header = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty()) continue;
    if (opts.has_header && !saw_header) {
      saw_header = true;
      const auto fields = split_fields(line);
      if (fields.size() < 4 || strip(fields[0]) != "r" ||
          strip(fields[1]) != "y" || strip(fields[2]) != "a") {
        throw ParseError("line 1: expected header 'r,y,a,x1,...'");
      }
      continue;
    }
    const auto fields = split_fields(line);
    if (fields.size() < 4) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected at least 4 columns, got " +
                       std::to_string(fields.size()));
    }
    Sample s;
    s.r = parse_binary(fields[0], "r", line_no);
    const std::string yf = strip(fields[1]);
    if (s.r == 1) {
      if (yf.empty()) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": source row without a label");
      }
      s.y = parse_binary(yf, "y", line_no);
    } else if (!yf.empty()) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": target row carries a label");
    }
    s.a = parse_binary(fields[2], "a", line_no);
    const int row_q = static_cast<int>(fields.size()) - 3;
    if (q < 0) {
      q = row_q;
    } else if (row_q != q) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(q) + " features, got " +
                       std::to_string(row_q));
    }
    s.features.reserve(row_q);
    for (int j = 0; j < row_q; ++j) {
      s.features.push_back(parse_feature(fields[3 + j], line_no));
    }
    samples.push_back(std::move(s));
  }

  if (samples.empty()) throw ParseError("'" + path + "': empty dataset");
  Dataset ds(std::move(samples), q);
  validate_or_throw(ds, opts.allow_forbidden_cell);
  return ds;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "r,y,a";
  for (int j = 1; j <= ds.q(); ++j) out << ",x" << j;
  out << '\n';
  for (const Sample& s : ds) {
    out << s.r << ',';
    if (s.y.has_value()) out << *s.y;
    out << ',' << s.a;
    for (double x : s.features) out << ',' << format_double(x);
    out << '\n';
  }
  if (!out) throw ParseError("write failed for '" + path + "'");
}

Dataset subset(const Dataset& ds,
               const std::function<bool(int, const std::optional<int>&, int)>&
                   pred) {
  std::vector<Sample> keep;
  for (const Sample& s : ds) {
    if (pred(s.r, s.y, s.a)) keep.push_back(s);
  }
  return Dataset(std::move(keep), ds.q());
}

Dataset source_rows(const Dataset& ds) {
  return subset(ds, [](int r, const std::optional<int>&, int) { return r == 1; });
}

Dataset target_rows(const Dataset& ds) {
  return subset(ds, [](int r, const std::optional<int>&, int) { return r == 0; });
}

Dataset source_a0(const Dataset& ds) {
  return subset(ds, [](int r, const std::optional<int>&, int a) {
    return r == 1 && a == 0;
  });
}

Dataset source_a1(const Dataset& ds) {
  return subset(ds, [](int r, const std::optional<int>&, int a) {
    return r == 1 && a == 1;
  });
}

Dataset target_a0(const Dataset& ds) {
  return subset(ds, [](int r, const std::optional<int>&, int a) {
    return r == 0 && a == 0;
  });
}

Dataset target_a1(const Dataset& ds) {
  return subset(ds, [](int r, const std::optional<int>&, int a) {
    return r == 0 && a == 1;
  });
}

Eigen::MatrixXd feature_matrix(const Dataset& ds) {
  Eigen::MatrixXd X(ds.size(), ds.q());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (int j = 0; j < ds.q(); ++j) X(i, j) = ds[i].features[j];
  }
  return X;
}

std::vector<int> labels_y(const Dataset& ds) {
  std::vector<int> y;
  y.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds[i].y.has_value()) {
      throw ValidationError("row " + std::to_string(i) +
                            ": label requested from an unlabeled row");
    }
    y.push_back(*ds[i].y);
  }
  return y;
}

}  // namespace subpop
