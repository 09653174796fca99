#include "avare/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string_view>
#include <utility>

namespace avare {

namespace {

constexpr std::size_t kMaxInferredDim = std::size_t{1} << 24;
// Dense storage limit, in entries (2 GiB of doubles).
constexpr std::size_t kMaxDenseEntries = std::size_t{1} << 28;

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

std::vector<Token> split_ws(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

bool parse_double(std::string_view s, double& v) {
  if (s.empty()) return false;
  // from_chars rejects a leading '+', which LIBSVM labels commonly carry.
  if (s.front() == '+') {
    s.remove_prefix(1);
    if (s.empty() || s.front() == '-') return false;
  }
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_index(std::string_view s, std::uint64_t& v) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

// Sorted distinct label values and the per-example class ids.
void remap_labels(const std::vector<double>& raw, Dataset<double>& data) {
  std::vector<double> values(raw);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  data.labels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    data.labels[i] = static_cast<int>(std::lower_bound(values.begin(), values.end(), raw[i]) -
                                      values.begin());
  }
  data.classes = std::max<int>(2, static_cast<int>(values.size()));
  data.label_values = std::move(values);
}

}  // namespace

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Dataset<double> parse_libsvm(std::istream& in, const LibsvmOptions& options) {
  std::vector<double> raw_labels;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  std::size_t dim = options.max_dim;
  const std::size_t cap = options.max_dim > 0 ? options.max_dim : kMaxInferredDim;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (blank(line)) continue;
    const auto tokens = split_ws(line);
    double label = 0;
    if (!parse_double(tokens[0].text, label) || !std::isfinite(label)) {
      throw ParseError("malformed label '" + std::string(tokens[0].text) + "'", line_no,
                       tokens[0].column);
    }
    std::vector<std::pair<std::size_t, double>> row;
    std::uint64_t prev = 0;
    for (std::size_t k = 1; k < tokens.size(); ++k) {
      const auto& tok = tokens[k];
      const auto colon = tok.text.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError("expected idx:val, got '" + std::string(tok.text) + "'", line_no, tok.column);
      }
      std::uint64_t idx = 0;
      if (!parse_index(tok.text.substr(0, colon), idx) || idx == 0) {
        throw ParseError("feature index must be a positive integer", line_no, tok.column);
      }
      if (idx <= prev) throw ParseError("feature indices must increase", line_no, tok.column);
      if (idx > cap) {
        throw ParseError("feature index " + std::to_string(idx) + " exceeds the dimension limit",
                         line_no, tok.column);
      }
      double val = 0;
      if (!parse_double(tok.text.substr(colon + 1), val) || !std::isfinite(val)) {
        throw ParseError("malformed feature value", line_no, tok.column + colon + 1);
      }
      prev = idx;
      row.emplace_back(static_cast<std::size_t>(idx), val);
    }
    if (options.max_dim == 0) dim = std::max<std::size_t>(dim, prev);
    raw_labels.push_back(label);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("no examples", line_no + 1, 1);
  if (rows.size() > kMaxDenseEntries / std::max<std::size_t>(dim, 1)) {
    throw ParseError("dense matrix of " + std::to_string(rows.size()) + " x " + std::to_string(dim) +
                         " exceeds the storage limit",
                     line_no + 1, 1);
  }

  Dataset<double> data;
  data.features = Matrix<double>::Zero(static_cast<Eigen::Index>(rows.size()),
                                       static_cast<Eigen::Index>(std::max<std::size_t>(dim, 1)));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& [idx, val] : rows[i]) {
      data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(idx - 1)) = val;
    }
  }
  remap_labels(raw_labels, data);
  return data;
}

Dataset<double> parse_libsvm(const std::string& text, const LibsvmOptions& options) {
  std::istringstream in(text);
  return parse_libsvm(in, options);
}

void write_libsvm(std::ostream& out, const Dataset<double>& data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int y = data.labels[i];
    out << format_real(static_cast<std::size_t>(y) < data.label_values.size()
                           ? data.label_values[static_cast<std::size_t>(y)]
                           : static_cast<double>(y));
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      const double v = data.features(static_cast<Eigen::Index>(i), j);
      if (v != 0) out << ' ' << (j + 1) << ':' << format_real(v);
    }
    out << '\n';
  }
}

Dataset<double> parse_csv(std::istream& in, const CsvOptions& options) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (options.header && line_no == 1) continue;
    if (blank(line)) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t end = std::min(line.find(',', start), line.size());
      std::string_view field(line.data() + start, end - start);
      std::size_t lead = 0;
      while (lead < field.size() && (field[lead] == ' ' || field[lead] == '\t')) ++lead;
      field.remove_prefix(lead);
      while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
      double v = 0;
      if (!parse_double(field, v) || !std::isfinite(v)) {
        throw ParseError("malformed number '" + std::string(field) + "'", line_no, start + lead + 1);
      }
      row.push_back(v);
      if (end == line.size()) break;
      start = end + 1;
    }
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " fields, got " +
                           std::to_string(row.size()),
                       line_no, 1);
    }
    if (width < 2) throw ParseError("need a label and at least one feature", line_no, 1);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("no examples", line_no + 1, 1);

  const int w = static_cast<int>(width);
  const int label_col = options.label_column < 0 ? w + options.label_column : options.label_column;
  if (label_col < 0 || label_col >= w) throw std::invalid_argument("parse_csv: label column out of range");

  Dataset<double> data;
  data.features.resize(static_cast<Eigen::Index>(rows.size()), w - 1);
  std::vector<double> raw(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Eigen::Index c = 0;
    for (int j = 0; j < w; ++j) {
      if (j == label_col) {
        raw[i] = rows[i][static_cast<std::size_t>(j)];
      } else {
        data.features(static_cast<Eigen::Index>(i), c++) = rows[i][static_cast<std::size_t>(j)];
      }
    }
  }
  remap_labels(raw, data);
  return data;
}

Dataset<double> parse_csv(const std::string& text, const CsvOptions& options) {
  std::istringstream in(text);
  return parse_csv(in, options);
}

void normalize_features(Matrix<double>& features, Normalization mode) {
  switch (mode) {
    case Normalization::none:
      return;
    case Normalization::standardize: {
      const auto rows = static_cast<double>(features.rows());
      for (Eigen::Index j = 0; j < features.cols(); ++j) {
        auto col = features.col(j);
        col.array() -= col.mean();
        const double sd = std::sqrt(col.squaredNorm() / rows);
        if (sd > 0) {
          col /= sd;
        } else {
          col.setZero();
        }
      }
      return;
    }
    case Normalization::unit_norm:
      for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const double nrm = features.row(i).norm();
        if (nrm > 0) features.row(i) /= nrm;
      }
      return;
  }
}

namespace {

constexpr const char* kTraceHeader = "t,alpha,eps,cost,opt_cost,cum_regret,subopt,rel_err,dx_norm";

}  // namespace

void write_trace_csv(std::ostream& out, const RunRecord& r) {
  out << kTraceHeader << '\n';
  for (std::size_t k = 0; k < r.steps(); ++k) {
    out << r.t[k];
    for (double v : {r.alpha[k], r.eps[k], r.cost[k], r.opt_cost[k], r.cum_regret[k], r.subopt[k],
                     r.rel_err[k], r.dx_norm[k]}) {
      out << ',' << format_real(v);
    }
    out << '\n';
  }
}

RunRecord read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty trace", 1, 1);
  strip_cr(line);
  if (line != kTraceHeader) throw ParseError("unexpected trace header", 1, 1);
  RunRecord r;
  std::vector<double>* cols[] = {&r.alpha, &r.eps, &r.cost, &r.opt_cost, &r.cum_regret,
                                 &r.subopt, &r.rel_err, &r.dx_norm};
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    std::size_t start = 0;
    for (std::size_t f = 0; f < 9; ++f) {
      const std::size_t end = std::min(line.find(',', start), line.size());
      if ((f < 8) == (end == line.size())) throw ParseError("expected 9 fields", line_no, start + 1);
      const std::string_view field(line.data() + start, end - start);
      if (f == 0) {
        std::uint64_t t = 0;
        if (!parse_index(field, t)) throw ParseError("malformed step", line_no, start + 1);
        r.t.push_back(t);
      } else {
        double v = 0;
        if (!parse_double(field, v)) throw ParseError("malformed number", line_no, start + 1);
        cols[f - 1]->push_back(v);
      }
      start = end + 1;
    }
  }
  r.full_metrics = std::any_of(r.cost.begin(), r.cost.end(), [](double v) { return !std::isnan(v); });
  return r;
}

void write_aggregate_csv(std::ostream& out, const AggregateTrace& a) {
  const std::pair<const char*, const AggregateColumn*> cols[] = {
      {"alpha", &a.alpha},           {"eps", &a.eps},         {"cost", &a.cost},
      {"opt_cost", &a.opt_cost},     {"cum_regret", &a.cum_regret},
      {"subopt", &a.subopt},         {"rel_err", &a.rel_err}, {"dx_norm", &a.dx_norm}};
  out << "passes,t";
  for (const auto& [name, col] : cols) out << ',' << name << "_mean," << name << "_std";
  out << '\n';
  for (std::size_t k = 0; k < a.t.size(); ++k) {
    out << format_real(a.passes[k]) << ',' << a.t[k];
    for (const auto& [name, col] : cols) {
      out << ',' << format_real(col->mean[k]) << ',' << format_real(col->std[k]);
    }
    out << '\n';
  }
}

}  // namespace avare
