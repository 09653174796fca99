#pragma once

// Dataset ingestion (LIBSVM sparse text, dense CSV), feature normalization,
// and trace / summary serialization.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "avare/metrics.hpp"
#include "avare/problems.hpp"

namespace avare {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error(what + " at line " + std::to_string(line) + ", column " +
                           std::to_string(column)),
        line_(line),
        column_(column) {}
  // 1-based.
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct LibsvmOptions {
  // 0: infer from the largest index seen. Otherwise the matrix has exactly
  // this many columns and larger indices are errors.
  std::size_t max_dim = 0;
};

/// Lines "label idx:val idx:val ..." with strictly increasing 1-based indices.
/// Blank lines are skipped. Distinct label values are sorted and mapped to
/// 0..K-1 (so {-1, +1} becomes {0, 1}).
Dataset<double> parse_libsvm(std::istream& in, const LibsvmOptions& options = {});
Dataset<double> parse_libsvm(const std::string& text, const LibsvmOptions& options = {});

/// Canonical form: original label value, then non-zero entries only, all
/// numbers at 17 significant digits, single spaces, one line per example.
void write_libsvm(std::ostream& out, const Dataset<double>& data);

struct CsvOptions {
  bool header = false;
  // Column holding the label; negative counts from the end (-1 = last).
  int label_column = 0;
};

Dataset<double> parse_csv(std::istream& in, const CsvOptions& options = {});
Dataset<double> parse_csv(const std::string& text, const CsvOptions& options = {});

enum class Normalization { none, standardize, unit_norm };

/// standardize: each column to mean 0 and unit population variance
/// (constant columns become 0). unit_norm: each non-zero row to norm 1.
void normalize_features(Matrix<double>& features, Normalization mode);

inline constexpr int kSchemaVersion = 1;

/// Header t,alpha,eps,cost,opt_cost,cum_regret,subopt,rel_err,dx_norm;
/// reals at 17 significant digits, absent values as nan.
void write_trace_csv(std::ostream& out, const RunRecord& record);
RunRecord read_trace_csv(std::istream& in);

/// passes, t, then <column>_mean and <column>_std per trace column.
void write_aggregate_csv(std::ostream& out, const AggregateTrace& trace);

// Shortest exact text for a double ("%.17g").
std::string format_real(double v);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace avare
