#pragma once

// Minimal locale-independent CSV emission (header row, '.' decimal point).

#include <initializer_list>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace gpdf {

/// Shortest round-trip decimal form; "nan", "inf" and "-inf" for non-finite values.
std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header);

  void row(std::span<const double> values);
  void row(std::initializer_list<double> values) { row(std::span<const double>(values.begin(), values.size())); }
  /// Cells are quoted when they contain a comma, quote or newline.
  void row(const std::vector<std::string>& cells);

  std::size_t columns() const { return columns_; }

 private:
  void emit(const std::vector<std::string>& cells);
  std::ostream& out_;
  std::size_t columns_;
};

}  // namespace gpdf
