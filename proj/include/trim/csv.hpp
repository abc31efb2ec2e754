#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "trim/ndarray.hpp"

namespace trim {

/// 17 significant digits, enough to round-trip any double.
std::string format_number(double v);

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

/// Numeric CSV, rows = samples. A first line containing a non-numeric cell
/// is treated as a header. Returns a samples x columns matrix.
NdArray read_csv_matrix(const std::string& path);
void write_csv_matrix(const std::string& path, const NdArray& m);

// Raw little-endian float64 array with a 16-byte header:
//   bytes 0-3   magic "TRMA"
//   bytes 4-7   rank (1 or 2), uint32 LE
//   bytes 8-11  dim0, uint32 LE
//   bytes 12-15 dim1, uint32 LE (1 for rank 1)
NdArray read_binary_array(const std::string& path);
void write_binary_array(const std::string& path, const NdArray& a);

/// Dispatches on the extension: .bin -> binary, anything else -> CSV.
NdArray read_array(const std::string& path);

void write_text_file(const std::string& path, const std::string& contents);

}  // namespace trim
