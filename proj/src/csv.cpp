#include "trim/csv.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "trim/error.hpp"

namespace trim {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return buf.data();
}

CsvWriter::CsvWriter(const std::vector<std::string>& header) { row(header); }

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  for (auto& s : cells) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

NdArray read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file: " + path);
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    std::vector<double> parsed(cells.size());
    bool numeric = true;
    for (std::size_t i = 0; i < cells.size(); ++i) numeric = numeric && parse_double(cells[i], parsed[i]);
    if (!numeric) {
      if (rows == 0 && values.empty()) continue;  // header
      throw ContractError(path + ":" + std::to_string(line_no) + ": non-numeric cell");
    }
    if (rows == 0) cols = parsed.size();
    if (parsed.size() != cols) throw DimensionError(path + ":" + std::to_string(line_no) + ": ragged row");
    values.insert(values.end(), parsed.begin(), parsed.end());
    ++rows;
  }
  if (rows == 0) throw DimensionError(path + ": no data rows");
  return NdArray::matrix(rows, cols, std::move(values));
}

void write_csv_matrix(const std::string& path, const NdArray& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << format_number(row[c]);
    }
    out << '\n';
  }
}

namespace {

constexpr std::array<char, 4> kMagic = {'T', 'R', 'M', 'A'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<unsigned char, 4> b = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b.data()), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

}  // namespace

void write_binary_array(const std::string& path, const NdArray& a) {
  if (a.rank() > 2) throw DimensionError("binary arrays support rank 1 or 2");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.write(kMagic.data(), 4);
  put_u32(out, static_cast<std::uint32_t>(a.rank()));
  put_u32(out, static_cast<std::uint32_t>(a.shape()[0]));
  put_u32(out, static_cast<std::uint32_t>(a.rank() == 2 ? a.shape()[1] : 1));
  for (double v : a.data()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b.data()), 8);
  }
}

NdArray read_binary_array(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open input file: " + path);
  std::array<unsigned char, 16> header{};
  if (!in.read(reinterpret_cast<char*>(header.data()), 16)) throw ContractError(path + ": truncated header");
  if (std::memcmp(header.data(), kMagic.data(), 4) != 0) throw ContractError(path + ": bad magic");
  const auto rank = get_u32(header.data() + 4);
  const auto d0 = get_u32(header.data() + 8), d1 = get_u32(header.data() + 12);
  if (rank < 1 || rank > 2 || d0 == 0 || d1 == 0 || (rank == 1 && d1 != 1)) {
    throw ContractError(path + ": invalid header dimensions");
  }
  const std::size_t count = std::size_t{d0} * d1;
  std::vector<double> data(count);
  std::array<unsigned char, 8> b{};
  for (auto& v : data) {
    if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw ContractError(path + ": truncated data");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
  }
  if (rank == 1) return NdArray({d0}, std::move(data));
  return NdArray({d0, d1}, std::move(data));
}

NdArray read_array(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0) return read_binary_array(path);
  return read_csv_matrix(path);
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << contents;
}

}  // namespace trim
