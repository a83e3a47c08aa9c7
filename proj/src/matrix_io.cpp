#include "scl/matrix_io.hpp"

#include "scl/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace scl {

std::string format_decimal(double value) {
  char buf[40];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(len));
}

double parse_decimal(std::string_view text) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw FormatError("not a decimal number: '" + std::string(text) + "'");
  }
  return value;
}

namespace {

std::size_t parse_count(std::string_view text, const std::filesystem::path& path, std::size_t line) {
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw FormatError(path.string() + ":" + std::to_string(line) + ": bad integer field '" +
                      std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '\r') ++end;
    fields.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return fields;
}

}  // namespace

void write_matrix_file(const std::filesystem::path& path, const std::vector<Eigen::MatrixXd>& blocks) {
  std::string out;
  for (std::size_t r = 0; r < blocks.size(); ++r) {
    const auto& m = blocks[r];
    out += std::to_string(r);
    out += ' ';
    out += std::to_string(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        out += ' ';
        out += format_decimal(m(i, j));
      }
    }
    out += '\n';
  }
  write_text_file(path, out);
}

std::vector<Eigen::MatrixXd> read_matrix_file(const std::filesystem::path& path, Eigen::Index cols) {
  const std::string text = read_text_file(path);
  std::vector<Eigen::MatrixXd> blocks;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": truncated record");
    }
    const std::size_t id = parse_count(fields[0], path, line_no);
    if (id != blocks.size()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected record id " +
                        std::to_string(blocks.size()) + ", found " + std::to_string(id));
    }
    const auto rows = static_cast<Eigen::Index>(parse_count(fields[1], path, line_no));
    if (rows < 1) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": record has no rows");
    }
    const auto expected = static_cast<std::size_t>(rows * cols);
    if (fields.size() - 2 != expected) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(expected) + " values (" + std::to_string(rows) + "x" +
                        std::to_string(cols) + "), found " + std::to_string(fields.size() - 2));
    }
    Eigen::MatrixXd m(rows, cols);
    std::size_t f = 2;
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        try {
          m(i, j) = parse_decimal(fields[f++]);
        } catch (const FormatError& e) {
          throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!std::isfinite(m(i, j))) {
          throw FormatError(path.string() + ":" + std::to_string(line_no) + ": non-finite value");
        }
      }
    }
    blocks.push_back(std::move(m));
  }
  return blocks;
}

void write_dense_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::vector<Eigen::MatrixXd> rows;
  rows.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.emplace_back(m.row(i));
  write_matrix_file(path, rows);
}

Eigen::MatrixXd read_dense_matrix(const std::filesystem::path& path, Eigen::Index n) {
  const auto rows = read_matrix_file(path, n);
  if (static_cast<Eigen::Index>(rows.size()) != n) {
    throw FormatError(path.string() + ": expected " + std::to_string(n) + " rows, found " +
                      std::to_string(rows.size()));
  }
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (rows[static_cast<std::size_t>(i)].rows() != 1) {
      throw FormatError(path.string() + ": dense matrix record " + std::to_string(i) +
                        " must hold a single row");
    }
    m.row(i) = rows[static_cast<std::size_t>(i)].row(0);
  }
  return m;
}

Eigen::MatrixXd read_dense_matrix(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  Eigen::Index n = 0;
  while (std::getline(in, line)) {
    if (!split_fields(line).empty()) ++n;
  }
  if (n == 0) throw FormatError(path.string() + ": empty matrix file");
  return read_dense_matrix(path, n);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open input file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write output file: " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw UsageError("failed writing output file: " + path.string());
}

}  // namespace scl
