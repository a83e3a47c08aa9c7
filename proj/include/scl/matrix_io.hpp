#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace scl {

/// 17 significant digits: enough to reconstruct every finite double exactly.
std::string format_decimal(double value);

/// Parses a decimal produced by format_decimal (or any strtod-style literal).
double parse_decimal(std::string_view text);

/// Line-oriented matrix file. Record r is
///   `<r> <rows> v(0,0) v(0,1) ... v(rows-1,cols-1)`
/// with values row-major and space separated. The column count is not stored;
/// readers receive it from the owning manifest.
void write_matrix_file(const std::filesystem::path& path, const std::vector<Eigen::MatrixXd>& blocks);
std::vector<Eigen::MatrixXd> read_matrix_file(const std::filesystem::path& path, Eigen::Index cols);

/// Dense N x N matrix stored as N single-row records.
void write_dense_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_dense_matrix(const std::filesystem::path& path, Eigen::Index n);
/// Same, with N taken from the number of records.
Eigen::MatrixXd read_dense_matrix(const std::filesystem::path& path);

/// Reads the whole file; throws UsageError if it does not exist.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace scl
