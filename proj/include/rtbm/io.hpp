#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <string_view>

namespace rtbm::io {

/// Writes `contents` to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_text(const std::filesystem::path& path);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

/// Headerless comma-separated matrix, one row per line.
std::string to_csv(const Eigen::MatrixXd& rows);
Eigen::MatrixXd parse_csv(std::string_view text);

void save_csv(const Eigen::MatrixXd& rows, const std::filesystem::path& path);
Eigen::MatrixXd load_csv(const std::filesystem::path& path);

}  // namespace rtbm::io
