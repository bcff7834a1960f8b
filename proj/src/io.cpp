#include "rtbm/io.hpp"

#include "rtbm/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>
#include <vector>

namespace rtbm::io {

void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("cannot open '" + tmp.string() + "' for writing");
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
      throw Error("write to '" + tmp.string() + "' failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename onto '" + path.string() + "': " + ec.message());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) {
    throw Error("double formatting failed");
  }
  return std::string(buf, end);
}

std::string to_csv(const Eigen::MatrixXd& rows) {
  std::string out;
  out.reserve(static_cast<std::size_t>(rows.size()) * 20);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(rows(i, j));
    }
    out += '\n';
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Eigen::MatrixXd parse_csv(std::string_view text) {
  std::vector<double> values;
  Eigen::Index width = -1;
  Eigen::Index rows = 0;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;

    Eigen::Index fields = 0;
    while (true) {
      auto comma = line.find(',');
      std::string_view field = trim(line.substr(0, comma));
      if (!field.empty() && field.front() == '+') field.remove_prefix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw Error("csv line " + std::to_string(line_no) + ": bad number '" + std::string(field) + "'");
      }
      values.push_back(v);
      ++fields;
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    if (width < 0) {
      width = fields;
    } else if (fields != width) {
      throw Error("csv line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                  " fields, got " + std::to_string(fields));
    }
    ++rows;
  }
  if (rows == 0) {
    return Eigen::MatrixXd(0, 0);
  }
  return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(),
                                                                                            rows, width);
}

void save_csv(const Eigen::MatrixXd& rows, const std::filesystem::path& path) {
  write_atomic(path, to_csv(rows));
}

Eigen::MatrixXd load_csv(const std::filesystem::path& path) {
  return parse_csv(read_text(path));
}

}  // namespace rtbm::io
