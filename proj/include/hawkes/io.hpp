#pragma once

// Dense matrix and vector CSV files, and small file helpers.

#include <hawkes/common.hpp>
#include <hawkes/events.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace hawkes {

/// Comma-separated rows; blank lines and lines starting with '#' are skipped.
inline Matrix read_matrix_csv(std::istream& in, const std::string& name = "matrix") {
  std::vector<std::vector<double>> rows;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto s = detail::trim(raw);
    if (s.empty() || s.front() == '#') continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const auto comma = s.find(',', start);
      const auto cell = s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      const auto v = detail::parse_double(cell);
      if (!v) throw DataError(name + " line " + std::to_string(line) + ": bad number '" + std::string(cell) + "'");
      row.push_back(*v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError(name + " line " + std::to_string(line) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

inline Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_matrix_csv(in, path.string());
}

inline void write_matrix_csv(std::ostream& out, const Matrix& m) {
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

inline void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_matrix_csv(out, m);
}

inline EventStream read_events(const std::filesystem::path& path, std::optional<std::size_t> p = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  const auto fmt = path.extension() == ".jsonl" ? EventFormat::Jsonl : EventFormat::Csv;
  return ingest(in, fmt, p);
}

inline void write_events(const std::filesystem::path& path, const EventStream& stream) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  if (path.extension() == ".jsonl") write_events_jsonl(out, stream);
  else write_events_csv(out, stream);
}

/// `%.17g` formatting for CSV cells.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace hawkes
