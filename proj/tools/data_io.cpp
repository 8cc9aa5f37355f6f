#include "data_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace nps::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

bool parse_number(const std::string& cell, double* out) {
  if (cell.empty()) return false;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || errno == ERANGE) return false;
  if (!std::isfinite(v)) return false;
  *out = v;
  return true;
}

}  // namespace

DataColumn load_csv_column(const std::string& path,
                           const std::string& column_spec) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path + "'");

  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    rows.push_back(split_row(line));
  }
  if (rows.empty()) throw IngestError("'" + path + "' has no rows");

  // Header detection: a first row with any non-numeric cell is a header.
  bool has_header = false;
  for (const auto& cell : rows.front()) {
    double v;
    if (!parse_number(cell, &v)) {
      has_header = true;
      break;
    }
  }

  const std::size_t width = rows.front().size();
  std::size_t col = 0;
  if (column_spec.empty()) {
    if (width != 1) {
      throw IngestError("'" + path + "' has " + std::to_string(width) +
                        " columns; pick one with --column");
    }
  } else {
    bool found = false;
    if (has_header) {
      for (std::size_t j = 0; j < width; ++j) {
        if (rows.front()[j] == column_spec) {
          col = j;
          found = true;
          break;
        }
      }
    }
    if (!found) {
      try {
        std::size_t used = 0;
        const long idx = std::stol(column_spec, &used);
        if (used == column_spec.size() && idx >= 0 &&
            static_cast<std::size_t>(idx) < width) {
          col = static_cast<std::size_t>(idx);
          found = true;
        }
      } catch (const std::exception&) {
      }
    }
    if (!found) {
      throw IngestError("column '" + column_spec + "' not found in '" + path +
                        "'");
    }
  }

  DataColumn out;
  out.source = path;
  out.column = column_spec.empty() ? "0" : column_spec;
  std::vector<std::size_t> bad_rows;
  for (std::size_t i = has_header ? 1 : 0; i < rows.size(); ++i) {
    double v;
    if (rows[i].size() <= col || !parse_number(rows[i][col], &v)) {
      bad_rows.push_back(i + 1);  // 1-based file row number
      continue;
    }
    out.values.push_back(v);
  }
  if (!bad_rows.empty()) {
    std::string msg = "'" + path + "': rejected " +
                      std::to_string(bad_rows.size()) +
                      " non-numeric row(s) at line(s)";
    const std::size_t show = std::min<std::size_t>(bad_rows.size(), 8);
    for (std::size_t i = 0; i < show; ++i) {
      msg += (i ? "," : "") + std::string(" ") + std::to_string(bad_rows[i]);
    }
    if (bad_rows.size() > show) msg += ", ...";
    throw IngestError(msg);
  }
  if (out.values.empty()) {
    throw IngestError("'" + path + "' has no data rows");
  }
  out.n = out.values.size();
  return out;
}

}  // namespace nps::cli
