#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nps::cli {

// One numeric column pulled out of a CSV file.
struct DataColumn {
  std::vector<double> values;
  std::string source;
  std::string column;
  std::size_t n = 0;
};

// Ingestion failure with row-level diagnostics in what().
struct IngestError : std::runtime_error {
  explicit IngestError(const std::string& msg) : std::runtime_error(msg) {}
};

// Reads a CSV file and extracts one column as finite doubles.
//
// The first row is treated as a header when any of its cells fails to parse
// as a number. column_spec selects the column by header name or by 0-based
// index; an empty spec is allowed only for single-column files. Rows whose
// selected cell is missing or non-numeric (NaN and infinities included) are
// rejected: the file is refused with a count and the offending row numbers.
DataColumn load_csv_column(const std::string& path,
                           const std::string& column_spec);

}  // namespace nps::cli
