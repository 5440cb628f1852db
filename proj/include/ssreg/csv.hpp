#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ssreg/dataset.hpp"
#include "ssreg/types.hpp"

namespace ssreg {

/// Shortest representation that round-trips through a double.
std::string format_double(double value);

/// Parsed CSV: header row plus string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Reads a comma-separated file with a required header row. Throws DataError
/// with line numbers on malformed content.
CsvTable read_csv(const std::string& path);

/// Writes rows under a header; numeric cells should already be formatted.
void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::string>& rows);

/// Loads labeled (+ optional unlabeled) CSVs into an uncentered Dataset.
/// The labeled file must contain `response`; both files must share covariate
/// headers. Missing covariate cells (empty or NA) are mean-imputed across the
/// pooled rows when `impute_mean` is set and rejected otherwise.
Dataset load_dataset(const std::string& labeled_path, const std::string& unlabeled_path,
                     const std::string& response, bool impute_mean,
                     std::vector<std::string>* covariate_names = nullptr);

}  // namespace ssreg
