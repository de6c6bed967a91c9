/** @file csv_io.hpp
 *  @brief CSV ingestion and emission for panels, factors, weights and
 *  locations. Lines starting with '#' are comments.
 */
#pragma once

#include "sapt/scapm.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace sapt::cli {

/// File-system failure (maps to exit code 4).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Table {
    std::vector<std::string> header;      // column names after the label column
    std::vector<std::string> row_labels;  // first-column values
    Matrix values;
};

/// Reads a labelled numeric table. If label_name is nonempty the first header
/// cell must equal it.
Table read_table(const std::string& path, const std::string& label_name, const std::string& what);

/// Panel CSV: header "time,<unit ids>".
Table read_panel_csv(const std::string& path);
/// Factors CSV: header "time,<factor ids>".
Table read_factors_csv(const std::string& path);
/// Dense N x N CSV with header "id,<ids>" and matching row ids.
Table read_square_csv(const std::string& path, const std::string& what);
GeoLocations read_locations_csv(const std::string& path);

/// 17 significant digits.
std::string format_number(double x);

/// Writes comment lines, header and rows to `path` (creating parent dirs).
void write_table(const std::string& path, const std::vector<std::string>& comments,
                 const std::vector<std::string>& header, const std::vector<std::string>& labels,
                 const Matrix& values);

void write_text(const std::string& path, const std::string& content);

}  // namespace sapt::cli
