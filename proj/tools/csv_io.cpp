#include "csv_io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace sapt::cli {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r')) cell.pop_back();
        size_t b = 0;
        while (b < cell.size() && cell[b] == ' ') ++b;
        cells.push_back(cell.substr(b));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_number(const std::string& s, const std::string& what, size_t row, size_t col) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || s.empty()) {
        std::ostringstream os;
        os << what << ": row " << row << ", column " << col << ": cannot parse '" << s
           << "' as a number";
        throw ValidationError(os.str());
    }
    return v;
}

}  // namespace

Table read_table(const std::string& path, const std::string& label_name, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + what + " file '" + path + "'");
    Table t;
    std::vector<std::vector<double>> rows;
    std::string line;
    size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_line(line);
        if (!have_header) {
            if (cells.size() < 2) {
                throw ValidationError(what + ": header on line " + std::to_string(lineno) +
                                      " needs a label column and at least one data column");
            }
            if (!label_name.empty() && cells[0] != label_name) {
                throw ValidationError(what + ": first header column must be '" + label_name +
                                      "', found '" + cells[0] + "'");
            }
            t.header.assign(cells.begin() + 1, cells.end());
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size() + 1) {
            throw ValidationError(what + ": row " + std::to_string(lineno) + " has " +
                                  std::to_string(cells.size()) + " columns, expected " +
                                  std::to_string(t.header.size() + 1));
        }
        t.row_labels.push_back(cells[0]);
        std::vector<double> r;
        for (size_t j = 1; j < cells.size(); ++j) r.push_back(parse_number(cells[j], what, lineno, j + 1));
        rows.push_back(std::move(r));
    }
    if (!have_header) throw ValidationError(what + ": file '" + path + "' has no header");
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
        for (size_t j = 0; j < rows[i].size(); ++j) {
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return t;
}

Table read_panel_csv(const std::string& path) { return read_table(path, "time", "panel"); }
Table read_factors_csv(const std::string& path) { return read_table(path, "time", "factors"); }

Table read_square_csv(const std::string& path, const std::string& what) {
    Table t = read_table(path, "id", what);
    if (t.values.rows() != t.values.cols()) {
        throw ValidationError(what + ": expected a square matrix, got " +
                              std::to_string(t.values.rows()) + " rows and " +
                              std::to_string(t.values.cols()) + " columns");
    }
    for (size_t i = 0; i < t.row_labels.size(); ++i) {
        if (t.row_labels[i] != t.header[i]) {
            throw ValidationError(what + ": row " + std::to_string(i + 1) + " id '" + t.row_labels[i] +
                                  "' does not match column id '" + t.header[i] + "'");
        }
    }
    return t;
}

GeoLocations read_locations_csv(const std::string& path) {
    Table t = read_table(path, "id", "locations");
    if (t.header.size() != 2 || t.header[0] != "lat" || t.header[1] != "lon") {
        throw ValidationError("locations: header must be id,lat,lon");
    }
    GeoLocations g;
    g.ids = t.row_labels;
    g.lat = t.values.col(0);
    g.lon = t.values.col(1);
    g.validate();
    return g;
}

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_text(const std::string& path, const std::string& content) {
    std::error_code ec;
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent, ec);
    if (ec) throw IoError("cannot create directory '" + parent.string() + "': " + ec.message());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << content;
    if (!out) throw IoError("write failed for '" + path + "'");
}

void write_table(const std::string& path, const std::vector<std::string>& comments,
                 const std::vector<std::string>& header, const std::vector<std::string>& labels,
                 const Matrix& values) {
    std::ostringstream os;
    for (const auto& c : comments) os << "# " << c << '\n';
    for (size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << header[j];
    os << '\n';
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        os << labels[static_cast<size_t>(i)];
        for (Eigen::Index j = 0; j < values.cols(); ++j) os << ',' << format_number(values(i, j));
        os << '\n';
    }
    write_text(path, os.str());
}

}  // namespace sapt::cli
