// Minimal CSV writer/reader used by every artifact the tool emits.
//
// Conventions: '#'-prefixed comment lines first (provenance, config hash),
// then one header row, then data rows.  Doubles are written with %.17g so a
// read-back reproduces the exact binary value and reruns diff byte-for-byte.
#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace phasegate {

class CsvWriter {
  public:
    explicit CsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    }

    void comment(const std::string& text) { out_ << "# " << text << "\n"; }

    void header(const std::vector<std::string>& names) {
        write_row_(names);
    }

    // Mixed row assembled by the caller; use num() for doubles.
    void row(const std::vector<std::string>& cells) { write_row_(cells); }

    void row(const std::vector<double>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(num(v));
        write_row_(cells);
    }

    static std::string num(double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }

  private:
    void write_row_(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }
    std::ofstream out_;
};

struct CsvTable {
    std::vector<std::string> comments;   // without the leading "# "
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    int column_index(const std::string& name) const {
        for (size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        throw std::runtime_error("csv column not found: " + name);
    }

    double value(size_t row, const std::string& name) const {
        return std::stod(rows.at(row).at(column_index(name)));
    }

    std::vector<double> column_values(const std::string& name) const {
        const int c = column_index(name);
        std::vector<double> vals;
        vals.reserve(rows.size());
        for (const auto& r : rows) vals.push_back(std::stod(r.at(c)));
        return vals;
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    CsvTable table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            size_t start = line.find_first_not_of("# ");
            table.comments.push_back(start == std::string::npos
                                         ? std::string{}
                                         : line.substr(start));
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!have_header) {
            table.columns = std::move(cells);
            have_header = true;
        } else {
            table.rows.push_back(std::move(cells));
        }
    }
    return table;
}

}  // namespace phasegate
