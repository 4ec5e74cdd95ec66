#include "nhl/csv.hpp"

#include <cstdio>
#include <sstream>

#include "nhl/error.hpp"

namespace nhl {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header, bool append)
    : path_(path) {
    const bool existed = append && std::filesystem::exists(path) && std::filesystem::file_size(path) > 0;
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_) fail("io_error", "cannot open '" + path.string() + "' for writing");
    if (!existed && !header.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }
}

void CsvWriter::row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_double(values[i]);
    out_ << '\n';
    if (!out_) fail("io_error", "write to '" + path_.string() + "' failed");
}

void CsvWriter::raw_line(const std::string& line) {
    out_ << line << '\n';
    if (!out_) fail("io_error", "write to '" + path_.string() + "' failed");
}

std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("io_error", "cannot open '" + path.string() + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                vals.push_back(std::stod(cell, &used));
                if (used != cell.size()) numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;
            }
            fail("parse_error", "non-numeric row in '" + path.string() + "'");
        }
        first = false;
        rows.push_back(std::move(vals));
    }
    return rows;
}

}  // namespace nhl
