#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace nhl {

// Minimal CSV writer. Doubles are printed with 17 significant digits so that
// files round-trip exactly and identical runs produce identical bytes.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header,
              bool append = false);

    void row(const std::vector<double>& values);
    void raw_line(const std::string& line);

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

std::string format_double(double v);

// Reads a numeric CSV (skipping '#' comment lines and a non-numeric header).
std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path);

}  // namespace nhl
