#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rfharvest::csv {

/// Shortest round-trip decimal text for a double.
std::string format(double v);

/// Writes one CSV row; fields are written verbatim.
void write_row(std::ostream& out, const std::vector<std::string>& fields);

struct Table {
    std::vector<std::string> header;
    /// Rows with their 1-based line numbers in the source file.
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

/// Reads a comma-separated file with a header line. Blank lines are skipped.
Table read(std::istream& in);
Table read_file(const std::string& path);

/// Parses a full-field double; returns false on trailing garbage.
bool parse_double(std::string_view text, double& out);

}  // namespace rfharvest::csv
