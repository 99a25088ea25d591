#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "choicenet/common.hpp"

namespace choicenet::csvio {

/// Raw delimited table: header row plus string cells. Lines starting with '#'
/// are provenance/comment lines and are skipped on read.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const; // -1 when absent
};

/// Reads a delimited text file. The delimiter is detected from the header
/// line (tab, semicolon, comma, or runs of spaces, in that order of priority).
Table read_table(const std::string& path);

double parse_double(const std::string& cell, std::size_t row_index, const std::string& column);
long long parse_int(const std::string& cell, std::size_t row_index, const std::string& column);

void write_provenance(std::ostream& os, const Provenance& p);

} // namespace choicenet::csvio
