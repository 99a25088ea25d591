#include "choicenet/csvio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace choicenet::csvio {

namespace {

std::string strip(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

char detect_delimiter(const std::string& header) {
    if (header.find('\t') != std::string::npos) return '\t';
    if (header.find(';') != std::string::npos) return ';';
    if (header.find(',') != std::string::npos) return ',';
    return ' ';
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    if (delim == ' ') {
        std::istringstream iss(line);
        std::string tok;
        while (iss >> tok) out.push_back(tok);
        return out;
    }
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(strip(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(strip(cur));
    return out;
}

} // namespace

int Table::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);
    Table t;
    std::string line;
    char delim = 0;
    while (std::getline(in, line)) {
        std::string s = strip(line);
        if (s.empty() || s[0] == '#') continue;
        if (t.header.empty()) {
            delim = detect_delimiter(s);
            t.header = split(s, delim);
            continue;
        }
        t.rows.push_back(split(s, delim));
        if (t.rows.back().size() != t.header.size())
            throw ValidationError("row " + std::to_string(t.rows.size()) + " in " + path + " has " +
                                  std::to_string(t.rows.back().size()) + " fields, header has " +
                                  std::to_string(t.header.size()));
    }
    if (t.header.empty()) throw ValidationError("no header row in " + path);
    return t;
}

double parse_double(const std::string& cell, std::size_t row_index, const std::string& column) {
    double v = 0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        throw ValidationError("non-numeric value '" + cell + "' in column " + column + " at data row " +
                              std::to_string(row_index + 1));
    return v;
}

long long parse_int(const std::string& cell, std::size_t row_index, const std::string& column) {
    long long v = 0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec == std::errc{} && res.ptr == cell.data() + cell.size()) return v;
    // tolerate integer-valued floats such as "3.0"
    double d = parse_double(cell, row_index, column);
    if (std::nearbyint(d) != d)
        throw ValidationError("non-integer value '" + cell + "' in column " + column + " at data row " +
                              std::to_string(row_index + 1));
    return static_cast<long long>(d);
}

void write_provenance(std::ostream& os, const Provenance& p) {
    os << "# choicenet " << kVersion << "\n";
    os << "# config_hash=" << std::hex << p.config_hash << std::dec << " seed=" << p.seed << "\n";
}

} // namespace choicenet::csvio
