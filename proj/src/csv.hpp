#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "ganad/errors.hpp"

namespace ganad::csv {

// Plain comma-separated text: no quoting, '#' lines ignored.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // -1 when absent.
    int column(const std::string& name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name)
                return static_cast<int>(i);
        return -1;
    }
};

inline std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

inline Table parse(const std::string& text, const std::string& origin)
{
    Table t;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        auto cells = split(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw FormatError(origin + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(t.header.size()) + " columns, got " + std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty())
        throw FormatError(origin + ": empty CSV");
    return t;
}

inline Table read(const std::filesystem::path& path) { return parse(io::read_text(path), path.string()); }

}  // namespace ganad::csv
