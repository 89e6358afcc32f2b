#pragma once

#include "ocm/errors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

namespace ocm {

/// A rectangular table of already-formatted cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

/// Locale-independent formatting with 17 significant digits.
inline std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline std::string format_int(long long value) { return std::to_string(value); }

namespace detail {

inline std::string csv_escape(const std::string& cell) {
    if (cell.find_first_of(",\"\n\r") == std::string::npos)
        return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline void write_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i)
            os << ',';
        os << csv_escape(cells[i]);
    }
    os << '\n';
}

} // namespace detail

inline void write_csv(const CsvTable& table, std::ostream& os) {
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        if (table.rows[r].size() != table.header.size())
            throw ArgumentError("csv row " + std::to_string(r) + " has " + std::to_string(table.rows[r].size()) +
                                " cells, header has " + std::to_string(table.header.size()));
    detail::write_line(os, table.header);
    for (const auto& row : table.rows)
        detail::write_line(os, row);
}

inline std::string to_csv_string(const CsvTable& table) {
    std::ostringstream os;
    write_csv(table, os);
    return os.str();
}

/// Writes `table` to `path` (binary mode, LF line endings).
inline void emit_csv(const CsvTable& table, const std::string& path) {
    const std::string text = to_csv_string(table);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot open '" + path + "' for writing");
    out << text;
    out.flush();
    if (!out)
        throw Error("failed writing '" + path + "'");
}

/// Parses RFC 4180 text; the first record becomes the header.
inline CsvTable parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string cell;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        any = true;
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            record.push_back(std::move(cell));
            cell.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n')
                ++i;
            record.push_back(std::move(cell));
            cell.clear();
            records.push_back(std::move(record));
            record.clear();
            any = false;
        } else {
            cell += c;
        }
    }
    if (quoted)
        throw ArgumentError("unterminated quoted csv field");
    if (any) {
        record.push_back(std::move(cell));
        records.push_back(std::move(record));
    }
    CsvTable table;
    if (records.empty())
        return table;
    table.header = std::move(records.front());
    table.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
    return table;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

inline double parse_double(const std::string& s) {
    double value = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ArgumentError("not a number: '" + s + "'");
    return value;
}

} // namespace ocm
