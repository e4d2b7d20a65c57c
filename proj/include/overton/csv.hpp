#pragma once

#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "overton/error.hpp"

namespace overton::csv {

struct Row {
    std::size_t line = 0;  // 1-based physical line where the record starts
    std::vector<std::string> fields;
};

/// Header-addressed table. Column lookups are by name so files may order
/// columns freely; extra columns are ignored.
class Table {
public:
    std::string path;
    std::vector<std::string> header;
    std::vector<Row> rows;

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw DataError(DataError::Kind::schema,
                        path + ":1: missing required column '" + std::string(name) + "'");
    }

    [[noreturn]] void fail(const Row& row, std::size_t col, const std::string& why) const {
        throw DataError(DataError::Kind::schema, path + ":" + std::to_string(row.line) + ":" +
                                                     std::to_string(col + 1) + " (" + header[col] +
                                                     "): " + why);
    }
};

/// RFC 4180 parser: quoted fields, doubled quotes, embedded newlines, CRLF.
inline std::vector<Row> parse(std::string_view text, const std::string& origin) {
    std::vector<Row> rows;
    Row current;
    std::string field;
    std::size_t line = 1;
    current.line = 1;
    bool in_quotes = false;
    bool field_started = false;
    bool row_has_content = false;

    auto end_field = [&] {
        current.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        if (row_has_content || !current.fields.empty() || field_started) {
            end_field();
            rows.push_back(std::move(current));
        }
        current = Row{};
        current.line = line;
        row_has_content = false;
    };

    if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty())
                    throw DataError(DataError::Kind::schema,
                                    origin + ":" + std::to_string(line) + ": stray quote in field");
                in_quotes = true;
                field_started = true;
                row_has_content = true;
                break;
            case ',':
                end_field();
                row_has_content = true;
                break;
            case '\r':
                break;
            case '\n':
                ++line;
                end_row();
                break;
            default:
                field.push_back(c);
                field_started = true;
                row_has_content = true;
        }
    }
    if (in_quotes)
        throw DataError(DataError::Kind::schema, origin + ": unterminated quoted field");
    end_row();
    return rows;
}

inline Table read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataError::Kind::missing_file, "cannot open " + path);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto rows = parse(text, path);
    if (rows.empty()) throw DataError(DataError::Kind::schema, path + ": missing header row");
    Table table;
    table.path = path;
    table.header = std::move(rows.front().fields);
    rows.erase(rows.begin());
    for (const auto& row : rows) {
        if (row.fields.size() != table.header.size())
            throw DataError(DataError::Kind::schema,
                            path + ":" + std::to_string(row.line) + ": expected " +
                                std::to_string(table.header.size()) + " fields, found " +
                                std::to_string(row.fields.size()));
    }
    table.rows = std::move(rows);
    return table;
}

inline std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << quote(fields[i]);
    }
    out << '\n';
}

}  // namespace overton::csv
