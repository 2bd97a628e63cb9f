#pragma once

// Strict TSV layer shared by all corpus file formats: UTF-8, '\t' separators,
// '\n' line endings, exactly one header row. Cells may not contain tabs or
// newlines, so no quoting is needed and round-trips are byte-exact.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "convrank/common.hpp"

namespace convrank {

struct TsvRow {
    std::size_t line_number = 0;  // 1-based, header is line 1
    std::vector<std::string> cells;
};

struct TsvFile {
    std::vector<std::string> columns;
    std::vector<TsvRow> rows;
};

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failure on " + path);
    return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failure on " + path);
}

namespace detail {

inline std::vector<std::string> split_tabs(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            cells.emplace_back(line.substr(start));
            break;
        }
        cells.emplace_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return cells;
}

}  // namespace detail

inline TsvFile parse_tsv(const std::string& path, const std::vector<std::string>& expected_columns) {
    std::string text = read_text_file(path);
    TsvFile out;

    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line;
        if (nl == std::string::npos) {
            if (pos == text.size()) break;  // no trailing newline on last line is fine
            line = std::string_view(text).substr(pos);
            pos = text.size() + 1;
        } else {
            line = std::string_view(text).substr(pos, nl - pos);
            pos = nl + 1;
        }
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;

        if (!saw_header) {
            out.columns = detail::split_tabs(line);
            if (!expected_columns.empty() && out.columns != expected_columns) {
                std::string want;
                for (const auto& c : expected_columns) {
                    if (!want.empty()) want += ", ";
                    want += c;
                }
                throw ParseError(path + ":1: unexpected header, want columns: " + want);
            }
            saw_header = true;
            continue;
        }
        if (line.empty()) continue;  // tolerate blank lines between records

        TsvRow row;
        row.line_number = line_no;
        row.cells = detail::split_tabs(line);
        if (row.cells.size() != out.columns.size()) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(out.columns.size()) + " columns, got " +
                             std::to_string(row.cells.size()));
        }
        out.rows.push_back(std::move(row));
    }
    if (!saw_header) throw ParseError(path + ":1: missing header row");
    return out;
}

class TsvWriter {
public:
    explicit TsvWriter(std::vector<std::string> columns) : n_columns_(columns.size()) {
        append_row(columns);
    }

    void append_row(const std::vector<std::string>& cells) {
        if (cells.size() != n_columns_) {
            throw DataError("row has " + std::to_string(cells.size()) + " cells, want " +
                            std::to_string(n_columns_));
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const std::string& c = cells[i];
            if (c.find('\t') != std::string::npos || c.find('\n') != std::string::npos) {
                throw DataError("cell contains tab or newline: " + detail::quoted(c));
            }
            if (i) buf_.push_back('\t');
            buf_.append(c);
        }
        buf_.push_back('\n');
    }

    const std::string& str() const { return buf_; }

    void save(const std::string& path) const { write_text_file(path, buf_); }

private:
    std::size_t n_columns_;
    std::string buf_;
};

// Shortest decimal form that parses back to the same double.
inline std::string format_real(double v) {
    char buf[64];
    for (int prec = 9; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (detail::parse_real(buf, "roundtrip") == v) break;
    }
    return buf;
}

}  // namespace convrank
