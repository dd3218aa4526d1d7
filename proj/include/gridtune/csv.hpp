#pragma once

// CSV tables: header row, fixed column order, doubles with 17 significant
// digits, infinities as `inf` / `-inf`, not-applicable values as `nan`.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gridtune/errors.hpp"

namespace gridtune::csv {

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw InputError("not a number: '" + s + "'");
    return v;
}

class Table {
  public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {
        for (const auto& h : header_) check_field(h);
    }

    /// One cell, formatted on construction.
    struct Cell {
        Cell(double v) : text(format_double(v)) {}
        Cell(int v) : text(std::to_string(v)) {}
        Cell(std::size_t v) : text(std::to_string(v)) {}
        Cell(bool v) : text(v ? "true" : "false") {}
        Cell(const char* v) : text(v) {}
        Cell(std::string v) : text(std::move(v)) {}
        std::string text;
    };

    void add_row(std::initializer_list<Cell> cells) {
        if (cells.size() != header_.size())
            throw InputError("CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                             std::to_string(header_.size()));
        std::vector<std::string> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            check_field(c.text);
            row.push_back(c.text);
        }
        rows_.push_back(std::move(row));
    }

    const std::vector<std::string>& header() const noexcept { return header_; }
    const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }

    std::size_t column(const std::string& name) const {
        for (std::size_t k = 0; k < header_.size(); ++k)
            if (header_[k] == name) return k;
        throw InputError("no CSV column '" + name + "'");
    }
    const std::string& cell(std::size_t row, const std::string& name) const { return rows_.at(row).at(column(name)); }
    double number(std::size_t row, const std::string& name) const { return parse_double(cell(row, name)); }

    std::string str() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t k = 0; k < cells.size(); ++k) {
                if (k) out += ',';
                out += cells[k];
            }
            out += '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        return out;
    }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw InputError("cannot write " + path);
        f << str();
    }

    static Table parse(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        if (!std::getline(in, line)) throw InputError("empty CSV document");
        Table t(split(line));
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto cells = split(line);
            if (cells.size() != t.header_.size()) throw InputError("ragged CSV row");
            t.rows_.push_back(std::move(cells));
        }
        return t;
    }

  private:
    static void check_field(const std::string& s) {
        if (s.find_first_of(",\"\n\r") != std::string::npos)
            throw InputError("CSV field contains a reserved character: '" + s + "'");
    }

    static std::vector<std::string> split(const std::string& line) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                out.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur += c;
            }
        }
        out.push_back(cur);
        return out;
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace gridtune::csv
