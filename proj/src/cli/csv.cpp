#include "hetdeconv/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hetdeconv::csv {

std::string format_double(double value) {
    if (std::isnan(value)) return "NA";
    if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void Writer::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out_ << ',';
        out_ << quote(fields[i]);
    }
    out_ << '\n';
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return std::string::npos;
}

Table parse(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::size_t> record_lines;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t record_line = 1;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        // skip blank lines
        if (!(record.size() == 1 && record[0].empty())) {
            records.push_back(std::move(record));
            record_lines.push_back(record_line);
        }
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        if (c == '"') {
            if (field_started && !field.empty()) {
                throw std::runtime_error("line " + std::to_string(line) + ": stray quote inside field");
            }
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r') {
            continue;
        } else if (c == '\n') {
            end_record();
            ++line;
            record_line = line;
        } else {
            field += c;
            field_started = true;
        }
    }
    if (in_quotes) throw std::runtime_error("line " + std::to_string(line) + ": unterminated quoted field");
    if (!field.empty() || !record.empty()) end_record();

    if (records.empty()) throw std::runtime_error("CSV document has no header row");
    Table table;
    table.header = std::move(records.front());
    for (auto& h : table.header) {
        const auto b = h.find_first_not_of(" \t");
        const auto e = h.find_last_not_of(" \t");
        h = b == std::string::npos ? std::string() : h.substr(b, e - b + 1);
    }
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != table.header.size()) {
            throw std::runtime_error("line " + std::to_string(record_lines[r]) + ": expected " +
                                     std::to_string(table.header.size()) + " fields, found " +
                                     std::to_string(records[r].size()));
        }
        table.rows.push_back(std::move(records[r]));
        table.lines.push_back(record_lines[r]);
    }
    return table;
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

}  // namespace hetdeconv::csv
