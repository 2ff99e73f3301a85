#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hetdeconv::csv {

/// %.17g, so values survive a text round trip. NaN prints as NA.
std::string format_double(double value);

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string quote(std::string_view field);

/// Writes RFC 4180 records with LF line endings.
class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void row(const std::vector<std::string>& fields);

private:
    std::ostream& out_;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    /// 1-based source line of each row, for diagnostics.
    std::vector<std::size_t> lines;

    /// Column index by header name, or npos.
    std::size_t column(std::string_view name) const;
};

/// Parses a CSV document with a header row. Accepts LF or CRLF and quoted
/// fields. Throws std::runtime_error with the line number on malformed input.
Table parse(std::string_view text);
Table read_file(const std::string& path);

}  // namespace hetdeconv::csv
