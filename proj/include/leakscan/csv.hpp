#pragma once

// Minimal RFC 4180 CSV: comma separated, fields quoted only when they hold a
// comma, quote, CR or LF. Output lines end in '\n'.

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace leakscan::csv {

std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

class Reader {
public:
    Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    // Next record, or nullopt at end of input. Throws Error(Format) on an
    // unterminated quote.
    std::optional<std::vector<std::string>> next();

    // 1-based line number where the last returned record started.
    std::size_t line() const noexcept { return record_line_; }
    const std::string& source() const noexcept { return source_; }

private:
    std::istream& in_;
    std::string source_;
    std::size_t line_ = 1;
    std::size_t record_line_ = 0;
};

// Reads a whole file, checks the header against `expected`, and returns the
// data rows. Every row must have expected.size() fields.
std::vector<std::vector<std::string>> read_table(const std::filesystem::path& path,
                                                 const std::vector<std::string>& expected);

}  // namespace leakscan::csv
