#include "leakscan/csv.hpp"

#include <fstream>

#include <fmt/format.h>

#include "leakscan/error.hpp"

namespace leakscan::csv {

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out;
    out.reserve(field.size() + 2);
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.put(',');
        out << escape(fields[i]);
    }
    out.put('\n');
}

std::optional<std::vector<std::string>> Reader::next() {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool any = false;
    record_line_ = line_;
    for (int ch = in_.get(); ch != std::char_traits<char>::eof(); ch = in_.get()) {
        const char c = static_cast<char>(ch);
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in_.peek() == '"') {
                    in_.get();
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line_;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            ++line_;
            fields.push_back(std::move(field));
            return fields;
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    if (quoted) fail(ErrorKind::Format, fmt::format("{}:{}: unterminated quoted field", source_, record_line_));
    if (!any) return std::nullopt;
    fields.push_back(std::move(field));
    return fields;
}

std::vector<std::vector<std::string>> read_table(const std::filesystem::path& path,
                                                 const std::vector<std::string>& expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Storage, fmt::format("{}: cannot open", path.string()));
    Reader reader(in, path.string());
    const auto header = reader.next();
    if (!header || *header != expected) {
        fail(ErrorKind::Schema, fmt::format("{}: expected header '{}'", path.string(), fmt::join(expected, ",")));
    }
    std::vector<std::vector<std::string>> rows;
    while (auto row = reader.next()) {
        if (row->size() == 1 && row->front().empty()) continue;  // blank line
        if (row->size() != expected.size()) {
            fail(ErrorKind::Schema, fmt::format("{}:{}: expected {} fields, found {}", path.string(),
                                                reader.line(), expected.size(), row->size()));
        }
        rows.push_back(std::move(*row));
    }
    return rows;
}

}  // namespace leakscan::csv
