#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "yieldcast/core/error.hpp"
#include "yieldcast/core/text.hpp"

namespace yieldcast::csv {

struct Row {
    std::vector<std::string> fields;
    std::size_t line = 0; ///< 1-based line where the record starts
};

/// RFC 4180 style reader: quoted fields, doubled quotes, CRLF tolerated.
/// Lines starting with '#' outside quotes are comments and are skipped.
inline std::vector<Row> parse(std::string_view text) {
    std::vector<Row> rows;
    Row cur;
    std::string field;
    bool in_quotes = false;
    bool at_line_start = true;
    bool field_started = false;
    std::size_t line = 1;
    cur.line = 1;

    auto end_record = [&] {
        if (field_started || !cur.fields.empty()) {
            cur.fields.push_back(std::move(field));
            rows.push_back(std::move(cur));
        }
        cur = Row{};
        field.clear();
        field_started = false;
        at_line_start = true;
    };

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
        if (at_line_start && c == '#') {
            while (i < text.size() && text[i] != '\n') ++i;
            ++line;
            cur.line = line;
            continue;
        }
        if (at_line_start) cur.line = line;
        at_line_start = false;
        switch (c) {
        case '"':
            in_quotes = true;
            field_started = true;
            break;
        case ',':
            cur.fields.push_back(std::move(field));
            field.clear();
            field_started = true;
            break;
        case '\r':
            break;
        case '\n':
            end_record();
            ++line;
            break;
        default:
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) throw ParseError("unterminated quoted field", cur.line);
    end_record();
    return rows;
}

inline std::string escape(std::string_view f) {
    if (f.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(f);
    std::string out = "\"";
    for (char c : f) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

/// Accumulates CSV text. Always '\n' line endings.
class Writer {
public:
    Writer& row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_.push_back(',');
            out_ += escape(fields[i]);
        }
        out_.push_back('\n');
        return *this;
    }

    Writer& comment(std::string_view text) {
        out_ += "# ";
        out_ += text;
        out_.push_back('\n');
        return *this;
    }

    const std::string& str() const noexcept { return out_; }

private:
    std::string out_;
};

/// Header lookup helper for reading named columns.
class Header {
public:
    explicit Header(const Row& header) {
        for (const auto& f : header.fields) names_.push_back(std::string(trim(f)));
    }

    std::optional<std::size_t> find(std::string_view name) const {
        const std::string want = normalize_name(name);
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (normalize_name(names_[i]) == want) return i;
        return std::nullopt;
    }

    std::size_t require(std::string_view name) const {
        if (auto i = find(name)) return *i;
        throw ParseError("missing column '" + std::string(name) + "'", 1);
    }

private:
    std::vector<std::string> names_;
};

} // namespace yieldcast::csv
