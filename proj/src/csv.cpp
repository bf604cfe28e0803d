#include "patcls/csv.hpp"

#include "patcls/error.hpp"

namespace patcls::csv {

Reader::Reader(std::istream& in, std::string context) : in_(in), context_(std::move(context)) {}

bool Reader::next(Row& row) {
    std::string line;
    if (!std::getline(in_, line)) return false;
    ++line_;
    row.fields.clear();
    row.line = line_;

    std::string field;
    bool quoted = false;
    std::size_t i = 0;
    for (;;) {
        if (i == line.size() || (line[i] == '\r' && i + 1 == line.size() && !quoted)) {
            if (!quoted) break;
            // Quoted field spans a line break.
            std::string more;
            if (!std::getline(in_, more)) {
                throw ValidationError(context_ + ":" + std::to_string(row.line) +
                                      ": unterminated quoted field");
            }
            ++line_;
            field.push_back('\n');
            line = std::move(more);
            i = 0;
            continue;
        }
        const char c = line[i++];
        if (quoted) {
            if (c == '"') {
                if (i < line.size() && line[i] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    row.fields.push_back(std::move(field));
    return true;
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += escape(fields[i]);
    }
    return out;
}

} // namespace patcls::csv
