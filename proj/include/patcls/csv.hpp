#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace patcls::csv {

struct Row {
    std::vector<std::string> fields;
    int line;  // 1-based line on which the record starts
};

/// RFC 4180 style reader: comma separated, double-quoted fields may contain
/// commas, doubled quotes and newlines. CRLF line ends are accepted.
class Reader {
public:
    explicit Reader(std::istream& in, std::string context);

    /// False at end of input. Throws ValidationError on an unterminated quote.
    bool next(Row& row);

private:
    std::istream& in_;
    std::string context_;
    int line_ = 0;
};

/// Quotes the field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

} // namespace patcls::csv
