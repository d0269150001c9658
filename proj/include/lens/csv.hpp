// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace lens::csv {

using Record = std::vector<std::string>;

/// Reads RFC-4180 records: comma separated, double-quoted fields with "" as an
/// escaped quote, LF or CRLF line endings. Blank lines are skipped.
std::vector<Record> read(std::istream& in);

/// Quotes a field if it contains a comma, quote or line break.
std::string escape(std::string_view field);

void write_record(std::ostream& out, const Record& record);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double value);

}  // namespace lens::csv
