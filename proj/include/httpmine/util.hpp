#pragma once

#include <string>
#include <vector>

namespace httpmine {

/// Reads a whole file; throws DataError (see ingest.hpp) if unreadable.
std::string slurp_file(const std::string& path);

/// Writes a buffer atomically enough for our purposes (truncate + write).
void spit_file(const std::string& path, const std::string& text);

/// RFC-4180 style quoting: wraps the field in quotes when it contains a
/// comma, quote, or newline, doubling embedded quotes.
std::string csv_escape(const std::string& field);

/// Splits one CSV line produced by csv_escape-based writers.
std::vector<std::string> csv_split(const std::string& line);

/// Escapes &, <, >, " and ' for embedding in HTML.
std::string html_escape(const std::string& s);

/// ASCII lowercase.
std::string to_lower(const std::string& s);

}  // namespace httpmine
