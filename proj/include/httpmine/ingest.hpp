#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace httpmine {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One request as it appears in the input file, before any cleaning.
struct RawRecord {
  std::string id;
  std::string method;
  std::string uri;
  std::string body;
  std::optional<bool> malicious;  // ground-truth label when present
};

/// One cleaned request. `content` is "<decoded uri> <EOS> <decoded body>"
/// and always carries exactly one "<EOS>" marker.
struct TrafficEntry {
  std::string id;
  std::string content;
  std::optional<bool> malicious;
};

struct ParseStats {
  std::size_t parsed = 0;
  std::size_t malformed = 0;
};

struct CleanStats {
  std::size_t input = 0;
  std::size_t duplicates = 0;
  std::size_t dropped = 0;
};

/// Marker separating URL tokens from body tokens.
inline constexpr const char* kEos = "<EOS>";

/// Percent- and plus-decodes `s`, repeating up to `max_passes` times or until
/// a pass changes nothing. Invalid escapes are kept verbatim; any invalid
/// UTF-8 produced by decoding is replaced with U+FFFD. Total: never throws.
std::string decode(const std::string& s, int max_passes = 2);

/// Reads JSON Lines of raw request records. Malformed lines are skipped and
/// counted. Throws DataError if the file cannot be opened.
std::vector<RawRecord> parse_dataset(const std::string& path, ParseStats* stats = nullptr);

/// Same parser over an already-loaded buffer; used by parse_dataset and tests.
std::vector<RawRecord> parse_records(const std::string& text, ParseStats* stats = nullptr);

/// Decodes, deduplicates and canonicalizes records into TrafficEntry values.
/// Records with an empty decoded uri, or whose decoded text would collide
/// with the "<EOS>" marker, are dropped and counted.
std::vector<TrafficEntry> clean(const std::vector<RawRecord>& records,
                                CleanStats* stats = nullptr, int decode_passes = 2);

/// Writes entries as JSONL with keys id, content, label.
void write_entries(const std::string& path, const std::vector<TrafficEntry>& entries);

/// Reads back a cleaned JSONL file. Throws DataError on unreadable files or
/// rows missing id/content.
std::vector<TrafficEntry> read_entries(const std::string& path);

}  // namespace httpmine
