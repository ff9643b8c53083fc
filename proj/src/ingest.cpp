#include "httpmine/ingest.hpp"

#include "httpmine/util.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <unordered_set>

namespace httpmine {

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// One percent/plus decode pass over raw bytes. Invalid escapes pass through.
std::string decode_pass(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '%') {
      if (i + 2 < s.size()) {
        const int hi = hex_value(s[i + 1]);
        const int lo = hex_value(s[i + 2]);
        if (hi >= 0 && lo >= 0) {
          out += static_cast<char>(hi * 16 + lo);
          i += 2;
          continue;
        }
      }
      out += c;
    } else if (c == '+') {
      out += ' ';
    } else {
      out += c;
    }
  }
  return out;
}

const std::string kReplacement = "\xEF\xBF\xBD";  // U+FFFD

// Replaces ill-formed UTF-8 byte runs with U+FFFD, one replacement per
// offending byte. Rejects overlongs, surrogates and values past U+10FFFF.
std::string sanitize_utf8(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  const auto cont = [&](std::size_t k, unsigned char lo, unsigned char hi) {
    if (i + k >= s.size()) return false;
    const unsigned char b = static_cast<unsigned char>(s[i + k]);
    return b >= lo && b <= hi;
  };
  while (i < s.size()) {
    const unsigned char b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    if (b0 < 0x80) {
      len = 1;
    } else if (b0 >= 0xC2 && b0 <= 0xDF) {
      if (cont(1, 0x80, 0xBF)) len = 2;
    } else if (b0 == 0xE0) {
      if (cont(1, 0xA0, 0xBF) && cont(2, 0x80, 0xBF)) len = 3;
    } else if (b0 >= 0xE1 && b0 <= 0xEC) {
      if (cont(1, 0x80, 0xBF) && cont(2, 0x80, 0xBF)) len = 3;
    } else if (b0 == 0xED) {
      if (cont(1, 0x80, 0x9F) && cont(2, 0x80, 0xBF)) len = 3;
    } else if (b0 >= 0xEE && b0 <= 0xEF) {
      if (cont(1, 0x80, 0xBF) && cont(2, 0x80, 0xBF)) len = 3;
    } else if (b0 == 0xF0) {
      if (cont(1, 0x90, 0xBF) && cont(2, 0x80, 0xBF) && cont(3, 0x80, 0xBF)) len = 4;
    } else if (b0 >= 0xF1 && b0 <= 0xF3) {
      if (cont(1, 0x80, 0xBF) && cont(2, 0x80, 0xBF) && cont(3, 0x80, 0xBF)) len = 4;
    } else if (b0 == 0xF4) {
      if (cont(1, 0x80, 0x8F) && cont(2, 0x80, 0xBF) && cont(3, 0x80, 0xBF)) len = 4;
    }
    if (len == 0) {
      out += kReplacement;
      ++i;
    } else {
      out.append(s, i, len);
      i += len;
    }
  }
  return out;
}

}  // namespace

std::string decode(const std::string& s, int max_passes) {
  std::string cur = s;
  for (int pass = 0; pass < max_passes; ++pass) {
    std::string next = decode_pass(cur);
    const bool fixpoint = next == cur;
    cur = std::move(next);
    if (fixpoint) break;
  }
  return sanitize_utf8(cur);
}

std::vector<RawRecord> parse_records(const std::string& text, ParseStats* stats) {
  std::vector<RawRecord> records;
  ParseStats local;
  std::unordered_set<std::string> seen_ids;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_object()) {
      ++local.malformed;
      continue;
    }
    RawRecord rec;
    if (j.contains("id") && j["id"].is_string()) {
      rec.id = j["id"].get<std::string>();
    } else if (j.contains("id") && j["id"].is_number_integer()) {
      rec.id = std::to_string(j["id"].get<long long>());
    }
    if (rec.id.empty() || !j.contains("uri") || !j["uri"].is_string()) {
      ++local.malformed;
      continue;
    }
    if (!seen_ids.insert(rec.id).second) {
      ++local.malformed;  // duplicate id violates the dataset contract
      continue;
    }
    rec.uri = j["uri"].get<std::string>();
    if (j.contains("method") && j["method"].is_string())
      rec.method = j["method"].get<std::string>();
    if (j.contains("body") && j["body"].is_string())
      rec.body = j["body"].get<std::string>();
    if (j.contains("label")) {
      if (!j["label"].is_string()) {
        ++local.malformed;
        continue;
      }
      const std::string label = j["label"].get<std::string>();
      if (label == "malicious") rec.malicious = true;
      else if (label == "benign") rec.malicious = false;
      else {
        ++local.malformed;
        continue;
      }
    }
    ++local.parsed;
    records.push_back(std::move(rec));
  }
  if (stats) *stats = local;
  return records;
}

std::vector<RawRecord> parse_dataset(const std::string& path, ParseStats* stats) {
  return parse_records(slurp_file(path), stats);
}

std::vector<TrafficEntry> clean(const std::vector<RawRecord>& records,
                                CleanStats* stats, int decode_passes) {
  std::vector<TrafficEntry> entries;
  CleanStats local;
  local.input = records.size();
  std::unordered_set<std::string> seen;
  for (const RawRecord& rec : records) {
    const std::string uri = decode(rec.uri, decode_passes);
    const std::string body = decode(rec.body, decode_passes);
    // A decoded "<EOS>" would forge the URL/body separator; such records are
    // erroneous data and get dropped rather than violate the content
    // invariant downstream.
    if (uri.empty() || uri.find(kEos) != std::string::npos ||
        body.find(kEos) != std::string::npos) {
      ++local.dropped;
      continue;
    }
    std::string key = uri;
    key += '\x1f';
    key += body;
    if (!seen.insert(std::move(key)).second) {
      ++local.duplicates;
      continue;
    }
    TrafficEntry entry;
    entry.id = rec.id;
    entry.content = uri + " " + kEos + " " + body;
    entry.malicious = rec.malicious;
    entries.push_back(std::move(entry));
  }
  if (stats) *stats = local;
  return entries;
}

void write_entries(const std::string& path, const std::vector<TrafficEntry>& entries) {
  std::ostringstream out;
  for (const TrafficEntry& e : entries) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["content"] = e.content;
    if (e.malicious.has_value()) j["label"] = *e.malicious ? "malicious" : "benign";
    out << j.dump() << "\n";
  }
  spit_file(path, out.str());
}

std::vector<TrafficEntry> read_entries(const std::string& path) {
  std::istringstream in(slurp_file(path));
  std::vector<TrafficEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_object() || !j.contains("id") || !j.contains("content"))
      throw DataError(path + ":" + std::to_string(lineno) + ": bad entry row");
    TrafficEntry e;
    e.id = j["id"].get<std::string>();
    e.content = j["content"].get<std::string>();
    if (j.contains("label")) e.malicious = j["label"].get<std::string>() == "malicious";
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace httpmine
