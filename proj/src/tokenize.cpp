#include "httpmine/tokenize.hpp"

#include "httpmine/ingest.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace httpmine {

namespace {

bool is_ascii_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\v' || c == U'\f' ||
         c == U'\r';
}

bool is_ascii_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

bool is_ascii_letter(char32_t c) {
  return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z');
}

// ASCII punctuation and symbols split into their own tokens; everything else
// that is not whitespace joins word runs so char_class can see it.
bool is_special_char(char32_t c) {
  return c >= 0x21 && c <= 0x7E && !is_ascii_digit(c) && !is_ascii_letter(c);
}

bool in_range(char32_t c, char32_t lo, char32_t hi) { return c >= lo && c <= hi; }

bool is_cjk(char32_t c) {
  return in_range(c, 0x4E00, 0x9FFF) ||    // unified ideographs
         in_range(c, 0x3400, 0x4DBF) ||    // extension A
         in_range(c, 0xF900, 0xFAFF) ||    // compatibility ideographs
         in_range(c, 0x20000, 0x2A6DF) ||  // extension B
         in_range(c, 0x2A700, 0x2EBEF) ||  // extensions C-F
         in_range(c, 0x30000, 0x3134A);    // extension G
}

// General categories Cc, Cf, Zl, Zp.
bool is_invisible(char32_t c) {
  if (c <= 0x1F || in_range(c, 0x7F, 0x9F)) return true;  // Cc
  if (c == 0x2028 || c == 0x2029) return true;            // Zl, Zp
  static constexpr std::array<std::pair<char32_t, char32_t>, 21> kFormat = {{
      {0x00AD, 0x00AD},   {0x0600, 0x0605},   {0x061C, 0x061C},
      {0x06DD, 0x06DD},   {0x070F, 0x070F},   {0x08E2, 0x08E2},
      {0x180E, 0x180E},   {0x200B, 0x200F},   {0x202A, 0x202E},
      {0x2060, 0x2064},   {0x2066, 0x206F},   {0xFEFF, 0xFEFF},
      {0xFFF9, 0xFFFB},   {0x110BD, 0x110BD}, {0x110CD, 0x110CD},
      {0x13430, 0x13438}, {0x1BCA0, 0x1BCA3}, {0x1D173, 0x1D17A},
      {0xE0001, 0xE0001}, {0xE0020, 0xE007F}, {0x0890, 0x0891},
  }};
  for (const auto& [lo, hi] : kFormat)
    if (in_range(c, lo, hi)) return true;
  return false;
}

bool is_hex_char(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

void append_utf8(std::string& out, char32_t c) {
  if (c < 0x80) {
    out += static_cast<char>(c);
  } else if (c < 0x800) {
    out += static_cast<char>(0xC0 | (c >> 6));
    out += static_cast<char>(0x80 | (c & 0x3F));
  } else if (c < 0x10000) {
    out += static_cast<char>(0xE0 | (c >> 12));
    out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (c & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (c >> 18));
    out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (c & 0x3F));
  }
}

}  // namespace

std::vector<char32_t> utf8_scalars(const std::string& s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char b0 = static_cast<unsigned char>(s[i]);
    char32_t c = 0xFFFD;
    std::size_t len = 1;
    if (b0 < 0x80) {
      c = b0;
    } else if ((b0 & 0xE0) == 0xC0 && i + 1 < s.size() &&
               (static_cast<unsigned char>(s[i + 1]) & 0xC0) == 0x80) {
      c = (char32_t(b0 & 0x1F) << 6) | (s[i + 1] & 0x3F);
      len = c >= 0x80 ? 2 : 1;
      if (len == 1) c = 0xFFFD;
    } else if ((b0 & 0xF0) == 0xE0 && i + 2 < s.size() &&
               (static_cast<unsigned char>(s[i + 1]) & 0xC0) == 0x80 &&
               (static_cast<unsigned char>(s[i + 2]) & 0xC0) == 0x80) {
      c = (char32_t(b0 & 0x0F) << 12) | (char32_t(s[i + 1] & 0x3F) << 6) |
          (s[i + 2] & 0x3F);
      len = (c >= 0x800 && !(c >= 0xD800 && c <= 0xDFFF)) ? 3 : 1;
      if (len == 1) c = 0xFFFD;
    } else if ((b0 & 0xF8) == 0xF0 && i + 3 < s.size() &&
               (static_cast<unsigned char>(s[i + 1]) & 0xC0) == 0x80 &&
               (static_cast<unsigned char>(s[i + 2]) & 0xC0) == 0x80 &&
               (static_cast<unsigned char>(s[i + 3]) & 0xC0) == 0x80) {
      c = (char32_t(b0 & 0x07) << 18) | (char32_t(s[i + 1] & 0x3F) << 12) |
          (char32_t(s[i + 2] & 0x3F) << 6) | (s[i + 3] & 0x3F);
      len = (c >= 0x10000 && c <= 0x10FFFF) ? 4 : 1;
      if (len == 1) c = 0xFFFD;
    }
    out.push_back(c);
    i += len;
  }
  return out;
}

CharClass char_class(char32_t c) {
  if (is_ascii_digit(c)) return CharClass::Digit;
  if (is_ascii_letter(c)) return CharClass::Letter;
  if (is_cjk(c)) return CharClass::Chinese;
  if (is_invisible(c)) return CharClass::Invisible;
  return CharClass::Garbage;
}

TokenSeq segment(const std::string& content) {
  TokenSeq tokens;
  // Whitespace-delimited chunks first, so the "<EOS>" marker survives whole.
  std::size_t pos = 0;
  while (pos < content.size()) {
    while (pos < content.size() &&
           is_ascii_space(static_cast<unsigned char>(content[pos]))) {
      ++pos;
    }
    std::size_t end = pos;
    while (end < content.size() &&
           !is_ascii_space(static_cast<unsigned char>(content[end]))) {
      ++end;
    }
    if (end == pos) break;
    const std::string chunk = content.substr(pos, end - pos);
    pos = end;
    if (chunk == kEos) {
      tokens.push_back(chunk);
      continue;
    }
    std::string current;
    for (char32_t c : utf8_scalars(chunk)) {
      if (is_special_char(c)) {
        if (!current.empty()) {
          tokens.push_back(std::move(current));
          current.clear();
        }
        tokens.push_back(std::string(1, static_cast<char>(c)));
      } else {
        append_utf8(current, c);
      }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
  }
  return tokens;
}

Encoding classify_encoding(const std::string& token, const DetectorConfig& cfg) {
  const int len = static_cast<int>(token.size());
  if (len == 0) return Encoding::None;

  bool all_hex = true;
  bool all_binary = true;
  bool any_hex_alpha = false;
  for (char c : token) {
    if (!is_hex_char(c)) all_hex = false;
    if (c != '0' && c != '1') all_binary = false;
    if ((c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F')) any_hex_alpha = true;
  }

  if (all_hex && len == cfg.md5_len) return Encoding::Md5;
  if (all_hex && (len == cfg.sha_len_short || len == cfg.sha_len_long))
    return Encoding::Sha;
  if (all_binary && len >= cfg.binary_min_len) return Encoding::Binary;
  if (all_hex && any_hex_alpha && len >= cfg.hex_min_len && len % 2 == 0)
    return Encoding::Hex;

  if (len >= cfg.base64_min_len && len % 4 == 0) {
    bool upper = false, lower = false, digit = false, valid = true;
    int padding = 0;
    for (int i = 0; i < len; ++i) {
      const char c = token[i];
      if (c == '=') {
        ++padding;
        if (padding > 2) valid = false;
        continue;
      }
      if (padding > 0) {  // '=' only as trailing padding
        valid = false;
        break;
      }
      if (c >= 'A' && c <= 'Z') upper = true;
      else if (c >= 'a' && c <= 'z') lower = true;
      else if (c >= '0' && c <= '9') digit = true;
      else if (c != '+' && c != '/') {
        valid = false;
        break;
      }
    }
    if (valid && upper && lower && digit) return Encoding::Base64;
  }
  return Encoding::None;
}

const char* encoding_name(Encoding e) {
  switch (e) {
    case Encoding::Md5: return "MD5_HASH";
    case Encoding::Sha: return "SHA_HASH";
    case Encoding::Base64: return "BASE64_ENCODE";
    case Encoding::Hex: return "HEXADECIMAL";
    case Encoding::Binary: return "BINARY";
    case Encoding::None: break;
  }
  return "";
}

bool is_special_token(const std::string& token) {
  return token.size() == 1 && is_special_char(static_cast<unsigned char>(token[0]));
}

StructSeq structure_of(const TokenSeq& tokens, const DetectorConfig& cfg) {
  StructSeq structure;
  structure.reserve(tokens.size());
  for (const std::string& token : tokens) {
    if (token == kEos || is_special_token(token)) {
      structure.push_back(token);
      continue;
    }
    const Encoding enc = classify_encoding(token, cfg);
    if (enc != Encoding::None) {
      structure.push_back(encoding_name(enc));
      continue;
    }
    std::string classes;
    for (char32_t c : utf8_scalars(token)) {
      classes += static_cast<char>(char_class(c));
    }
    structure.push_back(std::move(classes));
  }
  return structure;
}

std::string structure_debug_tsv(const TokenSeq& tokens, const StructSeq& structure) {
  std::ostringstream out;
  for (std::size_t i = 0; i < tokens.size() && i < structure.size(); ++i) {
    out << tokens[i] << '\t' << structure[i] << '\n';
  }
  return out.str();
}

}  // namespace httpmine
