#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace httpmine {

/// Segmented content: words, single special characters, and "<EOS>".
using TokenSeq = std::vector<std::string>;
/// Parallel structure replacements, same length as the token sequence.
using StructSeq = std::vector<std::string>;

/// Per-character replacement classes (Table-style substitution).
enum class CharClass : char {
  Digit = 'D',
  Letter = 'W',
  Chinese = 'C',
  Invisible = 'I',
  Garbage = 'G',
};

enum class Encoding { None, Md5, Sha, Binary, Hex, Base64 };

/// Length/charset thresholds of the encoding detectors.
struct DetectorConfig {
  int md5_len = 32;
  int sha_len_short = 40;
  int sha_len_long = 64;
  int binary_min_len = 8;
  int hex_min_len = 8;
  int base64_min_len = 16;
};

/// Classifies one Unicode scalar. Total: every scalar maps to exactly one
/// class; anything that is neither digit, ASCII letter, CJK ideograph nor an
/// invisible (control/format/line-sep/para-sep) character counts as garbage.
CharClass char_class(char32_t c);

/// Splits decoded content into tokens. Runs of word characters form tokens,
/// every special character becomes its own single-character token, ASCII
/// whitespace separates tokens, and a whitespace-delimited "<EOS>" survives
/// as one marker token.
TokenSeq segment(const std::string& content);

/// Detects the encoding form of a token. Precedence: MD5, SHA, Binary, Hex,
/// Base64, None.
Encoding classify_encoding(const std::string& token,
                           const DetectorConfig& cfg = DetectorConfig{});

/// Replacement string for a detected encoding ("MD5_HASH", ...).
const char* encoding_name(Encoding e);

/// Derives the structure sequence: length-1 special characters and "<EOS>"
/// pass through, encoded tokens map to their replacement string, everything
/// else maps character by character through char_class.
StructSeq structure_of(const TokenSeq& tokens,
                       const DetectorConfig& cfg = DetectorConfig{});

/// True for a single-special-character token (never for "<EOS>").
bool is_special_token(const std::string& token);

/// One "token<TAB>structure" row per token, for debugging.
std::string structure_debug_tsv(const TokenSeq& tokens, const StructSeq& structure);

/// Decodes UTF-8 into scalars; ill-formed bytes yield U+FFFD.
std::vector<char32_t> utf8_scalars(const std::string& s);

}  // namespace httpmine
