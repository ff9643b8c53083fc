#pragma once

#include "httpmine/detect.hpp"
#include "httpmine/ingest.hpp"

#include <map>
#include <regex>
#include <string>
#include <vector>

namespace httpmine {

/// One named case-insensitive pattern applied to decoded content.
struct Rule {
  std::string name;
  std::string expression;
  std::regex compiled;
};

struct RuleSet {
  std::vector<Rule> rules;
};

/// Signature rules mirroring common attack families, with the keywords used
/// by the top-k attention evaluation.
RuleSet default_rules();
std::vector<std::string> default_rule_keywords(const std::string& rule_name);

/// Parses "name<TAB>regex" lines; '#' starts a comment. Throws DataError on
/// duplicate names or expressions that do not compile.
RuleSet parse_rules(const std::string& text);
RuleSet load_rules(const std::string& path);

struct RuleMatches {
  std::vector<bool> matched;               // per entry: any rule hit
  std::map<std::string, std::size_t> per_rule;  // rule name -> hit count
};

/// An entry matches when any rule's expression finds a match anywhere in the
/// decoded content.
RuleMatches apply_rules(const std::vector<TrafficEntry>& entries, const RuleSet& rules);

/// True when this single entry matches the named rule.
bool rule_matches(const Rule& rule, const std::string& content);

struct MtCounters {
  std::size_t mt_model = 0;  // labeled malicious by the model
  std::size_t mt_rule = 0;   // model-malicious and rule-matched
  std::size_t mt_new = 0;    // model-malicious, rule-unmatched, human-verified
  std::size_t fp_est = 0;    // mt_model - mt_rule - mt_new
};

/// Requires every verified id to be model-malicious and rule-unmatched;
/// throws DataError otherwise. `rule_flags` must align with `records`.
MtCounters mt_counters(const std::vector<DetectionRecord>& records,
                       const std::vector<bool>& rule_flags,
                       const std::vector<std::string>& verified_new_ids);

}  // namespace httpmine
