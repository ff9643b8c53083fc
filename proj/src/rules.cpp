#include "httpmine/rules.hpp"

#include "httpmine/util.hpp"

#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace httpmine {

namespace {

Rule make_rule(const std::string& name, const std::string& expression) {
  Rule rule;
  rule.name = name;
  rule.expression = expression;
  try {
    rule.compiled = std::regex(expression, std::regex::icase);
  } catch (const std::regex_error& e) {
    throw DataError("rule '" + name + "': bad expression: " + e.what());
  }
  return rule;
}

}  // namespace

RuleSet default_rules() {
  RuleSet rules;
  rules.rules.push_back(make_rule("struts2", "memberaccess.allowstaticmethodaccess"));
  rules.rules.push_back(make_rule("sqli", "(select.+(from|limit))|(?:(union(.*?)select))"));
  rules.rules.push_back(make_rule("xss", "<(iframe|script|body|img|input)"));
  rules.rules.push_back(make_rule("webshell", "\\$_(GET|post|GLOBALS|SERVER)"));
  rules.rules.push_back(make_rule("fileinclude", "etc.{0,10}passwd"));
  return rules;
}

std::vector<std::string> default_rule_keywords(const std::string& rule_name) {
  static const std::unordered_map<std::string, std::vector<std::string>> keywords = {
      {"struts2", {"memberaccess", "allowstaticmethodaccess"}},
      {"sqli", {"select", "from", "limit", "union"}},
      {"xss", {"iframe", "script", "body", "img", "input"}},
      {"webshell", {"get", "post", "globals", "server"}},
      {"fileinclude", {"etc", "passwd"}},
  };
  const auto it = keywords.find(rule_name);
  if (it == keywords.end())
    throw DataError("no default keywords for rule '" + rule_name + "'");
  return it->second;
}

RuleSet parse_rules(const std::string& text) {
  RuleSet rules;
  std::unordered_set<std::string> names;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("rules:" + std::to_string(lineno) +
                      ": expected name<TAB>regex");
    const std::string name = line.substr(0, tab);
    if (!names.insert(name).second)
      throw DataError("rules: duplicate rule name '" + name + "'");
    rules.rules.push_back(make_rule(name, line.substr(tab + 1)));
  }
  return rules;
}

RuleSet load_rules(const std::string& path) { return parse_rules(slurp_file(path)); }

bool rule_matches(const Rule& rule, const std::string& content) {
  return std::regex_search(content, rule.compiled);
}

RuleMatches apply_rules(const std::vector<TrafficEntry>& entries, const RuleSet& rules) {
  RuleMatches result;
  result.matched.assign(entries.size(), false);
  for (const Rule& rule : rules.rules) result.per_rule[rule.name] = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (const Rule& rule : rules.rules) {
      if (rule_matches(rule, entries[i].content)) {
        result.matched[i] = true;
        ++result.per_rule[rule.name];
      }
    }
  }
  return result;
}

MtCounters mt_counters(const std::vector<DetectionRecord>& records,
                       const std::vector<bool>& rule_flags,
                       const std::vector<std::string>& verified_new_ids) {
  if (records.size() != rule_flags.size())
    throw DataError("mt_counters: records/rule_flags size mismatch");
  std::unordered_map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < records.size(); ++i) index_of[records[i].id] = i;

  MtCounters counters;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].error || !records[i].malicious) continue;
    ++counters.mt_model;
    if (rule_flags[i]) ++counters.mt_rule;
  }
  std::unordered_set<std::string> seen;
  for (const std::string& id : verified_new_ids) {
    if (!seen.insert(id).second) continue;
    const auto it = index_of.find(id);
    if (it == index_of.end())
      throw DataError("mt_counters: verified id '" + id + "' has no record");
    const std::size_t i = it->second;
    if (records[i].error || !records[i].malicious)
      throw DataError("mt_counters: verified id '" + id +
                      "' was not labeled malicious by the model");
    if (rule_flags[i])
      throw DataError("mt_counters: verified id '" + id + "' matches a rule");
    ++counters.mt_new;
  }
  counters.fp_est = counters.mt_model - counters.mt_rule - counters.mt_new;
  return counters;
}

}  // namespace httpmine
