#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ssq/squat/types.hpp"

namespace ssq::squat {

// Public-suffix list in the standard one-rule-per-line format. Supports
// exact rules, wildcard rules (*.x) and exception rules (!y.x).
class PublicSuffixList {
  public:
    static PublicSuffixList load(const std::string& path);
    static PublicSuffixList from_rules(const std::vector<std::string>& rules);

    // Longest matching public suffix of the (lowercased) domain; falls back
    // to the last label when no rule matches.
    std::string match(const std::string& domain) const;

  private:
    std::set<std::string> exact_;
    std::set<std::string> wildcard_;   // stored without the "*." prefix
    std::set<std::string> exception_;  // stored without the "!" prefix
};

// Label immediately left of the longest matching public suffix.
TargetName extract_sld(const std::string& domain, const PublicSuffixList& psl);

}  // namespace ssq::squat
