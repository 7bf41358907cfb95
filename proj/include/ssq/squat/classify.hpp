#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ssq/squat/types.hpp"

namespace ssq::squat {

// Registrant-organization field from raw whois text (Registrant Organization,
// Organization, org, owner lines); empty when absent.
std::string whois_organization(const std::string& whois_text);

// Case-folded, punctuation-stripped organization with corporate suffixes
// (Inc/LLC/Corp/Ltd/...) removed.
std::string normalize_org(const std::string& org);

// Privacy-proxy registrants are never Target-Owned.
bool is_privacy_org(const std::string& org);

struct ClassifyInputs {
    bool exists = false;
    std::vector<ProviderVerdict> verdicts;
    std::optional<std::string> whois_target_text;
    std::optional<std::string> whois_candidate_text;
};

struct ClassifyOutcome {
    Classification classification = Classification::NotFound;
    std::string target_org;     // normalized
    std::string candidate_org;  // normalized
    std::vector<std::string> notes;
};

// Decision order: not existing -> NotFound; any Malicious -> Malicious; any
// Suspicious -> Suspicious; matching first-party whois owner -> TargetOwned;
// otherwise Unknown. Pure function of its inputs.
ClassifyOutcome classify(const ClassifyInputs& in);

}  // namespace ssq::squat
