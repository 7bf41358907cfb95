#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ssq/common.hpp"

namespace ssq::squat {

enum class Verdict { Malicious, Suspicious, Clean, Absent };
enum class Classification { NotFound, TargetOwned, Malicious, Suspicious, Unknown };

std::string to_string(Verdict v);
std::string to_string(Classification c);
Verdict verdict_from_string(const std::string& s);
Classification classification_from_string(const std::string& s);

struct TargetName {
    std::string raw;  // input as given
    std::string sld;  // registrable label, lowercase
};

struct CandidateDomain {
    std::string label;
    std::string tld;
    std::string fqdn;  // label + "." + tld
};

// True for LDH labels: 1..63 chars of [a-z0-9-], hyphen not leading/trailing.
bool valid_hostname_label(const std::string& label);

struct ProviderVerdict {
    std::string provider;
    Verdict verdict = Verdict::Absent;
};

struct ProbeRecord {
    int schema = 1;
    std::string name;    // fqdn or package name
    std::string kind;    // "domain" | "package"
    std::string target;  // the impersonated name
    bool exists = false;
    Classification classification = Classification::NotFound;
    std::vector<ProviderVerdict> evidence;
    std::string whois_target_org;
    std::string whois_candidate_org;
    std::vector<std::string> notes;
    std::optional<long> stars;
    std::optional<long> forks;
    std::string timestamp;

    std::string to_json() const;
    static ProbeRecord from_json(const std::string& line);
};

}  // namespace ssq::squat
