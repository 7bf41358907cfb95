#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ssq/squat/types.hpp"

namespace ssq::squat {

// ---------------------------------------------------------------------------
// DNS

struct DnsAnswer {
    enum class Status { NoError, NxDomain, Timeout, ServFail };
    Status status = Status::NxDomain;
    std::vector<std::string> records;  // A/AAAA/NS strings when NoError

    bool exists() const { return status == Status::NoError && !records.empty(); }
};

class DnsResolver {
  public:
    virtual ~DnsResolver() = default;
    virtual DnsAnswer resolve(const std::string& fqdn) = 0;
};

// Directory of `<fqdn>.status` (one outcome per line, consumed per attempt,
// last line repeats: NOERROR | NXDOMAIN | TIMEOUT | SERVFAIL) and
// `<fqdn>.json` ({"a": [...], "ns": [...]}). A missing .status file means
// NXDOMAIN: the fixture directory is a closed universe.
class FixtureDnsResolver : public DnsResolver {
  public:
    explicit FixtureDnsResolver(std::string dir) : dir_(std::move(dir)) {}
    DnsAnswer resolve(const std::string& fqdn) override;
    int query_count(const std::string& fqdn) const;

  private:
    std::string dir_;
    mutable std::mutex mu_;
    std::map<std::string, int> attempts_;
};

// getaddrinfo-backed resolver for live runs.
class SystemDnsResolver : public DnsResolver {
  public:
    DnsAnswer resolve(const std::string& fqdn) override;
};

// ---------------------------------------------------------------------------
// Package registry

struct RegistryAnswer {
    int status = 0;
    std::string body;
};

class RegistryClient {
  public:
    virtual ~RegistryClient() = default;
    virtual RegistryAnswer fetch(const std::string& name) = 0;
};

// `<name>.status` (HTTP codes, one per attempt) + `<name>.json` (body).
// Without a .status file: 200 when the body file exists, else 404.
class FixtureRegistryClient : public RegistryClient {
  public:
    explicit FixtureRegistryClient(std::string dir) : dir_(std::move(dir)) {}
    RegistryAnswer fetch(const std::string& name) override;
    int query_count(const std::string& name) const;

  private:
    std::string dir_;
    mutable std::mutex mu_;
    std::map<std::string, int> attempts_;
};

// Live HTTP client; path_template replaces "{name}".
class HttpRegistryClient : public RegistryClient {
  public:
    HttpRegistryClient(std::string base_url, std::string path_template)
        : base_url_(std::move(base_url)), path_template_(std::move(path_template)) {}
    RegistryAnswer fetch(const std::string& name) override;

  private:
    std::string base_url_, path_template_;
};

// ---------------------------------------------------------------------------
// Reputation providers and whois

class ReputationProvider {
  public:
    virtual ~ReputationProvider() = default;
    virtual std::string name() const = 0;
    // Verdict for the name; failures throw (never Clean).
    virtual Verdict query(const std::string& fqdn) = 0;
};

// `<fqdn>.json` = {"verdict": "malicious|suspicious|clean"}; missing file is
// Absent; `<fqdn>.status` containing TIMEOUT throws.
class FixtureProvider : public ReputationProvider {
  public:
    FixtureProvider(std::string provider_name, std::string dir)
        : name_(std::move(provider_name)), dir_(std::move(dir)) {}
    std::string name() const override { return name_; }
    Verdict query(const std::string& fqdn) override;

  private:
    std::string name_, dir_;
};

class WhoisSource {
  public:
    virtual ~WhoisSource() = default;
    // Raw whois text, or nullopt when no data is available.
    virtual std::optional<std::string> lookup(const std::string& domain) = 0;
};

// `<domain>.json` = {"text": "..."}.
class FixtureWhois : public WhoisSource {
  public:
    explicit FixtureWhois(std::string dir) : dir_(std::move(dir)) {}
    std::optional<std::string> lookup(const std::string& domain) override;

  private:
    std::string dir_;
};

// Plain whois/43 client against a single configured server.
class TcpWhois : public WhoisSource {
  public:
    explicit TcpWhois(std::string server, int port = 43)
        : server_(std::move(server)), port_(port) {}
    std::optional<std::string> lookup(const std::string& domain) override;

  private:
    std::string server_;
    int port_;
};

}  // namespace ssq::squat
