#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssq {

// Base class for all toolkit errors. Subclasses carry the contract name the
// caller can match on.
class Error : public std::runtime_error {
  public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
    const std::string& kind() const { return kind_; }

  private:
    std::string kind_;
};

#define SSQ_DEFINE_ERROR(NAME)                                          \
    class NAME : public Error {                                         \
      public:                                                           \
        explicit NAME(const std::string& what) : Error(#NAME, what) {}  \
    }

SSQ_DEFINE_ERROR(EmptyInput);
SSQ_DEFINE_ERROR(BackendUnavailable);
SSQ_DEFINE_ERROR(NotInDictionary);
SSQ_DEFINE_ERROR(UnmappablePhoneme);
SSQ_DEFINE_ERROR(IoError);
SSQ_DEFINE_ERROR(EmptyWordlist);
SSQ_DEFINE_ERROR(TooShort);
SSQ_DEFINE_ERROR(MissingProfile);
SSQ_DEFINE_ERROR(ShapeMismatch);
SSQ_DEFINE_ERROR(BadMask);
SSQ_DEFINE_ERROR(IndexOutOfRange);
SSQ_DEFINE_ERROR(TargetTooLong);
SSQ_DEFINE_ERROR(HistoryTooLong);
SSQ_DEFINE_ERROR(NotTrained);
SSQ_DEFINE_ERROR(LengthMismatch);
SSQ_DEFINE_ERROR(MissingModalities);
SSQ_DEFINE_ERROR(DivergedLoss);
SSQ_DEFINE_ERROR(ModelError);
SSQ_DEFINE_ERROR(EmptyResult);
SSQ_DEFINE_ERROR(NumericError);
SSQ_DEFINE_ERROR(NoRegistrableLabel);
SSQ_DEFINE_ERROR(ResolverTimeout);
SSQ_DEFINE_ERROR(ResolverError);
SSQ_DEFINE_ERROR(RegistryUnavailable);
SSQ_DEFINE_ERROR(MalformedMetadata);
SSQ_DEFINE_ERROR(MismatchedInputs);
SSQ_DEFINE_ERROR(ConfigError);

#undef SSQ_DEFINE_ERROR

// Seedable RNG handle. All randomness in the toolkit flows through one of
// these; there is no ambient global generator.
class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::string name = "rng")
        : eng_(seed), name_(std::move(name)) {}

    std::uint64_t next_u64() { return eng_(); }
    double uniform() { return unif_(eng_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() { return norm_(eng_); }
    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(eng_);
    }
    const std::string& name() const { return name_; }

    std::mt19937_64& engine() { return eng_; }

  private:
    std::mt19937_64 eng_;
    std::string name_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::normal_distribution<double> norm_{0.0, 1.0};
};

// --- small string helpers shared across modules ---

std::string trim(const std::string& s);
std::string to_lower(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);
bool starts_with(const std::string& s, const std::string& prefix);
bool ends_with(const std::string& s, const std::string& suffix);

// Splits a UTF-8 string into codepoint-sized chunks (invalid bytes become
// single-byte chunks).
std::vector<std::string> utf8_codepoints(const std::string& s);

// Reads a whole file; throws IoError.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// FNV-1a over a byte string; used for vocabulary fingerprints in checkpoints.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace ssq
