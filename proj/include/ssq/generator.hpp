#pragma once

#include <set>
#include <string>
#include <vector>

#include "ssq/model.hpp"
#include "ssq/phonology.hpp"

namespace ssq::gen {

struct GenerationParams {
    int children = 2;     // C: expansions per node
    int beam_width = 64;  // K: surviving active nodes per step
    int extra_depth = 6;  // M = N + extra_depth iterations
    std::set<std::string> exclude;

    void validate() const {
        if (children < 1 || beam_width < 1 || extra_depth < 0)
            throw ConfigError("generation parameters out of range");
    }
};

struct Candidate {
    std::string surface;
    double joint_logprob = 0;
    int rank = 0;
};

// Beam search over decode_step. Log-space joint scores; nodes freeze on EOS
// and stop consuming beam slots; unfinished leaves at depth M are candidates;
// duplicate surfaces keep the highest score; ties order lexicographically.
std::vector<Candidate> generate(model::SqModel& m, const phon::IpaSequence& ipa,
                                const phon::GraphemeVocabulary& gv, const GenerationParams& p);

// Cross-language path: transcribe with a language-B backend, map the foreign
// phonemes into the model inventory, then generate.
std::vector<Candidate> generate_cross(model::SqModel& m, const std::string& word,
                                      phon::G2pBackend& backend, const phon::PhonemeMap& map,
                                      const phon::GraphemeVocabulary& gv,
                                      const GenerationParams& p);

struct BatchItem {
    std::string target;
    std::string ipa;
    std::vector<Candidate> candidates;
    std::string error;  // non-empty when this target failed or was skipped
};

struct BatchResult {
    std::vector<BatchItem> items;  // in input order
    double mean = 0;               // candidates per successful target
    double stddev = 0;             // population standard deviation
    size_t total_candidates = 0;
    size_t failed = 0;
};

BatchResult batch_generate(model::SqModel& m, const std::vector<std::string>& targets,
                           phon::G2pBackend& backend, const phon::PhonemeVocabulary& pv,
                           const phon::GraphemeVocabulary& gv, const GenerationParams& p);

// Sum of per-step chosen log probabilities for surface replayed through
// decode_step; with_eos adds the terminal EOS edge.
double replay_logprob(model::SqModel& m, const nn::Tensor& memory, const std::string& surface,
                      const phon::GraphemeVocabulary& gv, bool with_eos);

std::string candidates_jsonl(const std::string& target, const std::string& ipa,
                             const std::vector<Candidate>& candidates);
std::string candidates_csv(const std::vector<BatchItem>& items, bool header = true);

}  // namespace ssq::gen
