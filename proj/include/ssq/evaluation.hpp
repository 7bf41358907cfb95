#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ssq/generator.hpp"

namespace ssq::eval {

struct HomophoneSet {
    std::string ipa;
    std::vector<std::string> members;  // >= 2, unique, sorted
};

// Groups words by exact IPA transcription; keeps groups of two or more,
// ordered by IPA. Unresolvable words are reported and skipped.
std::vector<HomophoneSet> build_homophone_sets(const std::vector<std::string>& words,
                                               phon::G2pBackend& backend,
                                               std::vector<std::string>* unresolved = nullptr);

using RepresentativeRule = std::function<std::string(const HomophoneSet&)>;
RepresentativeRule lexicographic_representative();

// One generation run per set from its representative's IPA.
struct SetRun {
    HomophoneSet set;
    std::string representative;
    std::vector<gen::Candidate> candidates;
};

std::vector<SetRun> run_generation(const std::vector<HomophoneSet>& sets, model::SqModel& m,
                                   const phon::PhonemeVocabulary& pv,
                                   const phon::GraphemeVocabulary& gv,
                                   const gen::GenerationParams& params,
                                   const RepresentativeRule& rule = lexicographic_representative());

struct SetResult {
    std::string ipa;
    std::string representative;
    std::vector<std::string> members;
    std::vector<std::pair<std::string, int>> found;  // member -> rank
    size_t list_len = 0;
};

struct EvalReport {
    double coverage = 0;     // found / total non-representative members
    size_t found = 0;
    size_t total = 0;
    double cand_mean = 0;    // candidates per set
    double cand_sd = 0;      // population SD
    size_t quasi_homophones = 0;
    int top_k = 0;           // 0 = anywhere in the list
    std::vector<SetResult> sets;

    std::vector<int> ranks() const;
    std::string to_json() const;
};

// A non-representative member counts as found when its surface appears in the
// candidate list (within top_k when top_k > 0). Candidates present in
// reference_words (other than the representative) count as quasi-homophones.
EvalReport coverage_from_runs(const std::vector<SetRun>& runs,
                              const std::set<std::string>* reference_words = nullptr,
                              int top_k = 0);

EvalReport coverage(const std::vector<HomophoneSet>& sets, model::SqModel& m,
                    const phon::PhonemeVocabulary& pv, const phon::GraphemeVocabulary& gv,
                    const gen::GenerationParams& params,
                    const std::set<std::string>* reference_words = nullptr, int top_k = 0,
                    const RepresentativeRule& rule = lexicographic_representative());

struct EcdfTable {
    std::vector<int> rank;            // 1..max list length
    std::vector<double> model_ecdf;   // fraction of found homophones at rank <= n
    std::vector<double> baseline_ecdf;  // analytic uniform-permutation baseline
    std::string to_csv() const;
};

EcdfTable rank_ecdf_from_runs(const std::vector<SetRun>& runs);
EcdfTable rank_ecdf(const std::vector<HomophoneSet>& sets, model::SqModel& m,
                    const phon::PhonemeVocabulary& pv, const phon::GraphemeVocabulary& gv,
                    const gen::GenerationParams& params);

struct AblationDelta {
    long found_delta = 0;  // with-audio minus without-audio
    long quasi_delta = 0;
    struct Row {
        std::string ipa;
        std::string representative;
        std::vector<std::string> members;
        std::vector<std::string> with_audio;
        std::vector<std::string> without_audio;
    };
    std::vector<Row> differing_sets;
    std::string to_json() const;
};

// Both reports must cover identical sets with the same top_k.
AblationDelta ablation_compare(const EvalReport& with_audio, const EvalReport& without_audio);

}  // namespace ssq::eval
