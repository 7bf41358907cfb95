#include "ssq/evaluation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>

namespace ssq::eval {

using json = nlohmann::ordered_json;

std::vector<HomophoneSet> build_homophone_sets(const std::vector<std::string>& words,
                                               phon::G2pBackend& backend,
                                               std::vector<std::string>* unresolved) {
    std::map<std::string, std::vector<std::string>> by_ipa;
    std::set<std::string> seen;
    for (const auto& word : words) {
        if (!seen.insert(word).second) continue;
        try {
            by_ipa[backend.to_ipa(word)].push_back(word);
        } catch (const NotInDictionary&) {
            if (unresolved) unresolved->push_back(word);
        }
    }
    std::vector<HomophoneSet> sets;
    for (auto& [ipa, members] : by_ipa) {
        if (members.size() < 2) continue;
        std::sort(members.begin(), members.end());
        sets.push_back({ipa, std::move(members)});
    }
    return sets;  // std::map iteration is already IPA-ordered
}

RepresentativeRule lexicographic_representative() {
    return [](const HomophoneSet& set) {
        return *std::min_element(set.members.begin(), set.members.end());
    };
}

std::vector<SetRun> run_generation(const std::vector<HomophoneSet>& sets, model::SqModel& m,
                                   const phon::PhonemeVocabulary& pv,
                                   const phon::GraphemeVocabulary& gv,
                                   const gen::GenerationParams& params,
                                   const RepresentativeRule& rule) {
    std::vector<SetRun> runs;
    runs.reserve(sets.size());
    for (const auto& set : sets) {
        SetRun run;
        run.set = set;
        run.representative = rule(set);
        auto seq = phon::tokenize_ipa(set.ipa, pv);
        run.candidates = gen::generate(m, seq, gv, params);
        runs.push_back(std::move(run));
    }
    return runs;
}

EvalReport coverage_from_runs(const std::vector<SetRun>& runs,
                              const std::set<std::string>* reference_words, int top_k) {
    EvalReport report;
    report.top_k = top_k;
    std::vector<size_t> counts;
    for (const auto& run : runs) {
        SetResult sr;
        sr.ipa = run.set.ipa;
        sr.representative = run.representative;
        sr.members = run.set.members;
        sr.list_len = run.candidates.size();
        counts.push_back(run.candidates.size());

        std::map<std::string, int> rank_of;
        for (const auto& c : run.candidates) rank_of.emplace(c.surface, c.rank);

        for (const auto& member : run.set.members) {
            if (member == run.representative) continue;
            ++report.total;
            auto it = rank_of.find(member);
            if (it == rank_of.end()) continue;
            if (top_k > 0 && it->second > top_k) continue;
            sr.found.emplace_back(member, it->second);
            ++report.found;
        }
        if (reference_words) {
            for (const auto& c : run.candidates) {
                if (c.surface == run.representative) continue;
                if (reference_words->count(c.surface)) ++report.quasi_homophones;
            }
        }
        report.sets.push_back(std::move(sr));
    }
    report.coverage = report.total ? static_cast<double>(report.found) / report.total : 0.0;
    if (!counts.empty()) {
        double sum = 0;
        for (size_t c : counts) sum += static_cast<double>(c);
        report.cand_mean = sum / static_cast<double>(counts.size());
        double var = 0;
        for (size_t c : counts) {
            const double d = static_cast<double>(c) - report.cand_mean;
            var += d * d;
        }
        report.cand_sd = std::sqrt(var / static_cast<double>(counts.size()));
    }
    return report;
}

EvalReport coverage(const std::vector<HomophoneSet>& sets, model::SqModel& m,
                    const phon::PhonemeVocabulary& pv, const phon::GraphemeVocabulary& gv,
                    const gen::GenerationParams& params,
                    const std::set<std::string>* reference_words, int top_k,
                    const RepresentativeRule& rule) {
    return coverage_from_runs(run_generation(sets, m, pv, gv, params, rule), reference_words,
                              top_k);
}

std::vector<int> EvalReport::ranks() const {
    std::vector<int> out;
    for (const auto& s : sets)
        for (const auto& [word, rank] : s.found) out.push_back(rank);
    return out;
}

std::string EvalReport::to_json() const {
    json j;
    j["coverage"] = coverage;
    j["found"] = found;
    j["total"] = total;
    j["candidates_mean"] = cand_mean;
    j["candidates_sd"] = cand_sd;
    j["quasi_homophones"] = quasi_homophones;
    j["top_k"] = top_k;
    j["ranks"] = ranks();
    json sets_json = json::array();
    for (const auto& s : sets) {
        json sj;
        sj["ipa"] = s.ipa;
        sj["representative"] = s.representative;
        sj["members"] = s.members;
        json found_json = json::array();
        for (const auto& [word, rank] : s.found)
            found_json.push_back(json{{"word", word}, {"rank", rank}});
        sj["found"] = found_json;
        sj["candidates"] = s.list_len;
        sets_json.push_back(sj);
    }
    j["sets"] = sets_json;
    return j.dump();
}

EcdfTable rank_ecdf_from_runs(const std::vector<SetRun>& runs) {
    // (rank, list length) of every found homophone, unbounded by top_k.
    std::vector<std::pair<int, size_t>> found;
    size_t max_len = 0;
    for (const auto& run : runs) {
        std::map<std::string, int> rank_of;
        for (const auto& c : run.candidates) rank_of.emplace(c.surface, c.rank);
        for (const auto& member : run.set.members) {
            if (member == run.representative) continue;
            auto it = rank_of.find(member);
            if (it == rank_of.end()) continue;
            found.emplace_back(it->second, run.candidates.size());
            max_len = std::max(max_len, run.candidates.size());
        }
    }
    if (found.empty()) throw EmptyResult("no homophones found; ECDF is undefined");

    EcdfTable table;
    for (int n = 1; n <= static_cast<int>(max_len); ++n) {
        size_t hits = 0;
        double baseline = 0;
        for (const auto& [rank, len] : found) {
            if (rank <= n) ++hits;
            baseline += std::min(1.0, static_cast<double>(n) / static_cast<double>(len));
        }
        table.rank.push_back(n);
        table.model_ecdf.push_back(static_cast<double>(hits) / found.size());
        table.baseline_ecdf.push_back(baseline / static_cast<double>(found.size()));
    }
    return table;
}

EcdfTable rank_ecdf(const std::vector<HomophoneSet>& sets, model::SqModel& m,
                    const phon::PhonemeVocabulary& pv, const phon::GraphemeVocabulary& gv,
                    const gen::GenerationParams& params) {
    return rank_ecdf_from_runs(run_generation(sets, m, pv, gv, params));
}

std::string EcdfTable::to_csv() const {
    std::string out = "rank,model_ecdf,baseline_ecdf\n";
    for (size_t i = 0; i < rank.size(); ++i) {
        out += std::to_string(rank[i]) + "," + json(model_ecdf[i]).dump() + "," +
               json(baseline_ecdf[i]).dump() + "\n";
    }
    return out;
}

AblationDelta ablation_compare(const EvalReport& with_audio, const EvalReport& without_audio) {
    if (with_audio.sets.size() != without_audio.sets.size() ||
        with_audio.total != without_audio.total || with_audio.top_k != without_audio.top_k)
        throw MismatchedInputs("reports were built over different sets or parameters");
    for (size_t i = 0; i < with_audio.sets.size(); ++i) {
        if (with_audio.sets[i].ipa != without_audio.sets[i].ipa ||
            with_audio.sets[i].members != without_audio.sets[i].members)
            throw MismatchedInputs("set " + std::to_string(i) + " differs between reports");
    }

    AblationDelta delta;
    delta.found_delta = static_cast<long>(with_audio.found) - static_cast<long>(without_audio.found);
    delta.quasi_delta = static_cast<long>(with_audio.quasi_homophones) -
                        static_cast<long>(without_audio.quasi_homophones);
    for (size_t i = 0; i < with_audio.sets.size(); ++i) {
        const auto& a = with_audio.sets[i];
        const auto& b = without_audio.sets[i];
        std::vector<std::string> wa, wo;
        for (const auto& [w, r] : a.found) wa.push_back(w);
        for (const auto& [w, r] : b.found) wo.push_back(w);
        std::sort(wa.begin(), wa.end());
        std::sort(wo.begin(), wo.end());
        if (wa != wo)
            delta.differing_sets.push_back({a.ipa, a.representative, a.members, wa, wo});
    }
    return delta;
}

std::string AblationDelta::to_json() const {
    json j;
    j["found_delta"] = found_delta;
    j["quasi_delta"] = quasi_delta;
    json rows = json::array();
    for (const auto& row : differing_sets) {
        json rj;
        rj["ipa"] = row.ipa;
        rj["word"] = row.representative;
        rj["known_homophones"] = row.members;
        rj["generated_with_audio"] = row.with_audio;
        rj["generated_without_audio"] = row.without_audio;
        rows.push_back(rj);
    }
    j["differing_sets"] = rows;
    return j.dump();
}

}  // namespace ssq::eval
