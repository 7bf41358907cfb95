#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ssq/common.hpp"

// Deterministic synthetic language for desk-scale training. A small phonotactic
// grammar with ambiguous spellings (c/k, ee/ea, ai/ay, ...) so that genuine
// homophone pairs exist: two spellings, one IPA transcription.
struct MiniLang {
    struct Row {
        std::string word;
        std::string ipa;
    };

    // n_singles unambiguous words plus n_pairs homophone pairs (two rows per
    // pair, same IPA). include_by_bye plants the by/bye pair as the first pair.
    static std::vector<Row> corpus(int n_singles, int n_pairs, std::uint64_t seed,
                                   bool include_by_bye = true) {
        // phoneme -> spellings (first entry is the default spelling)
        static const std::vector<std::pair<std::string, std::vector<std::string>>> consonants = {
            {"b", {"b"}}, {"d", {"d"}},  {"f", {"f"}}, {"\xc9\xa1", {"g"}}, {"h", {"h"}},
            {"l", {"l"}}, {"m", {"m"}},  {"n", {"n"}}, {"p", {"p"}},        {"s", {"s"}},
            {"t", {"t"}}, {"v", {"v"}},  {"z", {"z"}}, {"\xc9\xb9", {"r"}},
            {"k", {"k", "c"}},
        };
        static const std::vector<std::pair<std::string, std::vector<std::string>>> vowels = {
            {"\xc3\xa6", {"a"}},
            {"\xc9\x9b", {"e"}},
            {"\xc9\xaa", {"i"}},
            {"\xc9\x92", {"o"}},
            {"\xca\x8c", {"u"}},
            {"i\xcb\x90", {"ee", "ea"}},
            {"e\xc9\xaa", {"ai", "ay"}},
            {"a\xc9\xaa", {"y", "ie"}},
            {"o\xca\x8a", {"oa", "ow"}},
            {"u\xcb\x90", {"oo", "ue"}},
        };

        ssq::Rng rng(seed, "minilang");
        std::set<std::string> used_words;
        std::set<std::string> used_ipa;
        std::vector<Row> rows;

        struct Pick {
            const std::pair<std::string, std::vector<std::string>>* sym;
        };
        auto draw_word = [&](bool want_ambiguous) {
            // 1-2 syllables of C V (C)
            std::vector<const std::pair<std::string, std::vector<std::string>>*> phones;
            const int syllables = 1 + static_cast<int>(rng.below(2));
            for (int s = 0; s < syllables; ++s) {
                phones.push_back(&consonants[rng.below(consonants.size())]);
                phones.push_back(&vowels[rng.below(vowels.size())]);
                if (rng.uniform() < 0.5) phones.push_back(&consonants[rng.below(consonants.size())]);
            }
            if (want_ambiguous) {
                bool has = false;
                for (auto* p : phones) has = has || p->second.size() > 1;
                if (!has) return std::vector<const std::pair<std::string, std::vector<std::string>>*>{};
            }
            return phones;
        };
        auto ipa_of = [](const std::vector<const std::pair<std::string, std::vector<std::string>>*>& ps) {
            std::string ipa = "\xcb\x88";  // leading primary stress
            for (auto* p : ps) ipa += p->first;
            return ipa;
        };
        auto spell = [](const std::vector<const std::pair<std::string, std::vector<std::string>>*>& ps,
                        int variant_at, int variant) {
            std::string w;
            int ambiguous_seen = 0;
            for (auto* p : ps) {
                if (p->second.size() > 1) {
                    const bool flip = ambiguous_seen == variant_at;
                    w += p->second[flip ? variant : 0];
                    ++ambiguous_seen;
                } else {
                    w += p->second[0];
                }
            }
            return w;
        };

        int pairs_made = 0;
        if (include_by_bye && n_pairs > 0) {
            rows.push_back({"by", "b\xcb\x88\x61\xc9\xaa"});
            rows.push_back({"bye", "b\xcb\x88\x61\xc9\xaa"});
            used_words.insert("by");
            used_words.insert("bye");
            used_ipa.insert("b\xcb\x88\x61\xc9\xaa");
            ++pairs_made;
        }
        while (pairs_made < n_pairs) {
            auto phones = draw_word(true);
            if (phones.empty()) continue;
            const std::string ipa = ipa_of(phones);
            const std::string a = spell(phones, -1, 0);
            const std::string b = spell(phones, 0, 1);
            if (a == b || used_words.count(a) || used_words.count(b) || used_ipa.count(ipa))
                continue;
            if (a.size() > 12 || b.size() > 12) continue;
            rows.push_back({a, ipa});
            rows.push_back({b, ipa});
            used_words.insert(a);
            used_words.insert(b);
            used_ipa.insert(ipa);
            ++pairs_made;
        }
        int singles_made = 0;
        while (singles_made < n_singles) {
            auto phones = draw_word(false);
            if (phones.empty()) continue;
            const std::string ipa = ipa_of(phones);
            const std::string w = spell(phones, -1, 0);
            if (used_words.count(w) || used_ipa.count(ipa)) continue;
            if (w.size() > 12) continue;
            rows.push_back({w, ipa});
            used_words.insert(w);
            used_ipa.insert(ipa);
            ++singles_made;
        }
        return rows;
    }

    static std::string dictionary_tsv(const std::vector<Row>& rows) {
        std::string out;
        for (const auto& r : rows) out += r.word + "\t" + r.ipa + "\n";
        return out;
    }

    static std::string manifest_tsv(const std::vector<Row>& rows) {
        std::string out;
        for (const auto& r : rows) out += r.word + "\t" + r.ipa + "\tSYNTH\n";
        return out;
    }
};
