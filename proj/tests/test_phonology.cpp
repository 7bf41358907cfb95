#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "ssq/phonology.hpp"
#include "test_paths.hpp"

using namespace ssq;
using namespace ssq::phon;

namespace {

PhonemeVocabulary tiny_vocab() {
    return PhonemeVocabulary({"b", "a\xc9\xaa", "\xcb\x88", "k", "t"});  // b, aɪ, ˈ, k, t
}

std::string write_temp(const std::string& name, const std::string& content) {
    std::string path = test_tmp_dir() + "/" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("default inventories have the full-scale sizes") {
    auto pv = PhonemeVocabulary::load(data_path("phonemes_en_us.txt"));
    CHECK(pv.size() == 73);
    auto gv = default_grapheme_vocabulary();
    CHECK(gv.size() == 33);
    CHECK(gv.id("a").has_value());
    CHECK(gv.id("z").has_value());
    CHECK(gv.id("-").has_value());
}

TEST_CASE("vocabulary id/token mapping is a bijection") {
    auto pv = PhonemeVocabulary::load(data_path("phonemes_en_us.txt"));
    for (int i = 0; i < pv.size(); ++i) {
        auto id = pv.id(pv.token(i));
        REQUIRE(id.has_value());
        CHECK(*id == i);
    }
}

TEST_CASE("tokenize_ipa segments /b'aI/ with stress as its own token") {
    auto pv = PhonemeVocabulary::load(data_path("phonemes_en_us.txt"));
    auto seq = tokenize_ipa("/b\xcb\x88\x61\xc9\xaa/", pv);  // /bˈaɪ/
    REQUIRE(seq.token_ids.size() == 3);
    CHECK(pv.token(seq.token_ids[0]) == "b");
    CHECK(pv.token(seq.token_ids[1]) == "\xcb\x88");
    CHECK(pv.token(seq.token_ids[2]) == "a\xc9\xaa");
}

TEST_CASE("tokenize_ipa rejects empty input") {
    auto v = tiny_vocab();
    CHECK_THROWS_AS(tokenize_ipa("", v), EmptyInput);
    CHECK_THROWS_AS(tokenize_ipa("  //  ", v), EmptyInput);
}

TEST_CASE("unknown codepoint maps to UNK at its position") {
    auto v = tiny_vocab();
    auto seq = tokenize_ipa("b@t", v);
    REQUIRE(seq.token_ids.size() == 3);
    CHECK(v.token(seq.token_ids[0]) == "b");
    CHECK(seq.token_ids[1] == Specials::unk);
    CHECK(v.token(seq.token_ids[2]) == "t");
}

TEST_CASE("tokenize/detokenize round-trip over random token concatenations") {
    auto pv = PhonemeVocabulary::load(data_path("phonemes_en_us.txt"));
    auto inv = pv.inventory();
    Rng rng(1234);
    for (int trial = 0; trial < 200; ++trial) {
        const int len = 1 + static_cast<int>(rng.below(12));
        std::string surface;
        for (int i = 0; i < len; ++i) surface += inv[rng.below(inv.size())];
        auto seq = tokenize_ipa(surface, pv);
        CHECK(detokenize_ipa(seq, pv) == surface);
    }
}

TEST_CASE("dictionary backend lookups") {
    auto path = write_temp("dict.tsv", "# comment\ncat\tk\xc3\xa6t\nby\tb\xcb\x88\x61\xc9\xaa\n");
    DictionaryBackend backend(path, "en-us");
    CHECK(backend.to_ipa("cat") == "k\xc3\xa6t");
    CHECK(backend.to_ipa("CAT") == "k\xc3\xa6t");
    CHECK_THROWS_AS(backend.to_ipa("zzzz"), NotInDictionary);
}

TEST_CASE("missing dictionary file is BackendUnavailable") {
    CHECK_THROWS_AS(DictionaryBackend("/nonexistent/dict.tsv", "en"), BackendUnavailable);
}

TEST_CASE("process backend speaks the line protocol") {
    // Child echoes each word back bracketed by slashes.
    ProcessBackend backend(
        "python3 -u -c \"import sys\n"
        "for line in sys.stdin:\n"
        "    print('/' + line.strip() + '/', flush=True)\"",
        "en-us");
    CHECK(backend.to_ipa("by") == "/by/");
    CHECK(backend.to_ipa("cat") == "/cat/");
}

TEST_CASE("process backend that dies is BackendUnavailable") {
    ProcessBackend backend("exit 0", "en-us");
    CHECK_THROWS_AS(backend.to_ipa("word"), BackendUnavailable);
}

TEST_CASE("phoneme map: identity, one-to-many, unmappable") {
    auto pv = PhonemeVocabulary::load(data_path("phonemes_en_us.txt"));
    PhonemeMap map(pv);
    map.add_entry("\xca\x8e", {"l", "j"});  // ʎ -> l j

    PhonemeVocabulary foreign({"\xca\x8e", "a", "l", "j", "\xc6\x9b"});  // ʎ a l j ƛ
    IpaSequence seq;
    for (const char* t : {"l", "a"}) seq.token_ids.push_back(*foreign.id(t));
    auto mapped = map_phonemes(seq, map, foreign);
    CHECK(mapped.token_ids.size() == 2);
    CHECK(pv.token(mapped.token_ids[0]) == "l");
    CHECK(pv.token(mapped.token_ids[1]) == "a");

    IpaSequence with_lj;
    with_lj.token_ids = {*foreign.id("\xca\x8e"), *foreign.id("a")};
    auto grown = map_phonemes(with_lj, map, foreign);
    CHECK(grown.token_ids.size() == 3);
    CHECK(pv.token(grown.token_ids[0]) == "l");
    CHECK(pv.token(grown.token_ids[1]) == "j");

    IpaSequence bad;
    bad.token_ids = {*foreign.id("\xc6\x9b")};
    CHECK_THROWS_AS(map_phonemes(bad, map, foreign), UnmappablePhoneme);
}

TEST_CASE("feature-table fallback finds the closest in-inventory phoneme") {
    auto pv = PhonemeVocabulary::load(data_path("phonemes_en_us.txt"));
    PhonemeMap map(pv);
    map.load_feature_table(data_path("phoneme_features.tsv"));
    // ʎ (palatal lateral) is nearest to j among inventory candidates.
    auto img = map.resolve("\xca\x8e");
    REQUIRE(img.size() == 1);
    CHECK((img[0] == "j" || img[0] == "l"));
    // Nasalized a resolves via diacritic stripping.
    auto nasal = map.resolve("a\xcc\x83");
    REQUIRE(nasal.size() == 1);
    CHECK(nasal[0] == "a");
}

TEST_CASE("map_phonemes is idempotent") {
    auto pv = PhonemeVocabulary::load(data_path("phonemes_en_us.txt"));
    PhonemeMap map(pv);
    map.load_feature_table(data_path("phoneme_features.tsv"));
    Rng rng(7);
    auto inv = pv.inventory();
    for (int trial = 0; trial < 50; ++trial) {
        IpaSequence seq;
        const int len = 1 + static_cast<int>(rng.below(8));
        for (int i = 0; i < len; ++i) {
            seq.token_ids.push_back(Specials::count + static_cast<int>(rng.below(inv.size())));
        }
        auto once = map_phonemes(seq, map, pv);
        auto twice = map_phonemes(once, map, pv);
        CHECK(once.token_ids == twice.token_ids);
    }
}

TEST_CASE("load_wordlist lowercases, dedups, preserves order") {
    auto path = write_temp("words.txt", "By\nby\ncat\n\nCAT\n");
    auto words = load_wordlist(path);
    REQUIRE(words.size() == 2);
    CHECK(words[0] == "by");
    CHECK(words[1] == "cat");

    auto empty = write_temp("empty.txt", "\n\n");
    CHECK_THROWS_AS(load_wordlist(empty), EmptyWordlist);
    CHECK_THROWS_AS(load_wordlist("/nonexistent/words.txt"), IoError);
}
