#pragma once

#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssq/common.hpp"

namespace ssq::phon {

// Index positions of the four special tokens; every vocabulary reserves them
// at the front, ahead of the tokens loaded from the inventory file.
struct Specials {
    static constexpr int pad = 0;
    static constexpr int bos = 1;
    static constexpr int eos = 2;
    static constexpr int unk = 3;
    static constexpr int count = 4;
};

// Immutable, ordered token inventory. Index<->token is a bijection.
class Vocabulary {
  public:
    // tokens are the non-special inventory entries, in file order.
    explicit Vocabulary(std::vector<std::string> tokens);

    static Vocabulary load(const std::string& inventory_path);

    int size() const { return static_cast<int>(id_to_token_.size()); }
    const std::string& token(int id) const;
    std::optional<int> id(const std::string& token) const;
    bool is_special(int id) const { return id < Specials::count; }

    // Fingerprint of the full ordered token list; stored in checkpoints.
    std::uint64_t hash() const { return hash_; }

    // Inventory tokens only (specials excluded), in order.
    std::vector<std::string> inventory() const;

  private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
    std::uint64_t hash_ = 0;
};

using PhonemeVocabulary = Vocabulary;
using GraphemeVocabulary = Vocabulary;

// Builds the default grapheme inventory: a-z, hyphen, apostrophe, period.
GraphemeVocabulary default_grapheme_vocabulary();

struct IpaSequence {
    std::vector<int> token_ids;   // no PAD inside
    std::string surface;          // original IPA string, delimiters stripped

    size_t size() const { return token_ids.size(); }
};

struct GraphemeWord {
    std::vector<int> chars;
    std::string surface;
};

// Greedy longest-match segmentation of an IPA string over the vocabulary.
// Leading/trailing '/' delimiters and whitespace are stripped; codepoints
// with no matching token become UNK.
IpaSequence tokenize_ipa(const std::string& surface, const PhonemeVocabulary& vocab);

// Inverse of tokenize_ipa up to UNK substitutions.
std::string detokenize_ipa(const IpaSequence& seq, const PhonemeVocabulary& vocab);

GraphemeWord tokenize_graphemes(const std::string& surface, const GraphemeVocabulary& vocab);
std::string detokenize_graphemes(const std::vector<int>& chars, const GraphemeVocabulary& vocab);

// ---------------------------------------------------------------------------
// Grapheme-to-phoneme backends

class G2pBackend {
  public:
    virtual ~G2pBackend() = default;
    // Returns the backend's IPA transcription of word, verbatim.
    virtual std::string to_ipa(const std::string& word) = 0;
    virtual std::string language() const = 0;
};

// TSV dictionary backend: `word<TAB>ipa`, UTF-8, '#' comments.
class DictionaryBackend : public G2pBackend {
  public:
    DictionaryBackend(const std::string& tsv_path, std::string language);
    static DictionaryBackend from_entries(std::vector<std::pair<std::string, std::string>> entries,
                                          std::string language);

    std::string to_ipa(const std::string& word) override;
    std::string language() const override { return language_; }
    size_t size() const { return entries_.size(); }

  private:
    DictionaryBackend() = default;
    std::unordered_map<std::string, std::string> entries_;
    std::string language_;
};

// Line-oriented external process backend: one word in on stdin, one IPA
// transcription out on stdout, UTF-8, flushed per line. Access is serialized
// per handle.
class ProcessBackend : public G2pBackend {
  public:
    ProcessBackend(const std::string& command, std::string language);
    ~ProcessBackend() override;

    ProcessBackend(const ProcessBackend&) = delete;
    ProcessBackend& operator=(const ProcessBackend&) = delete;

    std::string to_ipa(const std::string& word) override;
    std::string language() const override { return language_; }

  private:
    std::string language_;
    std::mutex mu_;
    int child_pid_ = -1;
    FILE* to_child_ = nullptr;
    FILE* from_child_ = nullptr;
};

// ---------------------------------------------------------------------------
// Cross-language closest-phoneme mapping

// Maps foreign IPA tokens into the model's phoneme inventory. Explicit
// entries win; otherwise combining diacritics are stripped and a feature
// table (vowel height/backness/rounding, consonant place/manner/voicing) is
// consulted for the nearest in-inventory token.
class PhonemeMap {
  public:
    explicit PhonemeMap(const PhonemeVocabulary& vocab);

    // entry: foreign token -> one or more in-vocabulary tokens.
    void add_entry(const std::string& foreign, std::vector<std::string> image);

    // Feature table file: `token<TAB>kind<TAB>f1<TAB>f2<TAB>f3`, '#' comments.
    void load_feature_table(const std::string& path);

    // Resolves one token to its in-vocabulary image. Identity for tokens
    // already in the vocabulary. Throws UnmappablePhoneme when no route exists.
    std::vector<std::string> resolve(const std::string& token) const;
    std::optional<std::vector<std::string>> try_resolve(const std::string& token) const;

    // Tokens the map knows about beyond the vocabulary (entry keys and
    // feature-table keys); used to build tokenizers for foreign IPA.
    std::vector<std::string> known_foreign_tokens() const;

    const PhonemeVocabulary& vocab() const { return *vocab_; }

  private:
    struct Features {
        int kind = 0;  // 0 vowel, 1 consonant
        double f1 = 0, f2 = 0, f3 = 0;
    };
    std::optional<std::string> nearest_by_features(const std::string& token) const;

    const PhonemeVocabulary* vocab_;
    std::map<std::string, std::vector<std::string>> entries_;
    std::map<std::string, Features> features_;
};

// Applies the map token-wise. One-to-many entries grow the sequence.
IpaSequence map_phonemes(const IpaSequence& seq, const PhonemeMap& map,
                         const PhonemeVocabulary& foreign_vocab);

// Lowercased, order-preserving, deduplicated word list; one word per line.
std::vector<std::string> load_wordlist(const std::string& path);

}  // namespace ssq::phon
