#include "ssq/phonology.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace ssq::phon {

namespace {

const char* kSpecialNames[Specials::count] = {"<pad>", "<bos>", "<eos>", "<unk>"};

// Codepoints removed by the diacritic-stripping fallback: combining marks and
// a few spacing modifier letters. Stress and length marks are inventory
// tokens and stay untouched.
bool is_strippable_mark(const std::string& cp) {
    static const std::set<std::string> kModifiers = {
        "ʰ",  // aspiration
        "ʲ",  // palatalization
        "ʷ",  // labialization
        "ʼ",  // ejective
        "ˠ",  // velarization
        "ˤ",  // pharyngealization
    };
    if (kModifiers.count(cp)) return true;
    if (cp.size() == 2) {
        unsigned c = ((cp[0] & 0x1F) << 6) | (cp[1] & 0x3F);
        if (c >= 0x0300 && c <= 0x036F) return true;
    }
    if (cp.size() == 3) {
        unsigned c = ((cp[0] & 0x0F) << 12) | ((cp[1] & 0x3F) << 6) | (cp[2] & 0x3F);
        if (c >= 0x1DC0 && c <= 0x1DFF) return true;
    }
    return false;
}

std::string strip_marks(const std::string& token) {
    std::string out;
    for (const auto& cp : utf8_codepoints(token)) {
        if (!is_strippable_mark(cp)) out += cp;
    }
    return out;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
    for (int i = 0; i < Specials::count; ++i) id_to_token_.emplace_back(kSpecialNames[i]);
    for (auto& t : tokens) {
        if (t.empty()) throw ConfigError("empty token in inventory");
        id_to_token_.push_back(std::move(t));
    }
    for (int i = 0; i < static_cast<int>(id_to_token_.size()); ++i) {
        if (!token_to_id_.emplace(id_to_token_[i], i).second)
            throw ConfigError("duplicate token in inventory: " + id_to_token_[i]);
    }
    std::string joined;
    for (const auto& t : id_to_token_) {
        joined += t;
        joined += '\n';
    }
    hash_ = fnv1a(joined);
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open inventory " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        tokens.push_back(line);
    }
    return Vocabulary(std::move(tokens));
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) throw IndexOutOfRange("token id " + std::to_string(id));
    return id_to_token_[id];
}

std::optional<int> Vocabulary::id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> Vocabulary::inventory() const {
    return {id_to_token_.begin() + Specials::count, id_to_token_.end()};
}

GraphemeVocabulary default_grapheme_vocabulary() {
    std::vector<std::string> tokens;
    for (char c = 'a'; c <= 'z'; ++c) tokens.push_back(std::string(1, c));
    tokens.push_back("-");
    tokens.push_back("'");
    tokens.push_back(".");
    return GraphemeVocabulary(std::move(tokens));
}

IpaSequence tokenize_ipa(const std::string& surface, const PhonemeVocabulary& vocab) {
    std::string s = trim(surface);
    while (!s.empty() && s.front() == '/') s.erase(s.begin());
    while (!s.empty() && s.back() == '/') s.pop_back();
    s = trim(s);
    if (s.empty()) throw EmptyInput("IPA string is empty");

    // Greedy longest match over the inventory; bounded by the longest token.
    size_t max_len = 1;
    for (const auto& t : vocab.inventory()) max_len = std::max(max_len, t.size());

    IpaSequence seq;
    seq.surface = s;
    auto cps = utf8_codepoints(s);
    std::vector<size_t> offsets;  // byte offset of each codepoint
    size_t off = 0;
    for (const auto& cp : cps) {
        offsets.push_back(off);
        off += cp.size();
    }
    offsets.push_back(off);

    size_t i = 0;
    while (i < cps.size()) {
        int matched_id = -1;
        size_t matched_cps = 0;
        for (size_t take = cps.size() - i; take >= 1; --take) {
            size_t len = offsets[i + take] - offsets[i];
            if (len > max_len) continue;
            auto id = vocab.id(s.substr(offsets[i], len));
            if (id && !vocab.is_special(*id)) {
                matched_id = *id;
                matched_cps = take;
                break;
            }
        }
        if (matched_id >= 0) {
            seq.token_ids.push_back(matched_id);
            i += matched_cps;
        } else {
            seq.token_ids.push_back(Specials::unk);
            i += 1;
        }
    }
    return seq;
}

std::string detokenize_ipa(const IpaSequence& seq, const PhonemeVocabulary& vocab) {
    std::string out;
    for (int id : seq.token_ids) out += vocab.token(id);
    return out;
}

GraphemeWord tokenize_graphemes(const std::string& surface, const GraphemeVocabulary& vocab) {
    GraphemeWord w;
    w.surface = surface;
    for (const auto& cp : utf8_codepoints(surface)) {
        auto id = vocab.id(cp);
        w.chars.push_back(id && !vocab.is_special(*id) ? *id : Specials::unk);
    }
    return w;
}

std::string detokenize_graphemes(const std::vector<int>& chars, const GraphemeVocabulary& vocab) {
    std::string out;
    for (int id : chars) {
        if (id == Specials::bos || id == Specials::eos || id == Specials::pad) continue;
        out += vocab.token(id);
    }
    return out;
}

// ---------------------------------------------------------------------------

DictionaryBackend::DictionaryBackend(const std::string& tsv_path, std::string language)
    : language_(std::move(language)) {
    std::ifstream in(tsv_path);
    if (!in) throw BackendUnavailable("dictionary not found: " + tsv_path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos) continue;
        entries_[to_lower(trim(line.substr(0, tab)))] = trim(line.substr(tab + 1));
    }
    if (entries_.empty()) throw BackendUnavailable("dictionary is empty: " + tsv_path);
}

DictionaryBackend DictionaryBackend::from_entries(
    std::vector<std::pair<std::string, std::string>> entries, std::string language) {
    DictionaryBackend b;
    b.language_ = std::move(language);
    for (auto& [w, ipa] : entries) b.entries_[to_lower(w)] = ipa;
    return b;
}

std::string DictionaryBackend::to_ipa(const std::string& word) {
    if (trim(word).empty()) throw EmptyInput("word is empty");
    auto it = entries_.find(to_lower(trim(word)));
    if (it == entries_.end()) throw NotInDictionary(word);
    return it->second;
}

ProcessBackend::ProcessBackend(const std::string& command, std::string language)
    : language_(std::move(language)) {
    int in_pipe[2];
    int out_pipe[2];
    if (pipe(in_pipe) != 0) throw BackendUnavailable("pipe failed");
    if (pipe(out_pipe) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw BackendUnavailable("pipe failed");
    }
    pid_t pid = fork();
    if (pid < 0) throw BackendUnavailable("fork failed");
    if (pid == 0) {
        dup2(in_pipe[0], 0);
        dup2(out_pipe[1], 1);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    child_pid_ = pid;
    to_child_ = fdopen(in_pipe[1], "w");
    from_child_ = fdopen(out_pipe[0], "r");
    if (!to_child_ || !from_child_) throw BackendUnavailable("fdopen failed");
}

ProcessBackend::~ProcessBackend() {
    if (to_child_) fclose(to_child_);
    if (from_child_) fclose(from_child_);
    if (child_pid_ > 0) {
        int status = 0;
        waitpid(child_pid_, &status, 0);
    }
}

std::string ProcessBackend::to_ipa(const std::string& word) {
    std::string w = trim(word);
    if (w.empty()) throw EmptyInput("word is empty");
    std::lock_guard<std::mutex> lock(mu_);
    if (fprintf(to_child_, "%s\n", w.c_str()) < 0 || fflush(to_child_) != 0)
        throw BackendUnavailable("pipe to G2P process broken");
    char* line = nullptr;
    size_t cap = 0;
    ssize_t n = getline(&line, &cap, from_child_);
    if (n < 0) {
        free(line);
        throw BackendUnavailable("G2P process produced no output");
    }
    std::string out(line, static_cast<size_t>(n));
    free(line);
    return trim(out);
}

// ---------------------------------------------------------------------------

PhonemeMap::PhonemeMap(const PhonemeVocabulary& vocab) : vocab_(&vocab) {}

void PhonemeMap::add_entry(const std::string& foreign, std::vector<std::string> image) {
    for (const auto& t : image) {
        auto id = vocab_->id(t);
        if (!id || vocab_->is_special(*id))
            throw ConfigError("map image token not in vocabulary: " + t);
    }
    entries_[foreign] = std::move(image);
}

void PhonemeMap::load_feature_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open feature table " + path);
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto parts = split(line, '\t');
        if (parts.size() != 5) throw ConfigError("bad feature table row: " + line);
        Features f;
        f.kind = parts[1] == "vowel" ? 0 : 1;
        f.f1 = std::stod(parts[2]);
        f.f2 = std::stod(parts[3]);
        f.f3 = std::stod(parts[4]);
        features_[parts[0]] = f;
    }
}

std::optional<std::string> PhonemeMap::nearest_by_features(const std::string& token) const {
    auto it = features_.find(token);
    if (it == features_.end()) return std::nullopt;
    const Features& want = it->second;
    std::optional<std::string> best;
    double best_d = 0;
    for (const auto& [cand, f] : features_) {
        if (f.kind != want.kind) continue;
        auto id = vocab_->id(cand);
        if (!id || vocab_->is_special(*id)) continue;
        double d = std::abs(f.f1 - want.f1) + std::abs(f.f2 - want.f2) + std::abs(f.f3 - want.f3);
        if (!best || d < best_d || (d == best_d && cand < *best)) {
            best = cand;
            best_d = d;
        }
    }
    return best;
}

std::optional<std::vector<std::string>> PhonemeMap::try_resolve(const std::string& token) const {
    auto in_vocab = [&](const std::string& t) {
        auto id = vocab_->id(t);
        return id && !vocab_->is_special(*id);
    };
    if (in_vocab(token)) return std::vector<std::string>{token};
    if (auto it = entries_.find(token); it != entries_.end()) return it->second;

    std::string stripped = strip_marks(token);
    if (!stripped.empty() && stripped != token) {
        if (in_vocab(stripped)) return std::vector<std::string>{stripped};
        if (auto it = entries_.find(stripped); it != entries_.end()) return it->second;
    }
    if (auto near = nearest_by_features(token)) return std::vector<std::string>{*near};
    if (!stripped.empty() && stripped != token) {
        if (auto near = nearest_by_features(stripped)) return std::vector<std::string>{*near};
    }
    return std::nullopt;
}

std::vector<std::string> PhonemeMap::resolve(const std::string& token) const {
    auto r = try_resolve(token);
    if (!r) throw UnmappablePhoneme(token);
    return *r;
}

std::vector<std::string> PhonemeMap::known_foreign_tokens() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    for (const auto& [k, f] : features_) {
        auto id = vocab_->id(k);
        if (!id || vocab_->is_special(*id)) out.push_back(k);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

IpaSequence map_phonemes(const IpaSequence& seq, const PhonemeMap& map,
                         const PhonemeVocabulary& foreign_vocab) {
    IpaSequence out;
    std::vector<std::string> missing;
    for (int id : seq.token_ids) {
        if (id == Specials::unk) {
            missing.push_back("<unk>");
            continue;
        }
        const std::string& token = foreign_vocab.token(id);
        auto image = map.try_resolve(token);
        if (!image) {
            missing.push_back(token);
            continue;
        }
        for (const auto& t : *image) {
            out.token_ids.push_back(*map.vocab().id(t));
            out.surface += t;
        }
    }
    if (!missing.empty()) {
        std::string joined;
        for (const auto& t : missing) joined += (joined.empty() ? "" : ", ") + t;
        throw UnmappablePhoneme(joined);
    }
    return out;
}

std::vector<std::string> load_wordlist(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open wordlist " + path);
    std::vector<std::string> words;
    std::set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        std::string w = to_lower(trim(line));
        if (w.empty()) continue;
        if (seen.insert(w).second) words.push_back(w);
    }
    if (words.empty()) throw EmptyWordlist(path);
    return words;
}

}  // namespace ssq::phon
