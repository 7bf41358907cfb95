#include "ssq/generator.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>

namespace ssq::gen {

using json = nlohmann::ordered_json;
using phon::Specials;

namespace {

struct BeamNode {
    std::vector<int> chars;  // emitted grapheme ids, BOS/EOS excluded
    double logprob = 0.0;
};

bool expandable(int token) {
    return token != Specials::pad && token != Specials::bos && token != Specials::unk;
}

std::string surface_of(const BeamNode& n, const phon::GraphemeVocabulary& gv) {
    return phon::detokenize_graphemes(n.chars, gv);
}

}  // namespace

std::vector<Candidate> generate(model::SqModel& m, const phon::IpaSequence& ipa,
                                const phon::GraphemeVocabulary& gv, const GenerationParams& p) {
    p.validate();
    const int N = static_cast<int>(ipa.token_ids.size());
    const int M = std::min(N + p.extra_depth, m.config().max_out_len);

    nn::Tensor memory;
    try {
        memory = m.encode(ipa);
    } catch (const Error& e) {
        throw;
    } catch (const std::exception& e) {
        throw ModelError(e.what());
    }

    std::vector<BeamNode> active = {BeamNode{}};
    std::vector<BeamNode> completed;

    for (int step = 0; step < M && !active.empty(); ++step) {
        std::vector<BeamNode> children;
        for (const BeamNode& node : active) {
            std::vector<int> history = {Specials::bos};
            history.insert(history.end(), node.chars.begin(), node.chars.end());
            nn::Tensor dist = m.decode_step(memory, history);

            // C most probable next characters; ties resolve by token order.
            std::vector<std::pair<double, int>> scored;
            for (int c = 0; c < dist.cols(); ++c) {
                if (!expandable(c)) continue;
                scored.emplace_back(dist.at(0, c), c);
            }
            std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            const int take = std::min<int>(p.children, static_cast<int>(scored.size()));
            for (int i = 0; i < take; ++i) {
                const double edge = std::log(scored[i].first);
                BeamNode child;
                child.chars = node.chars;
                child.logprob = node.logprob + edge;
                if (scored[i].second == Specials::eos) {
                    completed.push_back(std::move(child));
                } else {
                    child.chars.push_back(scored[i].second);
                    children.push_back(std::move(child));
                }
            }
        }
        // Keep the K best active nodes; finished nodes do not consume slots.
        std::sort(children.begin(), children.end(), [&](const BeamNode& a, const BeamNode& b) {
            if (a.logprob != b.logprob) return a.logprob > b.logprob;
            return a.chars < b.chars;
        });
        if (static_cast<int>(children.size()) > p.beam_width) children.resize(p.beam_width);
        active = std::move(children);
    }

    // Completed nodes plus surviving unfinished leaves; merge duplicate
    // surfaces keeping the best score.
    std::map<std::string, double> merged;
    auto consider = [&](const BeamNode& n) {
        std::string s = surface_of(n, gv);
        auto it = merged.find(s);
        if (it == merged.end() || n.logprob > it->second) merged[s] = n.logprob;
    };
    for (const auto& n : completed) consider(n);
    for (const auto& n : active) consider(n);
    for (const auto& s : p.exclude) merged.erase(s);

    if (merged.empty()) throw EmptyResult("no candidates survived exclusion");

    std::vector<Candidate> out;
    out.reserve(merged.size());
    for (const auto& [surface, lp] : merged) out.push_back({surface, lp, 0});
    std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        if (a.joint_logprob != b.joint_logprob) return a.joint_logprob > b.joint_logprob;
        return a.surface < b.surface;
    });
    for (size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i) + 1;
    return out;
}

std::vector<Candidate> generate_cross(model::SqModel& m, const std::string& word,
                                      phon::G2pBackend& backend, const phon::PhonemeMap& map,
                                      const phon::GraphemeVocabulary& gv,
                                      const GenerationParams& p) {
    const std::string foreign_ipa = backend.to_ipa(word);

    // Tokenize against the model inventory extended with every foreign token
    // the map can resolve.
    auto tokens = map.vocab().inventory();
    for (const auto& t : map.known_foreign_tokens()) tokens.push_back(t);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    phon::PhonemeVocabulary extended(tokens);

    auto foreign_seq = phon::tokenize_ipa(foreign_ipa, extended);
    auto mapped = map_phonemes(foreign_seq, map, extended);
    return generate(m, mapped, gv, p);
}

BatchResult batch_generate(model::SqModel& m, const std::vector<std::string>& targets,
                           phon::G2pBackend& backend, const phon::PhonemeVocabulary& pv,
                           const phon::GraphemeVocabulary& gv, const GenerationParams& p) {
    BatchResult result;
    std::vector<size_t> counts;
    for (const auto& target : targets) {
        BatchItem item;
        item.target = target;
        try {
            item.ipa = backend.to_ipa(target);
            auto seq = phon::tokenize_ipa(item.ipa, pv);
            if (static_cast<int>(seq.token_ids.size()) > m.config().max_in_len)
                throw TargetTooLong(target + " exceeds the phoneme length limit");
            item.candidates = generate(m, seq, gv, p);
            counts.push_back(item.candidates.size());
            result.total_candidates += item.candidates.size();
        } catch (const std::exception& e) {
            item.error = e.what();
            ++result.failed;
        }
        result.items.push_back(std::move(item));
    }
    if (!counts.empty()) {
        double sum = 0;
        for (size_t c : counts) sum += static_cast<double>(c);
        result.mean = sum / static_cast<double>(counts.size());
        double var = 0;
        for (size_t c : counts) {
            const double d = static_cast<double>(c) - result.mean;
            var += d * d;
        }
        result.stddev = std::sqrt(var / static_cast<double>(counts.size()));
    }
    return result;
}

double replay_logprob(model::SqModel& m, const nn::Tensor& memory, const std::string& surface,
                      const phon::GraphemeVocabulary& gv, bool with_eos) {
    auto word = phon::tokenize_graphemes(surface, gv);
    std::vector<int> history = {Specials::bos};
    double total = 0.0;
    for (int c : word.chars) {
        nn::Tensor dist = m.decode_step(memory, history);
        total += std::log(dist.at(0, c));
        history.push_back(c);
    }
    if (with_eos) {
        nn::Tensor dist = m.decode_step(memory, history);
        total += std::log(dist.at(0, Specials::eos));
    }
    return total;
}

std::string candidates_jsonl(const std::string& target, const std::string& ipa,
                             const std::vector<Candidate>& candidates) {
    std::string out;
    for (const auto& c : candidates) {
        json j;
        j["target"] = target;
        j["ipa"] = ipa;
        j["candidate"] = c.surface;
        j["joint_logprob"] = c.joint_logprob;
        j["rank"] = c.rank;
        out += j.dump();
        out += "\n";
    }
    return out;
}

std::string candidates_csv(const std::vector<BatchItem>& items, bool header) {
    std::string out;
    if (header) out += "target,ipa,candidate,joint_logprob,rank\n";
    for (const auto& item : items) {
        for (const auto& c : item.candidates) {
            out += item.target + "," + item.ipa + "," + c.surface + "," +
                   json(c.joint_logprob).dump() + "," + std::to_string(c.rank) + "\n";
        }
    }
    return out;
}

}  // namespace ssq::gen
