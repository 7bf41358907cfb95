#include "ssq/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "ssq/nn/ctc.hpp"

namespace ssq::model {

using nn::Graph;
using nn::Parameter;
using nn::Tensor;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// config

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::full() {
    ModelConfig cfg;
    cfg.d_model = 512;
    cfg.enc_heads = 2;
    cfg.enc_ffn = 2048;
    cfg.enc_blocks = 2;
    cfg.enc_dropout = 0.1;
    cfg.dec_heads = 2;
    cfg.dec_ffn = 2048;
    cfg.dec_blocks = 2;
    cfg.dec_dropout = 0.1;
    cfg.mel_blocks = 2;
    cfg.mel_attn_heads = 2;
    cfg.mel_block_kernels = {9, 9};
    cfg.mel_block_filters = {1024, 512};
    cfg.conv_stack_depth = 6;
    cfg.conv_stack_kernel = 9;
    cfg.conv_stack_filters = 512;
    cfg.out_kernel = 9;
    cfg.n_mels = 40;
    cfg.duration_hidden = 256;
    return cfg;
}

void ModelConfig::validate() const {
    if (d_model <= 0 || n_mels <= 0) throw ConfigError("dims must be positive");
    if (d_model % enc_heads || d_model % dec_heads || d_model % mel_attn_heads)
        throw ConfigError("d_model must be divisible by every head count");
    if (mel_block_kernels.size() != mel_block_filters.size() || mel_block_filters.empty())
        throw ConfigError("mel conv pair spec mismatch");
    if (mel_block_filters.back() != d_model)
        throw ConfigError("last mel block filter count must equal d_model");
    if (phoneme_vocab < phon::Specials::count + 1 || grapheme_vocab < phon::Specials::count + 1)
        throw ConfigError("vocabulary too small");
    if (max_in_len <= 0 || max_out_len <= 0) throw ConfigError("length limits must be positive");
}

std::string ModelConfig::to_json() const {
    json j;
    j["d_model"] = d_model;
    j["enc_heads"] = enc_heads;
    j["enc_ffn"] = enc_ffn;
    j["enc_blocks"] = enc_blocks;
    j["enc_dropout"] = enc_dropout;
    j["dec_heads"] = dec_heads;
    j["dec_ffn"] = dec_ffn;
    j["dec_blocks"] = dec_blocks;
    j["dec_dropout"] = dec_dropout;
    j["mel_blocks"] = mel_blocks;
    j["mel_attn_heads"] = mel_attn_heads;
    j["mel_block_kernels"] = mel_block_kernels;
    j["mel_block_filters"] = mel_block_filters;
    j["conv_stack_depth"] = conv_stack_depth;
    j["conv_stack_kernel"] = conv_stack_kernel;
    j["conv_stack_filters"] = conv_stack_filters;
    j["out_kernel"] = out_kernel;
    j["n_mels"] = n_mels;
    j["duration_hidden"] = duration_hidden;
    j["audio_feedback"] = audio_feedback;
    j["phoneme_vocab"] = phoneme_vocab;
    j["grapheme_vocab"] = grapheme_vocab;
    j["max_in_len"] = max_in_len;
    j["max_out_len"] = max_out_len;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    ModelConfig cfg;
    cfg.d_model = j.at("d_model");
    cfg.enc_heads = j.at("enc_heads");
    cfg.enc_ffn = j.at("enc_ffn");
    cfg.enc_blocks = j.at("enc_blocks");
    cfg.enc_dropout = j.at("enc_dropout");
    cfg.dec_heads = j.at("dec_heads");
    cfg.dec_ffn = j.at("dec_ffn");
    cfg.dec_blocks = j.at("dec_blocks");
    cfg.dec_dropout = j.at("dec_dropout");
    cfg.mel_blocks = j.at("mel_blocks");
    cfg.mel_attn_heads = j.at("mel_attn_heads");
    cfg.mel_block_kernels = j.at("mel_block_kernels").get<std::vector<int>>();
    cfg.mel_block_filters = j.at("mel_block_filters").get<std::vector<int>>();
    cfg.conv_stack_depth = j.at("conv_stack_depth");
    cfg.conv_stack_kernel = j.at("conv_stack_kernel");
    cfg.conv_stack_filters = j.at("conv_stack_filters");
    cfg.out_kernel = j.at("out_kernel");
    cfg.n_mels = j.at("n_mels");
    cfg.duration_hidden = j.at("duration_hidden");
    cfg.audio_feedback = j.at("audio_feedback");
    cfg.phoneme_vocab = j.at("phoneme_vocab");
    cfg.grapheme_vocab = j.at("grapheme_vocab");
    cfg.max_in_len = j.at("max_in_len");
    cfg.max_out_len = j.at("max_out_len");
    cfg.validate();
    return cfg;
}

std::string EpochMetrics::to_json() const {
    json j;
    j["epoch"] = epoch;
    j["train_total"] = train_total;
    j["train_ce"] = train_ce;
    j["train_mel"] = train_mel;
    j["val_total"] = val_total;
    j["lr"] = lr;
    return j.dump();
}

// ---------------------------------------------------------------------------
// blocks

struct SqModel::EncoderBlock {
    nn::AttentionLayer attn;
    nn::LinearLayer ff1, ff2;
    nn::LayerNormLayer ln1, ln2;
    double dropout;

    EncoderBlock(const std::string& name, int d, int heads, int ffn, double drop, Rng& rng)
        : attn(name + ".attn", d, heads, rng),
          ff1(name + ".ff1", d, ffn, rng),
          ff2(name + ".ff2", ffn, d, rng),
          ln1(name + ".ln1", d),
          ln2(name + ".ln2", d),
          dropout(drop) {}

    int apply(Graph& g, int x, Rng& rng) {
        int a = attn.apply(g, x, x, x);
        x = ln1.apply(g, g.add(x, g.dropout(a, dropout, rng)));
        int f = ff2.apply(g, g.relu(ff1.apply(g, x)));
        return ln2.apply(g, g.add(x, g.dropout(f, dropout, rng)));
    }

    std::vector<Parameter*> params() {
        std::vector<Parameter*> out;
        for (auto* p : attn.params()) out.push_back(p);
        for (auto* l : {&ff1, &ff2})
            for (auto* p : l->params()) out.push_back(p);
        for (auto* l : {&ln1, &ln2})
            for (auto* p : l->params()) out.push_back(p);
        return out;
    }
};

struct SqModel::DecoderBlock {
    nn::AttentionLayer self_attn, cross_attn;
    nn::LinearLayer ff1, ff2;
    nn::LayerNormLayer ln1, ln2, ln3;
    double dropout;

    DecoderBlock(const std::string& name, int d, int heads, int ffn, double drop, Rng& rng)
        : self_attn(name + ".self", d, heads, rng),
          cross_attn(name + ".cross", d, heads, rng),
          ff1(name + ".ff1", d, ffn, rng),
          ff2(name + ".ff2", ffn, d, rng),
          ln1(name + ".ln1", d),
          ln2(name + ".ln2", d),
          ln3(name + ".ln3", d),
          dropout(drop) {}

    int apply(Graph& g, int x, int memory, int mask, Rng& rng) {
        int a = self_attn.apply(g, x, x, x, mask);
        x = ln1.apply(g, g.add(x, g.dropout(a, dropout, rng)));
        int c = cross_attn.apply(g, x, memory, memory);
        x = ln2.apply(g, g.add(x, g.dropout(c, dropout, rng)));
        int f = ff2.apply(g, g.relu(ff1.apply(g, x)));
        return ln3.apply(g, g.add(x, g.dropout(f, dropout, rng)));
    }

    std::vector<Parameter*> params() {
        std::vector<Parameter*> out;
        for (auto* p : self_attn.params()) out.push_back(p);
        for (auto* p : cross_attn.params()) out.push_back(p);
        for (auto* l : {&ff1, &ff2})
            for (auto* p : l->params()) out.push_back(p);
        for (auto* l : {&ln1, &ln2, &ln3})
            for (auto* p : l->params()) out.push_back(p);
        return out;
    }
};

struct SqModel::MelBlock {
    nn::AttentionLayer attn;
    std::vector<nn::Conv1dLayer> convs;
    nn::LayerNormLayer ln1, ln2;
    double dropout;

    MelBlock(const std::string& name, const ModelConfig& cfg, Rng& rng)
        : attn(name + ".attn", cfg.d_model, cfg.mel_attn_heads, rng),
          ln1(name + ".ln1", cfg.d_model),
          ln2(name + ".ln2", cfg.d_model),
          dropout(cfg.dec_dropout) {
        int c_in = cfg.d_model;
        for (size_t i = 0; i < cfg.mel_block_kernels.size(); ++i) {
            convs.emplace_back(name + ".conv" + std::to_string(i), cfg.mel_block_kernels[i],
                               c_in, cfg.mel_block_filters[i], rng);
            c_in = cfg.mel_block_filters[i];
        }
    }

    int apply(Graph& g, int x, Rng& rng) {
        int a = attn.apply(g, x, x, x);
        x = ln1.apply(g, g.add(x, g.dropout(a, dropout, rng)));
        int c = x;
        for (size_t i = 0; i < convs.size(); ++i) {
            c = convs[i].apply(g, c);
            if (i + 1 < convs.size()) c = g.relu(c);
        }
        return ln2.apply(g, g.add(x, g.dropout(c, dropout, rng)));
    }

    std::vector<Parameter*> params() {
        std::vector<Parameter*> out;
        for (auto* p : attn.params()) out.push_back(p);
        for (auto& conv : convs)
            for (auto* p : conv.params()) out.push_back(p);
        for (auto* l : {&ln1, &ln2})
            for (auto* p : l->params()) out.push_back(p);
        return out;
    }
};

// ---------------------------------------------------------------------------
// duration predictor

DurationPredictor::DurationPredictor(const ModelConfig& cfg, Rng& rng)
    : blank_(cfg.phoneme_vocab),
      conv1_("dur.conv1", 9, cfg.n_mels, cfg.duration_hidden, rng),
      conv2_("dur.conv2", 9, cfg.duration_hidden, cfg.duration_hidden, rng),
      lstm_("dur.lstm", cfg.duration_hidden, cfg.duration_hidden, rng),
      out_("dur.out", cfg.duration_hidden, cfg.phoneme_vocab + 1, rng) {}

int DurationPredictor::forward(Graph& g, const audio::MelSpectrogram& mel) {
    Tensor x({mel.frames, mel.n_mels});
    x.data = mel.data;
    int h = g.input(std::move(x));
    h = g.relu(conv1_.apply(g, h));
    h = g.relu(conv2_.apply(g, h));
    h = lstm_.apply(g, h);
    return g.log_softmax_rows(out_.apply(g, h));
}

DurationVector DurationPredictor::predict(const audio::MelSpectrogram& mel,
                                          const std::vector<int>& phoneme_ids) {
    if (!trained_) throw NotTrained("duration predictor has not been trained");
    Graph g;
    int lp = forward(g, mel);
    return nn::ctc_best_path_durations(g.val(lp), phoneme_ids, blank_);
}

DurationVector DurationPredictor::uniform_split(int frames, int phonemes) {
    if (phonemes <= 0) throw EmptyInput("no phonemes");
    DurationVector d(phonemes, frames / phonemes);
    d.back() += frames - (frames / phonemes) * phonemes;
    return d;
}

std::vector<Parameter*> DurationPredictor::params() {
    std::vector<Parameter*> out;
    for (auto* l : {&conv1_, &conv2_})
        for (auto* p : l->params()) out.push_back(p);
    for (auto* p : lstm_.params()) out.push_back(p);
    for (auto* p : out_.params()) out.push_back(p);
    return out;
}

// ---------------------------------------------------------------------------
// model

SqModel::~SqModel() = default;
SqModel::SqModel(SqModel&&) noexcept = default;
SqModel& SqModel::operator=(SqModel&&) noexcept = default;

SqModel::SqModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed, "init");
    phoneme_embed_ = nn::EmbeddingLayer("enc.embed", cfg_.phoneme_vocab, cfg_.d_model, rng);
    grapheme_embed_ = nn::EmbeddingLayer("dec.embed", cfg_.grapheme_vocab, cfg_.d_model, rng);
    for (int i = 0; i < cfg_.enc_blocks; ++i)
        encoder_.push_back(std::make_unique<EncoderBlock>("enc.b" + std::to_string(i),
                                                          cfg_.d_model, cfg_.enc_heads,
                                                          cfg_.enc_ffn, cfg_.enc_dropout, rng));
    for (int i = 0; i < cfg_.dec_blocks; ++i)
        decoder_.push_back(std::make_unique<DecoderBlock>("dec.b" + std::to_string(i),
                                                          cfg_.d_model, cfg_.dec_heads,
                                                          cfg_.dec_ffn, cfg_.dec_dropout, rng));
    out_proj_ = nn::LinearLayer("dec.out", cfg_.d_model, cfg_.grapheme_vocab, rng);
    for (int i = 0; i < cfg_.mel_blocks; ++i)
        mel_decoder_.push_back(std::make_unique<MelBlock>("mel.b" + std::to_string(i), cfg_, rng));
    int c_in = cfg_.d_model;
    for (int i = 0; i < cfg_.conv_stack_depth; ++i) {
        conv_stack_.emplace_back("mel.stack" + std::to_string(i), cfg_.conv_stack_kernel, c_in,
                                 cfg_.conv_stack_filters, rng);
        c_in = cfg_.conv_stack_filters;
    }
    mel_out_ = nn::Conv1dLayer("mel.out", cfg_.out_kernel, c_in, cfg_.n_mels, rng);
    duration_ = std::make_unique<DurationPredictor>(cfg_, rng);
}

int SqModel::encode_on(Graph& g, const std::vector<int>& token_ids, Rng& rng) {
    if (token_ids.empty()) throw EmptyInput("empty phoneme sequence");
    if (static_cast<int>(token_ids.size()) > cfg_.max_in_len)
        throw TargetTooLong("input has " + std::to_string(token_ids.size()) +
                            " phonemes; limit is " + std::to_string(cfg_.max_in_len));
    const int K = static_cast<int>(token_ids.size());
    int x = phoneme_embed_.apply(g, token_ids);
    x = g.add(x, g.constant(nn::sinusoidal_positions(K, cfg_.d_model)));
    x = g.dropout(x, cfg_.enc_dropout, rng);
    for (auto& block : encoder_) x = block->apply(g, x, rng);
    return x;
}

int SqModel::decode_logits_on(Graph& g, int memory, const std::vector<int>& history, Rng& rng) {
    if (history.empty() || history.front() != phon::Specials::bos)
        throw ModelError("history must begin with BOS");
    if (static_cast<int>(history.size()) > cfg_.max_out_len + 1)
        throw HistoryTooLong("history of " + std::to_string(history.size()) +
                             " exceeds limit " + std::to_string(cfg_.max_out_len + 1));
    const int L = static_cast<int>(history.size());
    int y = grapheme_embed_.apply(g, history);
    y = g.add(y, g.constant(nn::sinusoidal_positions(L, cfg_.d_model)));
    y = g.dropout(y, cfg_.dec_dropout, rng);
    int mask = g.constant(nn::causal_mask(L));
    for (auto& block : decoder_) y = block->apply(g, y, memory, mask, rng);
    return out_proj_.apply(g, y);
}

int SqModel::decode_mel_on(Graph& g, int regulated, Rng& rng) {
    const int T = g.val(regulated).rows();
    if (T < 1) throw ShapeMismatch("regulated sequence is empty");
    int x = g.add(regulated, g.constant(nn::sinusoidal_positions(T, cfg_.d_model)));
    for (auto& block : mel_decoder_) x = block->apply(g, x, rng);
    for (auto& conv : conv_stack_) x = g.relu(conv.apply(g, x));
    return mel_out_.apply(g, x);
}

nn::Tensor SqModel::encode(const phon::IpaSequence& ipa) {
    Graph g;
    Rng rng(0);
    return g.val(encode_on(g, ipa.token_ids, rng));
}

nn::Tensor SqModel::decode_step(const nn::Tensor& memory, const std::vector<int>& history) {
    Graph g;
    Rng rng(0);
    int mem = g.constant(memory);
    int logits = decode_logits_on(g, mem, history, rng);
    int probs = g.softmax_rows(logits);
    const Tensor& all = g.val(probs);
    Tensor row({1, all.cols()});
    for (int c = 0; c < all.cols(); ++c) row.at(0, c) = all.at(all.rows() - 1, c);
    return row;
}

std::vector<int> SqModel::greedy_decode(const phon::IpaSequence& ipa) {
    Tensor memory = encode(ipa);
    std::vector<int> history = {phon::Specials::bos};
    std::vector<int> out;
    for (int step = 0; step < cfg_.max_out_len; ++step) {
        Tensor dist = decode_step(memory, history);
        int best = -1;
        double best_p = -1;
        for (int c = 0; c < dist.cols(); ++c) {
            if (c == phon::Specials::pad || c == phon::Specials::bos || c == phon::Specials::unk)
                continue;
            if (dist.at(0, c) > best_p) {
                best_p = dist.at(0, c);
                best = c;
            }
        }
        if (best == phon::Specials::eos) break;
        out.push_back(best);
        history.push_back(best);
    }
    return out;
}

SqModel::LossNodes SqModel::joint_loss_on(Graph& g, const TrainingExample& ex, Rng& rng) {
    LossNodes nodes;
    int memory = encode_on(g, ex.ipa.token_ids, rng);

    std::vector<int> history = {phon::Specials::bos};
    history.insert(history.end(), ex.grapheme.chars.begin(), ex.grapheme.chars.end());
    std::vector<int> targets = ex.grapheme.chars;
    targets.push_back(phon::Specials::eos);
    int logits = decode_logits_on(g, memory, history, rng);
    nodes.ce = g.cross_entropy(logits, targets, phon::Specials::pad);

    if (cfg_.audio_feedback) {
        if (ex.mel.frames == 0 || ex.durations.empty())
            throw MissingModalities("audio feedback is on but mel/durations are missing");
        int regulated = g.repeat_rows(memory, ex.durations);
        int pred = decode_mel_on(g, regulated, rng);
        Tensor target({ex.mel.frames, ex.mel.n_mels});
        target.data = ex.mel.data;
        nodes.mel = g.l1_l2_loss(pred, g.constant(std::move(target)));
        nodes.total = g.add(nodes.ce, nodes.mel);
    } else {
        nodes.total = nodes.ce;
    }
    return nodes;
}

SqModel::LossValues SqModel::joint_loss(const TrainingExample& ex) {
    Graph g;
    Rng rng(0);
    auto nodes = joint_loss_on(g, ex, rng);
    LossValues v;
    v.total = g.val(nodes.total).data[0];
    v.ce = g.val(nodes.ce).data[0];
    v.mel = nodes.mel >= 0 ? g.val(nodes.mel).data[0] : 0.0;
    return v;
}

double SqModel::top1_accuracy(const std::vector<TrainingExample>& examples) {
    if (examples.empty()) return 0.0;
    int hits = 0;
    for (const auto& ex : examples) {
        auto decoded = greedy_decode(ex.ipa);
        if (decoded == ex.grapheme.chars) ++hits;
    }
    return static_cast<double>(hits) / examples.size();
}

TrainResult SqModel::train(const std::vector<TrainingExample>& data, const nn::TrainConfig& tc,
                           std::ostream* metrics_jsonl) {
    tc.validate();
    if (data.empty()) throw EmptyInput("no training examples");

    TrainResult result;
    Rng rng(tc.seed, "train");

    // Seeded random 80/10/10 split.
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    const size_t n_val = data.size() / 10;
    const size_t n_test = data.size() / 10;
    const size_t n_train = data.size() - n_val - n_test;
    result.train_idx.assign(order.begin(), order.begin() + n_train);
    result.val_idx.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    result.test_idx.assign(order.begin() + n_train + n_val, order.end());

    auto params = all_params();
    nn::Adam opt(params, tc);

    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_snapshot;
    auto snapshot = [&]() {
        best_snapshot.clear();
        for (auto* p : params) best_snapshot.push_back(p->value);
    };

    std::vector<TrainingExample> train_view;
    for (size_t i : result.train_idx) train_view.push_back(data[i]);

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        std::shuffle(result.train_idx.begin(), result.train_idx.end(), rng.engine());
        double sum_total = 0, sum_ce = 0, sum_mel = 0;
        size_t seen = 0;
        for (size_t start = 0; start < result.train_idx.size();
             start += static_cast<size_t>(tc.batch_size)) {
            const size_t end =
                std::min(result.train_idx.size(), start + static_cast<size_t>(tc.batch_size));
            opt.zero_grad();
            for (size_t i = start; i < end; ++i) {
                Graph g(true);
                auto nodes = joint_loss_on(g, data[result.train_idx[i]], rng);
                const double total = g.val(nodes.total).data[0];
                if (!std::isfinite(total)) throw DivergedLoss("epoch " + std::to_string(epoch));
                sum_total += total;
                sum_ce += g.val(nodes.ce).data[0];
                sum_mel += nodes.mel >= 0 ? g.val(nodes.mel).data[0] : 0.0;
                ++seen;
                g.backward(nodes.total);
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            for (auto* p : params)
                for (auto& v : p->grad.data) v *= inv;
            opt.step(epoch);
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.train_total = sum_total / static_cast<double>(seen);
        m.train_ce = sum_ce / static_cast<double>(seen);
        m.train_mel = sum_mel / static_cast<double>(seen);
        m.lr = tc.effective_lr(epoch);

        if (!result.val_idx.empty()) {
            double val = 0;
            for (size_t i : result.val_idx) val += joint_loss(data[i]).total;
            m.val_total = val / static_cast<double>(result.val_idx.size());
        } else {
            m.val_total = m.train_total;
        }
        if (!std::isfinite(m.val_total)) throw DivergedLoss("validation loss is not finite");

        result.log.push_back(m);
        if (metrics_jsonl) (*metrics_jsonl) << m.to_json() << "\n";

        if (m.val_total < best_val) {
            best_val = m.val_total;
            result.best_epoch = epoch;
            snapshot();
        }
        result.epochs_run = epoch + 1;

        if (tc.stop_at_top1 > 0.0 && top1_accuracy(train_view) >= tc.stop_at_top1) break;
    }

    result.best_val = best_val;
    // Keep the best-validation weights.
    if (!best_snapshot.empty()) {
        for (size_t i = 0; i < params.size(); ++i) params[i]->value = best_snapshot[i];
    }
    return result;
}

void SqModel::train_duration_predictor(const std::vector<TrainingExample>& data,
                                       const nn::TrainConfig& tc) {
    tc.validate();
    auto params = duration_->params();
    nn::Adam opt(params, tc);
    Rng rng(tc.seed, "dur");
    std::vector<size_t> order;
    for (size_t i = 0; i < data.size(); ++i)
        if (data[i].mel.frames > 0) order.push_back(i);
    if (order.empty()) throw EmptyInput("no audio examples for the duration predictor");

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(tc.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(tc.batch_size));
            opt.zero_grad();
            size_t used = 0;
            for (size_t i = start; i < end; ++i) {
                const auto& ex = data[order[i]];
                Graph g(true);
                int lp = duration_->forward(g, ex.mel);
                int loss;
                try {
                    loss = g.ctc_loss(lp, ex.ipa.token_ids, duration_->blank_index());
                } catch (const TargetTooLong&) {
                    continue;  // word too dense for its frame budget
                }
                if (!std::isfinite(g.val(loss).data[0]))
                    throw DivergedLoss("duration predictor");
                g.backward(loss);
                ++used;
            }
            if (used == 0) continue;
            const double inv = 1.0 / static_cast<double>(used);
            for (auto* p : params)
                for (auto& v : p->grad.data) v *= inv;
            opt.step(epoch);
        }
    }
    duration_->mark_trained();
}

std::vector<Parameter*> SqModel::core_params() {
    std::vector<Parameter*> out;
    for (auto* p : phoneme_embed_.params()) out.push_back(p);
    for (auto* p : grapheme_embed_.params()) out.push_back(p);
    for (auto& b : encoder_)
        for (auto* p : b->params()) out.push_back(p);
    for (auto& b : decoder_)
        for (auto* p : b->params()) out.push_back(p);
    for (auto* p : out_proj_.params()) out.push_back(p);
    return out;
}

std::vector<Parameter*> SqModel::mel_params() {
    std::vector<Parameter*> out;
    for (auto& b : mel_decoder_)
        for (auto* p : b->params()) out.push_back(p);
    for (auto& c : conv_stack_)
        for (auto* p : c.params()) out.push_back(p);
    for (auto* p : mel_out_.params()) out.push_back(p);
    return out;
}

std::vector<Parameter*> SqModel::all_params() {
    auto out = core_params();
    for (auto* p : mel_params()) out.push_back(p);
    for (auto* p : duration_->params()) out.push_back(p);
    return out;
}

size_t SqModel::param_count() {
    size_t n = 0;
    for (auto* p : all_params()) n += p->value.numel();
    return n;
}

// ---------------------------------------------------------------------------

nn::Tensor length_regulate(const nn::Tensor& memory, const DurationVector& durations) {
    Graph g;
    return g.val(g.repeat_rows(g.constant(memory), durations));
}

std::vector<ManifestRow> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path);
    std::vector<ManifestRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto parts = split(line, '\t');
        if (parts.size() != 3) throw ConfigError("bad manifest row: " + line);
        rows.push_back({parts[0], parts[1], parts[2]});
    }
    if (rows.empty()) throw EmptyWordlist("manifest has no rows: " + path);
    return rows;
}

std::vector<TrainingExample> build_examples(const std::vector<ManifestRow>& rows,
                                            const phon::PhonemeVocabulary& pv,
                                            const phon::GraphemeVocabulary& gv,
                                            const audio::ProfileSet& profiles,
                                            const audio::MelConfig& mel_cfg, bool with_audio,
                                            SqModel* duration_source) {
    std::vector<TrainingExample> out;
    for (const auto& row : rows) {
        TrainingExample ex;
        ex.ipa = phon::tokenize_ipa(row.ipa, pv);
        ex.grapheme = phon::tokenize_graphemes(to_lower(row.word), gv);
        if (ex.grapheme.chars.empty()) continue;
        if (with_audio) {
            if (row.audio == "SYNTH") {
                auto synth = audio::synth_phonemes(ex.ipa, pv, profiles, mel_cfg);
                ex.mel = audio::to_mel(synth.waveform, mel_cfg);
                ex.durations = synth.durations;
            } else {
                auto wav = audio::read_wav(row.audio);
                ex.mel = audio::to_mel(wav, mel_cfg);
                if (duration_source && duration_source->duration_predictor().trained()) {
                    ex.durations = duration_source->duration_predictor().predict(
                        ex.mel, ex.ipa.token_ids);
                } else {
                    ex.durations = DurationPredictor::uniform_split(
                        ex.mel.frames, static_cast<int>(ex.ipa.token_ids.size()));
                }
            }
        }
        out.push_back(std::move(ex));
    }
    return out;
}

// ---------------------------------------------------------------------------

void save_model(const std::string& path, SqModel& m, const phon::PhonemeVocabulary& pv,
                const phon::GraphemeVocabulary& gv) {
    json meta;
    meta["schema"] = 1;
    meta["config"] = json::parse(m.config().to_json());
    meta["phoneme_vocab_hash"] = pv.hash();
    meta["grapheme_vocab_hash"] = gv.hash();
    meta["duration_trained"] = m.duration_predictor().trained();
    nn::save_checkpoint(path, m.all_params(), meta.dump());
}

std::unique_ptr<SqModel> load_model(const std::string& path, const phon::PhonemeVocabulary& pv,
                                    const phon::GraphemeVocabulary& gv) {
    auto ckpt = nn::load_checkpoint(path);
    json meta = json::parse(ckpt.meta_json);
    if (meta.at("schema").get<int>() != 1) throw ModelError("unsupported checkpoint schema");
    if (meta.at("phoneme_vocab_hash").get<std::uint64_t>() != pv.hash())
        throw ModelError("phoneme vocabulary does not match the checkpoint");
    if (meta.at("grapheme_vocab_hash").get<std::uint64_t>() != gv.hash())
        throw ModelError("grapheme vocabulary does not match the checkpoint");
    auto cfg = ModelConfig::from_json(meta.at("config").dump());
    auto model = std::make_unique<SqModel>(cfg, 0);
    nn::restore_params(ckpt, model->all_params());
    if (meta.value("duration_trained", false)) model->duration_predictor().mark_trained();
    return model;
}

}  // namespace ssq::model
