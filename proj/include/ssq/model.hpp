#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "ssq/audio.hpp"
#include "ssq/nn/adam.hpp"
#include "ssq/nn/checkpoint.hpp"
#include "ssq/nn/layers.hpp"
#include "ssq/phonology.hpp"

namespace ssq::model {

using audio::DurationVector;

struct ModelConfig {
    int d_model = 64;
    int enc_heads = 2;
    int enc_ffn = 256;
    int enc_blocks = 2;
    double enc_dropout = 0.0;
    int dec_heads = 2;
    int dec_ffn = 256;
    int dec_blocks = 2;
    double dec_dropout = 0.0;

    int mel_blocks = 2;
    int mel_attn_heads = 2;
    std::vector<int> mel_block_kernels = {9, 9};
    std::vector<int> mel_block_filters = {128, 64};  // last must equal d_model
    int conv_stack_depth = 2;
    int conv_stack_kernel = 9;
    int conv_stack_filters = 64;
    int out_kernel = 9;
    int n_mels = 40;

    int duration_hidden = 64;

    bool audio_feedback = true;
    int phoneme_vocab = 73;
    int grapheme_vocab = 33;
    int max_in_len = 20;
    int max_out_len = 26;

    // Desk-scale default: d=64, ffn 256, same head counts as full scale.
    static ModelConfig desk();
    // Full-scale preset: d=512, 2 heads, ffn 2048, dropout 0.1, mel decoder
    // conv pairs 1024/512 with kernel 9, conv stack 6x512, 40 mel channels.
    static ModelConfig full();

    void validate() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& json);
};

struct TrainingExample {
    phon::IpaSequence ipa;
    phon::GraphemeWord grapheme;
    audio::MelSpectrogram mel;   // empty when the audio branch is off
    DurationVector durations;    // sums to mel.frames when present
};

struct EpochMetrics {
    int epoch = 0;
    double train_total = 0, train_ce = 0, train_mel = 0;
    double val_total = 0;
    double lr = 0;
    std::string to_json() const;
};

struct TrainResult {
    std::vector<EpochMetrics> log;
    int best_epoch = -1;
    double best_val = 0;
    int epochs_run = 0;
    std::vector<size_t> train_idx, val_idx, test_idx;
};

// Frame-wise phoneme-posterior network (conv + LSTM) trained with CTC;
// durations are read from the best-path segmentation of a spectrogram.
class DurationPredictor {
  public:
    DurationPredictor(const ModelConfig& cfg, Rng& rng);

    // Returns the log-posterior node [T x (P+1)], blank last.
    int forward(nn::Graph& g, const audio::MelSpectrogram& mel);
    int blank_index() const { return blank_; }

    bool trained() const { return trained_; }
    void mark_trained() { trained_ = true; }

    // Best-path durations for a known phoneme sequence; throws NotTrained.
    DurationVector predict(const audio::MelSpectrogram& mel,
                           const std::vector<int>& phoneme_ids);

    // floor(T/K) per phoneme, remainder to the last.
    static DurationVector uniform_split(int frames, int phonemes);

    std::vector<nn::Parameter*> params();

  private:
    int blank_ = 0;
    bool trained_ = false;
    nn::Conv1dLayer conv1_, conv2_;
    nn::LstmLayer lstm_;
    nn::LinearLayer out_;
};

class SqModel {
  public:
    SqModel(ModelConfig cfg, std::uint64_t seed);
    ~SqModel();
    SqModel(SqModel&&) noexcept;
    SqModel& operator=(SqModel&&) noexcept;

    const ModelConfig& config() const { return cfg_; }

    // --- eval-mode inference ---
    nn::Tensor encode(const phon::IpaSequence& ipa);
    // Probability distribution over the grapheme vocabulary for the next
    // character given BOS-prefixed history.
    nn::Tensor decode_step(const nn::Tensor& memory, const std::vector<int>& history);
    std::vector<int> greedy_decode(const phon::IpaSequence& ipa);

    // --- training-path graph builders ---
    int encode_on(nn::Graph& g, const std::vector<int>& token_ids, Rng& rng);
    int decode_logits_on(nn::Graph& g, int memory, const std::vector<int>& history, Rng& rng);
    int decode_mel_on(nn::Graph& g, int regulated, Rng& rng);

    struct LossValues {
        double total = 0, ce = 0, mel = 0;
    };
    // Builds the joint loss on g; mel node is -1 when the branch is off.
    struct LossNodes {
        int total = -1, ce = -1, mel = -1;
    };
    LossNodes joint_loss_on(nn::Graph& g, const TrainingExample& ex, Rng& rng);
    LossValues joint_loss(const TrainingExample& ex);

    TrainResult train(const std::vector<TrainingExample>& data, const nn::TrainConfig& tc,
                      std::ostream* metrics_jsonl = nullptr);

    double top1_accuracy(const std::vector<TrainingExample>& examples);

    DurationPredictor& duration_predictor() { return *duration_; }
    void train_duration_predictor(const std::vector<TrainingExample>& data,
                                  const nn::TrainConfig& tc);

    std::vector<nn::Parameter*> all_params();
    std::vector<nn::Parameter*> core_params();  // encoder + grapheme decoder
    std::vector<nn::Parameter*> mel_params();   // audio branch only
    size_t param_count();

  private:
    struct EncoderBlock;
    struct DecoderBlock;
    struct MelBlock;

    ModelConfig cfg_;
    nn::EmbeddingLayer phoneme_embed_, grapheme_embed_;
    std::vector<std::unique_ptr<EncoderBlock>> encoder_;
    std::vector<std::unique_ptr<DecoderBlock>> decoder_;
    nn::LinearLayer out_proj_;
    std::vector<std::unique_ptr<MelBlock>> mel_decoder_;
    std::vector<nn::Conv1dLayer> conv_stack_;
    nn::Conv1dLayer mel_out_;
    std::unique_ptr<DurationPredictor> duration_;
};

// Expands memory rows by their durations (the length regulator); exposed as a
// plain function over tensors for callers outside a training graph.
nn::Tensor length_regulate(const nn::Tensor& memory, const DurationVector& durations);

// --- dataset assembly ---

struct ManifestRow {
    std::string word;
    std::string ipa;
    std::string audio;  // "SYNTH" or a wav path
};

std::vector<ManifestRow> load_manifest(const std::string& path);

// Builds training examples from a manifest. SYNTH rows run the synthesizer;
// wav rows use the trained duration predictor when available, else the
// uniform split. with_audio=false skips the mel/duration fields.
std::vector<TrainingExample> build_examples(const std::vector<ManifestRow>& rows,
                                            const phon::PhonemeVocabulary& pv,
                                            const phon::GraphemeVocabulary& gv,
                                            const audio::ProfileSet& profiles,
                                            const audio::MelConfig& mel_cfg, bool with_audio,
                                            SqModel* duration_source = nullptr);

// --- persistence (tensor container + config + vocabulary fingerprints) ---

void save_model(const std::string& path, SqModel& m, const phon::PhonemeVocabulary& pv,
                const phon::GraphemeVocabulary& gv);
std::unique_ptr<SqModel> load_model(const std::string& path, const phon::PhonemeVocabulary& pv,
                                    const phon::GraphemeVocabulary& gv);

}  // namespace ssq::model
