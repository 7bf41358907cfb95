#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mini_lang.hpp"
#include "ssq/model.hpp"
#include "test_paths.hpp"

using namespace ssq;
using namespace ssq::model;
using nn::Graph;
using nn::Tensor;

namespace {

ModelConfig tiny_config(int phoneme_vocab, int grapheme_vocab) {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.enc_ffn = 32;
    cfg.dec_ffn = 32;
    cfg.mel_block_kernels = {3, 3};
    cfg.mel_block_filters = {24, 16};
    cfg.conv_stack_depth = 1;
    cfg.conv_stack_kernel = 3;
    cfg.conv_stack_filters = 16;
    cfg.out_kernel = 3;
    cfg.n_mels = 8;
    cfg.duration_hidden = 12;
    cfg.phoneme_vocab = phoneme_vocab;
    cfg.grapheme_vocab = grapheme_vocab;
    return cfg;
}

phon::IpaSequence seq_of(std::vector<int> ids) {
    phon::IpaSequence s;
    s.token_ids = std::move(ids);
    return s;
}

TrainingExample synthetic_example(const ModelConfig& cfg, std::vector<int> ipa_ids,
                                  std::vector<int> chars, Rng& rng) {
    TrainingExample ex;
    ex.ipa = seq_of(std::move(ipa_ids));
    ex.grapheme.chars = std::move(chars);
    const int per = 3;
    ex.durations.assign(ex.ipa.token_ids.size(), per);
    ex.mel.frames = per * static_cast<int>(ex.ipa.token_ids.size());
    ex.mel.n_mels = cfg.n_mels;
    ex.mel.data.resize(static_cast<size_t>(ex.mel.frames) * cfg.n_mels);
    for (auto& v : ex.mel.data) v = rng.normal();
    return ex;
}

}  // namespace

TEST_CASE("encode produces [K x d] deterministically in eval mode") {
    auto cfg = tiny_config(12, 10);
    SqModel m(cfg, 7);
    auto seq = seq_of({4, 5, 6, 7, 8});
    auto mem1 = m.encode(seq);
    auto mem2 = m.encode(seq);
    CHECK(mem1.rows() == 5);
    CHECK(mem1.cols() == cfg.d_model);
    CHECK(mem1.data == mem2.data);  // bitwise
}

TEST_CASE("positional encoding makes phoneme order matter") {
    auto cfg = tiny_config(12, 10);
    SqModel m(cfg, 7);
    auto a = m.encode(seq_of({4, 5, 6}));
    auto b = m.encode(seq_of({5, 4, 6}));
    bool differs = false;
    for (size_t i = 0; i < a.numel(); ++i) differs = differs || a.data[i] != b.data[i];
    CHECK(differs);
}

TEST_CASE("encode enforces the input length limit") {
    auto cfg = tiny_config(12, 10);
    cfg.max_in_len = 4;
    SqModel m(cfg, 7);
    CHECK_THROWS_AS(m.encode(seq_of({4, 5, 6, 7, 8})), TargetTooLong);
    CHECK_THROWS_AS(m.encode(seq_of({})), EmptyInput);
}

TEST_CASE("decode_step returns a distribution and respects the causal mask") {
    auto cfg = tiny_config(12, 10);
    SqModel m(cfg, 3);
    auto memory = m.encode(seq_of({4, 5, 6}));

    auto dist = m.decode_step(memory, {phon::Specials::bos});
    double sum = 0;
    for (int c = 0; c < dist.cols(); ++c) sum += dist.at(0, c);
    CHECK(std::abs(sum - 1.0) <= 1e-9);

    // Prefix stability: the step distribution for [BOS, 5] equals row 1 of the
    // teacher-forced logits for any longer history.
    auto short_dist = m.decode_step(memory, {phon::Specials::bos, 5});
    Graph g;
    Rng rng(0);
    int mem = g.constant(memory);
    int logits = m.decode_logits_on(g, mem, {phon::Specials::bos, 5, 6, 7}, rng);
    int probs = g.softmax_rows(logits);
    for (int c = 0; c < dist.cols(); ++c)
        CHECK(short_dist.at(0, c) == doctest::Approx(g.val(probs).at(1, c)).epsilon(1e-12));
}

TEST_CASE("decode_step rejects bad histories") {
    auto cfg = tiny_config(12, 10);
    cfg.max_out_len = 4;
    SqModel m(cfg, 3);
    auto memory = m.encode(seq_of({4, 5}));
    CHECK_THROWS_AS(m.decode_step(memory, {5}), ModelError);
    CHECK_THROWS_AS(m.decode_step(memory, {phon::Specials::bos, 4, 5, 6, 7, 8}), HistoryTooLong);
}

TEST_CASE("length_regulate repeats and drops rows") {
    Tensor memory({3, 2}, {1, 1, 2, 2, 3, 3});
    SUBCASE("pattern AABCCC") {
        auto out = length_regulate(memory, {2, 1, 3});
        CHECK(out.rows() == 6);
        CHECK(out.data == std::vector<double>{1, 1, 1, 1, 2, 2, 3, 3, 3, 3, 3, 3});
    }
    SUBCASE("all ones is the identity") {
        auto out = length_regulate(memory, {1, 1, 1});
        CHECK(out.data == memory.data);
    }
    SUBCASE("zero durations drop rows") {
        auto out = length_regulate(memory, {0, 4, 0});
        CHECK(out.rows() == 4);
        for (int r = 0; r < 4; ++r) CHECK(out.at(r, 0) == 2.0);
    }
    SUBCASE("row count equals the duration sum for random vectors") {
        Rng rng(5);
        for (int trial = 0; trial < 50; ++trial) {
            const int k = 1 + static_cast<int>(rng.below(6));
            Tensor mem({k, 3});
            DurationVector d(k);
            int sum = 0;
            for (auto& v : d) {
                v = static_cast<int>(rng.below(5));
                sum += v;
            }
            auto out = length_regulate(mem, d);
            CHECK(out.rows() == sum);
        }
    }
    SUBCASE("length mismatch is rejected") {
        CHECK_THROWS_AS(length_regulate(memory, {1, 2}), LengthMismatch);
    }
}

TEST_CASE("uniform duration split") {
    CHECK(DurationPredictor::uniform_split(10, 3) == DurationVector{3, 3, 4});
    CHECK(DurationPredictor::uniform_split(7, 1) == DurationVector{7});
    CHECK(DurationPredictor::uniform_split(5, 5) == DurationVector{1, 1, 1, 1, 1});
}

TEST_CASE("untrained duration predictor refuses to predict") {
    auto cfg = tiny_config(12, 10);
    SqModel m(cfg, 3);
    audio::MelSpectrogram mel;
    mel.frames = 6;
    mel.n_mels = cfg.n_mels;
    mel.data.assign(48, 0.0);
    CHECK_THROWS_AS(m.duration_predictor().predict(mel, {4, 5}), NotTrained);
}

TEST_CASE("decode_mel output shape and determinism") {
    auto cfg = tiny_config(12, 10);
    SqModel m(cfg, 9);
    Rng rng(1);
    Graph g;
    Tensor regulated({7, cfg.d_model});
    for (auto& v : regulated.data) v = rng.normal();
    int out1 = m.decode_mel_on(g, g.constant(regulated), rng);
    CHECK(g.val(out1).rows() == 7);
    CHECK(g.val(out1).cols() == cfg.n_mels);
    Graph g2;
    int out2 = m.decode_mel_on(g2, g2.constant(regulated), rng);
    CHECK(g.val(out1).data == g2.val(out2).data);
}

TEST_CASE("joint loss semantics") {
    Rng rng(11);
    auto cfg = tiny_config(12, 10);

    SUBCASE("audio feedback off: total equals ce exactly") {
        cfg.audio_feedback = false;
        SqModel m(cfg, 5);
        auto ex = synthetic_example(cfg, {4, 5, 6}, {4, 5}, rng);
        auto v = m.joint_loss(ex);
        CHECK(v.total == v.ce);
        CHECK(v.mel == 0.0);
    }
    SUBCASE("audio feedback on: additivity within 1e-9") {
        SqModel m(cfg, 5);
        auto ex = synthetic_example(cfg, {4, 5, 6}, {4, 5}, rng);
        auto v = m.joint_loss(ex);
        CHECK(std::abs(v.total - (v.ce + v.mel)) <= 1e-9);
        CHECK(v.total > 0.0);
    }
    SUBCASE("missing modalities are rejected") {
        SqModel m(cfg, 5);
        TrainingExample ex;
        ex.ipa = seq_of({4, 5});
        ex.grapheme.chars = {4};
        CHECK_THROWS_AS(m.joint_loss(ex), MissingModalities);
    }
}

TEST_CASE("with audio feedback off no mel parameter receives gradient") {
    Rng rng(13);
    auto cfg = tiny_config(12, 10);
    cfg.audio_feedback = false;
    SqModel m(cfg, 5);
    auto ex = synthetic_example(cfg, {4, 5, 6, 7}, {4, 5, 6}, rng);
    for (auto* p : m.all_params()) p->zero_grad();
    Graph g(true);
    Rng drop_rng(0);
    auto nodes = m.joint_loss_on(g, ex, drop_rng);
    g.backward(nodes.total);

    bool core_has_grad = false;
    for (auto* p : m.core_params())
        for (double v : p->grad.data) core_has_grad = core_has_grad || v != 0.0;
    CHECK(core_has_grad);
    for (auto* p : m.mel_params())
        for (double v : p->grad.data) CHECK(v == 0.0);
}

TEST_CASE("end-to-end gradient check on a tiny config") {
    Rng rng(17);
    ModelConfig cfg = tiny_config(9, 8);
    cfg.d_model = 8;
    cfg.enc_ffn = 16;
    cfg.dec_ffn = 16;
    cfg.mel_block_kernels = {3};
    cfg.mel_block_filters = {8};
    cfg.conv_stack_depth = 1;
    cfg.n_mels = 4;
    SqModel m(cfg, 23);
    // K=3 phonemes, T=6 frames (durations 2+2+2)
    TrainingExample ex;
    ex.ipa = seq_of({4, 5, 6});
    ex.grapheme.chars = {4, 6};
    ex.durations = {2, 2, 2};
    ex.mel.frames = 6;
    ex.mel.n_mels = cfg.n_mels;
    ex.mel.data.resize(24);
    for (auto& v : ex.mel.data) v = rng.normal();

    auto params = m.all_params();
    for (auto* p : params) p->zero_grad();
    Graph g;
    Rng drop(0);
    auto nodes = m.joint_loss_on(g, ex, drop);
    g.backward(nodes.total);

    auto loss_value = [&]() {
        Graph ge;
        Rng r(0);
        return ge.val(m.joint_loss_on(ge, ex, r).total).data[0];
    };

    // Probe a deterministic sample of parameter coordinates.
    const double h = 1e-5;
    Rng pick(31);
    int probes = 0;
    double worst = 0;
    while (probes < 60) {
        auto* p = params[pick.below(params.size())];
        if (p->name.rfind("dur.", 0) == 0) continue;  // not part of the joint loss
        const size_t j = pick.below(p->value.numel());
        const double keep = p->value.data[j];
        p->value.data[j] = keep + h;
        const double up = loss_value();
        p->value.data[j] = keep - h;
        const double down = loss_value();
        p->value.data[j] = keep;
        const double numeric = (up - down) / (2 * h);
        const double analytic = p->grad.data[j];
        worst = std::max(worst, std::abs(numeric - analytic) /
                                    std::max({1.0, std::abs(numeric), std::abs(analytic)}));
        ++probes;
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("training on a tiny corpus is deterministic and loggable") {
    auto rows = MiniLang::corpus(10, 0, 99, false);
    auto pv = phon::PhonemeVocabulary::load(data_path("phonemes_en_us.txt"));
    auto gv = phon::default_grapheme_vocabulary();
    auto profiles = audio::ProfileSet::load(data_path("phoneme_profiles.tsv"));
    audio::MelConfig mel_cfg;
    mel_cfg.n_mels = 8;  // matches tiny_config

    std::vector<ManifestRow> manifest;
    for (const auto& r : rows) manifest.push_back({r.word, r.ipa, "SYNTH"});
    auto examples = build_examples(manifest, pv, gv, profiles, mel_cfg, true);
    REQUIRE(examples.size() == rows.size());
    for (const auto& ex : examples) {
        int sum = 0;
        for (int d : ex.durations) sum += d;
        CHECK(sum == ex.mel.frames);
    }

    ModelConfig cfg = tiny_config(pv.size(), gv.size());
    nn::TrainConfig tc;
    tc.lr = 1e-3;
    tc.decay_gamma = 1.0;
    tc.epochs = 3;
    tc.batch_size = 4;
    tc.seed = 42;

    SqModel m1(cfg, 1);
    std::ostringstream log1;
    auto r1 = m1.train(examples, tc, &log1);
    CHECK(r1.log.size() == 3);
    for (const auto& m : r1.log) {
        CHECK(std::isfinite(m.train_total));
        CHECK(std::isfinite(m.val_total));
    }

    SqModel m2(cfg, 1);
    std::ostringstream log2;
    m2.train(examples, tc, &log2);
    CHECK(log1.str() == log2.str());
    CHECK(log1.str().find("\"epoch\":0") != std::string::npos);
}

TEST_CASE("mel reconstruction loss falls over 200 overfit steps on one example") {
    Rng rng(3);
    auto cfg = tiny_config(12, 10);
    SqModel m(cfg, 5);
    auto ex = synthetic_example(cfg, {4, 5, 6}, {4, 5}, rng);

    nn::TrainConfig tc;
    tc.lr = 1e-3;
    tc.decay_gamma = 1.0;
    nn::Adam opt(m.all_params(), tc);
    double first_mel = -1, last_mel = -1;
    for (int step = 0; step < 200; ++step) {
        opt.zero_grad();
        Graph g(true);
        Rng drop(0);
        auto nodes = m.joint_loss_on(g, ex, drop);
        g.backward(nodes.total);
        const double mel = g.val(nodes.mel).data[0];
        if (step == 0) first_mel = mel;
        last_mel = mel;
        opt.step(0);
    }
    CHECK(last_mel < first_mel);
}

TEST_CASE("duration predictor training and forced alignment") {
    auto pv = phon::PhonemeVocabulary::load(data_path("phonemes_en_us.txt"));
    auto gv = phon::default_grapheme_vocabulary();
    auto profiles = audio::ProfileSet::load(data_path("phoneme_profiles.tsv"));
    audio::MelConfig mel_cfg;
    mel_cfg.n_mels = 8;  // matches tiny_config
    auto rows = MiniLang::corpus(12, 0, 7, false);
    std::vector<ManifestRow> manifest;
    for (const auto& r : rows) manifest.push_back({r.word, r.ipa, "SYNTH"});
    auto examples = build_examples(manifest, pv, gv, profiles, mel_cfg, true);

    ModelConfig cfg = tiny_config(pv.size(), gv.size());
    SqModel m(cfg, 2);
    nn::TrainConfig tc;
    tc.lr = 2e-3;
    tc.decay_gamma = 1.0;
    tc.epochs = 4;
    tc.batch_size = 4;
    m.train_duration_predictor(examples, tc);
    CHECK(m.duration_predictor().trained());

    // Forced alignment partitions the frames of a held-out word.
    auto held = examples.front();
    auto d = m.duration_predictor().predict(held.mel, held.ipa.token_ids);
    REQUIRE(d.size() == held.ipa.token_ids.size());
    int sum = 0;
    for (int v : d) sum += v;
    CHECK(sum == held.mel.frames);
}

TEST_CASE("model checkpoint round trip preserves behavior and validates vocabularies") {
    auto pv = phon::PhonemeVocabulary::load(data_path("phonemes_en_us.txt"));
    auto gv = phon::default_grapheme_vocabulary();
    ModelConfig cfg = tiny_config(pv.size(), gv.size());
    SqModel m(cfg, 77);
    auto path = test_tmp_dir() + "/model_rt.ckpt";
    save_model(path, m, pv, gv);

    auto loaded = load_model(path, pv, gv);
    auto seq = seq_of({4, 9, 22});
    CHECK(m.encode(seq).data == loaded->encode(seq).data);
    CHECK(m.greedy_decode(seq) == loaded->greedy_decode(seq));

    phon::PhonemeVocabulary other({"x", "y"});
    CHECK_THROWS_AS(load_model(path, other, gv), ModelError);
}

TEST_CASE("manifest parsing") {
    auto path = test_tmp_dir() + "/mini_manifest.tsv";
    write_file(path, "by\tb\xcb\x88\x61\xc9\xaa\tSYNTH\n# comment\ncat\tk\xc3\xa6t\tSYNTH\n");
    auto rows = load_manifest(path);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].word == "by");
    CHECK(rows[1].audio == "SYNTH");
    CHECK_THROWS_AS(load_manifest("/nonexistent/m.tsv"), IoError);
}
