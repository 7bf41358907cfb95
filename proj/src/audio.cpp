#include "ssq/audio.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>

namespace ssq::audio {

namespace {

constexpr double kPi = std::numbers::pi;

// Iterative radix-2 FFT; n must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * kPi / static_cast<double>(len);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                auto u = a[i + k];
                auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Full DFT of one frame into magnitude-squared bins [0 .. n/2].
void frame_power(const double* frame, int window, int n_fft, double* out_bins) {
    if (is_pow2(n_fft)) {
        std::vector<std::complex<double>> buf(static_cast<size_t>(n_fft), {0.0, 0.0});
        for (int i = 0; i < window; ++i) buf[i] = {frame[i], 0.0};
        fft_radix2(buf);
        for (int k = 0; k <= n_fft / 2; ++k) out_bins[k] = std::norm(buf[k]);
        return;
    }
    // Naive DFT fallback for non power-of-two sizes.
    for (int k = 0; k <= n_fft / 2; ++k) {
        double re = 0, im = 0;
        for (int i = 0; i < window; ++i) {
            double ang = -2.0 * kPi * k * i / n_fft;
            re += frame[i] * std::cos(ang);
            im += frame[i] * std::sin(ang);
        }
        out_bins[k] = re * re + im * im;
    }
}

}  // namespace

void MelConfig::validate() const {
    if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
    if (n_mels < 1) throw ConfigError("n_mels must be >= 1");
    if (!(0 <= fmin && fmin < fmax && fmax <= sample_rate / 2))
        throw ConfigError("need 0 <= fmin < fmax <= sample_rate/2");
    if (!(hop <= window && window <= n_fft))
        throw ConfigError("need hop <= window <= n_fft");
    if (hop <= 0) throw ConfigError("hop must be positive");
    if (log_floor <= 0) throw ConfigError("log_floor must be positive");
}

int MelConfig::frame_count(size_t len) const {
    if (len < static_cast<size_t>(window)) return 0;
    return 1 + static_cast<int>((len - window) / hop);
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> stft_power(const Waveform& w, const MelConfig& cfg, int* out_frames) {
    cfg.validate();
    const int T = cfg.frame_count(w.samples.size());
    if (T == 0) throw TooShort("signal shorter than one window");

    std::vector<double> hann(cfg.window);
    for (int i = 0; i < cfg.window; ++i)
        hann[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (cfg.window - 1));

    const int bins = cfg.n_fft / 2 + 1;
    std::vector<double> power(static_cast<size_t>(T) * bins);
    std::vector<double> frame(cfg.window);
    for (int t = 0; t < T; ++t) {
        const double* src = w.samples.data() + static_cast<size_t>(t) * cfg.hop;
        for (int i = 0; i < cfg.window; ++i) frame[i] = src[i] * hann[i];
        frame_power(frame.data(), cfg.window, cfg.n_fft, power.data() + static_cast<size_t>(t) * bins);
    }
    if (out_frames) *out_frames = T;
    return power;
}

std::vector<double> mel_filterbank(const MelConfig& cfg) {
    cfg.validate();
    const int bins = cfg.n_fft / 2 + 1;
    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(cfg.fmax);

    // n_mels + 2 edge points, equally spaced in mel.
    std::vector<double> hz_pts(cfg.n_mels + 2);
    for (int i = 0; i < cfg.n_mels + 2; ++i)
        hz_pts[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));

    std::vector<double> fb(static_cast<size_t>(cfg.n_mels) * bins, 0.0);
    const double hz_per_bin = cfg.sample_rate / cfg.n_fft;
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double left = hz_pts[m], center = hz_pts[m + 1], right = hz_pts[m + 2];
        for (int k = 0; k < bins; ++k) {
            const double f = k * hz_per_bin;
            double v = 0.0;
            if (f > left && f < center) v = (f - left) / (center - left);
            else if (f >= center && f < right) v = (right - f) / (right - center);
            if (v > 0) fb[static_cast<size_t>(m) * bins + k] = v;
        }
    }
    return fb;
}

MelSpectrogram to_mel(const Waveform& w, const MelConfig& cfg) {
    int T = 0;
    const auto power = stft_power(w, cfg, &T);
    const auto fb = mel_filterbank(cfg);
    const int bins = cfg.n_fft / 2 + 1;

    MelSpectrogram mel;
    mel.frames = T;
    mel.n_mels = cfg.n_mels;
    mel.config = cfg;
    mel.data.assign(static_cast<size_t>(T) * cfg.n_mels, 0.0);
    for (int t = 0; t < T; ++t) {
        const double* p = power.data() + static_cast<size_t>(t) * bins;
        for (int m = 0; m < cfg.n_mels; ++m) {
            const double* f = fb.data() + static_cast<size_t>(m) * bins;
            double acc = 0.0;
            for (int k = 0; k < bins; ++k) acc += f[k] * p[k];
            mel.at(t, m) = std::log(std::max(acc, cfg.log_floor));
        }
    }
    return mel;
}

// ---------------------------------------------------------------------------

ProfileSet ProfileSet::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open profiles " + path);
    ProfileSet set;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto parts = split(line, '\t');
        if (parts.size() != 3) throw ConfigError("bad profile row: " + line);
        PhonemeProfile p;
        p.duration_ms = std::stod(parts[1]);
        if (p.duration_ms <= 0) throw ConfigError("non-positive duration: " + line);
        for (const auto& pr : split(parts[2], ',')) {
            auto fa = split(pr, ':');
            if (fa.size() != 2) throw ConfigError("bad partial: " + pr);
            p.partials.emplace_back(std::stod(fa[0]), std::stod(fa[1]));
        }
        set.profiles_[parts[0]] = std::move(p);
    }
    return set;
}

ProfileSet ProfileSet::from_map(std::map<std::string, PhonemeProfile> profiles) {
    ProfileSet set;
    set.profiles_ = std::move(profiles);
    return set;
}

const PhonemeProfile& ProfileSet::get(const std::string& token) const {
    auto it = profiles_.find(token);
    if (it == profiles_.end()) throw MissingProfile(token);
    return it->second;
}

SynthResult synth_phonemes(const phon::IpaSequence& seq, const phon::PhonemeVocabulary& vocab,
                           const ProfileSet& profiles, const MelConfig& cfg) {
    cfg.validate();
    if (seq.token_ids.empty()) throw EmptyInput("empty phoneme sequence");

    const size_t K = seq.token_ids.size();
    std::vector<const PhonemeProfile*> profs(K);
    for (size_t i = 0; i < K; ++i)
        profs[i] = &profiles.get(vocab.token(seq.token_ids[i]));

    const int fade = static_cast<int>(std::lround(0.005 * cfg.sample_rate));
    // Adjacent segments overlap by `fade` samples (5 ms linear cross-fade).
    std::vector<size_t> durs(K);
    for (size_t i = 0; i < K; ++i) {
        auto d = static_cast<size_t>(std::lround(profs[i]->duration_ms / 1000.0 * cfg.sample_rate));
        durs[i] = std::max<size_t>(d, static_cast<size_t>(fade) + 1);
    }
    std::vector<size_t> starts(K);
    starts[0] = 0;
    for (size_t i = 1; i < K; ++i) starts[i] = starts[i - 1] + durs[i - 1] - fade;
    const size_t total = starts[K - 1] + durs[K - 1];

    Waveform w;
    w.sample_rate = cfg.sample_rate;
    w.samples.assign(std::max(total, static_cast<size_t>(cfg.window)), 0.0);

    for (size_t i = 0; i < K; ++i) {
        const auto& partials = profs[i]->partials;
        const size_t len = durs[i];
        for (size_t n = 0; n < len; ++n) {
            const size_t pos = starts[i] + n;
            const double t = static_cast<double>(pos) / cfg.sample_rate;
            double v = 0.0;
            for (const auto& [f, a] : partials) v += a * std::sin(2.0 * kPi * f * t);
            // Linear cross-fade envelope at segment edges.
            double env = 1.0;
            if (i > 0 && n < static_cast<size_t>(fade))
                env = static_cast<double>(n) / fade;
            if (i + 1 < K && n >= len - fade)
                env = std::min(env, static_cast<double>(len - n) / fade);
            w.samples[pos] += 0.3 * v * env;
        }
    }

    const int T = cfg.frame_count(w.samples.size());
    // Ownership boundary between phoneme i and i+1 is the middle of their
    // cross-fade region; every frame belongs to the phoneme owning its
    // window-center sample.
    std::vector<double> boundaries(K);  // end boundary of phoneme i
    for (size_t i = 0; i + 1 < K; ++i)
        boundaries[i] = static_cast<double>(starts[i + 1]) + fade / 2.0;
    boundaries[K - 1] = static_cast<double>(w.samples.size());

    SynthResult res;
    res.waveform = std::move(w);
    res.durations.assign(K, 0);
    size_t seg = 0;
    for (int t = 0; t < T; ++t) {
        const double center = static_cast<double>(t) * cfg.hop + cfg.window / 2.0;
        while (seg + 1 < K && center >= boundaries[seg]) ++seg;
        res.durations[seg] += 1;
    }
    return res;
}

// ---------------------------------------------------------------------------

namespace {
void put_u32(std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u16(std::string& s, uint16_t v) {
    for (int i = 0; i < 2; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
uint32_t get_u32(const std::string& s, size_t off) {
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[off + i]);
    return v;
}
uint16_t get_u16(const std::string& s, size_t off) {
    return static_cast<uint16_t>(static_cast<unsigned char>(s[off]) |
                                 (static_cast<unsigned char>(s[off + 1]) << 8));
}
}  // namespace

Waveform read_wav(const std::string& path) {
    std::string raw = read_file(path);
    if (raw.size() < 44 || raw.compare(0, 4, "RIFF") != 0 || raw.compare(8, 4, "WAVE") != 0)
        throw IoError("not a RIFF/WAVE file: " + path);
    if (get_u16(raw, 20) != 1 || get_u16(raw, 22) != 1 || get_u16(raw, 34) != 16)
        throw IoError("expected 16-bit mono PCM: " + path);
    Waveform w;
    w.sample_rate = get_u32(raw, 24);
    uint32_t data_len = get_u32(raw, 40);
    data_len = std::min<uint32_t>(data_len, static_cast<uint32_t>(raw.size() - 44));
    w.samples.reserve(data_len / 2);
    for (size_t i = 44; i + 1 < 44 + data_len; i += 2) {
        int16_t s = static_cast<int16_t>(static_cast<unsigned char>(raw[i]) |
                                         (static_cast<unsigned char>(raw[i + 1]) << 8));
        w.samples.push_back(s / 32768.0);
    }
    return w;
}

void write_wav(const std::string& path, const Waveform& w) {
    std::string out;
    const uint32_t data_len = static_cast<uint32_t>(w.samples.size() * 2);
    out += "RIFF";
    put_u32(out, 36 + data_len);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, 1);  // PCM
    put_u16(out, 1);  // mono
    put_u32(out, static_cast<uint32_t>(w.sample_rate));
    put_u32(out, static_cast<uint32_t>(w.sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out += "data";
    put_u32(out, data_len);
    for (double s : w.samples) {
        double c = std::clamp(s, -1.0, 1.0);
        auto v = static_cast<int16_t>(std::lround(c * 32767.0));
        put_u16(out, static_cast<uint16_t>(v));
    }
    write_file(path, out);
}

}  // namespace ssq::audio
