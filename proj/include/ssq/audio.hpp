#pragma once

#include <map>
#include <string>
#include <vector>

#include "ssq/common.hpp"
#include "ssq/phonology.hpp"

namespace ssq::audio {

struct Waveform {
    std::vector<double> samples;
    double sample_rate = 22050.0;
};

struct MelConfig {
    double sample_rate = 22050.0;
    int n_fft = 1024;
    int hop = 256;
    int window = 1024;
    int n_mels = 40;
    double fmin = 0.0;
    double fmax = 8000.0;
    double log_floor = 1e-10;

    void validate() const;
    // 1 + floor((len - window) / hop) for len >= window.
    int frame_count(size_t len) const;
};

struct MelSpectrogram {
    int frames = 0;
    int n_mels = 0;
    std::vector<double> data;  // row-major [frames x n_mels]
    MelConfig config;

    double& at(int t, int m) { return data[static_cast<size_t>(t) * n_mels + m]; }
    double at(int t, int m) const { return data[static_cast<size_t>(t) * n_mels + m]; }
};

// Per-phoneme additive-synthesis recipe.
struct PhonemeProfile {
    double duration_ms = 0;
    std::vector<std::pair<double, double>> partials;  // (frequency Hz, amplitude)
};

class ProfileSet {
  public:
    // `token<TAB>duration_ms<TAB>f1:a1,f2:a2,...`, '#' comments.
    static ProfileSet load(const std::string& path);
    static ProfileSet from_map(std::map<std::string, PhonemeProfile> profiles);

    const PhonemeProfile& get(const std::string& token) const;
    bool has(const std::string& token) const { return profiles_.count(token) > 0; }

  private:
    std::map<std::string, PhonemeProfile> profiles_;
};

// mel(f) = 2595 * log10(1 + f / 700)
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Hann-windowed magnitude-squared spectra, [T x (n_fft/2 + 1)] row-major.
std::vector<double> stft_power(const Waveform& w, const MelConfig& cfg, int* out_frames);

// Triangular filters, [n_mels x (n_fft/2 + 1)] row-major; centers equally
// spaced on the mel scale between fmin and fmax.
std::vector<double> mel_filterbank(const MelConfig& cfg);

// log(max(filterbank * power, log_floor)), natural log.
MelSpectrogram to_mel(const Waveform& w, const MelConfig& cfg);

using DurationVector = std::vector<int>;

struct SynthResult {
    Waveform waveform;
    DurationVector durations;  // ground-truth frames per phoneme, sums to T
};

// Deterministic additive synthesis of an IPA sequence with 5 ms linear
// cross-fades between adjacent phonemes. Durations are frame counts aligned
// with to_mel framing: each frame belongs to the phoneme owning its window
// center.
SynthResult synth_phonemes(const phon::IpaSequence& seq, const phon::PhonemeVocabulary& vocab,
                           const ProfileSet& profiles, const MelConfig& cfg);

// 16-bit little-endian mono PCM with a 44-byte RIFF/WAVE header.
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

}  // namespace ssq::audio
