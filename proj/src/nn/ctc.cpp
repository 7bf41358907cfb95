#include "ssq/nn/ctc.hpp"

#include <algorithm>
#include <limits>

namespace ssq::nn {

std::vector<int> ctc_best_path_durations(const Tensor& logprobs, const std::vector<int>& targets,
                                         int blank) {
    const int T = logprobs.rows(), V = logprobs.cols();
    const int L = static_cast<int>(targets.size());
    if (L == 0) throw EmptyInput("empty CTC target");
    int repeats = 0;
    for (int i = 0; i < L; ++i) {
        if (targets[i] < 0 || targets[i] >= V || targets[i] == blank)
            throw IndexOutOfRange("ctc target out of range");
        if (i > 0 && targets[i] == targets[i - 1]) ++repeats;
    }
    if (T < L + repeats) throw TargetTooLong("too few frames for forced alignment");

    const int S = 2 * L + 1;
    std::vector<int> ext(S, blank);
    for (int i = 0; i < L; ++i) ext[2 * i + 1] = targets[i];

    const double NEG_INF = -std::numeric_limits<double>::infinity();
    std::vector<double> v(static_cast<size_t>(T) * S, NEG_INF);
    std::vector<int> bp(static_cast<size_t>(T) * S, -1);
    auto idx = [S](int t, int s) { return static_cast<size_t>(t) * S + s; };

    v[idx(0, 0)] = logprobs.at(0, ext[0]);
    if (S > 1) v[idx(0, 1)] = logprobs.at(0, ext[1]);
    for (int t = 1; t < T; ++t) {
        for (int s = 0; s < S; ++s) {
            double best = v[idx(t - 1, s)];
            int from = s;
            if (s >= 1 && v[idx(t - 1, s - 1)] > best) {
                best = v[idx(t - 1, s - 1)];
                from = s - 1;
            }
            if (s >= 2 && ext[s] != blank && ext[s] != ext[s - 2] &&
                v[idx(t - 1, s - 2)] > best) {
                best = v[idx(t - 1, s - 2)];
                from = s - 2;
            }
            if (best == NEG_INF) continue;
            v[idx(t, s)] = best + logprobs.at(t, ext[s]);
            bp[idx(t, s)] = from;
        }
    }

    int end = S - 1;
    if (S > 1 && v[idx(T - 1, S - 2)] > v[idx(T - 1, S - 1)]) end = S - 2;

    std::vector<int> states(T);
    int s = end;
    for (int t = T - 1; t >= 0; --t) {
        states[t] = s;
        if (t > 0) s = bp[idx(t, s)];
    }

    std::vector<int> durations(L, 0);
    int current_label = 0;  // leading blanks attach to the first label
    for (int t = 0; t < T; ++t) {
        const int st = states[t];
        if (ext[st] != blank) current_label = (st - 1) / 2;
        durations[std::min(current_label, L - 1)] += 1;
    }
    return durations;
}

}  // namespace ssq::nn
