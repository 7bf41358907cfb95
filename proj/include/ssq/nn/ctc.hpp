#pragma once

#include <vector>

#include "ssq/nn/tensor.hpp"

namespace ssq::nn {

// Viterbi alignment over the blank-interleaved CTC lattice. Returns per-label
// frame counts that sum to T; blank frames attach to the most recent label
// (leading blanks to the first). logprobs is [T x V] row-major.
std::vector<int> ctc_best_path_durations(const Tensor& logprobs, const std::vector<int>& targets,
                                         int blank);

}  // namespace ssq::nn
