#pragma once

#include <map>
#include <string>
#include <vector>

#include "ssq/nn/tensor.hpp"

namespace ssq::nn {

// Versioned binary container: magic, version, JSON metadata blob, then a
// manifest of (name, dtype, shape) with little-endian raw payloads.
// dtype 0 = f64 (the only one written today; f32 is accepted on read).

void save_checkpoint(const std::string& path, const std::vector<Parameter*>& params,
                     const std::string& meta_json);

struct LoadedCheckpoint {
    std::string meta_json;
    std::map<std::string, Tensor> tensors;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Copies tensors into params, validating that every parameter exists in the
// checkpoint with the exact shape.
void restore_params(const LoadedCheckpoint& ckpt, const std::vector<Parameter*>& params);

}  // namespace ssq::nn
