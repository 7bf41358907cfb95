#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ssq/nn/graph.hpp"

namespace ssq::nn {

class LinearLayer {
  public:
    LinearLayer() = default;
    LinearLayer(const std::string& name, int in, int out, Rng& rng)
        : w_(name + ".w", glorot_init({in, out}, in, out, rng)),
          b_(name + ".b", Tensor({out})) {}

    int apply(Graph& g, int x) { return g.linear(x, g.param(w_), g.param(b_)); }
    std::vector<Parameter*> params() { return {&w_, &b_}; }
    Parameter& weight() { return w_; }
    Parameter& bias() { return b_; }

  private:
    Parameter w_, b_;
};

class EmbeddingLayer {
  public:
    EmbeddingLayer() = default;
    EmbeddingLayer(const std::string& name, int vocab, int d, Rng& rng)
        : table_(name + ".table", glorot_init({vocab, d}, vocab, d, rng)) {}

    int apply(Graph& g, const std::vector<int>& ids) {
        return g.embedding(ids, g.param(table_));
    }
    std::vector<Parameter*> params() { return {&table_}; }

  private:
    Parameter table_;
};

class LayerNormLayer {
  public:
    LayerNormLayer() = default;
    LayerNormLayer(const std::string& name, int d)
        : gamma_(name + ".gamma", Tensor::filled({d}, 1.0)), beta_(name + ".beta", Tensor({d})) {}

    int apply(Graph& g, int x) { return g.layer_norm(x, g.param(gamma_), g.param(beta_)); }
    std::vector<Parameter*> params() { return {&gamma_, &beta_}; }

  private:
    Parameter gamma_, beta_;
};

// Scaled dot-product multi-head attention with an optional additive mask over
// the score matrix. Masked positions carry kMaskedScore (effectively -inf).
class AttentionLayer {
  public:
    AttentionLayer() = default;
    AttentionLayer(const std::string& name, int d_model, int heads, Rng& rng);

    int apply(Graph& g, int q, int k, int v, std::optional<int> mask = std::nullopt);
    std::vector<Parameter*> params();

  private:
    int heads_ = 1;
    int d_model_ = 0;
    LinearLayer wq_, wk_, wv_, wo_;
};

class Conv1dLayer {
  public:
    Conv1dLayer() = default;
    Conv1dLayer(const std::string& name, int kernel, int c_in, int c_out, Rng& rng)
        : w_(name + ".w", glorot_init({kernel, c_in, c_out}, kernel * c_in, c_out, rng)),
          b_(name + ".b", Tensor({c_out})) {}

    int apply(Graph& g, int x) { return g.conv1d(x, g.param(w_), g.param(b_)); }
    std::vector<Parameter*> params() { return {&w_, &b_}; }

  private:
    Parameter w_, b_;
};

// Single-layer LSTM unrolled on the tape; returns the hidden state sequence
// [T x hidden].
class LstmLayer {
  public:
    LstmLayer() = default;
    LstmLayer(const std::string& name, int in, int hidden, Rng& rng);

    int apply(Graph& g, int x);
    std::vector<Parameter*> params() { return {&w_ih_, &w_hh_, &b_}; }
    int hidden() const { return hidden_; }

  private:
    int hidden_ = 0;
    Parameter w_ih_, w_hh_, b_;
};

}  // namespace ssq::nn
