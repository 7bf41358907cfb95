#pragma once

#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "ssq/nn/tensor.hpp"

namespace ssq::nn {

// Additive mask value standing in for -inf on attention scores. Large enough
// that exp underflows to exactly 0 after the softmax shift, while keeping
// every intermediate finite.
constexpr double kMaskedScore = -1e30;

// Reverse-mode tape. Each op records its forward value and a closure that
// accumulates into the parents' gradients. Building a graph per forward pass
// keeps ops pure; parameters are deduplicated leaves whose gradients flush
// into Parameter::grad on backward().
class Graph {
  public:
    explicit Graph(bool train_mode = false) : train_mode_(train_mode) {}

    bool train_mode() const { return train_mode_; }

    int constant(Tensor v);
    int input(Tensor v, bool requires_grad = false);
    int param(Parameter& p);

    // elementwise / structural
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int scale(int a, double c);
    int relu(int x);
    int sigmoid(int x);
    int tanh_op(int x);
    int transpose(int x);
    int rows(int x, int first, int count);
    int cols(int x, int first, int count);
    int concat_rows(const std::vector<int>& xs);
    int concat_cols(const std::vector<int>& xs);
    // Row i of x repeated times[i] times, order preserved; zero drops the row.
    int repeat_rows(int x, const std::vector<int>& times);
    // Scalar sum of all entries.
    int sum_all(int x);

    // dense algebra
    int matmul(int a, int b);
    int linear(int x, int w, int b);  // x[T,in] w[in,out] b[out]
    int embedding(const std::vector<int>& ids, int table);
    int layer_norm(int x, int gamma, int beta, double eps = 1e-5);
    int softmax_rows(int x);
    int log_softmax_rows(int x);
    int dropout(int x, double rate, Rng& rng);
    // x[T,Cin], w[k,Cin,Cout] odd k, zero same-padding, b[Cout]
    int conv1d(int x, int w, int b);

    // losses (scalar outputs)
    int cross_entropy(int logits, const std::vector<int>& targets, int pad_index);
    int l1_l2_loss(int pred, int target, const std::vector<bool>* row_mask = nullptr);
    int ctc_loss(int logprobs, const std::vector<int>& targets, int blank);

    void backward(int root);

    const Tensor& val(int id) const { return nodes_[check(id)].value; }
    const Tensor& grad(int id) const { return nodes_[check(id)].grad; }
    size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        Tensor grad;  // lazily sized on first accumulation
        bool requires_grad = false;
        Parameter* bound_param = nullptr;
        std::function<void(Graph&)> backprop;  // may be empty for leaves
    };

    int check(int id) const {
        if (id < 0 || id >= static_cast<int>(nodes_.size()))
            throw IndexOutOfRange("graph node " + std::to_string(id));
        return id;
    }
    int push(Tensor value, bool requires_grad, std::function<void(Graph&)> backprop);
    Tensor& grad_buf(int id);
    bool any_requires(std::initializer_list<int> ids) const;
    void assert_finite(int id, const char* op) const;

    std::vector<Node> nodes_;
    std::unordered_map<Parameter*, int> param_ids_;
    bool train_mode_ = false;
};

// Sinusoidal position table [max_len x d].
Tensor sinusoidal_positions(int max_len, int d);

// [n x n] additive causal mask: 0 at or below the diagonal, kMaskedScore above.
Tensor causal_mask(int n);

}  // namespace ssq::nn
