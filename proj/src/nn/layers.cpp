#include "ssq/nn/layers.hpp"

#include <cmath>

namespace ssq::nn {

AttentionLayer::AttentionLayer(const std::string& name, int d_model, int heads, Rng& rng)
    : heads_(heads),
      d_model_(d_model),
      wq_(name + ".q", d_model, d_model, rng),
      wk_(name + ".k", d_model, d_model, rng),
      wv_(name + ".v", d_model, d_model, rng),
      wo_(name + ".o", d_model, d_model, rng) {
    if (d_model % heads != 0) throw ShapeMismatch("model dim not divisible by heads");
}

int AttentionLayer::apply(Graph& g, int q, int k, int v, std::optional<int> mask) {
    const int dq = g.val(q).cols();
    if (dq != d_model_ || g.val(k).cols() != d_model_ || g.val(v).cols() != d_model_)
        throw ShapeMismatch("attention input dim");
    const int Tq = g.val(q).rows();
    const int Tk = g.val(k).rows();
    if (g.val(v).rows() != Tk) throw ShapeMismatch("attention key/value length");
    if (mask) {
        const Tensor& m = g.val(*mask);
        if (m.shape.size() != 2 || m.rows() != Tq || m.cols() != Tk)
            throw BadMask("mask must be [" + std::to_string(Tq) + "x" + std::to_string(Tk) + "]");
    }

    const int dh = d_model_ / heads_;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    int qp = wq_.apply(g, q);
    int kp = wk_.apply(g, k);
    int vp = wv_.apply(g, v);

    std::vector<int> ctx_heads;
    ctx_heads.reserve(heads_);
    for (int h = 0; h < heads_; ++h) {
        int qh = g.cols(qp, h * dh, dh);
        int kh = g.cols(kp, h * dh, dh);
        int vh = g.cols(vp, h * dh, dh);
        int scores = g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt);
        if (mask) scores = g.add(scores, *mask);
        int attn = g.softmax_rows(scores);
        ctx_heads.push_back(g.matmul(attn, vh));
    }
    int ctx = heads_ == 1 ? ctx_heads[0] : g.concat_cols(ctx_heads);
    return wo_.apply(g, ctx);
}

std::vector<Parameter*> AttentionLayer::params() {
    std::vector<Parameter*> out;
    for (auto* layer : {&wq_, &wk_, &wv_, &wo_})
        for (auto* p : layer->params()) out.push_back(p);
    return out;
}

LstmLayer::LstmLayer(const std::string& name, int in, int hidden, Rng& rng)
    : hidden_(hidden),
      w_ih_(name + ".w_ih", glorot_init({in, 4 * hidden}, in, 4 * hidden, rng)),
      w_hh_(name + ".w_hh", glorot_init({hidden, 4 * hidden}, hidden, 4 * hidden, rng)),
      b_(name + ".b", Tensor({4 * hidden})) {
    // Forget-gate bias starts at 1 so early training passes state through.
    for (int i = hidden; i < 2 * hidden; ++i) b_.value.data[i] = 1.0;
    b_.grad = Tensor(b_.value.shape);
}

int LstmLayer::apply(Graph& g, int x) {
    const int T = g.val(x).rows();
    const int H = hidden_;
    int wih = g.param(w_ih_);
    int whh = g.param(w_hh_);
    int bias = g.param(b_);

    int h = g.constant(Tensor({1, H}));
    int c = g.constant(Tensor({1, H}));
    std::vector<int> outputs;
    outputs.reserve(T);
    for (int t = 0; t < T; ++t) {
        int xt = g.rows(x, t, 1);
        int gates = g.linear(xt, wih, bias);          // [1 x 4H]
        gates = g.add(gates, g.matmul(h, whh));
        int i_g = g.sigmoid(g.cols(gates, 0, H));
        int f_g = g.sigmoid(g.cols(gates, H, H));
        int g_g = g.tanh_op(g.cols(gates, 2 * H, H));
        int o_g = g.sigmoid(g.cols(gates, 3 * H, H));
        c = g.add(g.mul(f_g, c), g.mul(i_g, g_g));
        h = g.mul(o_g, g.tanh_op(c));
        outputs.push_back(h);
    }
    return g.concat_rows(outputs);
}

}  // namespace ssq::nn
