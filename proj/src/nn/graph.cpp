#include "ssq/nn/graph.hpp"

#include <algorithm>
#include <cmath>

namespace ssq::nn {

namespace {

double logsumexp2(double a, double b) {
    double m = std::max(a, b);
    if (!std::isfinite(m)) return m;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double logsumexp3(double a, double b, double c) { return logsumexp2(logsumexp2(a, b), c); }

}  // namespace

Tensor glorot_init(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
    Tensor t(std::move(shape));
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : t.data) v = rng.uniform(-limit, limit);
    return t;
}

int Graph::push(Tensor value, bool requires_grad, std::function<void(Graph&)> backprop) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Graph::grad_buf(int id) {
    Node& n = nodes_[check(id)];
    if (n.grad.shape.empty() && !n.value.shape.empty()) n.grad = Tensor(n.value.shape);
    return n.grad;
}

bool Graph::any_requires(std::initializer_list<int> ids) const {
    for (int id : ids)
        if (nodes_[id].requires_grad) return true;
    return false;
}

void Graph::assert_finite(int id, const char* op) const {
    if (!nodes_[id].value.all_finite())
        throw NumericError(std::string(op) + " produced a non-finite value");
}

int Graph::constant(Tensor v) { return push(std::move(v), false, {}); }

int Graph::input(Tensor v, bool requires_grad) { return push(std::move(v), requires_grad, {}); }

int Graph::param(Parameter& p) {
    auto it = param_ids_.find(&p);
    if (it != param_ids_.end()) return it->second;
    int id = push(p.value, true, {});
    nodes_[id].bound_param = &p;
    param_ids_[&p] = id;
    return id;
}

// ---------------------------------------------------------------------------
// elementwise / structural

int Graph::add(int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (!ta.same_shape(tb)) throw ShapeMismatch("add " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out = ta;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] += tb.data[i];
    int id = push(std::move(out), any_requires({a, b}), {});
    nodes_[id].backprop = [a, b, id](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        if (g.nodes_[a].requires_grad) {
            Tensor& ga = g.grad_buf(a);
            for (size_t i = 0; i < go.numel(); ++i) ga.data[i] += go.data[i];
        }
        if (g.nodes_[b].requires_grad) {
            Tensor& gb = g.grad_buf(b);
            for (size_t i = 0; i < go.numel(); ++i) gb.data[i] += go.data[i];
        }
    };
    assert_finite(id, "add");
    return id;
}

int Graph::sub(int a, int b) { return add(a, scale(b, -1.0)); }

int Graph::mul(int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (!ta.same_shape(tb)) throw ShapeMismatch("mul " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out = ta;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] *= tb.data[i];
    int id = push(std::move(out), any_requires({a, b}), {});
    nodes_[id].backprop = [a, b, id](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        if (g.nodes_[a].requires_grad) {
            Tensor& ga = g.grad_buf(a);
            const Tensor& tb = g.val(b);
            for (size_t i = 0; i < go.numel(); ++i) ga.data[i] += go.data[i] * tb.data[i];
        }
        if (g.nodes_[b].requires_grad) {
            Tensor& gb = g.grad_buf(b);
            const Tensor& ta = g.val(a);
            for (size_t i = 0; i < go.numel(); ++i) gb.data[i] += go.data[i] * ta.data[i];
        }
    };
    assert_finite(id, "mul");
    return id;
}

int Graph::scale(int a, double c) {
    Tensor out = val(a);
    for (auto& v : out.data) v *= c;
    int id = push(std::move(out), any_requires({a}), {});
    nodes_[id].backprop = [a, c, id](Graph& g) {
        if (!g.nodes_[a].requires_grad) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& ga = g.grad_buf(a);
        for (size_t i = 0; i < go.numel(); ++i) ga.data[i] += c * go.data[i];
    };
    assert_finite(id, "scale");
    return id;
}

int Graph::relu(int x) {
    Tensor out = val(x);
    for (auto& v : out.data) v = std::max(v, 0.0);
    int id = push(std::move(out), any_requires({x}), {});
    nodes_[id].backprop = [x, id](Graph& g) {
        if (!g.nodes_[x].requires_grad) return;
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& tx = g.val(x);
        Tensor& gx = g.grad_buf(x);
        for (size_t i = 0; i < go.numel(); ++i)
            if (tx.data[i] > 0.0) gx.data[i] += go.data[i];
    };
    return id;
}

int Graph::sigmoid(int x) {
    Tensor out = val(x);
    for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    int id = push(std::move(out), any_requires({x}), {});
    nodes_[id].backprop = [x, id](Graph& g) {
        if (!g.nodes_[x].requires_grad) return;
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& y = g.nodes_[id].value;
        Tensor& gx = g.grad_buf(x);
        for (size_t i = 0; i < go.numel(); ++i)
            gx.data[i] += go.data[i] * y.data[i] * (1.0 - y.data[i]);
    };
    assert_finite(id, "sigmoid");
    return id;
}

int Graph::tanh_op(int x) {
    Tensor out = val(x);
    for (auto& v : out.data) v = std::tanh(v);
    int id = push(std::move(out), any_requires({x}), {});
    nodes_[id].backprop = [x, id](Graph& g) {
        if (!g.nodes_[x].requires_grad) return;
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& y = g.nodes_[id].value;
        Tensor& gx = g.grad_buf(x);
        for (size_t i = 0; i < go.numel(); ++i)
            gx.data[i] += go.data[i] * (1.0 - y.data[i] * y.data[i]);
    };
    assert_finite(id, "tanh");
    return id;
}

int Graph::transpose(int x) {
    const Tensor& t = val(x);
    if (t.shape.size() != 2) throw ShapeMismatch("transpose needs rank 2");
    const int R = t.rows(), C = t.cols();
    Tensor out({C, R});
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) out.at(c, r) = t.at(r, c);
    int id = push(std::move(out), any_requires({x}), {});
    nodes_[id].backprop = [x, id, R, C](Graph& g) {
        if (!g.nodes_[x].requires_grad) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& gx = g.grad_buf(x);
        for (int r = 0; r < R; ++r)
            for (int c = 0; c < C; ++c) gx.at(r, c) += go.at(c, r);
    };
    return id;
}

int Graph::rows(int x, int first, int count) {
    const Tensor& t = val(x);
    if (t.shape.size() != 2) throw ShapeMismatch("rows needs rank 2");
    if (first < 0 || count < 0 || first + count > t.rows())
        throw IndexOutOfRange("rows slice out of range");
    const int C = t.cols();
    Tensor out({count, C});
    std::copy_n(t.data.begin() + static_cast<size_t>(first) * C, static_cast<size_t>(count) * C,
                out.data.begin());
    int id = push(std::move(out), any_requires({x}), {});
    nodes_[id].backprop = [x, id, first, C](Graph& g) {
        if (!g.nodes_[x].requires_grad) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& gx = g.grad_buf(x);
        for (size_t i = 0; i < go.numel(); ++i)
            gx.data[static_cast<size_t>(first) * C + i] += go.data[i];
    };
    return id;
}

int Graph::cols(int x, int first, int count) {
    const Tensor& t = val(x);
    if (t.shape.size() != 2) throw ShapeMismatch("cols needs rank 2");
    if (first < 0 || count < 0 || first + count > t.cols())
        throw IndexOutOfRange("cols slice out of range");
    const int R = t.rows(), C = t.cols();
    Tensor out({R, count});
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < count; ++c) out.at(r, c) = t.at(r, first + c);
    int id = push(std::move(out), any_requires({x}), {});
    nodes_[id].backprop = [x, id, first, R](Graph& g) {
        if (!g.nodes_[x].requires_grad) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& gx = g.grad_buf(x);
        const int count = go.cols();
        for (int r = 0; r < R; ++r)
            for (int c = 0; c < count; ++c) gx.at(r, first + c) += go.at(r, c);
    };
    return id;
}

int Graph::concat_rows(const std::vector<int>& xs) {
    if (xs.empty()) throw ShapeMismatch("concat_rows of nothing");
    const int C = val(xs[0]).cols();
    int R = 0;
    bool req = false;
    for (int x : xs) {
        const Tensor& t = val(x);
        if (t.shape.size() != 2 || t.cols() != C) throw ShapeMismatch("concat_rows column mismatch");
        R += t.rows();
        req = req || nodes_[x].requires_grad;
    }
    Tensor out({R, C});
    size_t off = 0;
    for (int x : xs) {
        const Tensor& t = val(x);
        std::copy(t.data.begin(), t.data.end(), out.data.begin() + off);
        off += t.numel();
    }
    auto parts = xs;
    int id = push(std::move(out), req, {});
    nodes_[id].backprop = [parts, id](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        size_t off = 0;
        for (int x : parts) {
            const size_t n = g.val(x).numel();
            if (g.nodes_[x].requires_grad) {
                Tensor& gx = g.grad_buf(x);
                for (size_t i = 0; i < n; ++i) gx.data[i] += go.data[off + i];
            }
            off += n;
        }
    };
    return id;
}

int Graph::concat_cols(const std::vector<int>& xs) {
    if (xs.empty()) throw ShapeMismatch("concat_cols of nothing");
    const int R = val(xs[0]).rows();
    int C = 0;
    bool req = false;
    for (int x : xs) {
        const Tensor& t = val(x);
        if (t.shape.size() != 2 || t.rows() != R) throw ShapeMismatch("concat_cols row mismatch");
        C += t.cols();
        req = req || nodes_[x].requires_grad;
    }
    Tensor out({R, C});
    int coff = 0;
    for (int x : xs) {
        const Tensor& t = val(x);
        for (int r = 0; r < R; ++r)
            for (int c = 0; c < t.cols(); ++c) out.at(r, coff + c) = t.at(r, c);
        coff += t.cols();
    }
    auto parts = xs;
    int id = push(std::move(out), req, {});
    nodes_[id].backprop = [parts, id, R](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        int coff = 0;
        for (int x : parts) {
            const int pc = g.val(x).cols();
            if (g.nodes_[x].requires_grad) {
                Tensor& gx = g.grad_buf(x);
                for (int r = 0; r < R; ++r)
                    for (int c = 0; c < pc; ++c) gx.at(r, c) += go.at(r, coff + c);
            }
            coff += pc;
        }
    };
    return id;
}

int Graph::repeat_rows(int x, const std::vector<int>& times) {
    const Tensor& t = val(x);
    if (t.shape.size() != 2) throw ShapeMismatch("repeat_rows needs rank 2");
    if (static_cast<int>(times.size()) != t.rows())
        throw LengthMismatch("durations length " + std::to_string(times.size()) + " vs rows " +
                             std::to_string(t.rows()));
    int R = 0;
    for (int n : times) {
        if (n < 0) throw LengthMismatch("negative duration");
        R += n;
    }
    const int C = t.cols();
    Tensor out({R, C});
    int r = 0;
    for (int i = 0; i < t.rows(); ++i)
        for (int k = 0; k < times[i]; ++k, ++r)
            std::copy_n(t.data.begin() + static_cast<size_t>(i) * C, C,
                        out.data.begin() + static_cast<size_t>(r) * C);
    auto reps = times;
    int id = push(std::move(out), any_requires({x}), {});
    nodes_[id].backprop = [x, id, reps, C](Graph& g) {
        if (!g.nodes_[x].requires_grad) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& gx = g.grad_buf(x);
        int r = 0;
        for (size_t i = 0; i < reps.size(); ++i)
            for (int k = 0; k < reps[i]; ++k, ++r)
                for (int c = 0; c < C; ++c) gx.data[i * C + c] += go.data[static_cast<size_t>(r) * C + c];
    };
    return id;
}

int Graph::sum_all(int x) {
    const Tensor& t = val(x);
    double s = 0;
    for (double v : t.data) s += v;
    int id = push(Tensor::scalar(s), any_requires({x}), {});
    nodes_[id].backprop = [x, id](Graph& g) {
        if (!g.nodes_[x].requires_grad) return;
        const double go = g.nodes_[id].grad.data[0];
        Tensor& gx = g.grad_buf(x);
        for (auto& v : gx.data) v += go;
    };
    assert_finite(id, "sum_all");
    return id;
}

// ---------------------------------------------------------------------------
// dense algebra

int Graph::matmul(int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.shape.size() != 2 || tb.shape.size() != 2 || ta.cols() != tb.rows())
        throw ShapeMismatch("matmul " + ta.shape_str() + " x " + tb.shape_str());
    const int M = ta.rows(), K = ta.cols(), N = tb.cols();
    Tensor out({M, N});
    const double* A = ta.data.data();
    const double* B = tb.data.data();
    double* C = out.data.data();
    for (int i = 0; i < M; ++i) {
        double* crow = C + static_cast<size_t>(i) * N;
        for (int p = 0; p < K; ++p) {
            const double av = A[static_cast<size_t>(i) * K + p];
            if (av == 0.0) continue;
            const double* brow = B + static_cast<size_t>(p) * N;
            for (int j = 0; j < N; ++j) crow[j] += av * brow[j];
        }
    }
    int id = push(std::move(out), any_requires({a, b}), {});
    nodes_[id].backprop = [a, b, id, M, K, N](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        if (g.nodes_[a].requires_grad) {
            Tensor& ga = g.grad_buf(a);
            const Tensor& tb = g.val(b);
            // dA = dC * B^T
            for (int i = 0; i < M; ++i)
                for (int p = 0; p < K; ++p) {
                    const double* grow = &go.data[static_cast<size_t>(i) * N];
                    const double* brow = &tb.data[static_cast<size_t>(p) * N];
                    double acc = 0.0;
                    for (int j = 0; j < N; ++j) acc += grow[j] * brow[j];
                    ga.data[static_cast<size_t>(i) * K + p] += acc;
                }
        }
        if (g.nodes_[b].requires_grad) {
            Tensor& gb = g.grad_buf(b);
            const Tensor& ta = g.val(a);
            // dB = A^T * dC
            for (int i = 0; i < M; ++i)
                for (int p = 0; p < K; ++p) {
                    const double av = ta.data[static_cast<size_t>(i) * K + p];
                    if (av == 0.0) continue;
                    const double* grow = &go.data[static_cast<size_t>(i) * N];
                    double* brow = &gb.data[static_cast<size_t>(p) * N];
                    for (int j = 0; j < N; ++j) brow[j] += av * grow[j];
                }
        }
    };
    assert_finite(id, "matmul");
    return id;
}

int Graph::linear(int x, int w, int b) {
    // Dimensions copied out before matmul pushes a node (vector may move).
    const int T = val(x).rows(), N = val(w).cols();
    if (val(x).shape.size() != 2 || val(w).shape.size() != 2 || val(x).cols() != val(w).rows())
        throw ShapeMismatch("linear " + val(x).shape_str() + " x " + val(w).shape_str());
    if (val(b).numel() != static_cast<size_t>(N)) throw ShapeMismatch("linear bias shape");
    int y = matmul(x, w);
    // bias broadcast over rows
    const Tensor& tb = val(b);
    Tensor out = val(y);
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < N; ++j) out.at(t, j) += tb.data[j];
    int id = push(std::move(out), any_requires({y, b}), {});
    nodes_[id].backprop = [y, b, id, T, N](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        if (g.nodes_[y].requires_grad) {
            Tensor& gy = g.grad_buf(y);
            for (size_t i = 0; i < go.numel(); ++i) gy.data[i] += go.data[i];
        }
        if (g.nodes_[b].requires_grad) {
            Tensor& gb = g.grad_buf(b);
            for (int t = 0; t < T; ++t)
                for (int j = 0; j < N; ++j) gb.data[j] += go.at(t, j);
        }
    };
    return id;
}

int Graph::embedding(const std::vector<int>& ids, int table) {
    const Tensor& tt = val(table);
    if (tt.shape.size() != 2) throw ShapeMismatch("embedding table must be rank 2");
    const int V = tt.rows(), D = tt.cols();
    for (int i : ids)
        if (i < 0 || i >= V) throw IndexOutOfRange("embedding id " + std::to_string(i));
    Tensor out({static_cast<int>(ids.size()), D});
    for (size_t r = 0; r < ids.size(); ++r)
        std::copy_n(tt.data.begin() + static_cast<size_t>(ids[r]) * D, D,
                    out.data.begin() + r * D);
    auto idx = ids;
    int id = push(std::move(out), any_requires({table}), {});
    nodes_[id].backprop = [table, id, idx, D](Graph& g) {
        if (!g.nodes_[table].requires_grad) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& gt = g.grad_buf(table);
        for (size_t r = 0; r < idx.size(); ++r)
            for (int c = 0; c < D; ++c)
                gt.data[static_cast<size_t>(idx[r]) * D + c] += go.data[r * D + c];
    };
    return id;
}

int Graph::layer_norm(int x, int gamma, int beta, double eps) {
    const Tensor& tx = val(x);
    if (tx.shape.size() != 2) throw ShapeMismatch("layer_norm needs rank 2");
    const int T = tx.rows(), D = tx.cols();
    if (val(gamma).numel() != static_cast<size_t>(D) || val(beta).numel() != static_cast<size_t>(D))
        throw ShapeMismatch("layer_norm affine shape");
    Tensor out({T, D});
    Tensor xhat({T, D});
    Tensor inv_std({T});
    const Tensor& tg = val(gamma);
    const Tensor& tb = val(beta);
    for (int t = 0; t < T; ++t) {
        double mu = 0;
        for (int d = 0; d < D; ++d) mu += tx.at(t, d);
        mu /= D;
        double var = 0;
        for (int d = 0; d < D; ++d) {
            double c = tx.at(t, d) - mu;
            var += c * c;
        }
        var /= D;
        const double istd = 1.0 / std::sqrt(var + eps);
        inv_std.data[t] = istd;
        for (int d = 0; d < D; ++d) {
            double h = (tx.at(t, d) - mu) * istd;
            xhat.at(t, d) = h;
            out.at(t, d) = tg.data[d] * h + tb.data[d];
        }
    }
    int id = push(std::move(out), any_requires({x, gamma, beta}), {});
    nodes_[id].backprop = [x, gamma, beta, id, T, D, xhat, inv_std](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& tg = g.val(gamma);
        if (g.nodes_[gamma].requires_grad) {
            Tensor& gg = g.grad_buf(gamma);
            for (int t = 0; t < T; ++t)
                for (int d = 0; d < D; ++d) gg.data[d] += go.at(t, d) * xhat.at(t, d);
        }
        if (g.nodes_[beta].requires_grad) {
            Tensor& gb = g.grad_buf(beta);
            for (int t = 0; t < T; ++t)
                for (int d = 0; d < D; ++d) gb.data[d] += go.at(t, d);
        }
        if (g.nodes_[x].requires_grad) {
            Tensor& gx = g.grad_buf(x);
            for (int t = 0; t < T; ++t) {
                double sum_dh = 0, sum_dh_h = 0;
                for (int d = 0; d < D; ++d) {
                    const double dh = go.at(t, d) * tg.data[d];
                    sum_dh += dh;
                    sum_dh_h += dh * xhat.at(t, d);
                }
                const double istd = inv_std.data[t];
                for (int d = 0; d < D; ++d) {
                    const double dh = go.at(t, d) * tg.data[d];
                    gx.at(t, d) +=
                        istd * (dh - sum_dh / D - xhat.at(t, d) * sum_dh_h / D);
                }
            }
        }
    };
    assert_finite(id, "layer_norm");
    return id;
}

int Graph::softmax_rows(int x) {
    const Tensor& tx = val(x);
    if (tx.shape.size() != 2) throw ShapeMismatch("softmax needs rank 2");
    const int T = tx.rows(), D = tx.cols();
    Tensor out({T, D});
    for (int t = 0; t < T; ++t) {
        double mx = tx.at(t, 0);
        for (int d = 1; d < D; ++d) mx = std::max(mx, tx.at(t, d));
        double z = 0;
        for (int d = 0; d < D; ++d) {
            const double e = std::exp(tx.at(t, d) - mx);
            out.at(t, d) = e;
            z += e;
        }
        for (int d = 0; d < D; ++d) out.at(t, d) /= z;
    }
    int id = push(std::move(out), any_requires({x}), {});
    nodes_[id].backprop = [x, id, T, D](Graph& g) {
        if (!g.nodes_[x].requires_grad) return;
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& y = g.nodes_[id].value;
        Tensor& gx = g.grad_buf(x);
        for (int t = 0; t < T; ++t) {
            double dot = 0;
            for (int d = 0; d < D; ++d) dot += go.at(t, d) * y.at(t, d);
            for (int d = 0; d < D; ++d)
                gx.at(t, d) += y.at(t, d) * (go.at(t, d) - dot);
        }
    };
    assert_finite(id, "softmax");
    return id;
}

int Graph::log_softmax_rows(int x) {
    const Tensor& tx = val(x);
    if (tx.shape.size() != 2) throw ShapeMismatch("log_softmax needs rank 2");
    const int T = tx.rows(), D = tx.cols();
    Tensor out({T, D});
    for (int t = 0; t < T; ++t) {
        double mx = tx.at(t, 0);
        for (int d = 1; d < D; ++d) mx = std::max(mx, tx.at(t, d));
        double z = 0;
        for (int d = 0; d < D; ++d) z += std::exp(tx.at(t, d) - mx);
        const double lz = mx + std::log(z);
        for (int d = 0; d < D; ++d) out.at(t, d) = tx.at(t, d) - lz;
    }
    int id = push(std::move(out), any_requires({x}), {});
    nodes_[id].backprop = [x, id, T, D](Graph& g) {
        if (!g.nodes_[x].requires_grad) return;
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& y = g.nodes_[id].value;
        Tensor& gx = g.grad_buf(x);
        for (int t = 0; t < T; ++t) {
            double sum = 0;
            for (int d = 0; d < D; ++d) sum += go.at(t, d);
            for (int d = 0; d < D; ++d)
                gx.at(t, d) += go.at(t, d) - std::exp(y.at(t, d)) * sum;
        }
    };
    assert_finite(id, "log_softmax");
    return id;
}

int Graph::dropout(int x, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0,1)");
    if (!train_mode_ || rate == 0.0) {
        // Eval-mode dropout is the identity and consumes no randomness.
        return scale(x, 1.0);
    }
    const Tensor& tx = val(x);
    Tensor mask(tx.shape);
    const double keep = 1.0 - rate;
    for (auto& m : mask.data) m = (rng.uniform() < keep) ? 1.0 / keep : 0.0;
    Tensor out = tx;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] *= mask.data[i];
    int id = push(std::move(out), any_requires({x}), {});
    nodes_[id].backprop = [x, id, mask](Graph& g) {
        if (!g.nodes_[x].requires_grad) return;
        const Tensor& go = g.nodes_[id].grad;
        Tensor& gx = g.grad_buf(x);
        for (size_t i = 0; i < go.numel(); ++i) gx.data[i] += go.data[i] * mask.data[i];
    };
    return id;
}

int Graph::conv1d(int x, int w, int b) {
    const Tensor& tx = val(x);
    const Tensor& tw = val(w);
    const Tensor& tb = val(b);
    if (tx.shape.size() != 2 || tw.shape.size() != 3)
        throw ShapeMismatch("conv1d expects x rank 2, w rank 3");
    const int T = tx.shape[0], Cin = tx.shape[1];
    const int K = tw.shape[0], WCin = tw.shape[1], Cout = tw.shape[2];
    if (WCin != Cin) throw ShapeMismatch("conv1d channel mismatch");
    if (K % 2 == 0) throw ShapeMismatch("conv1d kernel must be odd");
    if (tb.numel() != static_cast<size_t>(Cout)) throw ShapeMismatch("conv1d bias shape");
    const int half = K / 2;

    Tensor out({T, Cout});
    for (int t = 0; t < T; ++t)
        for (int co = 0; co < Cout; ++co) out.at(t, co) = tb.data[co];
    for (int dt = 0; dt < K; ++dt) {
        const int shift = dt - half;
        const int t0 = std::max(0, -shift), t1 = std::min(T, T - shift);
        const double* wk = tw.data.data() + static_cast<size_t>(dt) * Cin * Cout;
        for (int t = t0; t < t1; ++t) {
            const double* xrow = tx.data.data() + static_cast<size_t>(t + shift) * Cin;
            double* orow = out.data.data() + static_cast<size_t>(t) * Cout;
            for (int ci = 0; ci < Cin; ++ci) {
                const double xv = xrow[ci];
                if (xv == 0.0) continue;
                const double* wrow = wk + static_cast<size_t>(ci) * Cout;
                for (int co = 0; co < Cout; ++co) orow[co] += xv * wrow[co];
            }
        }
    }
    int id = push(std::move(out), any_requires({x, w, b}), {});
    nodes_[id].backprop = [x, w, b, id, T, Cin, K, Cout, half](Graph& g) {
        const Tensor& go = g.nodes_[id].grad;
        const Tensor& tx = g.val(x);
        const Tensor& tw = g.val(w);
        if (g.nodes_[b].requires_grad) {
            Tensor& gb = g.grad_buf(b);
            for (int t = 0; t < T; ++t)
                for (int co = 0; co < Cout; ++co) gb.data[co] += go.at(t, co);
        }
        for (int dt = 0; dt < K; ++dt) {
            const int shift = dt - half;
            const int t0 = std::max(0, -shift), t1 = std::min(T, T - shift);
            if (g.nodes_[w].requires_grad) {
                Tensor& gw = g.grad_buf(w);
                double* gwk = gw.data.data() + static_cast<size_t>(dt) * Cin * Cout;
                for (int t = t0; t < t1; ++t) {
                    const double* xrow = tx.data.data() + static_cast<size_t>(t + shift) * Cin;
                    const double* grow = go.data.data() + static_cast<size_t>(t) * Cout;
                    for (int ci = 0; ci < Cin; ++ci) {
                        const double xv = xrow[ci];
                        if (xv == 0.0) continue;
                        double* gwrow = gwk + static_cast<size_t>(ci) * Cout;
                        for (int co = 0; co < Cout; ++co) gwrow[co] += xv * grow[co];
                    }
                }
            }
            if (g.nodes_[x].requires_grad) {
                Tensor& gx = g.grad_buf(x);
                const double* wk = tw.data.data() + static_cast<size_t>(dt) * Cin * Cout;
                for (int t = t0; t < t1; ++t) {
                    double* gxrow = gx.data.data() + static_cast<size_t>(t + shift) * Cin;
                    const double* grow = go.data.data() + static_cast<size_t>(t) * Cout;
                    for (int ci = 0; ci < Cin; ++ci) {
                        const double* wrow = wk + static_cast<size_t>(ci) * Cout;
                        double acc = 0;
                        for (int co = 0; co < Cout; ++co) acc += wrow[co] * grow[co];
                        gxrow[ci] += acc;
                    }
                }
            }
        }
    };
    assert_finite(id, "conv1d");
    return id;
}

// ---------------------------------------------------------------------------
// losses

int Graph::cross_entropy(int logits, const std::vector<int>& targets, int pad_index) {
    const Tensor& tl = val(logits);
    if (tl.shape.size() != 2) throw ShapeMismatch("cross_entropy needs rank 2 logits");
    const int T = tl.rows(), V = tl.cols();
    if (static_cast<int>(targets.size()) != T) throw ShapeMismatch("targets length mismatch");
    int n = 0;
    for (int y : targets) {
        if (y == pad_index) continue;
        if (y < 0 || y >= V) throw IndexOutOfRange("target class " + std::to_string(y));
        ++n;
    }
    if (n == 0) throw EmptyInput("all targets are padding");

    // Row-wise log-softmax evaluated once; probabilities retained for backward.
    Tensor probs({T, V});
    double loss = 0;
    for (int t = 0; t < T; ++t) {
        double mx = tl.at(t, 0);
        for (int d = 1; d < V; ++d) mx = std::max(mx, tl.at(t, d));
        double z = 0;
        for (int d = 0; d < V; ++d) {
            const double e = std::exp(tl.at(t, d) - mx);
            probs.at(t, d) = e;
            z += e;
        }
        for (int d = 0; d < V; ++d) probs.at(t, d) /= z;
        if (targets[t] != pad_index)
            loss -= std::log(std::max(probs.at(t, targets[t]), 1e-300));
    }
    loss /= n;
    auto tgt = targets;
    int id = push(Tensor::scalar(loss), any_requires({logits}), {});
    nodes_[id].backprop = [logits, id, tgt, pad_index, T, V, probs, n](Graph& g) {
        if (!g.nodes_[logits].requires_grad) return;
        const double go = g.nodes_[id].grad.data[0];
        Tensor& gl = g.grad_buf(logits);
        for (int t = 0; t < T; ++t) {
            if (tgt[t] == pad_index) continue;
            for (int d = 0; d < V; ++d) {
                double delta = probs.at(t, d) - (d == tgt[t] ? 1.0 : 0.0);
                gl.at(t, d) += go * delta / n;
            }
        }
    };
    assert_finite(id, "cross_entropy");
    return id;
}

int Graph::l1_l2_loss(int pred, int target, const std::vector<bool>* row_mask) {
    const Tensor& tp = val(pred);
    const Tensor& tt = val(target);
    if (!tp.same_shape(tt))
        throw ShapeMismatch("l1_l2 " + tp.shape_str() + " vs " + tt.shape_str());
    if (tp.shape.size() != 2) throw ShapeMismatch("l1_l2 needs rank 2");
    const int T = tp.rows(), D = tp.cols();
    if (row_mask && static_cast<int>(row_mask->size()) != T)
        throw ShapeMismatch("l1_l2 mask length");
    size_t n = 0;
    double l1 = 0, l2 = 0;
    for (int t = 0; t < T; ++t) {
        if (row_mask && !(*row_mask)[t]) continue;
        for (int d = 0; d < D; ++d) {
            const double delta = tp.at(t, d) - tt.at(t, d);
            l1 += std::abs(delta);
            l2 += delta * delta;
            ++n;
        }
    }
    if (n == 0) throw EmptyInput("all frames masked");
    const double loss = l1 / n + l2 / n;
    std::vector<bool> mask = row_mask ? *row_mask : std::vector<bool>();
    int id = push(Tensor::scalar(loss), any_requires({pred, target}), {});
    nodes_[id].backprop = [pred, target, id, mask, T, D, n](Graph& g) {
        const double go = g.nodes_[id].grad.data[0];
        const Tensor& tp = g.val(pred);
        const Tensor& tt = g.val(target);
        auto apply = [&](Tensor& gx, double sgn) {
            for (int t = 0; t < T; ++t) {
                if (!mask.empty() && !mask[t]) continue;
                for (int d = 0; d < D; ++d) {
                    const double delta = tp.at(t, d) - tt.at(t, d);
                    const double s = (delta > 0) - (delta < 0);
                    gx.at(t, d) += sgn * go * (s + 2.0 * delta) / static_cast<double>(n);
                }
            }
        };
        if (g.nodes_[pred].requires_grad) apply(g.grad_buf(pred), 1.0);
        if (g.nodes_[target].requires_grad) apply(g.grad_buf(target), -1.0);
    };
    assert_finite(id, "l1_l2_loss");
    return id;
}

int Graph::ctc_loss(int logprobs, const std::vector<int>& targets, int blank) {
    const Tensor& lp = val(logprobs);
    if (lp.shape.size() != 2) throw ShapeMismatch("ctc needs rank 2 logprobs");
    const int T = lp.rows(), V = lp.cols();
    if (blank < 0 || blank >= V) throw IndexOutOfRange("blank index");
    const int L = static_cast<int>(targets.size());
    if (L == 0) throw EmptyInput("empty CTC target");
    int repeats = 0;
    for (int i = 0; i < L; ++i) {
        if (targets[i] < 0 || targets[i] >= V || targets[i] == blank)
            throw IndexOutOfRange("ctc target " + std::to_string(targets[i]));
        if (i > 0 && targets[i] == targets[i - 1]) ++repeats;
    }
    if (T < L + repeats)
        throw TargetTooLong("need at least " + std::to_string(L + repeats) + " frames, have " +
                            std::to_string(T));

    // Extended label sequence with interleaved blanks.
    const int S = 2 * L + 1;
    std::vector<int> ext(S, blank);
    for (int i = 0; i < L; ++i) ext[2 * i + 1] = targets[i];

    const double NEG_INF = -std::numeric_limits<double>::infinity();
    std::vector<double> alpha(static_cast<size_t>(T) * S, NEG_INF);
    auto A = [&](int t, int s) -> double& { return alpha[static_cast<size_t>(t) * S + s]; };

    A(0, 0) = lp.at(0, ext[0]);
    if (S > 1) A(0, 1) = lp.at(0, ext[1]);
    for (int t = 1; t < T; ++t) {
        for (int s = 0; s < S; ++s) {
            double best = A(t - 1, s);
            if (s >= 1) best = logsumexp2(best, A(t - 1, s - 1));
            if (s >= 2 && ext[s] != blank && ext[s] != ext[s - 2])
                best = logsumexp2(best, A(t - 1, s - 2));
            A(t, s) = best + lp.at(t, ext[s]);
        }
    }
    double log_p = (S > 1) ? logsumexp2(A(T - 1, S - 1), A(T - 1, S - 2)) : A(T - 1, S - 1);
    if (!std::isfinite(log_p)) throw NumericError("ctc forward underflow");

    // Beta pass retained for the analytic gradient.
    std::vector<double> beta(static_cast<size_t>(T) * S, NEG_INF);
    auto Bt = [&](int t, int s) -> double& { return beta[static_cast<size_t>(t) * S + s]; };
    Bt(T - 1, S - 1) = 0.0;
    if (S > 1) Bt(T - 1, S - 2) = 0.0;
    for (int t = T - 2; t >= 0; --t) {
        for (int s = 0; s < S; ++s) {
            double acc = Bt(t + 1, s) + lp.at(t + 1, ext[s]);
            if (s + 1 < S) acc = logsumexp2(acc, Bt(t + 1, s + 1) + lp.at(t + 1, ext[s + 1]));
            if (s + 2 < S && ext[s + 2] != blank && ext[s + 2] != ext[s])
                acc = logsumexp2(acc, Bt(t + 1, s + 2) + lp.at(t + 1, ext[s + 2]));
            Bt(t, s) = acc;
        }
    }

    int id = push(Tensor::scalar(-log_p), any_requires({logprobs}), {});
    nodes_[id].backprop = [logprobs, id, alpha, beta, ext, T, S, V, log_p](Graph& g) {
        if (!g.nodes_[logprobs].requires_grad) return;
        const double go = g.nodes_[id].grad.data[0];
        Tensor& gl = g.grad_buf(logprobs);
        for (int t = 0; t < T; ++t) {
            for (int s = 0; s < S; ++s) {
                const double a = alpha[static_cast<size_t>(t) * S + s];
                const double b = beta[static_cast<size_t>(t) * S + s];
                if (!std::isfinite(a) || !std::isfinite(b)) continue;
                // d(-log p)/d lp(t, ext[s]) accumulated over states.
                gl.at(t, ext[s]) -= go * std::exp(a + b - log_p);
            }
        }
    };
    return id;
}

void Graph::backward(int root) {
    Node& r = nodes_[check(root)];
    if (r.value.numel() != 1) throw ShapeMismatch("backward root must be scalar");
    grad_buf(root).data[0] = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.backprop || n.grad.shape.empty()) continue;
        n.backprop(*this);
    }
    // Flush accumulated leaf gradients into their parameters.
    for (auto& [p, id] : param_ids_) {
        const Tensor& gp = nodes_[id].grad;
        if (gp.shape.empty()) continue;
        for (size_t i = 0; i < gp.numel(); ++i) p->grad.data[i] += gp.data[i];
    }
}

// ---------------------------------------------------------------------------

Tensor sinusoidal_positions(int max_len, int d) {
    Tensor pe({max_len, d});
    for (int pos = 0; pos < max_len; ++pos) {
        for (int i = 0; i < d; ++i) {
            const double angle = pos / std::pow(10000.0, 2.0 * (i / 2) / d);
            pe.at(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

Tensor causal_mask(int n) {
    Tensor m({n, n});
    for (int r = 0; r < n; ++r)
        for (int c = r + 1; c < n; ++c) m.at(r, c) = kMaskedScore;
    return m;
}

}  // namespace ssq::nn
