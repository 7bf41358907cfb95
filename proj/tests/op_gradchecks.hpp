#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "ssq/nn/layers.hpp"

// One named finite-difference scenario per differentiable op. Each callback
// draws a fresh randomized shape and returns the gradcheck error; callers run
// as many cases per op as they need.
inline std::map<std::string, std::function<double(ssq::Rng&)>> op_gradcheck_suite() {
    using namespace ssq;
    using namespace ssq::nn;
    std::map<std::string, std::function<double(Rng&)>> suite;

    auto dims = [](Rng& rng, int lo, int hi) {
        return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
    };

    suite["add"] = [dims](Rng& rng) {
        const int r = dims(rng, 1, 4), c = dims(rng, 1, 5);
        return gradcheck({random_tensor({r, c}, rng), random_tensor({r, c}, rng)},
                         [](Graph& g, const std::vector<int>& in) {
                             return g.sum_all(g.mul(g.add(in[0], in[1]), g.add(in[0], in[1])));
                         });
    };
    suite["sub"] = [dims](Rng& rng) {
        const int r = dims(rng, 1, 4), c = dims(rng, 1, 5);
        return gradcheck({random_tensor({r, c}, rng), random_tensor({r, c}, rng)},
                         [](Graph& g, const std::vector<int>& in) {
                             return g.sum_all(g.mul(g.sub(in[0], in[1]), in[0]));
                         });
    };
    suite["mul"] = [dims](Rng& rng) {
        const int r = dims(rng, 1, 4), c = dims(rng, 1, 5);
        return gradcheck({random_tensor({r, c}, rng), random_tensor({r, c}, rng)},
                         [](Graph& g, const std::vector<int>& in) {
                             return g.sum_all(g.mul(in[0], in[1]));
                         });
    };
    suite["scale"] = [dims](Rng& rng) {
        const int r = dims(rng, 1, 4), c = dims(rng, 1, 5);
        const double k = rng.normal();
        return gradcheck({random_tensor({r, c}, rng)},
                         [k](Graph& g, const std::vector<int>& in) {
                             return g.sum_all(g.mul(g.scale(in[0], k), in[0]));
                         });
    };
    suite["relu"] = [dims](Rng& rng) {
        const int r = dims(rng, 1, 4), c = dims(rng, 1, 5);
        // Keep values away from the kink.
        Tensor x = random_tensor({r, c}, rng);
        for (auto& v : x.data)
            if (std::abs(v) < 0.05) v += 0.1;
        Tensor w = random_tensor({r, c}, rng);
        return gradcheck({x}, [w](Graph& g, const std::vector<int>& in) {
            return g.sum_all(g.mul(g.relu(in[0]), g.constant(w)));
        });
    };
    suite["sigmoid"] = [dims](Rng& rng) {
        const int r = dims(rng, 1, 4), c = dims(rng, 1, 5);
        Tensor w = random_tensor({r, c}, rng);
        return gradcheck({random_tensor({r, c}, rng)},
                         [w](Graph& g, const std::vector<int>& in) {
                             return g.sum_all(g.mul(g.sigmoid(in[0]), g.constant(w)));
                         });
    };
    suite["tanh"] = [dims](Rng& rng) {
        const int r = dims(rng, 1, 4), c = dims(rng, 1, 5);
        Tensor w = random_tensor({r, c}, rng);
        return gradcheck({random_tensor({r, c}, rng)},
                         [w](Graph& g, const std::vector<int>& in) {
                             return g.sum_all(g.mul(g.tanh_op(in[0]), g.constant(w)));
                         });
    };
    suite["transpose"] = [dims](Rng& rng) {
        const int r = dims(rng, 1, 4), c = dims(rng, 1, 5);
        Tensor w = random_tensor({c, r}, rng);
        return gradcheck({random_tensor({r, c}, rng)},
                         [w](Graph& g, const std::vector<int>& in) {
                             return g.sum_all(g.mul(g.transpose(in[0]), g.constant(w)));
                         });
    };
    suite["rows_cols"] = [dims](Rng& rng) {
        const int r = dims(rng, 2, 5), c = dims(rng, 2, 5);
        const int r0 = dims(rng, 0, r - 1), rn = dims(rng, 1, r - r0);
        const int c0 = dims(rng, 0, c - 1), cn = dims(rng, 1, c - c0);
        Tensor w = random_tensor({rn, cn}, rng);
        return gradcheck({random_tensor({r, c}, rng)},
                         [=](Graph& g, const std::vector<int>& in) {
                             return g.sum_all(
                                 g.mul(g.cols(g.rows(in[0], r0, rn), c0, cn), g.constant(w)));
                         });
    };
    suite["concat"] = [dims](Rng& rng) {
        const int c = dims(rng, 1, 4);
        const int r1 = dims(rng, 1, 3), r2 = dims(rng, 1, 3);
        Tensor w = random_tensor({r1 + r2, 2 * c}, rng);
        return gradcheck({random_tensor({r1, c}, rng), random_tensor({r2, c}, rng)},
                         [=](Graph& g, const std::vector<int>& in) {
                             int stacked = g.concat_rows({in[0], in[1]});
                             int wide = g.concat_cols({stacked, stacked});
                             return g.sum_all(g.mul(wide, g.constant(w)));
                         });
    };
    suite["repeat_rows"] = [dims](Rng& rng) {
        const int r = dims(rng, 1, 4), c = dims(rng, 1, 4);
        std::vector<int> times(r);
        int total = 0;
        for (auto& t : times) {
            t = dims(rng, 0, 3);
            total += t;
        }
        if (total == 0) {
            times[0] = 1;
            total = 1;
        }
        Tensor w = random_tensor({total, c}, rng);
        return gradcheck({random_tensor({r, c}, rng)},
                         [=](Graph& g, const std::vector<int>& in) {
                             return g.sum_all(g.mul(g.repeat_rows(in[0], times), g.constant(w)));
                         });
    };
    suite["matmul"] = [dims](Rng& rng) {
        const int m = dims(rng, 1, 4), k = dims(rng, 1, 4), n = dims(rng, 1, 4);
        Tensor w = random_tensor({m, n}, rng);
        return gradcheck({random_tensor({m, k}, rng), random_tensor({k, n}, rng)},
                         [w](Graph& g, const std::vector<int>& in) {
                             return g.sum_all(g.mul(g.matmul(in[0], in[1]), g.constant(w)));
                         });
    };
    suite["linear"] = [dims](Rng& rng) {
        const int t = dims(rng, 1, 4), i = dims(rng, 1, 4), o = dims(rng, 1, 4);
        Tensor w = random_tensor({t, o}, rng);
        return gradcheck(
            {random_tensor({t, i}, rng), random_tensor({i, o}, rng), random_tensor({o}, rng)},
            [w](Graph& g, const std::vector<int>& in) {
                return g.sum_all(g.mul(g.linear(in[0], in[1], in[2]), g.constant(w)));
            });
    };
    suite["embedding"] = [dims](Rng& rng) {
        const int v = dims(rng, 2, 6), d = dims(rng, 1, 4), k = dims(rng, 1, 5);
        std::vector<int> ids(k);
        for (auto& i : ids) i = dims(rng, 0, v - 1);
        Tensor w = random_tensor({k, d}, rng);
        return gradcheck({random_tensor({v, d}, rng)},
                         [=](Graph& g, const std::vector<int>& in) {
                             return g.sum_all(g.mul(g.embedding(ids, in[0]), g.constant(w)));
                         });
    };
    suite["layer_norm"] = [dims](Rng& rng) {
        const int t = dims(rng, 1, 4), d = dims(rng, 2, 6);
        Tensor w = random_tensor({t, d}, rng);
        return gradcheck(
            {random_tensor({t, d}, rng), random_tensor({d}, rng), random_tensor({d}, rng)},
            [w](Graph& g, const std::vector<int>& in) {
                return g.sum_all(g.mul(g.layer_norm(in[0], in[1], in[2]), g.constant(w)));
            });
    };
    suite["softmax"] = [dims](Rng& rng) {
        const int t = dims(rng, 1, 4), d = dims(rng, 2, 6);
        Tensor w = random_tensor({t, d}, rng);
        return gradcheck({random_tensor({t, d}, rng)},
                         [w](Graph& g, const std::vector<int>& in) {
                             return g.sum_all(g.mul(g.softmax_rows(in[0]), g.constant(w)));
                         });
    };
    suite["log_softmax"] = [dims](Rng& rng) {
        const int t = dims(rng, 1, 4), d = dims(rng, 2, 6);
        Tensor w = random_tensor({t, d}, rng);
        return gradcheck({random_tensor({t, d}, rng)},
                         [w](Graph& g, const std::vector<int>& in) {
                             return g.sum_all(g.mul(g.log_softmax_rows(in[0]), g.constant(w)));
                         });
    };
    suite["dropout"] = [dims](Rng& rng) {
        const int t = dims(rng, 1, 4), d = dims(rng, 1, 5);
        const std::uint64_t seed = rng.next_u64();
        Tensor w = random_tensor({t, d}, rng);
        // Same seed on every evaluation keeps the mask fixed under fd probes.
        return gradcheck(
            {random_tensor({t, d}, rng)},
            [w, seed](Graph& g, const std::vector<int>& in) {
                Rng mask_rng(seed);
                return g.sum_all(g.mul(g.dropout(in[0], 0.4, mask_rng), g.constant(w)));
            },
            1e-5, /*train_mode=*/true);
    };
    suite["conv1d"] = [dims](Rng& rng) {
        const int t = dims(rng, 1, 5), ci = dims(rng, 1, 3), co = dims(rng, 1, 3);
        const int k = 1 + 2 * dims(rng, 0, 2);
        Tensor w = random_tensor({t, co}, rng);
        return gradcheck(
            {random_tensor({t, ci}, rng), random_tensor({k, ci, co}, rng), random_tensor({co}, rng)},
            [w](Graph& g, const std::vector<int>& in) {
                return g.sum_all(g.mul(g.conv1d(in[0], in[1], in[2]), g.constant(w)));
            });
    };
    suite["attention"] = [dims](Rng& rng) {
        const int t = dims(rng, 2, 4), d = 4, heads = 2;
        Rng init(rng.next_u64());
        auto layer = std::make_shared<AttentionLayer>("gc.attn", d, heads, init);
        const bool masked = rng.uniform() < 0.5;
        return gradcheck({random_tensor({t, d}, rng), random_tensor({t, d}, rng),
                          random_tensor({t, d}, rng)},
                         [layer, masked, t](Graph& g, const std::vector<int>& in) {
                             std::optional<int> mask;
                             if (masked) mask = g.constant(causal_mask(t));
                             int out = layer->apply(g, in[0], in[1], in[2], mask);
                             return g.sum_all(g.mul(out, out));
                         });
    };
    suite["lstm"] = [dims](Rng& rng) {
        const int t = dims(rng, 1, 4), i = dims(rng, 1, 3), h = dims(rng, 1, 3);
        Rng init(rng.next_u64());
        auto layer = std::make_shared<LstmLayer>("gc.lstm", i, h, init);
        Tensor w = random_tensor({t, h}, rng);
        return gradcheck({random_tensor({t, i}, rng)},
                         [layer, w](Graph& g, const std::vector<int>& in) {
                             return g.sum_all(g.mul(layer->apply(g, in[0]), g.constant(w)));
                         });
    };
    suite["cross_entropy"] = [dims](Rng& rng) {
        const int t = dims(rng, 2, 5), v = dims(rng, 2, 5);
        std::vector<int> targets(t);
        for (int i = 0; i < t; ++i) targets[i] = dims(rng, 0, v - 1);
        targets[dims(rng, 0, t - 1)] = -1;  // one padded position
        return gradcheck({random_tensor({t, v}, rng)},
                         [targets](Graph& g, const std::vector<int>& in) {
                             return g.cross_entropy(in[0], targets, -1);
                         });
    };
    suite["l1_l2"] = [dims](Rng& rng) {
        const int t = dims(rng, 1, 4), d = dims(rng, 1, 5);
        std::vector<bool> mask(t, true);
        if (t > 1) mask[dims(rng, 0, t - 1)] = false;
        bool all_false = true;
        for (bool b : mask) all_false = all_false && !b;
        if (all_false) mask[0] = true;
        return gradcheck({random_tensor({t, d}, rng), random_tensor({t, d}, rng)},
                         [mask](Graph& g, const std::vector<int>& in) {
                             return g.l1_l2_loss(in[0], in[1], &mask);
                         });
    };
    suite["ctc"] = [dims](Rng& rng) {
        const int v = dims(rng, 2, 4) + 1;  // classes incl blank
        const int blank = v - 1;
        const int label_len = dims(rng, 1, 3);
        std::vector<int> label(label_len);
        for (auto& l : label) l = dims(rng, 0, v - 2);
        int repeats = 0;
        for (int i = 1; i < label_len; ++i)
            if (label[i] == label[i - 1]) ++repeats;
        const int t = label_len + repeats + dims(rng, 0, 2);
        return gradcheck({random_tensor({t, v}, rng)},
                         [label, blank](Graph& g, const std::vector<int>& in) {
                             return g.ctc_loss(g.log_softmax_rows(in[0]), label, blank);
                         });
    };
    suite["sum_all"] = [dims](Rng& rng) {
        const int r = dims(rng, 1, 4), c = dims(rng, 1, 5);
        return gradcheck({random_tensor({r, c}, rng)},
                         [](Graph& g, const std::vector<int>& in) {
                             return g.sum_all(g.mul(in[0], in[0]));
                         });
    };
    return suite;
}
